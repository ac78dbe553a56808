//! SDPA sparse format (`.dat-s`).
//!
//! SDPA solves `max ⟨F_0, Y⟩ s.t. ⟨F_i, Y⟩ = c_i, Y ⪰ 0`, so the constraint
//! matrices and right-hand side carry over unchanged and `F_0 = ±C`. Free
//! variables are written as a difference of two nonnegative variables in an
//! extra diagonal block. The first line is a comment holding the problem origin.

use std::fmt::Write as _;

use super::problem::{Block, BlockSparse, SdpProblem, Sense};
use crate::error::{invalid, Result};

fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes the problem; `parse_sdpa(export_sdpa(p))` exports to the same text.
pub fn export_sdpa(p: &SdpProblem) -> String {
    let nfree = p.num_free();
    let mut blocks = p.blocks.clone();
    if nfree > 0 {
        blocks.push(Block::Diag(2 * nfree));
    }
    let free_blk = p.blocks.len();
    let sign = match p.sense {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };

    let mut f0 = p.c.clone();
    let mut mats: Vec<BlockSparse> = p.constraints.clone();
    for (j, (col, d)) in p.free_columns.iter().zip(&p.free_cost).enumerate() {
        f0.push(free_blk, 2 * j, 2 * j, *d);
        f0.push(free_blk, 2 * j + 1, 2 * j + 1, -*d);
        for &(i, v) in col {
            mats[i].push(free_blk, 2 * j, 2 * j, v);
            mats[i].push(free_blk, 2 * j + 1, 2 * j + 1, -v);
        }
    }

    let mut out = String::new();
    let origin = p.origin.replace(['\n', '\r'], " ");
    let _ = writeln!(out, "\"{origin}");
    let _ = writeln!(out, "{}", p.num_constraints());
    let _ = writeln!(out, "{}", blocks.len());
    let sizes: Vec<String> = blocks.iter().map(|b| b.sdpa_size().to_string()).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = p.b.iter().map(|v| fmt_num(*v)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));

    let mut write_mat = |idx: usize, m: &mut BlockSparse, scale: f64| {
        m.compress();
        for e in m.entries() {
            let _ = writeln!(out, "{} {} {} {} {}", idx, e.block + 1, e.row + 1, e.col + 1, fmt_num(scale * e.value));
        }
    };
    write_mat(0, &mut f0, sign);
    for (i, m) in mats.iter_mut().enumerate() {
        write_mat(i + 1, m, 1.0);
    }
    out
}

/// Reads SDPA sparse text. The result is a `Max` problem with `C = F_0` and no
/// free variables.
pub fn parse_sdpa(text: &str) -> Result<SdpProblem> {
    let mut origin = String::new();
    let mut body = String::new();
    let mut in_header = true;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if in_header && (trimmed.starts_with('"') || trimmed.starts_with('*')) {
            if origin.is_empty() && trimmed.starts_with('"') {
                origin = trimmed[1..].trim_end().trim_end_matches('"').to_string();
            }
            continue;
        }
        in_header = false;
        body.push_str(line);
        body.push('\n');
    }
    let cleaned: String = body.chars().map(|c| if ",{}()".contains(c) { ' ' } else { c }).collect();
    let int = |s: &str, what: &str| -> Result<i64> {
        s.parse::<i64>()
            .or_else(|_| s.parse::<f64>().ok().filter(|v| v.fract() == 0.0).map(|v| v as i64).ok_or(()))
            .map_err(|_| invalid(format!("bad integer {s:?} for {what}")))
    };
    let real = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>().map_err(|_| invalid(format!("bad number {s:?} for {what}")))
    };

    // Header values may be followed by annotations such as `=mDIM`: on each
    // header line only the leading numeric tokens count.
    let mut lines = cleaned.lines();
    let mut pending: Vec<String> = Vec::new();
    let mut header = |count: usize, what: &str| -> Result<Vec<String>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            if pending.is_empty() {
                let line = lines.next().ok_or_else(|| invalid(format!("SDPA input ended while reading {what}")))?;
                pending = line
                    .split_whitespace()
                    .take_while(|t| t.parse::<f64>().is_ok())
                    .map(str::to_string)
                    .collect();
                pending.reverse();
                continue;
            }
            out.push(pending.pop().expect("nonempty"));
        }
        if !pending.is_empty() {
            return Err(invalid(format!("unexpected extra values after {what}")));
        }
        Ok(out)
    };

    let m = int(&header(1, "mDIM")?[0], "mDIM")?;
    let nb = int(&header(1, "nBLOCK")?[0], "nBLOCK")?;
    if m < 0 || nb <= 0 {
        return Err(invalid("mDIM must be nonnegative and nBLOCK positive"));
    }
    let (m, nb) = (m as usize, nb as usize);
    let mut blocks = Vec::with_capacity(nb);
    for s in header(nb, "block sizes")? {
        blocks.push(match int(&s, "block size")? {
            0 => return Err(invalid("block of size zero")),
            s if s > 0 => Block::Psd(s as usize),
            s => Block::Diag((-s) as usize),
        });
    }
    let b = header(m, "objective vector")?
        .iter()
        .map(|s| real(s, "objective vector"))
        .collect::<Result<Vec<f64>>>()?;
    let rest: Vec<&str> = lines.flat_map(str::split_whitespace).collect();

    let mut f0 = BlockSparse::new();
    let mut mats = vec![BlockSparse::new(); m];
    if !rest.len().is_multiple_of(5) {
        return Err(invalid("trailing data does not form complete (mat, block, i, j, value) records"));
    }
    for rec in rest.chunks(5) {
        let mat = int(rec[0], "matrix number")?;
        let blk = int(rec[1], "block number")?;
        let i = int(rec[2], "row")?;
        let j = int(rec[3], "column")?;
        let v = real(rec[4], "value")?;
        if mat < 0 || mat as usize > m || blk < 1 || blk as usize > nb || i < 1 || j < 1 {
            return Err(invalid(format!("record {rec:?} is out of range")));
        }
        let (blk, i, j) = (blk as usize - 1, i as usize - 1, j as usize - 1);
        if i.max(j) >= blocks[blk].size() {
            return Err(invalid(format!("record {rec:?} lies outside its block")));
        }
        let target = if mat == 0 { &mut f0 } else { &mut mats[mat as usize - 1] };
        target.push(blk, i, j, v);
    }

    let mut p = SdpProblem::new(blocks, Sense::Max, origin);
    f0.compress();
    p.c = f0;
    for (a, rhs) in mats.into_iter().zip(b) {
        p.add_constraint(a, rhs);
    }
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> SdpProblem {
        // min tr(X) s.t. X_11 = 1, X ⪰ 0 (2×2).
        let mut p = SdpProblem::new(vec![Block::Psd(2)], Sense::Min, "toy");
        p.c.push(0, 0, 0, 1.0);
        p.c.push(0, 1, 1, 1.0);
        let mut a = BlockSparse::new();
        a.push(0, 0, 0, 1.0);
        p.add_constraint(a, 1.0);
        p
    }

    #[test]
    fn golden_toy() {
        let want = "\"toy\n1\n1\n2\n1.0000000000000000e0\n\
                    0 1 1 1 -1.0000000000000000e0\n\
                    0 1 2 2 -1.0000000000000000e0\n\
                    1 1 1 1 1.0000000000000000e0\n";
        assert_eq!(export_sdpa(&toy()), want);
    }

    #[test]
    fn round_trip_is_idempotent() {
        let mut p = toy();
        p.add_free(0.3, vec![(0, 1.0 / 3.0)]);
        let once = export_sdpa(&p);
        let twice = export_sdpa(&parse_sdpa(&once).unwrap());
        assert_eq!(once, twice);
    }

    #[test]
    fn parser_accepts_punctuation() {
        let text = "* comment\n\"name\n1 =mDIM\n";
        assert!(parse_sdpa(text).is_err());
        let text = "1 =mDIM\n1 =nBLOCK\n1 =bLOCKsTRUCT\n2.5\n1 1 1 1 1\n";
        assert_eq!(parse_sdpa(text).unwrap().b, vec![2.5]);
        let text = "\"x\n1\n2\n{2, -1}\n(3.0)\n0 1 1 2 0.5\n1 2 1 1 1\n";
        let p = parse_sdpa(text).unwrap();
        assert_eq!(p.blocks, vec![Block::Psd(2), Block::Diag(1)]);
        assert_eq!(p.b, vec![3.0]);
        assert_eq!(p.origin, "x");
    }

    #[test]
    fn parser_rejects_bad_records() {
        assert!(parse_sdpa("1\n1\n2\n1\n1 1 3 3 1.0\n").is_err());
        assert!(parse_sdpa("1\n1\n2\n1\n1 1 1 1\n").is_err());
        assert!(parse_sdpa("1\n1\n0\n1\n").is_err());
    }
}
