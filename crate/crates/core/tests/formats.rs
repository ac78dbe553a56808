//! Round trips through the two file formats.

use nalgebra::DMatrix;
use proptest::prelude::*;
use spectrahedra::momrelax::{build_containment_relaxation, ContainmentProblem};
use spectrahedra::pencil::{ball_pencil, disk_pencil, random_pencil, LinearPencil};
use spectrahedra::sdpcore::{export_sdpa, parse_sdpa, solve, Block, BlockSparse, SdpProblem, Sense, SolverOptions, Status};
use spectrahedra::symcore::SymMatrix;

fn sym(k: usize, vals: &[f64]) -> SymMatrix {
    let mut m = DMatrix::zeros(k, k);
    let mut it = vals.iter().cycle();
    for i in 0..k {
        for j in i..k {
            let v = *it.next().unwrap();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    SymMatrix::new(m).unwrap()
}

fn pencil_strategy() -> impl Strategy<Value = LinearPencil> {
    (1usize..4, 1usize..5)
        .prop_flat_map(|(n, k)| prop::collection::vec(prop::collection::vec(-1e6f64..1e6, k * (k + 1) / 2), n + 1).prop_map(move |c| (k, c)))
        .prop_map(|(k, c)| LinearPencil::new(c.iter().map(|v| sym(k, v)).collect()).unwrap())
}

proptest! {
    #[test]
    fn pencil_json_is_bit_exact(p in pencil_strategy()) {
        let q = LinearPencil::from_json(&p.to_json()).unwrap();
        prop_assert_eq!(&p, &q);
        let r = LinearPencil::from_json(&p.to_json_pretty()).unwrap();
        prop_assert_eq!(&p, &r);
    }

    #[test]
    fn sdpa_export_is_a_fixed_point(
        seed in 0u64..1000,
        entries in prop::collection::vec((0usize..2, 0usize..3, 0usize..3, -10.0f64..10.0), 1..20),
        rhs in prop::collection::vec(-5.0f64..5.0, 1..5),
        free in 0usize..3,
        max in any::<bool>(),
    ) {
        let blocks = vec![Block::Psd(3), Block::Diag(3)];
        let sense = if max { Sense::Max } else { Sense::Min };
        let mut p = SdpProblem::new(blocks.clone(), sense, format!("prop {seed}"));
        for (ci, &b) in rhs.iter().enumerate() {
            let mut a = BlockSparse::new();
            for (idx, &(blk, i, j, v)) in entries.iter().enumerate() {
                if idx % rhs.len() != ci {
                    continue;
                }
                let (i, j) = if blk == 1 { (i, i) } else { (i.min(j), i.max(j)) };
                a.push(blk, i, j, v);
            }
            a.push(0, ci % 3, ci % 3, 1.0);
            p.add_constraint(a, b);
        }
        for (idx, &(blk, i, _, v)) in entries.iter().enumerate().take(3) {
            p.c.push(blk, i, i, v + idx as f64);
        }
        for f in 0..free {
            p.add_free(f as f64 - 0.5, vec![(f % rhs.len(), 1.0)]);
        }
        let text = export_sdpa(&p);
        let q = parse_sdpa(&text).unwrap();
        prop_assert_eq!(q.sense, Sense::Max);
        prop_assert_eq!(q.num_constraints(), p.num_constraints());
        prop_assert_eq!(&q.b, &p.b);
        prop_assert_eq!(export_sdpa(&q), text);
    }

    #[test]
    fn random_pencils_survive_json(n in 1usize..4, k in 2usize..6, seed in 0u64..500) {
        let p = random_pencil(n, k, 0.5, 1.0, seed).unwrap();
        prop_assert_eq!(LinearPencil::from_json(&p.to_json()).unwrap(), p);
    }
}

#[test]
fn pencil_json_rejects_bad_input() {
    let asym = r#"{"n":1,"k":2,"coeffs":[[1,0,0,1],[0,1,0.5,0]]}"#;
    assert!(LinearPencil::from_json(asym).is_err());
    let short = r#"{"n":1,"k":2,"coeffs":[[1,0,0,1]]}"#;
    assert!(LinearPencil::from_json(short).is_err());
    let wrong_len = r#"{"n":1,"k":2,"coeffs":[[1,0,0,1],[0,1,1]]}"#;
    assert!(LinearPencil::from_json(wrong_len).is_err());
    assert!(LinearPencil::from_json("not json").is_err());
    // Asymmetry under the 1e-9 tolerance is accepted and symmetrized.
    let tiny = r#"{"n":1,"k":2,"coeffs":[[1,0,0,1],[0,1,1.0000000001,0]]}"#;
    let p = LinearPencil::from_json(tiny).unwrap();
    assert_eq!(p.coeff(1).get(0, 1), p.coeff(1).get(1, 0));
}

#[test]
fn sdpa_parser_reads_annotated_headers() {
    let text = "\"tiny\n* comment\n1 =mDIM\n1 =nBLOCK\n2 =bLOCKsTRUCT\n{1.0}\n0 1 1 1 -1.0\n0 1 2 2 -2.0\n1 1 1 1 1.0\n1 1 2 2 1.0\n";
    let p = parse_sdpa(text).unwrap();
    assert_eq!(p.origin, "tiny");
    assert_eq!(p.num_constraints(), 1);
    assert_eq!(p.blocks, vec![Block::Psd(2)]);
    let sol = solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    // max -Y11 - 2 Y22 with Y11 + Y22 = 1 puts all weight on Y11.
    assert!((sol.value() + 1.0).abs() < 1e-6, "{}", sol.value());
}

#[test]
fn sdpa_parser_rejects_garbage() {
    assert!(parse_sdpa("").is_err());
    assert!(parse_sdpa("1\n1\n2\n1.0\n0 2 1 1 1.0\n").is_err());
    assert!(parse_sdpa("1\n1\n2\n1.0\n0 1 3 1 1.0\n").is_err());
    assert!(parse_sdpa("x\n1\n2\n1.0\n").is_err());
}

#[test]
fn moment_relaxation_solves_the_same_after_sdpa() {
    let cp = ContainmentProblem::new(ball_pencil(2, 0.5).unwrap(), disk_pencil(1.0).unwrap()).unwrap();
    let relax = build_containment_relaxation(&cp, 2).unwrap();
    let so = SolverOptions::default();
    let direct = solve(&relax.problem, &so).unwrap();
    let q = parse_sdpa(&export_sdpa(&relax.problem)).unwrap();
    let again = solve(&q, &so).unwrap();
    assert_eq!(direct.status, Status::Optimal);
    assert_eq!(again.status, Status::Optimal);
    let expect = if relax.problem.sense == Sense::Min { -direct.value() } else { direct.value() };
    assert!((again.value() - expect).abs() < 1e-6, "{} vs {}", again.value(), expect);
}
