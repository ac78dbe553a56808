use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// One diagonal block of the matrix variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Block {
    /// Dense symmetric PSD block.
    Psd(usize),
    /// Nonnegative diagonal (LP) block.
    Diag(usize),
}

impl Block {
    pub fn size(self) -> usize {
        match self {
            Block::Psd(s) | Block::Diag(s) => s,
        }
    }

    /// SDPA convention: negative sizes denote diagonal blocks.
    pub fn sdpa_size(self) -> i64 {
        match self {
            Block::Psd(s) => s as i64,
            Block::Diag(s) => -(s as i64),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Min,
    Max,
}

/// One stored entry of a block-diagonal symmetric matrix (`row ≤ col`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Sparse block-diagonal symmetric matrix, upper triangle only.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockSparse {
    entries: Vec<Entry>,
}

impl BlockSparse {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `value` at `(row, col)` and, implicitly, its mirror.
    pub fn push(&mut self, block: usize, row: usize, col: usize, value: f64) {
        let (row, col) = if row <= col { (row, col) } else { (col, row) };
        self.entries.push(Entry { block, row, col, value });
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Merges duplicates, drops exact zeros, and sorts by position.
    pub fn compress(&mut self) {
        self.entries.sort_by_key(|e| (e.block, e.row, e.col));
        let mut out: Vec<Entry> = Vec::with_capacity(self.entries.len());
        for e in self.entries.drain(..) {
            match out.last_mut() {
                Some(last) if (last.block, last.row, last.col) == (e.block, e.row, e.col) => last.value += e.value,
                _ => out.push(e),
            }
        }
        out.retain(|e| e.value != 0.0);
        self.entries = out;
    }

    /// `⟨self, M⟩` with `M` given per block as dense matrices.
    pub fn dot_dense(&self, m: &[DMatrix<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let v = m[e.block][(e.row, e.col)];
                if e.row == e.col {
                    e.value * v
                } else {
                    2.0 * e.value * v
                }
            })
            .sum()
    }

    /// Adds `a · self` into the dense block matrices.
    pub fn add_to_dense(&self, a: f64, m: &mut [DMatrix<f64>]) {
        for e in &self.entries {
            m[e.block][(e.row, e.col)] += a * e.value;
            if e.row != e.col {
                m[e.block][(e.col, e.row)] += a * e.value;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| if e.row == e.col { e.value * e.value } else { 2.0 * e.value * e.value })
            .sum::<f64>()
            .sqrt()
    }
}

/// Block SDP in standard form.
///
/// Primal: optimize `⟨C, X⟩ + dᵀu` subject to `⟨A_i, X⟩ + (E u)_i = b_i`,
/// `X ⪰ 0` blockwise, `u` free. For `Sense::Min` the dual is
/// `max bᵀy` subject to `Z = C − Σ y_i A_i ⪰ 0`, `Eᵀ y = d`; for `Sense::Max`
/// it is `min bᵀy` subject to `Z = Σ y_i A_i − C ⪰ 0`, `Eᵀ y = d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<Block>,
    pub sense: Sense,
    pub c: BlockSparse,
    pub constraints: Vec<BlockSparse>,
    pub b: Vec<f64>,
    /// Column `j` of `E` as `(constraint, coefficient)` pairs.
    pub free_columns: Vec<Vec<(usize, f64)>>,
    /// Objective coefficients `d` of the free variables.
    pub free_cost: Vec<f64>,
    /// Which builder produced the problem.
    pub origin: String,
}

impl SdpProblem {
    pub fn new(blocks: Vec<Block>, sense: Sense, origin: impl Into<String>) -> Self {
        SdpProblem {
            blocks,
            sense,
            c: BlockSparse::new(),
            constraints: Vec::new(),
            b: Vec::new(),
            free_columns: Vec::new(),
            free_cost: Vec::new(),
            origin: origin.into(),
        }
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_free(&self) -> usize {
        self.free_cost.len()
    }

    /// Returns the index of the new constraint.
    pub fn add_constraint(&mut self, mut a: BlockSparse, rhs: f64) -> usize {
        a.compress();
        self.constraints.push(a);
        self.b.push(rhs);
        self.constraints.len() - 1
    }

    /// Returns the index of the new free variable.
    pub fn add_free(&mut self, cost: f64, column: Vec<(usize, f64)>) -> usize {
        self.free_columns.push(column);
        self.free_cost.push(cost);
        self.free_cost.len() - 1
    }

    /// Number of scalar unknowns: matrix entries of the upper triangles plus free variables.
    pub fn num_unknowns(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| match *b {
                Block::Psd(s) => s * (s + 1) / 2,
                Block::Diag(s) => s,
            })
            .sum::<usize>()
            + self.num_free()
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(invalid("problem has no blocks"));
        }
        if self.blocks.iter().any(|b| b.size() == 0) {
            return Err(invalid("block of size zero"));
        }
        if self.b.len() != self.constraints.len() {
            return Err(invalid("right-hand side length differs from the constraint count"));
        }
        if self.free_columns.len() != self.free_cost.len() {
            return Err(invalid("free variable data is inconsistent"));
        }
        let check = |m: &BlockSparse, what: &str| -> Result<()> {
            for e in m.entries() {
                let blk = self.blocks.get(e.block).ok_or_else(|| invalid(format!("{what}: block {} out of range", e.block)))?;
                if e.col >= blk.size() || e.row > e.col {
                    return Err(invalid(format!("{what}: entry ({}, {}) outside block {}", e.row, e.col, e.block)));
                }
                if matches!(blk, Block::Diag(_)) && e.row != e.col {
                    return Err(invalid(format!("{what}: off-diagonal entry in diagonal block {}", e.block)));
                }
                if !e.value.is_finite() {
                    return Err(invalid(format!("{what}: non-finite entry")));
                }
            }
            Ok(())
        };
        check(&self.c, "objective")?;
        for (i, a) in self.constraints.iter().enumerate() {
            check(a, &format!("constraint {i}"))?;
        }
        if self.b.iter().chain(&self.free_cost).any(|v| !v.is_finite()) {
            return Err(invalid("non-finite vector data"));
        }
        for col in &self.free_columns {
            for &(i, v) in col {
                if i >= self.constraints.len() || !v.is_finite() {
                    return Err(invalid("free variable column references a missing constraint"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    /// No `X` satisfies the primal constraints; `y` holds an improving ray.
    PrimalInfeasible,
    /// The dual constraints admit no `y`; `x`/`u` hold an improving ray.
    DualInfeasible,
    Inaccurate,
    IterLimit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Solver report. Values and residuals are recomputed from the returned iterate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: Status,
    /// `⟨C, X⟩ + dᵀu`.
    pub primal_value: f64,
    /// `bᵀy`.
    pub dual_value: f64,
    pub x: Vec<DMatrix<f64>>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub residuals: Residuals,
    pub iterations: usize,
}

impl SdpSolution {
    /// Midpoint of primal and dual values, the best single estimate of the optimum.
    pub fn value(&self) -> f64 {
        0.5 * (self.primal_value + self.dual_value)
    }

    /// Optimal, or inaccurate but with all recomputed residuals below `tol`.
    pub fn usable(&self, tol: f64) -> bool {
        match self.status {
            Status::Optimal => true,
            Status::Inaccurate | Status::IterLimit => {
                self.residuals.primal <= tol && self.residuals.dual <= tol && self.residuals.gap <= tol
            }
            _ => false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol_gap: 1e-8, tol_feas: 1e-8, max_iter: 200 }
    }
}
