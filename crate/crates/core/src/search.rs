//! Sampling and local search inside a spectrahedron: the brute-force oracle for
//! `min zᵀB(x)z` and the point confirmation behind every `Refuted` verdict.
//!
//! `λ_min(B(x))` is concave in `x`, so along any chord of `S_A` it is smallest at
//! an endpoint. Hit-and-run chords therefore sample only endpoints, and the
//! descent step minimizes the linear function `vᵀB(x)v` over `S_A`, which can
//! only decrease `λ_min(B)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::pencil::LinearPencil;
use crate::sdpcore::{feasibility_probe, solve, Block, BlockSparse, ProbeResult, SdpProblem, Sense, SolverOptions, Status};
use crate::symcore::SymMatrix;

/// Bound on `‖x‖` used when `S_A` may be unbounded.
const SEARCH_RADIUS: f64 = 1e4;

#[derive(Clone, Copy, Debug)]
pub struct SearchOptions {
    /// Hit-and-run chords.
    pub chords: usize,
    /// Descent runs started from the best samples.
    pub starts: usize,
    pub descent_steps: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { chords: 400, starts: 4, descent_steps: 15, seed: 0x5eed }
    }
}

fn lmin(p: &LinearPencil, x: &[f64]) -> f64 {
    p.evaluate(x).and_then(|m| m.min_eigenvalue()).unwrap_or(f64::NAN)
}

/// `[s_lo, s_hi]` with `A(x + s d) ⪰ 0`, for `A(x) ≻ 0`; capped at `cap`.
fn chord(a: &LinearPencil, x: &[f64], d: &[f64], cap: f64) -> Option<(f64, f64)> {
    let ax = a.evaluate(x).ok()?;
    let l = ax.as_matrix().clone().cholesky()?.l();
    let ad = a.linear_part(d).ok()?;
    let li = l.try_inverse()?;
    let m = SymMatrix::new(&li * ad.as_matrix() * li.transpose()).ok()?;
    let (vals, _) = m.eigen().ok()?;
    let (mut lo, mut hi) = (-cap, cap);
    for &e in vals.iter() {
        if e > 0.0 {
            lo = lo.max(-1.0 / e);
        } else if e < 0.0 {
            hi = hi.min(-1.0 / e);
        }
    }
    Some((lo, hi))
}

fn axpy(x: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

/// Interior point of `S_A`, if the probe finds one with positive margin.
pub fn interior_point(a: &LinearPencil) -> Option<Vec<f64>> {
    match feasibility_probe(a) {
        ProbeResult::NonEmpty { x, margin } if margin > 1e-9 => Some(x),
        _ => None,
    }
}

/// Boundary points of `S_A` from a seeded hit-and-run walk, started at the
/// interior point `x0`. Endpoints are pulled inward by a relative `1e-9` so
/// that they stay in `S_A`.
pub fn boundary_samples(a: &LinearPencil, x0: &[f64], chords: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = a.n();
    let mut out = Vec::with_capacity(2 * chords);
    if n == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = SEARCH_RADIUS * (1.0 + x0.iter().map(|v| v * v).sum::<f64>().sqrt());
    let mut x = x0.to_vec();
    for _ in 0..chords {
        let mut d: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        d.iter_mut().for_each(|v| *v /= norm);
        let Some((lo, hi)) = chord(a, &x, &d, cap) else {
            x = x0.to_vec();
            continue;
        };
        let shrink = 1.0 - 1e-9;
        out.push(axpy(&x, lo * shrink, &d));
        out.push(axpy(&x, hi * shrink, &d));
        let u: f64 = rand::Rng::gen_range(&mut rng, 0.05..0.95);
        x = axpy(&x, (lo + u * (hi - lo)) * shrink, &d);
    }
    out
}

/// `argmin cᵀx` over `S_A ∩ {‖x‖ ≤ SEARCH_RADIUS}`.
fn linear_min(a: &LinearPencil, c: &[f64]) -> Option<Vec<f64>> {
    let (n, k) = (a.n(), a.k());
    let mut prob = SdpProblem::new(vec![Block::Psd(k), Block::Psd(n + 1)], Sense::Min, "linear minimization");
    let a0 = a.coeff(0).as_matrix();
    for i in 0..k {
        for j in i..k {
            prob.c.push(0, i, j, a0[(i, j)]);
        }
    }
    for i in 0..=n {
        prob.c.push(1, i, i, SEARCH_RADIUS);
    }
    prob.c.compress();
    for (p, &cp) in c.iter().enumerate().take(n) {
        let ap = a.coeff(p + 1).as_matrix();
        let mut m = BlockSparse::new();
        for i in 0..k {
            for j in i..k {
                m.push(0, i, j, -ap[(i, j)]);
            }
        }
        m.push(1, 0, p + 1, -1.0);
        prob.add_constraint(m, -cp);
    }
    let sol = solve(&prob, &SolverOptions::default()).ok()?;
    (sol.status == Status::Optimal || sol.usable(1e-6)).then_some(sol.y)
}

/// Moves `x` toward the interior point `x0` until `A(x) ⪰ 0` holds exactly.
fn pull_inside(a: &LinearPencil, x0: &[f64], x: &[f64]) -> Option<Vec<f64>> {
    if lmin(a, x) >= 0.0 {
        return Some(x.to_vec());
    }
    let d: Vec<f64> = x.iter().zip(x0).map(|(a, b)| a - b).collect();
    let mut theta = 1.0 - 1e-9;
    for _ in 0..40 {
        let y = axpy(x0, theta, &d);
        if lmin(a, &y) >= 0.0 {
            return Some(y);
        }
        theta = 1.0 - 2.0 * (1.0 - theta);
        if theta <= 0.0 {
            break;
        }
    }
    None
}

/// Repeatedly minimizes `vᵀB(x)v` over `S_A`, `v` the bottom eigenvector at the
/// current point. Returns the best point found (inside `S_A`).
pub fn descend(a: &LinearPencil, b: &LinearPencil, x0: &[f64], start: &[f64], steps: usize) -> Vec<f64> {
    let mut x = pull_inside(a, x0, start).unwrap_or_else(|| x0.to_vec());
    let mut best = lmin(b, &x);
    for _ in 0..steps {
        let Ok((_, v)) = b.evaluate(&x).and_then(|m| m.min_eigenpair()) else { break };
        let c: Vec<f64> = (1..=b.n()).map(|p| v.dot(&(b.coeff(p).as_matrix() * &v))).collect();
        let Some(next) = linear_min(a, &c) else { break };
        let Some(next) = pull_inside(a, x0, &next) else { break };
        let val = lmin(b, &next);
        if !(val < best - 1e-12 * (1.0 + best.abs())) {
            break;
        }
        best = val;
        x = next;
    }
    x
}

/// Smallest `λ_min(B(x))` found over `S_A` and the point attaining it; `None`
/// when `S_A` has no interior point.
pub fn minimize_lambda(a: &LinearPencil, b: &LinearPencil, hints: &[Vec<f64>], opts: &SearchOptions) -> Option<(f64, Vec<f64>)> {
    let x0 = interior_point(a)?;
    let mut cands: Vec<(f64, Vec<f64>)> = std::iter::once(x0.clone())
        .chain(hints.iter().filter(|h| h.len() == a.n()).cloned())
        .chain(boundary_samples(a, &x0, opts.chords, opts.seed))
        .filter_map(|x| {
            let inside = pull_inside(a, &x0, &x)?;
            let v = lmin(b, &inside);
            v.is_finite().then_some((v, inside))
        })
        .collect();
    cands.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut best = cands.first().cloned()?;
    // Descend from the hints and the best samples.
    let mut starts: Vec<Vec<f64>> = hints.iter().filter(|h| h.len() == a.n()).cloned().collect();
    starts.extend(cands.iter().take(opts.starts).map(|c| c.1.clone()));
    for s in starts {
        let x = descend(a, b, &x0, &s, opts.descent_steps);
        let v = lmin(b, &x);
        if v < best.0 {
            best = (v, x);
        }
    }
    Some(best)
}

/// A point `x ∈ S_A` (exactly, `λ_min(A(x)) ≥ 0`) with `λ_min(B(x)) < −tol`.
pub fn find_violation(a: &LinearPencil, b: &LinearPencil, hints: &[Vec<f64>], tol: f64, opts: &SearchOptions) -> Option<Vec<f64>> {
    let (v, x) = minimize_lambda(a, b, hints, opts)?;
    (v < -tol && lmin(a, &x) >= 0.0).then_some(x)
}

/// Upper bound on `μ = min zᵀB(x)z` over `S_A × {r ≤ ‖z‖ ≤ R}` from sampled points:
/// `r²·λ` when `λ = λ_min(B(x)) ≥ 0`, otherwise `R²·λ`.
pub fn grid_mu(a: &LinearPencil, b: &LinearPencil, r: f64, big_r: f64, opts: &SearchOptions) -> Option<f64> {
    let (v, _) = minimize_lambda(a, b, &[], opts)?;
    Some(if v >= 0.0 { r * r * v } else { big_r * big_r * v })
}

/// Largest `‖x − c‖²` over sampled points of `S_A`: a lower bound for the circumradius squared.
pub fn sampled_radius_sq(a: &LinearPencil, center: &[f64], chords: usize, seed: u64) -> Option<f64> {
    let x0 = interior_point(a)?;
    let d2 = |x: &[f64]| x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    Some(boundary_samples(a, &x0, chords, seed).iter().map(|x| d2(x)).fold(d2(&x0), f64::max))
}

/// `λ_min` of `B(x)` at each sample, used by property tests.
pub fn lambda_at(b: &LinearPencil, points: &[Vec<f64>]) -> Vec<f64> {
    points.iter().map(|x| lmin(b, x)).collect()
}
