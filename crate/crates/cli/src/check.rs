//! `check`: runs the requested containment tests and combines their verdicts.
//!
//! Certification comes from any method that certifies; refutation only from a
//! point `x` with `A(x) ⪰ 0` and `λ_min(B(x)) < −tol`, re-verified on the
//! original pencils.

use std::time::Instant;

use anyhow::Result;
use nalgebra::DMatrix;
use spectrahedra::momrelax::{solve_mu_mom, CheckOptions, ContainmentProblem, Verdict};
use spectrahedra::pencil::LinearPencil;
use spectrahedra::posmap::{cp_sdfp_solve, CpOutcome};
use spectrahedra::reduce::{reduced_pencil, split_lineality};
use spectrahedra::sdpcore::{feasibility_probe, ProbeResult};
use spectrahedra::search::{find_violation, interior_point};
use spectrahedra::sosrelax::lambda_sos;
use spectrahedra::Error;

use crate::input::input_error;
use crate::report::{CheckReport, InputSummary, MethodResult, Real, ReductionSummary, Witness, REPORT_SCHEMA};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Sdfp,
    Moment,
    Sos,
    All,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sdfp => "sdfp",
            Method::Moment => "moment",
            Method::Sos => "sos",
            Method::All => "all",
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckConfig {
    pub method: Method,
    /// Moment order; with [`Method::All`], every order from 2 up to this one.
    pub order: usize,
    pub sos_order: usize,
    pub r: f64,
    pub big_r: f64,
    pub tol: f64,
    pub reduce: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig { method: Method::All, order: 2, sos_order: 0, r: 1.0, big_r: 2.0, tol: 1e-7, reduce: true }
    }
}

/// Slack on `A(x) ⪰ 0` when re-verifying a witness.
const WITNESS_A_TOL: f64 = 1e-9;

fn lmin(p: &LinearPencil, x: &[f64]) -> f64 {
    p.evaluate(x).and_then(|m| m.min_eigenvalue()).unwrap_or(f64::NAN)
}

/// Returns the witness if it really violates containment for the original pencils.
fn verify_witness(a: &LinearPencil, b: &LinearPencil, x: Vec<f64>, tol: f64) -> Option<Witness> {
    let la = lmin(a, &x);
    let lb = lmin(b, &x);
    let scale = 1.0 + a.max_norm() * (1.0 + x.iter().map(|v| v.abs()).fold(0.0, f64::max));
    (la >= -WITNESS_A_TOL * scale && lb < -tol).then_some(Witness { x, lambda_min_a: la, lambda_min_b: lb })
}

/// Walks from `x0 ∈ S_A` along a lineality direction of `S_A` until `B` fails.
fn lineality_witness(a: &LinearPencil, b: &LinearPencil, x0: &[f64], d: &[f64], tol: f64) -> Option<Witness> {
    for j in 0..64 {
        let s = 2f64.powi(j);
        for sign in [1.0, -1.0] {
            let x: Vec<f64> = x0.iter().zip(d).map(|(x, d)| x + sign * s * d).collect();
            if let Some(w) = verify_witness(a, b, x, tol) {
                return Some(w);
            }
        }
    }
    None
}

struct Timer(Instant);

impl Timer {
    fn start() -> Self {
        Timer(Instant::now())
    }

    fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

fn failed(method: &str, order: Option<usize>, err: Error, seconds: f64) -> MethodResult {
    MethodResult {
        method: method.to_string(),
        order,
        value: None,
        normalized: None,
        verdict: Verdict::Inconclusive,
        status: None,
        residuals: None,
        iterations: None,
        seconds,
        detail: Some(err.to_string()),
    }
}

fn run_sdfp(cp: &ContainmentProblem, extended: bool, opts: &CheckOptions) -> MethodResult {
    let name = if extended { "sdfp-extended" } else { "sdfp" };
    let t = Timer::start();
    match cp_sdfp_solve(&cp.a, &cp.b, extended, opts) {
        Ok(s) => {
            let (verdict, detail) = match &s.outcome {
                CpOutcome::Feasible(_) => (Verdict::Certified, "feasible".to_string()),
                CpOutcome::Infeasible { margin: Some(_) } => (Verdict::Inconclusive, "infeasible".to_string()),
                CpOutcome::Infeasible { margin: None } => (Verdict::Inconclusive, "infeasible (inconsistent identities)".to_string()),
                CpOutcome::Inconclusive { reason } => (Verdict::Inconclusive, reason.clone()),
            };
            MethodResult {
                method: name.to_string(),
                order: None,
                value: s.outcome.margin().map(Real),
                normalized: None,
                verdict,
                status: Some(s.status),
                residuals: Some(s.residuals),
                iterations: Some(s.iterations),
                seconds: t.secs(),
                detail: Some(detail),
            }
        }
        Err(e) => failed(name, None, e, t.secs()),
    }
}

fn run_sos(cp: &ContainmentProblem, t: usize, opts: &CheckOptions) -> MethodResult {
    let timer = Timer::start();
    match lambda_sos(cp, t, opts) {
        Ok(o) => MethodResult {
            method: "sos".to_string(),
            order: Some(t),
            value: Some(Real(o.value)),
            normalized: None,
            verdict: o.verdict,
            status: Some(o.status),
            residuals: Some(o.residuals),
            iterations: Some(o.iterations),
            seconds: timer.secs(),
            detail: Some(format!("identity residual {:.2e}", o.identity_residual)),
        },
        Err(e) => failed("sos", Some(t), e, timer.secs()),
    }
}

fn run_moment(cp: &ContainmentProblem, t: usize, opts: &CheckOptions) -> (MethodResult, Option<Vec<f64>>) {
    let timer = Timer::start();
    match solve_mu_mom(cp, t, opts) {
        Ok(o) => (
            MethodResult {
                method: "moment".to_string(),
                order: Some(t),
                value: Some(Real(o.value)),
                normalized: Some(Real(o.normalized)),
                verdict: o.verdict,
                status: Some(o.status),
                residuals: Some(o.residuals),
                iterations: Some(o.iterations),
                seconds: timer.secs(),
                detail: Some(format!("{} moments", o.moments)),
            },
            o.witness,
        ),
        Err(e) => (failed("moment", Some(t), e, timer.secs()), None),
    }
}

/// Runs `check` on the two pencils.
pub fn run_check(a: &LinearPencil, b: &LinearPencil, cfg: &CheckConfig) -> Result<CheckReport> {
    let clock = Timer::start();
    if a.n() != b.n() {
        return Err(input_error(format!("dimension mismatch: A has {} variables, B has {}", a.n(), b.n())));
    }
    if matches!(cfg.method, Method::Moment | Method::All) && cfg.order < 2 {
        return Err(input_error(format!("moment order {} is below the initial order 2", cfg.order)));
    }
    if !(cfg.tol > 0.0 && cfg.tol.is_finite()) {
        return Err(input_error(format!("tolerance {} is not positive", cfg.tol)));
    }
    // Validates the radii before any solve.
    ContainmentProblem::with_radii(a.clone(), b.clone(), cfg.r, cfg.big_r)?;
    let opts = CheckOptions { tol: cfg.tol, ..CheckOptions::default() };
    let tol_orig = cfg.tol * (1.0 + b.max_norm());

    let mut report = CheckReport {
        schema: REPORT_SCHEMA.to_string(),
        verdict: Verdict::Inconclusive,
        exit_code: Verdict::Inconclusive.exit_code(),
        input: InputSummary {
            n: a.n(),
            k: a.k(),
            l: b.k(),
            method: cfg.method.name().to_string(),
            order: cfg.order,
            sos_order: cfg.sos_order,
            r: cfg.r,
            big_r: cfg.big_r,
            tol: cfg.tol,
            tol_cert: tol_orig,
        },
        reduction: None,
        methods: Vec::new(),
        witness: None,
        notes: Vec::new(),
        seconds: 0.0,
    };
    let finish = |mut r: CheckReport, verdict: Verdict| {
        r.verdict = verdict;
        r.exit_code = verdict.exit_code();
        r.seconds = clock.secs();
        Ok(r)
    };

    let probe = feasibility_probe(a);
    match &probe {
        ProbeResult::Empty => {
            report.notes.push("S_A is empty, so the containment holds vacuously".into());
            return finish(report, Verdict::Certified);
        }
        ProbeResult::Unknown => report.notes.push("the feasibility probe could not decide whether S_A is empty".into()),
        ProbeResult::NonEmpty { .. } => {}
    }

    let (ar, br, v) = if cfg.reduce {
        match split_lineality(a, b) {
            Ok((a1, b1, v)) => (reduced_pencil(&a1)?, reduced_pencil(&b1)?, v),
            Err(Error::NotContained { direction }) => {
                report.notes.push(format!("lineality direction {direction:?} of S_A is not one of S_B"));
                let x0 = match &probe {
                    ProbeResult::NonEmpty { x, .. } => Some(x.clone()),
                    _ => interior_point(a),
                };
                if let Some(w) = x0.and_then(|x0| lineality_witness(a, b, &x0, &direction, tol_orig)) {
                    report.witness = Some(w);
                    return finish(report, Verdict::Refuted);
                }
                report.notes.push("no violating point found along that direction".into());
                return finish(report, Verdict::Inconclusive);
            }
            Err(e) => return Err(e.into()),
        }
    } else {
        (a.clone(), b.clone(), DMatrix::identity(a.n(), a.n()))
    };
    if cfg.reduce {
        report.reduction = Some(ReductionSummary { lineality_dim: a.n() - v.ncols(), n: ar.n(), k: ar.k(), l: br.k() });
    }
    let cp = ContainmentProblem::with_radii(ar, br, cfg.r, cfg.big_r)?;
    let to_original = |u: &[f64]| -> Vec<f64> { (0..v.nrows()).map(|i| (0..v.ncols()).map(|j| v[(i, j)] * u[j]).sum()).collect() };

    let mut candidates: Vec<Vec<f64>> = Vec::new();
    if matches!(cfg.method, Method::Sdfp | Method::All) {
        report.methods.push(run_sdfp(&cp, false, &opts));
        report.methods.push(run_sdfp(&cp, true, &opts));
    }
    if matches!(cfg.method, Method::Sos | Method::All) {
        report.methods.push(run_sos(&cp, cfg.sos_order, &opts));
    }
    let orders: Vec<usize> = match cfg.method {
        Method::Moment => vec![cfg.order],
        Method::All => (2..=cfg.order).collect(),
        _ => Vec::new(),
    };
    for t in orders {
        let (m, w) = run_moment(&cp, t, &opts);
        report.methods.push(m);
        candidates.extend(w);
    }
    let certified = report.methods.iter().any(|m| m.verdict == Verdict::Certified);
    if cfg.method == Method::All && !certified && candidates.is_empty() {
        let t = Timer::start();
        let found = find_violation(&cp.a, &cp.b, &[], cp.tol_cert(cfg.tol), &opts.search);
        report.methods.push(MethodResult {
            method: "search".into(),
            order: None,
            value: None,
            normalized: None,
            verdict: if found.is_some() { Verdict::Refuted } else { Verdict::Inconclusive },
            status: None,
            residuals: None,
            iterations: None,
            seconds: t.secs(),
            detail: Some(if found.is_some() { "violating point found" } else { "no violating point found" }.into()),
        });
        candidates.extend(found);
    }
    let witness = candidates.iter().find_map(|u| verify_witness(a, b, to_original(u), tol_orig));
    if witness.is_none() && !candidates.is_empty() {
        report.notes.push("a violating point in reduced coordinates failed re-verification on the input pencils".into());
    }
    if let Some(w) = witness {
        if certified {
            report.notes.push("a method certified containment although a violating point exists".into());
        }
        report.witness = Some(w);
        return finish(report, Verdict::Refuted);
    }
    let verdict = if certified { Verdict::Certified } else { Verdict::Inconclusive };
    finish(report, verdict)
}
