//! The versioned JSON report written by `check`.

use std::fmt::Write as _;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use spectrahedra::momrelax::Verdict;
use spectrahedra::sdpcore::{Residuals, Status};

/// Bumped whenever a field changes meaning or disappears.
pub const REPORT_SCHEMA: &str = "spectra.check/1";

/// A real that may be infinite. JSON has no infinities, so `±∞` and NaN are
/// written as the strings `"inf"`, `"-inf"` and `"nan"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Real(v)),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(Real(f64::INFINITY)),
                "-inf" => Ok(Real(f64::NEG_INFINITY)),
                "nan" => Ok(Real(f64::NAN)),
                _ => Err(serde::de::Error::custom(format!("not a real: {t:?}"))),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputSummary {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub method: String,
    pub order: usize,
    pub sos_order: usize,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub tol: f64,
    /// `tol·(1 + max ‖B_p‖)` on the reduced outer pencil.
    pub tol_cert: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub lineality_dim: usize,
    pub n: usize,
    pub k: usize,
    pub l: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodResult {
    /// `sdfp`, `sdfp-extended`, `sos`, `moment` or `search`.
    pub method: String,
    pub order: Option<usize>,
    pub value: Option<Real>,
    /// Moment values divided by `r²` (nonnegative) or `R²` (negative).
    pub normalized: Option<Real>,
    pub verdict: Verdict,
    pub status: Option<Status>,
    pub residuals: Option<Residuals>,
    pub iterations: Option<usize>,
    pub seconds: f64,
    /// Solver failure or extra information.
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Witness {
    /// Point in the original coordinates.
    pub x: Vec<f64>,
    pub lambda_min_a: f64,
    pub lambda_min_b: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema: String,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub input: InputSummary,
    pub reduction: Option<ReductionSummary>,
    pub methods: Vec<MethodResult>,
    pub witness: Option<Witness>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

fn fmt_real(v: Option<Real>) -> String {
    match v {
        Some(Real(x)) if x.is_finite() => format!("{x:.6}"),
        Some(Real(x)) => format!("{x}"),
        None => "-".to_string(),
    }
}

impl CheckReport {
    /// Human-readable summary for stdout.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        let i = &self.input;
        let _ = writeln!(s, "pencils: n = {}, k = {}, l = {}", i.n, i.k, i.l);
        if let Some(r) = &self.reduction {
            let _ = writeln!(s, "reduced: n = {}, k = {}, l = {} (lineality {})", r.n, r.k, r.l, r.lineality_dim);
        }
        for m in &self.methods {
            let order = m.order.map(|t| format!("({t})")).unwrap_or_default();
            let _ = write!(s, "{:<14} {:>14}  {:?}", format!("{}{order}", m.method), fmt_real(m.value), m.verdict);
            if let Some(st) = m.status {
                let _ = write!(s, "  [{st:?}]");
            }
            if let Some(d) = &m.detail {
                let _ = write!(s, "  {d}");
            }
            let _ = writeln!(s, "  {:.2}s", m.seconds);
        }
        if let Some(w) = &self.witness {
            let _ = writeln!(s, "witness x = {:?}: λ_min(A) = {:.3e}, λ_min(B) = {:.3e}", w.x, w.lambda_min_a, w.lambda_min_b);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "verdict: {:?}", self.verdict);
        s
    }
}
