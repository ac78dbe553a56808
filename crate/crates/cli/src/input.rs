use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use spectrahedra::pencil::LinearPencil;

/// Bad user input: unreadable files, malformed pencils, inconsistent flags.
#[derive(Debug)]
pub struct InputError(pub String);

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

pub fn input_error(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

/// 64 for anything caused by the input, 70 otherwise.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<InputError>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return crate::EXIT_INPUT;
        }
        if let Some(e) = cause.downcast_ref::<spectrahedra::Error>() {
            use spectrahedra::Error as E;
            return match e {
                E::InvalidInput(_) | E::DegeneratePencil | E::OrderTooSmall { .. } => crate::EXIT_INPUT,
                _ => crate::EXIT_INTERNAL,
            };
        }
    }
    crate::EXIT_INTERNAL
}

pub fn read_pencil(path: &Path) -> Result<LinearPencil> {
    let text = fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    LinearPencil::from_json(&text).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

pub fn write_pencil(path: &Path, p: &LinearPencil) -> Result<()> {
    fs::write(path, p.to_json_pretty() + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Comma-separated reals, e.g. `0.3,1,0`.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| input_error(format!("not a number: {t:?} in {text:?}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors() {
        assert_eq!(parse_vector("0.3, 1,0").unwrap(), vec![0.3, 1.0, 0.0]);
        let err = parse_vector("1,x").unwrap_err();
        assert_eq!(exit_code_for(&err), 64);
    }

    #[test]
    fn library_errors_map_to_codes() {
        let e: anyhow::Error = spectrahedra::Error::InvalidInput("x".into()).into();
        assert_eq!(exit_code_for(&e), 64);
        let e: anyhow::Error = spectrahedra::Error::NumericalFailure("x".into()).into();
        assert_eq!(exit_code_for(&e), 70);
        assert_eq!(exit_code_for(&anyhow::anyhow!("boom")), 70);
    }
}
