//! CSV tables and JSON summaries.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Result;

/// One bound or assertion check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub seed: u64,
    pub config_hash: String,
    pub suite: String,
    pub case: String,
    pub measured: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl BoundRow {
    /// Passes when `lower <= measured <= upper` for the bounds present.
    pub fn check(case: impl Into<String>, measured: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = measured.is_finite()
            && lower.is_none_or(|lo| measured >= lo)
            && upper.is_none_or(|hi| measured <= hi);
        Self { seed: 0, config_hash: String::new(), suite: String::new(), case: case.into(), measured, lower, upper, pass }
    }

    pub fn at_most(case: impl Into<String>, measured: f64, upper: f64) -> Self {
        Self::check(case, measured, None, Some(upper))
    }

    pub fn at_least(case: impl Into<String>, measured: f64, lower: f64) -> Self {
        Self::check(case, measured, Some(lower), None)
    }

    pub fn within(case: impl Into<String>, measured: f64, lower: f64, upper: f64) -> Self {
        Self::check(case, measured, Some(lower), Some(upper))
    }
}

pub fn write_rows<W: Write, T: Serialize>(writer: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows_file<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    write_rows(std::fs::File::create(path)?, rows)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Asymptotic cost of each pipeline, printed as context only.
pub fn complexity_note(pipeline: crate::config::Pipeline) -> &'static str {
    use crate::config::Pipeline;
    match pipeline {
        Pipeline::Classical => "dense Cholesky O(m^3); sparse conjugate gradients O(s m sqrt(kappa))",
        Pipeline::QuantumGlobal => {
            "state O(kappa^3 eps^-3 m d log(d kappa^2 / eps)); readout O(kappa^3 eps^-5 m d log(d kappa^2 / eps))"
        }
        Pipeline::QuantumCompact => {
            "state O~(kappa^2 s^2 eps^-2 log m log^2 d); readout O~(kappa^2 s^2 eps^-4 log m log^2 d)"
        }
    }
}
