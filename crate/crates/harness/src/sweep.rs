//! Parameter sweeps: one pipeline run per value, fanned out over worker
//! threads and collected in cell order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::pipeline::{load_dataset, query_points, run_pipeline};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub cell: usize,
    pub param: String,
    pub value: String,
    pub seed: u64,
    pub config_hash: String,
    pub m: usize,
    pub classical_residual: f64,
    pub kappa: f64,
    pub fidelity: Option<f64>,
    pub state_error: Option<f64>,
    pub matrix_error: Option<f64>,
    pub max_abs_error: Option<f64>,
    pub max_budget_ratio: Option<f64>,
}

fn run_cell(base: &ExperimentConfig, cell: usize, param: &str, value: &str) -> Result<SweepRow> {
    let mut config = base.clone();
    config.set(param, value)?;
    let dataset = load_dataset(&config)?;
    let queries = query_points(&config, &dataset)?;
    let report = run_pipeline(&config, &dataset, &queries)?;
    let q = report.quantum.as_ref();
    Ok(SweepRow {
        cell,
        param: param.into(),
        value: value.into(),
        seed: config.seed,
        config_hash: report.config_hash.clone(),
        m: report.m,
        classical_residual: report.classical.residual,
        kappa: report.classical.kappa,
        fidelity: q.map(|q| q.fidelity),
        state_error: q.map(|q| q.state_error),
        matrix_error: q.map(|q| q.matrix_error),
        max_abs_error: report.max_abs_error,
        max_budget_ratio: report.max_budget_ratio,
    })
}

/// Runs the configured pipeline once per value of the dotted parameter
/// `param`. The first failing cell, by index, is returned as the error.
pub fn sweep(base: &ExperimentConfig, param: &str, values: &[String], threads: usize) -> Result<Vec<SweepRow>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<SweepRow>>>> = Mutex::new((0..values.len()).map(|_| None).collect());
    let workers = threads.clamp(1, values.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let cell = next.fetch_add(1, Ordering::Relaxed);
                if cell >= values.len() {
                    break;
                }
                let row = run_cell(base, cell, param, &values[cell]);
                results.lock().expect("sweep results lock")[cell] = Some(row);
            });
        }
    });
    results
        .into_inner()
        .expect("sweep results lock")
        .into_iter()
        .map(|r| r.expect("every cell runs"))
        .collect()
}
