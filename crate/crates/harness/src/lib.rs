//! Experiment harness for the interpolation library: configuration, dataset
//! generation, end-to-end pipelines, bound verification suites and sweeps.

pub mod config;
pub mod data;
pub mod pipeline;
pub mod report;
pub mod sweep;
pub mod verify;

use qrbf_core::coherent::CoherentError;
use qrbf_core::compact::CompactError;
use qrbf_core::interpolation::InterpError;
use qrbf_core::kernels::KernelError;
use qrbf_core::qcore::QuantumError;
use qrbf_core::qinvert::InvertError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot place {m} distinct sites in the box after {attempts} attempts")]
    Placement { m: usize, attempts: usize },
    #[error("unknown suite {0:?}")]
    UnknownSuite(String),
    #[error("unknown sweep parameter {0:?}")]
    UnknownParameter(String),
    #[error("{stage}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Interp(#[from] InterpError),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// Attaches a pipeline stage label to a module error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

macro_rules! stage_impl {
    ($($err:ty),*) => {$(
        impl<T> StageExt<T> for std::result::Result<T, $err> {
            fn stage(self, stage: &'static str) -> Result<T> {
                self.map_err(|e| HarnessError::Stage { stage, source: Box::new(e) })
            }
        }
    )*};
}

stage_impl!(CoherentError, CompactError, InterpError, KernelError, QuantumError, InvertError);
