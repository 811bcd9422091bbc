//! Experiment configuration: one JSON file, overridable from the command line.

use std::path::{Path, PathBuf};

use qrbf_core::compact::{AeModel, CompactOracleConfig};
use qrbf_core::kernels::Kernel;
use qrbf_core::qinvert::InversionConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Target;
use crate::{HarnessError, Result};

/// Environment variable supplying the default seed.
pub const SEED_ENV: &str = "QRBF_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    #[default]
    Classical,
    QuantumGlobal,
    QuantumCompact,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Classical => "classical",
            Pipeline::QuantumGlobal => "quantum-global",
            Pipeline::QuantumCompact => "quantum-compact",
        }
    }
}

impl std::str::FromStr for Pipeline {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| HarnessError::Config(format!("unknown pipeline {s:?}")))
    }
}

/// Random sites in a box with values from a built-in target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSpec {
    pub m: usize,
    pub d: usize,
    pub lo: f64,
    pub hi: f64,
    /// Falls back to the experiment seed.
    pub seed: Option<u64>,
    pub target: Target,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self { m: 8, d: 2, lo: 0.0, hi: 1.0, seed: None, target: Target::Franke }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    File { path: PathBuf },
    Generate(GeneratorSpec),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Generate(GeneratorSpec::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuerySource {
    /// Uniform points in the data bounding box.
    Random { count: usize },
    File { path: PathBuf },
}

impl Default for QuerySource {
    fn default() -> Self {
        QuerySource::Random { count: 20 }
    }
}

/// Error tolerances of the quantum pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    /// Interpolation-matrix accuracy.
    pub eps_a: f64,
    /// Matrix-exponentiation accuracy.
    pub eps_e: f64,
    /// Solution-state accuracy.
    pub eps_c: f64,
    /// Normalization-factor accuracy; sets `1 / eps_f^2` shots.
    pub eps_f: f64,
    /// Swap-test accuracy; sets `1 / eps_p^2` shots.
    pub eps_p: f64,
}

impl Default for Budgets {
    fn default() -> Self {
        Self { eps_a: 1e-2, eps_e: 1e-2, eps_c: 1e-2, eps_f: 1e-2, eps_p: 1e-2 }
    }
}

impl Budgets {
    /// `min(eps_e, eps_c)`.
    pub fn combined(&self) -> f64 {
        self.eps_e.min(self.eps_c)
    }

    /// Matrix tolerance actually used: `min(eps_a, combined / kappa^2)`.
    pub fn matrix_tolerance(&self, kappa: f64) -> f64 {
        self.eps_a.min(self.combined() / (kappa * kappa))
    }

    pub fn shots_f(&self) -> u64 {
        shots(self.eps_f)
    }

    pub fn shots_p(&self) -> u64 {
        shots(self.eps_p)
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps_a", self.eps_a),
            ("eps_e", self.eps_e),
            ("eps_c", self.eps_c),
            ("eps_f", self.eps_f),
            ("eps_p", self.eps_p),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(HarnessError::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

fn shots(eps: f64) -> u64 {
    (1.0 / (eps * eps)).ceil() as u64
}

/// Amplitude-estimation settings of the compact pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompactSettings {
    pub ae_bits: Option<u32>,
    pub ae_model: AeModel,
    pub c_hat: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub data: DataSource,
    pub kernel: Kernel,
    pub pipeline: Pipeline,
    pub budgets: Budgets,
    pub inversion: InversionConfig,
    pub compact: CompactSettings,
    pub queries: QuerySource,
    /// Largest `m N^d` for which the explicit superposition is built.
    pub density_cap: usize,
    /// Largest `m` for which the matrix-exponentiation check runs.
    pub dme_max_sites: usize,
    pub dme_time: f64,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: DataSource::default(),
            kernel: Kernel::Gaussian { sigma: 0.15 },
            pipeline: Pipeline::default(),
            budgets: Budgets::default(),
            inversion: InversionConfig::default(),
            compact: CompactSettings::default(),
            queries: QuerySource::default(),
            density_cap: 256,
            dme_max_sites: 8,
            dme_time: 1.0,
            output: PathBuf::from("qrbf-out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Reads `path` when given, otherwise starts from the defaults. The seed
    /// falls back to `QRBF_SEED` when the file does not set one.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        let mut tree = match path {
            Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
            None => serde_json::Value::Object(Default::default()),
        };
        if let (Some(obj), Ok(s)) = (tree.as_object_mut(), std::env::var(SEED_ENV)) {
            if !obj.contains_key("seed") {
                let seed: u64 =
                    s.parse().map_err(|_| HarnessError::Config(format!("{SEED_ENV} is not an integer: {s:?}")))?;
                obj.insert("seed".into(), seed.into());
            }
        }
        Ok(serde_json::from_value(tree)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.budgets.validate()?;
        if let DataSource::Generate(g) = &self.data {
            if g.m == 0 || g.d == 0 {
                return Err(HarnessError::Config("generator needs m >= 1 and d >= 1".into()));
            }
            if g.hi.is_nan() || g.lo.is_nan() || g.hi <= g.lo {
                return Err(HarnessError::Config(format!("empty box [{}, {}]", g.lo, g.hi)));
            }
        }
        match (self.pipeline, self.kernel) {
            (Pipeline::QuantumGlobal, Kernel::Gaussian { .. }) => {}
            (Pipeline::QuantumGlobal, k) => {
                return Err(HarnessError::Config(format!("quantum-global needs a Gaussian kernel, got {:?}", k.family())))
            }
            (Pipeline::QuantumCompact, k) if !k.is_compact() => {
                return Err(HarnessError::Config(format!("quantum-compact needs a Wendland kernel, got {:?}", k.family())))
            }
            _ => {}
        }
        if !(self.dme_time > 0.0 && self.dme_time.is_finite()) {
            return Err(HarnessError::Config(format!("dme_time must be positive, got {}", self.dme_time)));
        }
        Ok(())
    }

    /// Canonical JSON text of the whole configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON, with the
    /// output directory left out so reruns elsewhere share a hash.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("configuration serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn oracle(&self) -> CompactOracleConfig {
        CompactOracleConfig {
            kernel: self.kernel,
            ae_bits: self.compact.ae_bits,
            c_hat: self.compact.c_hat,
            ae_model: self.compact.ae_model,
            seed: self.seed,
        }
    }

    /// Sets a dotted path such as `kernel.sigma` or `data.m` from a JSON
    /// literal (bare words are taken as strings).
    pub fn set(&mut self, path: &str, value: &str) -> Result<()> {
        let parsed: serde_json::Value =
            serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.into()));
        let mut tree = serde_json::to_value(&*self)?;
        let mut node = &mut tree;
        for key in path.split('.') {
            node = node
                .as_object_mut()
                .and_then(|o| o.get_mut(key))
                .ok_or_else(|| HarnessError::UnknownParameter(path.into()))?;
        }
        *node = parsed;
        *self = serde_json::from_value(tree).map_err(|e| HarnessError::Config(format!("{path} = {value}: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        let back = ExperimentConfig::from_json(&c.canonical_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        assert_eq!(c.hash().len(), 16);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"seed": 7, "pipeline": "quantum-global", "kernel": {"family": "gaussian", "sigma": 0.3},
                "data": {"source": "generate", "m": 5, "target": "cosine"}}"#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.pipeline, Pipeline::QuantumGlobal);
        let DataSource::Generate(g) = &c.data else { panic!() };
        assert_eq!((g.m, g.d, g.target), (5, 2, Target::Cosine));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"sede": 1}"#).is_err());
    }

    #[test]
    fn dotted_overrides() {
        let mut c = ExperimentConfig::default();
        c.set("kernel.sigma", "0.4").unwrap();
        assert_eq!(c.kernel, Kernel::Gaussian { sigma: 0.4 });
        c.set("data.m", "12").unwrap();
        c.set("pipeline", "quantum-compact").unwrap();
        assert_eq!(c.pipeline, Pipeline::QuantumCompact);
        assert!(matches!(c.set("kernel.nope", "1"), Err(HarnessError::UnknownParameter(_))));
        let before = c.hash();
        c.set("seed", "9").unwrap();
        assert_ne!(c.hash(), before);
        let mut moved = c.clone();
        moved.output = "elsewhere".into();
        assert_eq!(moved.hash(), c.hash());
    }

    #[test]
    fn budgets_must_be_open_unit() {
        let mut c = ExperimentConfig::default();
        c.budgets.eps_c = 1.0;
        assert!(c.validate().is_err());
        c.budgets.eps_c = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn pipeline_kernel_pairing() {
        let mut c = ExperimentConfig { pipeline: Pipeline::QuantumCompact, ..ExperimentConfig::default() };
        assert!(c.validate().is_err());
        c.kernel = Kernel::wendland(3, 2, 0.5).unwrap();
        c.validate().unwrap();
        c.pipeline = Pipeline::QuantumGlobal;
        assert!(c.validate().is_err());
    }

    #[test]
    fn shot_counts() {
        let b = Budgets { eps_f: 1e-2, eps_p: 1e-3, ..Budgets::default() };
        assert_eq!(b.shots_f(), 10_000);
        assert_eq!(b.shots_p(), 1_000_000);
        assert_eq!(b.matrix_tolerance(10.0), 1e-4);
    }
}
