//! Radial profiles used as interpolation bases.
//!
//! Global families (Gaussian, multiquadric, inverse multiquadric and the
//! three Matérn profiles) are parameterized by a shape `eta`; the Gaussian is
//! stored by its width `sigma = sqrt(1 / (2 eta^2))` so that
//! `phi(r) = exp(-r^2 / (2 sigma^2))`.
//!
//! Compact families are the minimal-degree Wendland functions
//! `(1 - r)_+^l q(r)`, hard-coded for the ten `(d, k)` pairs that are
//! tabulated, and evaluated at `r / alpha` so that `alpha` is the radius of
//! support.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("radius must be nonnegative, got {0}")]
    NegativeRadius(f64),
    #[error("no tabulated Wendland function for space dimension {dim} and smoothness C^{smoothness}")]
    UnsupportedWendland { dim: u32, smoothness: u32 },
    #[error("invalid {name}: {value} (must be positive and finite)")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("kernel descriptor is incomplete: {0}")]
    Descriptor(String),
}

/// The cutoff `w_+`: identity on nonnegatives, zero otherwise.
#[inline]
pub fn cutoff(w: f64) -> f64 {
    if w >= 0.0 {
        w
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Gaussian,
    Multiquadric,
    InverseMultiquadric,
    MaternC0,
    MaternC2,
    MaternC4,
    Wendland,
}

impl Family {
    pub fn is_compact(self) -> bool {
        matches!(self, Family::Wendland)
    }
}

/// One of the tabulated Wendland functions, indexed by the space dimension it
/// is positive definite on and its smoothness class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Wendland {
    D1C0,
    D1C2,
    D1C4,
    D3C0,
    D3C2,
    D3C4,
    D3C6,
    D5C0,
    D5C2,
    D5C4,
}

impl Wendland {
    pub const ALL: [Wendland; 10] = [
        Wendland::D1C0,
        Wendland::D1C2,
        Wendland::D1C4,
        Wendland::D3C0,
        Wendland::D3C2,
        Wendland::D3C4,
        Wendland::D3C6,
        Wendland::D5C0,
        Wendland::D5C2,
        Wendland::D5C4,
    ];

    pub fn new(dim: u32, smoothness: u32) -> Result<Self, KernelError> {
        use Wendland::*;
        Ok(match (dim, smoothness) {
            (1, 0) => D1C0,
            (1, 2) => D1C2,
            (1, 4) => D1C4,
            (3, 0) => D3C0,
            (3, 2) => D3C2,
            (3, 4) => D3C4,
            (3, 6) => D3C6,
            (5, 0) => D5C0,
            (5, 2) => D5C2,
            (5, 4) => D5C4,
            _ => return Err(KernelError::UnsupportedWendland { dim, smoothness }),
        })
    }

    /// Space dimension for which the function is positive definite.
    pub fn dim(self) -> u32 {
        use Wendland::*;
        match self {
            D1C0 | D1C2 | D1C4 => 1,
            D3C0 | D3C2 | D3C4 | D3C6 => 3,
            D5C0 | D5C2 | D5C4 => 5,
        }
    }

    pub fn smoothness(self) -> u32 {
        use Wendland::*;
        match self {
            D1C0 | D3C0 | D5C0 => 0,
            D1C2 | D3C2 | D5C2 => 2,
            D1C4 | D3C4 | D5C4 => 4,
            D3C6 => 6,
        }
    }

    /// Unit-support profile `((1 - r)_+)^l q(r)`.
    pub fn profile(self, r: f64) -> f64 {
        use Wendland::*;
        let t = cutoff(1.0 - r);
        if t == 0.0 {
            return 0.0;
        }
        match self {
            D1C0 => t,
            D1C2 => t.powi(3) * (3.0 * r + 1.0),
            D1C4 => t.powi(5) * (8.0 * r * r + 5.0 * r + 1.0),
            D3C0 => t.powi(2),
            D3C2 => t.powi(4) * (4.0 * r + 1.0),
            D3C4 => t.powi(6) * (35.0 * r * r + 18.0 * r + 3.0),
            D3C6 => t.powi(8) * (((32.0 * r + 25.0) * r + 8.0) * r + 1.0),
            D5C0 => t.powi(3),
            D5C2 => t.powi(5) * (5.0 * r + 1.0),
            D5C4 => t.powi(7) * (16.0 * r * r + 7.0 * r + 1.0),
        }
    }
}

/// A radial basis function with its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub enum Kernel {
    Gaussian { sigma: f64 },
    Multiquadric { eta: f64 },
    InverseMultiquadric { eta: f64 },
    MaternC0 { eta: f64 },
    MaternC2 { eta: f64 },
    MaternC4 { eta: f64 },
    Wendland { table: Wendland, alpha: f64 },
}

fn check_positive(name: &'static str, value: f64) -> Result<f64, KernelError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(KernelError::InvalidParameter { name, value })
    }
}

impl Kernel {
    pub fn gaussian(sigma: f64) -> Result<Self, KernelError> {
        Ok(Kernel::Gaussian { sigma: check_positive("sigma", sigma)? })
    }

    /// Gaussian `exp(-(eta r)^2)`, stored as `sigma = sqrt(1 / (2 eta^2))`.
    pub fn gaussian_eta(eta: f64) -> Result<Self, KernelError> {
        let eta = check_positive("eta", eta)?;
        Self::gaussian((0.5 / (eta * eta)).sqrt())
    }

    pub fn global(family: Family, eta: f64) -> Result<Self, KernelError> {
        let eta = check_positive("eta", eta)?;
        Ok(match family {
            Family::Gaussian => return Self::gaussian_eta(eta),
            Family::Multiquadric => Kernel::Multiquadric { eta },
            Family::InverseMultiquadric => Kernel::InverseMultiquadric { eta },
            Family::MaternC0 => Kernel::MaternC0 { eta },
            Family::MaternC2 => Kernel::MaternC2 { eta },
            Family::MaternC4 => Kernel::MaternC4 { eta },
            Family::Wendland => {
                return Err(KernelError::Descriptor("wendland kernels need d, k and alpha".into()))
            }
        })
    }

    pub fn wendland(dim: u32, smoothness: u32, alpha: f64) -> Result<Self, KernelError> {
        Ok(Kernel::Wendland {
            table: Wendland::new(dim, smoothness)?,
            alpha: check_positive("alpha", alpha)?,
        })
    }

    pub fn family(&self) -> Family {
        match self {
            Kernel::Gaussian { .. } => Family::Gaussian,
            Kernel::Multiquadric { .. } => Family::Multiquadric,
            Kernel::InverseMultiquadric { .. } => Family::InverseMultiquadric,
            Kernel::MaternC0 { .. } => Family::MaternC0,
            Kernel::MaternC2 { .. } => Family::MaternC2,
            Kernel::MaternC4 { .. } => Family::MaternC4,
            Kernel::Wendland { .. } => Family::Wendland,
        }
    }

    pub fn is_compact(&self) -> bool {
        self.family().is_compact()
    }

    /// Every listed family except the multiquadric is positive definite.
    /// Wendland functions only on spaces of dimension up to their table `d`.
    pub fn is_positive_definite(&self) -> bool {
        !matches!(self, Kernel::Multiquadric { .. })
    }

    /// Radius of support, infinite for global kernels.
    pub fn support(&self) -> f64 {
        match self {
            Kernel::Wendland { alpha, .. } => *alpha,
            _ => f64::INFINITY,
        }
    }

    pub fn phi0(&self) -> f64 {
        self.profile(0.0)
    }

    /// `phi(r)`, rejecting negative radii.
    pub fn eval(&self, r: f64) -> Result<f64, KernelError> {
        if r < 0.0 || r.is_nan() {
            return Err(KernelError::NegativeRadius(r));
        }
        Ok(self.profile(r))
    }

    /// `phi(r)` without validation; callers guarantee `r >= 0`.
    pub fn profile(&self, r: f64) -> f64 {
        match *self {
            Kernel::Gaussian { sigma } => (-r * r / (2.0 * sigma * sigma)).exp(),
            Kernel::Multiquadric { eta } => (1.0 + (eta * r).powi(2)).sqrt(),
            Kernel::InverseMultiquadric { eta } => 1.0 / (1.0 + (eta * r).powi(2)).sqrt(),
            Kernel::MaternC0 { eta } => (-eta * r).exp(),
            Kernel::MaternC2 { eta } => {
                let s = eta * r;
                (-s).exp() * (1.0 + s)
            }
            Kernel::MaternC4 { eta } => {
                let s = eta * r;
                (-s).exp() * (3.0 + 3.0 * s + s * s)
            }
            Kernel::Wendland { table, alpha } => table.profile(r / alpha),
        }
    }

    /// Builds a kernel from a descriptor record.
    pub fn from_spec(spec: &KernelSpec) -> Result<Self, KernelError> {
        match spec.family {
            Family::Gaussian => match (spec.sigma, spec.eta) {
                (Some(sigma), None) => Self::gaussian(sigma),
                (None, Some(eta)) => Self::gaussian_eta(eta),
                (Some(_), Some(_)) => {
                    Err(KernelError::Descriptor("gaussian takes either sigma or eta, not both".into()))
                }
                (None, None) => Err(KernelError::Descriptor("gaussian needs sigma or eta".into())),
            },
            Family::Wendland => {
                let (Some(d), Some(k), Some(alpha)) = (spec.d, spec.k, spec.alpha) else {
                    return Err(KernelError::Descriptor("wendland needs d, k and alpha".into()));
                };
                Self::wendland(d, k, alpha)
            }
            family => {
                let eta = spec
                    .eta
                    .ok_or_else(|| KernelError::Descriptor(format!("{family:?} needs eta")))?;
                Self::global(family, eta)
            }
        }
    }

    pub fn to_spec(&self) -> KernelSpec {
        let mut spec = KernelSpec {
            family: self.family(),
            eta: None,
            sigma: None,
            alpha: None,
            d: None,
            k: None,
        };
        match *self {
            Kernel::Gaussian { sigma } => spec.sigma = Some(sigma),
            Kernel::Multiquadric { eta }
            | Kernel::InverseMultiquadric { eta }
            | Kernel::MaternC0 { eta }
            | Kernel::MaternC2 { eta }
            | Kernel::MaternC4 { eta } => spec.eta = Some(eta),
            Kernel::Wendland { table, alpha } => {
                spec.alpha = Some(alpha);
                spec.d = Some(table.dim());
                spec.k = Some(table.smoothness());
            }
        }
        spec
    }
}

/// Kernel descriptor as it appears in configuration files:
/// `{family, eta | sigma, alpha, d, k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
}

impl TryFrom<KernelSpec> for Kernel {
    type Error = KernelError;

    fn try_from(spec: KernelSpec) -> Result<Self, Self::Error> {
        Kernel::from_spec(&spec)
    }
}

impl From<Kernel> for KernelSpec {
    fn from(kernel: Kernel) -> Self {
        kernel.to_spec()
    }
}
