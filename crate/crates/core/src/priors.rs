//! Sparsity priors, support-size caps and the correlation threshold.

use serde::{Deserialize, Serialize};
use statrs::function::erf;

use crate::{Error, Result};

/// Tail probability used for the per-cluster support cap.
pub const CLUSTER_TAIL: f64 = 1e-2;

/// Default pure-noise exceedance probability for the correlation threshold
/// (about three standard deviations of a real Gaussian).
pub const DEFAULT_TAIL_PROBABILITY: f64 = 0.00135;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    /// Active amplitudes are zero-mean complex Gaussian with known variance.
    Gaussian,
    /// Amplitude distribution unknown; expectations fall back to least squares.
    Unknown,
}

/// Bernoulli activation with rate `p` and amplitude variance `signal_variance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub p: f64,
    pub signal_variance: f64,
    pub kind: PriorKind,
    /// Half-width of the centered complex square used to draw amplitudes for
    /// the unknown prior. `None` matches the variance: `sqrt(1.5 σx²)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniform_halfwidth: Option<f64>,
}

impl PriorConfig {
    pub fn new(p: f64, signal_variance: f64, kind: PriorKind) -> Result<Self> {
        let cfg = PriorConfig {
            p,
            signal_variance,
            kind,
            uniform_halfwidth: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sparsity rate must lie in (0,1), got {}",
                self.p
            )));
        }
        if !(self.signal_variance > 0.0) {
            return Err(Error::InvalidArgument("signal variance must be positive".into()));
        }
        if let Some(a) = self.uniform_halfwidth {
            if !(a > 0.0) {
                return Err(Error::InvalidArgument("uniform half-width must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn halfwidth(&self) -> f64 {
        self.uniform_halfwidth
            .unwrap_or_else(|| (1.5 * self.signal_variance).sqrt())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub noise_variance: f64,
    #[serde(default = "default_tail")]
    pub tail_probability: f64,
}

fn default_tail() -> f64 {
    DEFAULT_TAIL_PROBABILITY
}

impl NoiseConfig {
    pub fn new(noise_variance: f64, tail_probability: f64) -> Result<Self> {
        if !(noise_variance > 0.0) {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        if !(tail_probability > 0.0 && tail_probability <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "tail probability must lie in (0, 0.5], got {tail_probability}"
            )));
        }
        Ok(NoiseConfig {
            noise_variance,
            tail_probability,
        })
    }

    pub fn threshold(&self) -> f64 {
        correlation_threshold(self.noise_variance, self.tail_probability)
    }
}

/// `ln p(S) = s ln p + (N - s) ln(1 - p)`.
pub fn support_prior_log(s: usize, n: usize, p: f64) -> f64 {
    debug_assert!(s <= n);
    s as f64 * p.ln() + (n - s) as f64 * (-p).ln_1p()
}

pub fn erfc(x: f64) -> f64 {
    erf::erfc(x)
}

/// Inverse complementary error function on `(0, 2)`.
pub fn erfc_inv(v: f64) -> Result<f64> {
    if !(v > 0.0 && v < 2.0) {
        return Err(Error::InvalidArgument(format!(
            "erfc_inv argument must lie in (0,2), got {v}"
        )));
    }
    let mut y = erf::erfc_inv(v);
    // Newton polish: d/dy erfc(y) = -2/sqrt(pi) exp(-y²)
    for _ in 0..3 {
        let slope = -std::f64::consts::FRAC_2_SQRT_PI * (-y * y).exp();
        if slope == 0.0 {
            break;
        }
        let step = (erf::erfc(y) - v) / slope;
        y -= step;
        if step.abs() <= 1e-16 * y.abs().max(1e-300) {
            break;
        }
    }
    Ok(y)
}

/// Smallest `P` whose Gaussian-approximated Binomial tail
/// `½ erfc((P - Np)/sqrt(2Np(1-p)))` is at most `eps`.
pub fn max_support_size(n: usize, p: f64, eps: f64) -> Result<usize> {
    if !(n as f64 * p > 0.0) || !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(
            "max_support_size needs N·p > 0 and 0 < ε < 1".into(),
        ));
    }
    let mean = n as f64 * p;
    let spread = (2.0 * mean * (1.0 - p)).sqrt();
    let tail = |size: f64| 0.5 * erfc((size - mean) / spread);
    let mut size = (mean + erfc_inv(2.0 * eps)? * spread).ceil().max(0.0);
    // settle rounding at the boundary
    while size > 0.0 && tail(size - 1.0) <= eps {
        size -= 1.0;
    }
    while tail(size) > eps {
        size += 1.0;
    }
    Ok((size as usize).min(n))
}

/// Per-cluster support cap `⌈erfc⁻¹(10⁻²)·sqrt(2 L p (1-p)) + L p⌉`, at least 1.
pub fn cluster_max_support(len: usize, p: f64) -> usize {
    let len_f = len as f64;
    let q = erfc_inv(CLUSTER_TAIL).expect("constant in range");
    let cap = (q * (2.0 * len_f * p * (1.0 - p)).sqrt() + len_f * p).ceil();
    (cap as usize).max(1)
}

/// `κ = sqrt(2σn²)·erfc⁻¹(2 p_n)`.
pub fn correlation_threshold(noise_variance: f64, tail_probability: f64) -> f64 {
    let q = erfc_inv(2.0 * tail_probability).unwrap_or(0.0);
    (2.0 * noise_variance).sqrt() * q
}
