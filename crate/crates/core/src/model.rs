//! Structured sensing matrices and measurement instances.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::linalg::{dot_h, norm_sqr};
use crate::{Error, Result, C64};

/// Contiguous band of `m` rows of the unitary `n`-point DFT starting at
/// frequency `z`, with columns rescaled to unit norm.
#[derive(Clone)]
pub struct PartialDft {
    n: usize,
    m: usize,
    z: usize,
    scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Full linear-convolution matrix of `h` with `n` input samples, keeping
/// every `d`-th output row and normalizing columns.
///
/// Row `r` of the sensing matrix is convolution output `phase + r·d`, where
/// `phase = len(h) - 1` is the first output that sees every tap. Column `k`
/// is non-zero on output rows `k ..= k + len(h) - 1`.
#[derive(Clone, Debug)]
pub struct SubsampledToeplitz {
    n: usize,
    m: usize,
    h: Vec<C64>,
    d: usize,
    phase: usize,
    inv_norms: Vec<f64>,
}

/// Explicit row-major matrix with unit-norm columns.
#[derive(Clone, Debug)]
pub struct DenseMatrix {
    n: usize,
    m: usize,
    entries: Vec<C64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MatrixSpec", into = "MatrixSpec")]
pub enum SensingMatrix {
    PartialDft(PartialDft),
    Toeplitz(SubsampledToeplitz),
    Dense(DenseMatrix),
}

/// Serialized form of a [`SensingMatrix`].
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSpec {
    PartialDft { n: usize, m: usize, z: usize },
    SubsampledToeplitz { n: usize, h: Vec<C64>, d: usize },
    Dense { m: usize, n: usize, entries: Vec<C64> },
}

impl fmt::Debug for PartialDft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartialDft")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("z", &self.z)
            .finish()
    }
}

/// `exp(-j 2π num / den)` with the exponent reduced exactly in integers.
fn twiddle(num: i128, den: usize) -> C64 {
    let r = num.rem_euclid(den as i128) as f64;
    C64::from_polar(1.0, -2.0 * PI * r / den as f64)
}

impl PartialDft {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// First sensed frequency.
    pub fn z(&self) -> usize {
        self.z
    }

    fn entry(&self, row: usize, col: usize) -> C64 {
        twiddle(((self.z + row) as i128) * col as i128, self.n) * self.scale
    }

    /// `ψ_k^H ψ_{k'}`; depends only on `(k' - k) mod n`.
    fn inner(&self, k: usize, kp: usize) -> C64 {
        let n = self.n as i64;
        let mut delta = (kp as i64 - k as i64).rem_euclid(n);
        if delta == 0 {
            return C64::new(1.0, 0.0);
        }
        if delta > n / 2 {
            delta -= n;
        }
        // (1/M) Σ_m exp(-jθ(Z+m)), θ = 2πΔ/N, summed in closed form.
        let theta = 2.0 * PI * delta as f64 / self.n as f64;
        let m = self.m as f64;
        let dirichlet = (m * theta / 2.0).sin() / (m * (theta / 2.0).sin());
        let centre = twiddle(
            (2 * self.z as i128 + self.m as i128 - 1) * delta as i128,
            2 * self.n,
        );
        centre * dirichlet
    }

    /// Magnitude of the column correlation at lag `delta`.
    pub fn correlation_at_lag(&self, delta: i64) -> f64 {
        let n = self.n as i64;
        let delta = delta.rem_euclid(n);
        if delta == 0 {
            return 1.0;
        }
        let m = self.m as f64;
        let arg = PI * delta as f64 / self.n as f64;
        ((arg * m).sin() / (m * arg.sin())).abs()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut buf = x.to_vec();
        self.forward.process(&mut buf);
        buf[self.z..self.z + self.m]
            .iter()
            .map(|v| v * self.scale)
            .collect()
    }

    fn adjoint_apply(&self, y: &[C64]) -> Vec<C64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.n];
        buf[self.z..self.z + self.m].copy_from_slice(y);
        self.inverse.process(&mut buf);
        buf.iter_mut().for_each(|v| *v *= self.scale);
        buf
    }

    /// Phase vector mapping column `k` onto column `k + delta`:
    /// `ψ_{k+Δ} = ψ_k ⊙ φ_Δ`.
    pub fn modulation(&self, delta: i64) -> Vec<C64> {
        (0..self.m)
            .map(|row| twiddle((self.z + row) as i128 * delta as i128, self.n))
            .collect()
    }
}

impl SubsampledToeplitz {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn taps(&self) -> &[C64] {
        &self.h
    }

    pub fn decimation(&self) -> usize {
        self.d
    }

    /// Rows on which column `k` can be non-zero.
    pub fn row_range(&self, k: usize) -> std::ops::Range<usize> {
        let lo = if k > self.phase {
            (k - self.phase).div_ceil(self.d)
        } else {
            0
        };
        let top = k + self.h.len() - 1;
        let hi = if top >= self.phase {
            ((top - self.phase) / self.d + 1).min(self.m)
        } else {
            0
        };
        lo..hi.max(lo)
    }

    fn raw(&self, row: usize, col: usize) -> C64 {
        let r = self.phase + row * self.d;
        if r >= col && r - col < self.h.len() {
            self.h[r - col]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    fn entry(&self, row: usize, col: usize) -> C64 {
        self.raw(row, col) * self.inv_norms[col]
    }

    fn inner(&self, k: usize, kp: usize) -> C64 {
        let a = self.row_range(k);
        let b = self.row_range(kp);
        let lo = a.start.max(b.start);
        let hi = a.end.min(b.end);
        let s: C64 = (lo..hi)
            .map(|r| self.raw(r, k).conj() * self.raw(r, kp))
            .sum();
        s * self.inv_norms[k] * self.inv_norms[kp]
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let lh = self.h.len();
        (0..self.m)
            .map(|row| {
                let r = self.phase + row * self.d;
                let lo = (r + 1).saturating_sub(lh);
                let hi = (r + 1).min(self.n);
                (lo..hi)
                    .map(|k| self.h[r - k] * self.inv_norms[k] * x[k])
                    .sum()
            })
            .collect()
    }

    fn adjoint_apply(&self, y: &[C64]) -> Vec<C64> {
        (0..self.n)
            .map(|k| {
                let s: C64 = self
                    .row_range(k)
                    .map(|row| self.raw(row, k).conj() * y[row])
                    .sum();
                s * self.inv_norms[k]
            })
            .collect()
    }
}

impl DenseMatrix {
    fn entry(&self, row: usize, col: usize) -> C64 {
        self.entries[row * self.n + col]
    }

    fn column(&self, k: usize) -> Vec<C64> {
        (0..self.m).map(|r| self.entry(r, k)).collect()
    }
}

impl SensingMatrix {
    /// Partial DFT with rows `z .. z + m` of the `n`-point DFT.
    pub fn partial_dft(n: usize, m: usize, z: usize) -> Result<Self> {
        if m == 0 || m >= n {
            return Err(Error::InvalidArgument(format!(
                "partial DFT needs 0 < M < N, got M={m}, N={n}"
            )));
        }
        if z > n - m {
            return Err(Error::InvalidArgument(format!(
                "band offset Z={z} exceeds N-M={}",
                n - m
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(SensingMatrix::PartialDft(PartialDft {
            n,
            m,
            z,
            scale: 1.0 / (m as f64).sqrt(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }))
    }

    /// Decimated convolution matrix; `m = ceil(n / d)`.
    pub fn subsampled_toeplitz(n: usize, h: Vec<C64>, d: usize) -> Result<Self> {
        if h.is_empty() || d == 0 || n == 0 {
            return Err(Error::InvalidArgument(
                "Toeplitz construction needs N ≥ 1, len(h) ≥ 1 and d ≥ 1".into(),
            ));
        }
        let mut t = SubsampledToeplitz {
            n,
            m: n.div_ceil(d),
            phase: h.len() - 1,
            h,
            d,
            inv_norms: vec![1.0; n],
        };
        for k in 0..n {
            let sq: f64 = t.row_range(k).map(|r| t.raw(r, k).norm_sqr()).sum();
            if sq == 0.0 {
                return Err(Error::ZeroColumn(k));
            }
            t.inv_norms[k] = 1.0 / sq.sqrt();
        }
        Ok(SensingMatrix::Toeplitz(t))
    }

    /// Dense matrix from row-major entries; columns are normalized.
    pub fn dense(m: usize, n: usize, mut entries: Vec<C64>) -> Result<Self> {
        if entries.len() != m * n {
            return Err(Error::DimensionMismatch {
                expected: m * n,
                got: entries.len(),
            });
        }
        for k in 0..n {
            let sq: f64 = (0..m).map(|r| entries[r * n + k].norm_sqr()).sum();
            if sq == 0.0 {
                return Err(Error::ZeroColumn(k));
            }
            let s = 1.0 / sq.sqrt();
            (0..m).for_each(|r| entries[r * n + k] *= s);
        }
        Ok(SensingMatrix::Dense(DenseMatrix { n, m, entries }))
    }

    /// Dense matrix with i.i.d. complex Gaussian entries, columns normalized.
    pub fn dense_gaussian<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Self> {
        let entries = (0..m * n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        Self::dense(m, n, entries)
    }

    pub fn n(&self) -> usize {
        match self {
            SensingMatrix::PartialDft(d) => d.n,
            SensingMatrix::Toeplitz(t) => t.n,
            SensingMatrix::Dense(d) => d.n,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            SensingMatrix::PartialDft(d) => d.m,
            SensingMatrix::Toeplitz(t) => t.m,
            SensingMatrix::Dense(d) => d.m,
        }
    }

    /// Short name used in reports.
    pub fn kind_name(&self) -> &'static str {
        match self {
            SensingMatrix::PartialDft(_) => "dft",
            SensingMatrix::Toeplitz(_) => "toeplitz",
            SensingMatrix::Dense(_) => "dense",
        }
    }

    pub fn as_partial_dft(&self) -> Option<&PartialDft> {
        match self {
            SensingMatrix::PartialDft(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_toeplitz(&self) -> Option<&SubsampledToeplitz> {
        match self {
            SensingMatrix::Toeplitz(t) => Some(t),
            _ => None,
        }
    }

    /// Whether column indices are cyclic (cluster intervals wrap mod N).
    pub fn wraps(&self) -> bool {
        matches!(self, SensingMatrix::PartialDft(_))
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        match self {
            SensingMatrix::PartialDft(d) => d.entry(row, col),
            SensingMatrix::Toeplitz(t) => t.entry(row, col),
            SensingMatrix::Dense(d) => d.entry(row, col),
        }
    }

    pub fn column(&self, k: usize) -> Vec<C64> {
        match self {
            SensingMatrix::Dense(d) => d.column(k),
            _ => (0..self.m()).map(|r| self.entry(r, k)).collect(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.m(), self.n(), |r, c| self.entry(r, c))
    }

    /// `ψ_k^H ψ_{k'}`.
    pub fn inner(&self, k: usize, kp: usize) -> C64 {
        match self {
            SensingMatrix::PartialDft(d) => d.inner(k, kp),
            SensingMatrix::Toeplitz(t) => t.inner(k, kp),
            SensingMatrix::Dense(d) => dot_h(&d.column(k), &d.column(kp)),
        }
    }

    /// `|ψ_k^H ψ_{k'}|`; exactly 1 on the diagonal.
    pub fn column_correlation(&self, k: usize, kp: usize) -> f64 {
        if k == kp {
            return 1.0;
        }
        match self {
            SensingMatrix::PartialDft(d) => d.correlation_at_lag(kp as i64 - k as i64),
            _ => self.inner(k, kp).norm(),
        }
    }

    /// Maximum correlation between distinct columns.
    pub fn coherence(&self) -> f64 {
        let n = self.n();
        match self {
            SensingMatrix::PartialDft(d) => (1..n as i64)
                .map(|lag| d.correlation_at_lag(lag))
                .fold(0.0, f64::max),
            SensingMatrix::Toeplitz(t) => {
                let reach = t.h.len() + t.d;
                (0..n)
                    .flat_map(|k| (k + 1..(k + reach).min(n)).map(move |kp| (k, kp)))
                    .map(|(k, kp)| t.inner(k, kp).norm())
                    .fold(0.0, f64::max)
            }
            SensingMatrix::Dense(_) => (0..n)
                .flat_map(|k| (k + 1..n).map(move |kp| (k, kp)))
                .map(|(k, kp)| self.inner(k, kp).norm())
                .fold(0.0, f64::max),
        }
    }

    /// `Ψx`.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        check_len(x.len(), self.n())?;
        Ok(match self {
            SensingMatrix::PartialDft(d) => d.apply(x),
            SensingMatrix::Toeplitz(t) => t.apply(x),
            SensingMatrix::Dense(d) => (0..d.m)
                .map(|r| (0..d.n).map(|c| d.entry(r, c) * x[c]).sum())
                .collect(),
        })
    }

    /// `Ψ^H y`: entry `k` is `ψ_k^H y`.
    pub fn adjoint_apply(&self, y: &[C64]) -> Result<Vec<C64>> {
        check_len(y.len(), self.m())?;
        Ok(match self {
            SensingMatrix::PartialDft(d) => d.adjoint_apply(y),
            SensingMatrix::Toeplitz(t) => t.adjoint_apply(y),
            SensingMatrix::Dense(d) => (0..d.n)
                .map(|c| (0..d.m).map(|r| d.entry(r, c).conj() * y[r]).sum())
                .collect(),
        })
    }

    /// `Ψ_S x_S` for a sparse vector given by its support and values.
    pub fn apply_sparse(&self, support: &[usize], values: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.m()];
        for (&k, &v) in support.iter().zip(values) {
            for (o, c) in out.iter_mut().zip(self.column(k)) {
                *o += c * v;
            }
        }
        out
    }

    pub fn spec(&self) -> MatrixSpec {
        match self {
            SensingMatrix::PartialDft(d) => MatrixSpec::PartialDft {
                n: d.n,
                m: d.m,
                z: d.z,
            },
            SensingMatrix::Toeplitz(t) => MatrixSpec::SubsampledToeplitz {
                n: t.n,
                h: t.h.clone(),
                d: t.d,
            },
            SensingMatrix::Dense(d) => MatrixSpec::Dense {
                m: d.m,
                n: d.n,
                entries: d.entries.clone(),
            },
        }
    }
}

fn check_len(got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

impl TryFrom<MatrixSpec> for SensingMatrix {
    type Error = Error;

    fn try_from(spec: MatrixSpec) -> Result<Self> {
        match spec {
            MatrixSpec::PartialDft { n, m, z } => Self::partial_dft(n, m, z),
            MatrixSpec::SubsampledToeplitz { n, h, d } => Self::subsampled_toeplitz(n, h, d),
            MatrixSpec::Dense { m, n, entries } => Self::dense(m, n, entries),
        }
    }
}

impl From<SensingMatrix> for MatrixSpec {
    fn from(m: SensingMatrix) -> Self {
        m.spec()
    }
}

/// Observation `y = Ψx + n` together with its noise level and, for
/// synthetic data, the ground truth.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasurementInstance {
    pub y: Vec<C64>,
    pub matrix: SensingMatrix,
    pub noise_variance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<C64>>,
}

impl MeasurementInstance {
    pub fn new(
        y: Vec<C64>,
        matrix: SensingMatrix,
        noise_variance: f64,
        truth: Option<Vec<C64>>,
    ) -> Result<Self> {
        let inst = MeasurementInstance {
            y,
            matrix,
            noise_variance,
            truth,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        check_len(self.y.len(), self.matrix.m())?;
        if !(self.noise_variance > 0.0) {
            return Err(Error::InvalidArgument("noise variance must be positive".into()));
        }
        if let Some(x) = &self.truth {
            check_len(x.len(), self.matrix.n())?;
        }
        Ok(())
    }

    /// Support of the ground truth, if present.
    pub fn support(&self) -> Option<Vec<usize>> {
        self.truth.as_ref().map(|x| {
            x.iter()
                .enumerate()
                .filter(|(_, v)| v.norm_sqr() > 0.0)
                .map(|(i, _)| i)
                .collect()
        })
    }

    pub fn truth_norm_sqr(&self) -> Option<f64> {
        self.truth.as_deref().map(norm_sqr)
    }
}
