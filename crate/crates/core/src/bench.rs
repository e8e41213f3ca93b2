//! Synthetic instances, NMSE scoring and seeded parameter sweeps.
//!
//! Every trial draws its instance from a ChaCha8 stream seeded with
//! [`trial_seed`]`(base, coordinate, trial)`, where `coordinate` is the
//! row-major index of `(m, p, snr_db)` in the sweep grid. The cluster
//! length is not part of the coordinate, so all lengths and all algorithms
//! of one trial see the same `(y, Ψ, x)`.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::baselines::{mmse_refine, omp_recover, OmpConfig, DEFAULT_REFINE_CAP};
use crate::bayes::{exhaustive_mmse, MAX_EXHAUSTIVE_N};
use crate::linalg::norm_sqr;
use crate::model::{MeasurementInstance, SensingMatrix};
use crate::oc::{oc_recover, FormationMode, OcConfig};
use crate::priors::{PriorConfig, PriorKind};
use crate::{Error, Result, C64};

pub const CSV_HEADER: &str =
    "algorithm,matrix,prior,N,M,p,snr_db,L,trial,seed,nmse,nmse_db,runtime_ms,clusters,hypotheses,error";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixKind {
    /// Rows `z .. z + M` of the `N`-point DFT.
    PartialDft {
        #[serde(default)]
        z: usize,
    },
    /// Random complex Gaussian taps, decimated by `decimation`; `M` is
    /// implied by `N` and the decimation.
    SubsampledToeplitz { taps: usize, decimation: usize },
    /// I.i.d. complex Gaussian entries, fresh per instance.
    DenseGaussian,
}

impl MatrixKind {
    pub fn name(&self) -> &'static str {
        match self {
            MatrixKind::PartialDft { .. } => "partial_dft",
            MatrixKind::SubsampledToeplitz { .. } => "subsampled_toeplitz",
            MatrixKind::DenseGaussian => "dense_gaussian",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Oc,
    OcFixedL,
    Omp,
    OmpRefined,
    Oracle,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Oc => "oc",
            Algorithm::OcFixedL => "oc_fixed_l",
            Algorithm::Omp => "omp",
            Algorithm::OmpRefined => "omp_refined",
            Algorithm::Oracle => "oracle",
        }
    }

    pub fn uses_clusters(self) -> bool {
        matches!(self, Algorithm::Oc | Algorithm::OcFixedL)
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidArgument(format!("unknown algorithm `{s}`")))
    }
}

/// Accepts either a scalar or a list.
fn one_or_many<'de, D, T>(de: D) -> std::result::Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(de)? {
        OneOrMany::One(v) => vec![v],
        OneOrMany::Many(v) => v,
    })
}

fn opt_one_or_many<'de, D, T>(de: D) -> std::result::Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    one_or_many(de).map(Some)
}

fn default_signal_variance() -> f64 {
    1.0
}

fn default_cluster_len() -> Vec<usize> {
    vec![32]
}

fn default_redraws() -> usize {
    1000
}

/// A sweep over `M × p × SNR` (and cluster length for the OC variants).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    #[serde(rename = "N")]
    pub n: usize,
    /// Measurement counts; ignored for Toeplitz matrices.
    #[serde(rename = "M", default, deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    /// Alternative to `M`: undersampling ratios `N/M`.
    #[serde(default, deserialize_with = "opt_one_or_many", skip_serializing_if = "Option::is_none")]
    pub undersampling: Option<Vec<f64>>,
    #[serde(deserialize_with = "one_or_many")]
    pub p: Vec<f64>,
    #[serde(deserialize_with = "one_or_many")]
    pub snr_db: Vec<f64>,
    #[serde(default = "default_cluster_len", deserialize_with = "one_or_many")]
    pub cluster_len: Vec<usize>,
    pub matrix: MatrixKind,
    pub prior: PriorKind,
    #[serde(default = "default_signal_variance")]
    pub signal_variance: f64,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Overrides for the OC pipeline; `cluster_len` and `mode` are set per
    /// row from the sweep and the algorithm.
    #[serde(default)]
    pub oc: OcConfig,
    /// Report wall-clock times (makes the CSV non-reproducible).
    #[serde(default)]
    pub timing: bool,
    /// Redraws allowed when the sparse truth comes out all zero.
    #[serde(default = "default_redraws")]
    pub max_redraws: usize,
}

impl ExperimentSpec {
    /// The defaults of the reference experiment: `N = 800`, `M = 200`,
    /// `p = 0.01`, 30 dB, partial DFT, Gaussian prior.
    pub fn reference() -> Self {
        ExperimentSpec {
            n: 800,
            m: Some(vec![200]),
            undersampling: None,
            p: vec![0.01],
            snr_db: vec![30.0],
            cluster_len: vec![32],
            matrix: MatrixKind::PartialDft { z: 0 },
            prior: PriorKind::Gaussian,
            signal_variance: 1.0,
            trials: 1,
            seed: 0,
            algorithms: vec![Algorithm::Oc, Algorithm::Omp, Algorithm::OmpRefined],
            oc: OcConfig::default(),
            timing: false,
            max_redraws: default_redraws(),
        }
    }

    /// Measurement counts swept, resolved from `M`, the undersampling
    /// ratios or the Toeplitz decimation.
    pub fn m_values(&self) -> Result<Vec<usize>> {
        if let MatrixKind::SubsampledToeplitz { decimation, .. } = self.matrix {
            if decimation == 0 {
                return Err(Error::InvalidArgument("decimation must be at least 1".into()));
            }
            return Ok(vec![self.n.div_ceil(decimation)]);
        }
        match (&self.m, &self.undersampling) {
            (Some(m), None) => Ok(m.clone()),
            (None, Some(u)) => u
                .iter()
                .map(|&r| {
                    if r >= 1.0 {
                        Ok((self.n as f64 / r).round() as usize)
                    } else {
                        Err(Error::InvalidArgument(format!("undersampling ratio {r} below 1")))
                    }
                })
                .collect(),
            (None, None) => Ok(vec![self.n / 4]),
            (Some(_), Some(_)) => Err(Error::InvalidArgument(
                "give either M or undersampling, not both".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be at least 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("no algorithms requested".into()));
        }
        for &m in &self.m_values()? {
            if m == 0 || m > self.n {
                return Err(Error::InvalidArgument(format!("M={m} invalid for N={}", self.n)));
            }
            if matches!(self.matrix, MatrixKind::PartialDft { .. }) && m >= self.n {
                return Err(Error::InvalidArgument("partial DFT needs M < N".into()));
            }
        }
        for &p in &self.p {
            PriorConfig::new(p, self.signal_variance, self.prior)?;
        }
        if self.snr_db.iter().any(|s| !s.is_finite()) || self.snr_db.is_empty() || self.p.is_empty() {
            return Err(Error::InvalidArgument("p and snr_db need finite values".into()));
        }
        if self.cluster_len.is_empty() || self.cluster_len.contains(&0) {
            return Err(Error::InvalidArgument("cluster lengths must be at least 1".into()));
        }
        self.oc.validate()
    }
}

/// Parameters of a single synthetic instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceParams {
    pub n: usize,
    pub m: usize,
    pub matrix: MatrixKind,
    pub prior: PriorConfig,
    pub snr_db: f64,
    pub max_redraws: usize,
}

impl InstanceParams {
    /// `σn² = N p σx² / (M 10^{SNR/10})`.
    pub fn noise_variance(&self) -> f64 {
        self.n as f64 * self.prior.p * self.prior.signal_variance
            / (self.m as f64 * 10f64.powf(self.snr_db / 10.0))
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedInstance {
    pub instance: MeasurementInstance,
    /// All-zero truths rejected before this draw.
    pub rejections: usize,
}

fn complex_gaussian<R: Rng>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    C64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s)
}

/// Draws `(Ψ, x, y)`. The truth is redrawn while it is all zero, at most
/// `max_redraws` times; the last draw is returned either way.
pub fn generate_instance(params: &InstanceParams, seed: u64) -> Result<GeneratedInstance> {
    params.prior.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m) = (params.n, params.m);
    let matrix = match &params.matrix {
        MatrixKind::PartialDft { z } => SensingMatrix::partial_dft(n, m, *z)?,
        MatrixKind::SubsampledToeplitz { taps, decimation } => {
            let h = (0..*taps).map(|_| complex_gaussian(&mut rng, 1.0)).collect();
            SensingMatrix::subsampled_toeplitz(n, h, *decimation)?
        }
        MatrixKind::DenseGaussian => SensingMatrix::dense_gaussian(m, n, &mut rng)?,
    };
    let m = matrix.m();
    let prior = &params.prior;
    let half = prior.halfwidth();
    let mut rejections = 0;
    let x = loop {
        let x: Vec<C64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < prior.p {
                    match prior.kind {
                        PriorKind::Gaussian => complex_gaussian(&mut rng, prior.signal_variance),
                        PriorKind::Unknown => {
                            C64::new(rng.random_range(-half..half), rng.random_range(-half..half))
                        }
                    }
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        if x.iter().any(|v| v.norm_sqr() > 0.0) || rejections >= params.max_redraws {
            break x;
        }
        rejections += 1;
    };
    let noise_variance = InstanceParams { m, ..params.clone() }.noise_variance();
    let mut y = matrix.apply(&x)?;
    for v in y.iter_mut() {
        *v += complex_gaussian(&mut rng, noise_variance);
    }
    Ok(GeneratedInstance {
        instance: MeasurementInstance::new(y, matrix, noise_variance, Some(x))?,
        rejections,
    })
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix(splitmix(base) ^ splitmix(coordinate << 32 | trial))`.
pub fn trial_seed(base: u64, coordinate: usize, trial: usize) -> u64 {
    splitmix64(splitmix64(base) ^ splitmix64(((coordinate as u64) << 32) | (trial as u64 & 0xFFFF_FFFF)))
}

/// `‖x̂ - x‖² / ‖x‖²`.
pub fn nmse_contribution(estimate: &[C64], truth: &[C64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    let denom = norm_sqr(truth);
    if denom == 0.0 {
        return Err(Error::InvalidArgument("truth has zero norm".into()));
    }
    let err: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / denom)
}

/// Mean of per-trial contributions.
pub fn nmse(contributions: &[f64]) -> Result<f64> {
    if contributions.is_empty() {
        return Err(Error::InvalidArgument("no trials".into()));
    }
    Ok(contributions.iter().sum::<f64>() / contributions.len() as f64)
}

pub fn to_db(v: f64) -> f64 {
    10.0 * v.log10()
}

/// Estimate produced by one algorithm on one instance.
#[derive(Clone, Debug)]
pub struct AlgorithmOutput {
    pub estimate: Vec<C64>,
    pub clusters: Option<usize>,
    pub hypotheses: Option<usize>,
}

/// Runs `alg`; `cluster_len` applies to the OC variants only.
pub fn run_algorithm(
    alg: Algorithm,
    instance: &MeasurementInstance,
    prior: &PriorConfig,
    oc: &OcConfig,
    cluster_len: usize,
) -> Result<AlgorithmOutput> {
    let (y, m, sn) = (&instance.y, &instance.matrix, instance.noise_variance);
    match alg {
        Algorithm::Oc | Algorithm::OcFixedL => {
            let config = OcConfig {
                cluster_len,
                budget: oc.budget.max(cluster_len),
                mode: if alg == Algorithm::Oc {
                    FormationMode::VariableLength
                } else {
                    FormationMode::FixedLength
                },
                ..oc.clone()
            };
            let r = oc_recover(y, m, prior, sn, &config)?;
            Ok(AlgorithmOutput {
                estimate: r.mmse,
                clusters: Some(r.clusters.len()),
                hypotheses: Some(r.diagnostics.hypotheses),
            })
        }
        Algorithm::Omp | Algorithm::OmpRefined => {
            let cfg = OmpConfig::for_problem(m.n(), m.m(), prior.p, sn)?;
            let r = omp_recover(y, m, cfg.max_iter, cfg.residual_tol)?;
            let estimate = if alg == Algorithm::Omp {
                r.estimate(m.n())
            } else {
                mmse_refine(y, m, &r.support, prior, sn, DEFAULT_REFINE_CAP)?
            };
            Ok(AlgorithmOutput {
                estimate,
                clusters: None,
                hypotheses: None,
            })
        }
        Algorithm::Oracle => {
            if m.n() > MAX_EXHAUSTIVE_N {
                return Err(Error::TooLarge {
                    n: m.n(),
                    max: MAX_EXHAUSTIVE_N,
                });
            }
            let (estimate, post) = exhaustive_mmse(y, m, prior, sn)?;
            Ok(AlgorithmOutput {
                estimate,
                clusters: None,
                hypotheses: Some(post.len()),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub algorithm: Algorithm,
    pub matrix: String,
    pub prior: PriorKind,
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub snr_db: f64,
    pub cluster_len: Option<usize>,
    pub trial: usize,
    pub seed: u64,
    pub nmse: Option<f64>,
    pub runtime_ms: f64,
    pub clusters: Option<usize>,
    pub hypotheses: Option<usize>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub algorithm: Algorithm,
    pub matrix: String,
    pub prior: PriorKind,
    pub n: usize,
    pub m: usize,
    pub p: f64,
    pub snr_db: f64,
    pub cluster_len: Option<usize>,
    /// Trials that produced an estimate.
    pub trials: usize,
    pub nmse: Option<f64>,
    pub runtime_ms: f64,
    pub clusters: Option<f64>,
    pub hypotheses: Option<f64>,
    pub failures: usize,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutput {
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<AggregateRecord>,
    /// All-zero truths redrawn across the sweep.
    pub rejections: usize,
    pub timing: bool,
}

#[derive(Clone, Copy)]
struct Coordinate {
    m: usize,
    p: f64,
    snr_db: f64,
}

fn coordinates(spec: &ExperimentSpec) -> Result<Vec<Coordinate>> {
    let mut out = Vec::new();
    for &m in &spec.m_values()? {
        for &p in &spec.p {
            for &snr_db in &spec.snr_db {
                out.push(Coordinate { m, p, snr_db });
            }
        }
    }
    Ok(out)
}

/// Runs every algorithm on every `(coordinate, trial)` instance. Trials run
/// in parallel; the output order is fixed by `(coordinate, trial)`.
pub fn run_sweep(spec: &ExperimentSpec) -> Result<SweepOutput> {
    spec.validate()?;
    let coords = coordinates(spec)?;
    let jobs: Vec<(usize, usize)> = (0..coords.len())
        .flat_map(|c| (0..spec.trials).map(move |t| (c, t)))
        .collect();
    let per_job: Vec<(Vec<TrialRecord>, usize)> = jobs
        .par_iter()
        .map(|&(c, t)| run_trial(spec, c, coords[c], t))
        .collect::<Result<_>>()?;
    let rejections = per_job.iter().map(|j| j.1).sum();
    let records: Vec<TrialRecord> = per_job.into_iter().flat_map(|j| j.0).collect();
    let aggregates = aggregate(spec, &coords, &records);
    Ok(SweepOutput {
        records,
        aggregates,
        rejections,
        timing: spec.timing,
    })
}

fn run_trial(
    spec: &ExperimentSpec,
    coordinate: usize,
    c: Coordinate,
    trial: usize,
) -> Result<(Vec<TrialRecord>, usize)> {
    let seed = trial_seed(spec.seed, coordinate, trial);
    let prior = PriorConfig {
        p: c.p,
        signal_variance: spec.signal_variance,
        kind: spec.prior,
        uniform_halfwidth: None,
    };
    let params = InstanceParams {
        n: spec.n,
        m: c.m,
        matrix: spec.matrix.clone(),
        prior: prior.clone(),
        snr_db: c.snr_db,
        max_redraws: spec.max_redraws,
    };
    let generated = generate_instance(&params, seed)?;
    let inst = &generated.instance;
    let truth = inst.truth.as_deref().expect("synthetic truth");
    let mut rows = Vec::new();
    for &alg in &spec.algorithms {
        let lens: Vec<Option<usize>> = if alg.uses_clusters() {
            spec.cluster_len.iter().map(|&l| Some(l)).collect()
        } else {
            vec![None]
        };
        for len in lens {
            let started = Instant::now();
            let out = run_algorithm(alg, inst, &prior, &spec.oc, len.unwrap_or(spec.oc.cluster_len));
            let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
            let (nmse, clusters, hypotheses, error) =
                match out.and_then(|o| nmse_contribution(&o.estimate, truth).map(|e| (e, o))) {
                    Ok((e, o)) => (Some(e), o.clusters, o.hypotheses, None),
                    Err(e) => (None, None, None, Some(e.to_string())),
                };
            rows.push(TrialRecord {
                algorithm: alg,
                matrix: spec.matrix.name().to_string(),
                prior: spec.prior,
                n: spec.n,
                m: inst.matrix.m(),
                p: c.p,
                snr_db: c.snr_db,
                cluster_len: len,
                trial,
                seed,
                nmse,
                runtime_ms,
                clusters,
                hypotheses,
                error,
            });
        }
    }
    Ok((rows, generated.rejections))
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, k) = v.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    (k > 0).then(|| s / k as f64)
}

fn aggregate(spec: &ExperimentSpec, coords: &[Coordinate], records: &[TrialRecord]) -> Vec<AggregateRecord> {
    let mut out = Vec::new();
    for c in coords {
        for &alg in &spec.algorithms {
            let lens: Vec<Option<usize>> = if alg.uses_clusters() {
                spec.cluster_len.iter().map(|&l| Some(l)).collect()
            } else {
                vec![None]
            };
            for len in lens {
                let rows: Vec<&TrialRecord> = records
                    .iter()
                    .filter(|r| {
                        r.algorithm == alg
                            && r.cluster_len == len
                            && r.p == c.p
                            && r.snr_db == c.snr_db
                            && (r.m == c.m || matches!(spec.matrix, MatrixKind::SubsampledToeplitz { .. }))
                    })
                    .collect();
                let ok: Vec<&&TrialRecord> = rows.iter().filter(|r| r.nmse.is_some()).collect();
                out.push(AggregateRecord {
                    algorithm: alg,
                    matrix: spec.matrix.name().to_string(),
                    prior: spec.prior,
                    n: spec.n,
                    m: rows.first().map_or(c.m, |r| r.m),
                    p: c.p,
                    snr_db: c.snr_db,
                    cluster_len: len,
                    trials: ok.len(),
                    nmse: mean(ok.iter().filter_map(|r| r.nmse)),
                    runtime_ms: mean(rows.iter().map(|r| r.runtime_ms)).unwrap_or(0.0),
                    clusters: mean(ok.iter().filter_map(|r| r.clusters.map(|v| v as f64))),
                    hypotheses: mean(ok.iter().filter_map(|r| r.hypotheses.map(|v| v as f64))),
                    failures: rows.len() - ok.len(),
                });
            }
        }
    }
    out
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl SweepOutput {
    /// Per-trial rows followed by one aggregate row (`trial = all`) per
    /// algorithm, coordinate and cluster length.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(CSV_HEADER);
        s.push('\n');
        let time = |ms: f64| if self.timing { ms.to_string() } else { String::new() };
        for r in &self.records {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.algorithm.name(),
                r.matrix,
                prior_name(r.prior),
                r.n,
                r.m,
                r.p,
                r.snr_db,
                opt(r.cluster_len),
                r.trial,
                r.seed,
                opt(r.nmse),
                opt(r.nmse.map(to_db)),
                time(r.runtime_ms),
                opt(r.clusters),
                opt(r.hypotheses),
                csv_field(r.error.as_deref().unwrap_or("")),
            );
        }
        for a in &self.aggregates {
            let error = if a.failures > 0 {
                format!("{} of {} trials failed", a.failures, a.failures + a.trials)
            } else {
                String::new()
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},all,,{},{},{},{},{},{}",
                a.algorithm.name(),
                a.matrix,
                prior_name(a.prior),
                a.n,
                a.m,
                a.p,
                a.snr_db,
                opt(a.cluster_len),
                opt(a.nmse),
                opt(a.nmse.map(to_db)),
                time(a.runtime_ms),
                opt(a.clusters),
                opt(a.hypotheses),
                error,
            );
        }
        s
    }
}

fn prior_name(k: PriorKind) -> &'static str {
    match k {
        PriorKind::Gaussian => "gaussian",
        PriorKind::Unknown => "unknown",
    }
}

/// On-disk instance: the measurement plus the prior it was drawn under.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(flatten)]
    pub instance: MeasurementInstance,
    pub prior: PriorConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kind: PriorKind, p: f64) -> InstanceParams {
        InstanceParams {
            n: 64,
            m: 16,
            matrix: MatrixKind::PartialDft { z: 0 },
            prior: PriorConfig::new(p, 2.0, kind).unwrap(),
            snr_db: 20.0,
            max_redraws: 1000,
        }
    }

    #[test]
    fn noise_level_from_snr() {
        let p = InstanceParams {
            n: 800,
            m: 200,
            prior: PriorConfig::new(0.01, 1.0, PriorKind::Gaussian).unwrap(),
            snr_db: 30.0,
            ..params(PriorKind::Gaussian, 0.1)
        };
        assert!((p.noise_variance() - 0.04 / 1000.0).abs() < 1e-15);
    }

    #[test]
    fn same_seed_same_instance() {
        let a = generate_instance(&params(PriorKind::Gaussian, 0.1), 7).unwrap();
        let b = generate_instance(&params(PriorKind::Gaussian, 0.1), 7).unwrap();
        assert_eq!(a.instance.y, b.instance.y);
        assert_eq!(a.instance.truth, b.instance.truth);
        let c = generate_instance(&params(PriorKind::Gaussian, 0.1), 8).unwrap();
        assert_ne!(a.instance.y, c.instance.y);
    }

    #[test]
    fn zero_truth_gives_pure_noise() {
        let mut p = params(PriorKind::Gaussian, 1e-12);
        p.max_redraws = 0;
        let g = generate_instance(&p, 1).unwrap();
        assert_eq!(g.instance.truth_norm_sqr(), Some(0.0));
        assert!(g.instance.y.iter().all(|v| v.norm() > 0.0));
    }

    #[test]
    fn redraws_are_counted() {
        let mut p = params(PriorKind::Gaussian, 0.002);
        p.max_redraws = 10_000;
        let total: usize = (0..20).map(|s| generate_instance(&p, s).unwrap().rejections).sum();
        // P(all zero) = 0.998^64 ≈ 0.88, so redraws are common
        assert!(total > 20);
        for s in 0..20 {
            assert!(generate_instance(&p, s).unwrap().instance.truth_norm_sqr().unwrap() > 0.0);
        }
    }

    #[test]
    fn amplitude_moments() {
        for kind in [PriorKind::Gaussian, PriorKind::Unknown] {
            let mut p = params(kind, 0.25);
            p.max_redraws = 0;
            let (mut energy, mut count) = (0.0, 0usize);
            for s in 0..10_000 / 64 * 4 {
                let x = generate_instance(&p, s as u64).unwrap().instance.truth.unwrap();
                energy += norm_sqr(&x);
                count += x.len();
            }
            let est = energy / (count as f64 * 0.25);
            assert!((est - 2.0).abs() < 0.1, "{kind:?}: {est}");
        }
    }

    #[test]
    fn nmse_examples() {
        let x = vec![C64::new(1.0, 0.0), C64::new(0.0, 2.0)];
        assert_eq!(nmse_contribution(&x, &x).unwrap(), 0.0);
        assert_eq!(nmse_contribution(&[C64::new(0.0, 0.0); 2], &x).unwrap(), 1.0);
        assert_eq!(nmse(&[0.5, 1.5]).unwrap(), 1.0);
        assert!(nmse(&[]).is_err());
        assert!(nmse_contribution(&x, &[C64::new(0.0, 0.0); 2]).is_err());
        assert!((to_db(0.1) + 10.0).abs() < 1e-12);
    }

    #[test]
    fn seeds_differ_across_keys() {
        let mut seen = std::collections::HashSet::new();
        for c in 0..20 {
            for t in 0..50 {
                assert!(seen.insert(trial_seed(3, c, t)));
            }
        }
        assert_ne!(trial_seed(0, 0, 0), trial_seed(1, 0, 0));
    }

    fn small_spec() -> ExperimentSpec {
        ExperimentSpec {
            n: 64,
            m: Some(vec![16]),
            p: vec![0.05],
            snr_db: vec![20.0],
            cluster_len: vec![8],
            trials: 1,
            algorithms: vec![Algorithm::Omp],
            ..ExperimentSpec::reference()
        }
    }

    #[test]
    fn one_trial_one_aggregate() {
        let out = run_sweep(&small_spec()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.aggregates.len(), 1);
        let csv = out.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("omp,partial_dft,gaussian,64,16,0.05,20,,0,"));
        assert!(lines[2].contains(",all,"));
        assert_eq!(lines[1].split(',').count(), 16);
    }

    #[test]
    fn sweep_is_reproducible() {
        let spec = ExperimentSpec {
            trials: 6,
            snr_db: vec![10.0, 20.0],
            cluster_len: vec![4, 8],
            algorithms: vec![Algorithm::Oc, Algorithm::OcFixedL, Algorithm::OmpRefined],
            ..small_spec()
        };
        let a = run_sweep(&spec).unwrap().to_csv();
        let b = run_sweep(&spec).unwrap().to_csv();
        assert_eq!(a, b);
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = serial.install(|| run_sweep(&spec).unwrap().to_csv());
        assert_eq!(a, c);
        // 2 coordinates × 6 trials × (2 + 2 + 1) rows
        assert_eq!(run_sweep(&spec).unwrap().records.len(), 60);
    }

    #[test]
    fn algorithms_share_the_instance() {
        let spec = ExperimentSpec {
            algorithms: vec![Algorithm::Omp, Algorithm::OmpRefined],
            ..small_spec()
        };
        let out = run_sweep(&spec).unwrap();
        assert_eq!(out.records[0].seed, out.records[1].seed);
    }

    #[test]
    fn oracle_limited_to_small_problems() {
        let spec = ExperimentSpec {
            algorithms: vec![Algorithm::Oracle],
            ..small_spec()
        };
        let out = run_sweep(&spec).unwrap();
        assert!(out.records[0].error.is_some());
        let small = ExperimentSpec {
            n: 16,
            m: Some(vec![8]),
            p: vec![0.1],
            ..spec
        };
        let out = run_sweep(&small).unwrap();
        assert!(out.records[0].nmse.is_some());
    }

    #[test]
    fn spec_accepts_scalars_and_lists() {
        let json = r#"{"N": 128, "undersampling": 4, "p": [0.01, 0.02], "snr_db": 25,
            "matrix": {"kind": "partial_dft"}, "prior": "gaussian", "trials": 3,
            "algorithms": ["oc", "omp_refined"]}"#;
        let spec: ExperimentSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.m_values().unwrap(), vec![32]);
        assert_eq!(spec.p.len(), 2);
        assert_eq!(spec.snr_db, vec![25.0]);
        assert_eq!(spec.cluster_len, vec![32]);
        spec.validate().unwrap();
        let bad = ExperimentSpec { trials: 0, ..spec };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn instance_file_round_trip() {
        let g = generate_instance(&params(PriorKind::Unknown, 0.1), 3).unwrap();
        let file = InstanceFile {
            instance: g.instance,
            prior: params(PriorKind::Unknown, 0.1).prior,
        };
        let text = serde_json::to_string(&file).unwrap();
        let back: InstanceFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.instance.y, file.instance.y);
        assert_eq!(back.prior, file.prior);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["matrix", "y", "noise_variance", "truth", "prior"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
