//! Small-dimension equivalence suites run by the `oracle-check` command.
//! Each suite compares a fast path against a slow, independent one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::bayes::{
    exhaustive_mmse, gaussian_cond_expectation, gaussian_log_likelihood, mmse_over_supports, posterior_weights,
    unknown_log_likelihood, blue_cond_expectation, Hypothesis,
};
use crate::linalg::dot_h;
use crate::model::SensingMatrix;
use crate::oc::{oc_recover_with_clusters, Cluster, ClusterSet, FormationMode, OcConfig};
use crate::priors::{cluster_max_support, erfc, erfc_inv, support_prior_log, PriorConfig, PriorKind};
use crate::recursive::{modulate_observation, Chain, ColumnCache, GaussianChainState, UnknownChainState};
use crate::{Result, C64};

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed deviation.
    pub deviation: f64,
    pub tolerance: f64,
}

fn cvec(rng: &mut ChaCha8Rng, len: usize, variance: f64) -> Vec<C64> {
    let s = (variance / 2.0).sqrt();
    (0..len)
        .map(|_| C64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn result(name: &'static str, deviation: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        passed: deviation <= tolerance,
        deviation,
        tolerance,
    }
}

/// Chain recursions against the direct kernels on random dense problems.
pub fn chain_equivalence(instances: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let m = SensingMatrix::dense_gaussian(32, 8, &mut rng)?;
        let y = cvec(&mut rng, 32, 1.0);
        let (sx, sn) = (rng.random_range(0.5..2.0), rng.random_range(0.05..1.0));
        let cache = ColumnCache::new(&m, (0..8).collect(), &y)?;
        let mut g = GaussianChainState::new(&cache, sx, sn);
        let mut u = UnknownChainState::new(&cache, sn);
        let mut order: Vec<usize> = (0..8).collect();
        for i in 0..4 {
            let j = rng.random_range(i..8);
            order.swap(i, j);
        }
        for depth in 1..=4 {
            let a = order[depth - 1];
            g = g.extend(&cache, a)?;
            u = u.extend(&cache, a)?;
            let s = &order[..depth];
            worst = worst
                .max(rel(g.log_likelihood(), gaussian_log_likelihood(&y, s, &m, sx, sn)?))
                .max(max_diff(g.expectation(), &gaussian_cond_expectation(&y, s, &m, sx, sn)?))
                .max(rel(u.log_likelihood(), unknown_log_likelihood(&y, s, &m, sn)?))
                .max(max_diff(u.expectation(), &blue_cond_expectation(&y, s, &m)?));
        }
    }
    Ok(result("chain recursion vs direct kernels", worst, 1e-9))
}

/// The `N = 16` decimated Toeplitz matrix with two-tap filter and
/// decimation two: every row touches one disjoint column pair.
pub fn block_toeplitz(rng: &mut ChaCha8Rng) -> Result<(SensingMatrix, ClusterSet)> {
    let h = cvec(rng, 2, 1.0);
    let m = SensingMatrix::subsampled_toeplitz(16, h, 2)?;
    let clusters = ClusterSet {
        clusters: (0..8).map(|b| Cluster::new(2 * b, 2, 16)).collect(),
        mode: FormationMode::FixedLength,
    };
    Ok((m, clusters))
}

/// OC on exactly orthogonal clusters against exhaustive enumeration, both
/// over the per-cluster family OC keeps and over all supports.
pub fn oc_vs_exhaustive(instances: usize, seed: u64) -> Result<(CheckResult, CheckResult)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prior = PriorConfig::new(0.1, 1.0, PriorKind::Gaussian)?;
    let (mut restricted, mut full): (f64, f64) = (0.0, 0.0);
    for _ in 0..instances {
        let (m, clusters) = block_toeplitz(&mut rng)?;
        let x: Vec<C64> = (0..16)
            .map(|_| {
                if rng.random::<f64>() < prior.p {
                    cvec(&mut rng, 1, 1.0)[0]
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        let sn = 0.05;
        let mut y = m.apply(&x)?;
        for (v, e) in y.iter_mut().zip(cvec(&mut rng, m.m(), sn)) {
            *v += e;
        }
        let cfg = OcConfig {
            cluster_len: 2,
            parallel: false,
            ..OcConfig::default()
        };
        let best = oc_recover_with_clusters(&y, &m, &prior, sn, &cfg, clusters.clone())?;
        let family: Vec<Vec<Vec<usize>>> = best
            .posteriors
            .iter()
            .map(|p| p.hypotheses.iter().map(|h| h.support.clone()).collect())
            .collect();
        let mut products: Vec<Vec<usize>> = vec![Vec::new()];
        for options in &family {
            products = products
                .iter()
                .flat_map(|base| {
                    options.iter().map(move |o| {
                        let mut s = base.clone();
                        s.extend(o);
                        s
                    })
                })
                .collect();
        }
        let (oracle, _) = mmse_over_supports(&y, &m, &prior, sn, products)?;
        restricted = restricted.max(max_diff(&best.mmse, &oracle));

        let all = OcConfig { retain_all: true, ..cfg };
        let every = oc_recover_with_clusters(&y, &m, &prior, sn, &all, clusters)?;
        let (exact, _) = exhaustive_mmse(&y, &m, &prior, sn)?;
        full = full.max(max_diff(&every.mmse, &exact));
    }
    Ok((
        result("clustered MMSE vs restricted enumeration", restricted, 1e-9),
        result("clustered MMSE vs full enumeration", full, 1e-9),
    ))
}

/// Closed-form column correlation against explicit inner products.
pub fn dft_correlation_law(n: usize, m: usize) -> Result<CheckResult> {
    let a = SensingMatrix::partial_dft(n, m, 0)?;
    let dft = a.as_partial_dft().expect("partial DFT");
    let base = a.column(0);
    let mut worst: f64 = 0.0;
    for delta in 0..n {
        let explicit = dot_h(&base, &a.column(delta)).norm();
        worst = worst.max((explicit - dft.correlation_at_lag(delta as i64)).abs());
    }
    Ok(result("DFT correlation law", worst, 1e-12))
}

/// Shifted-cluster likelihoods against modulated-observation likelihoods.
pub fn modulation_transport(cases: usize, seed: u64) -> Result<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, mm) = (256, 64);
    let m = SensingMatrix::partial_dft(n, mm, 0)?;
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let y = cvec(&mut rng, mm, 1.0);
        let len = rng.random_range(1..5);
        let start = rng.random_range(0..n);
        let shift = rng.random_range(-(n as i64)..n as i64);
        let base: Vec<usize> = (0..len).map(|t| (start + t) % n).collect();
        let moved: Vec<usize> = base
            .iter()
            .map(|&k| (k as i64 + shift).rem_euclid(n as i64) as usize)
            .collect();
        let ym = modulate_observation(&y, shift, &m)?;
        worst = worst
            .max(rel(
                gaussian_log_likelihood(&y, &moved, &m, 1.0, 0.1)?,
                gaussian_log_likelihood(&ym, &base, &m, 1.0, 0.1)?,
            ))
            .max(rel(
                unknown_log_likelihood(&y, &moved, &m, 0.1)?,
                unknown_log_likelihood(&ym, &base, &m, 0.1)?,
            ));
    }
    Ok(result("modulation transport", worst, 1e-9))
}

/// Weight normalization, prior mass, inverse-erfc round trip and the
/// per-cluster cap example.
pub fn prior_normalization(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weight_dev: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(1..20);
        let hyps = (0..k)
            .map(|i| Hypothesis {
                support: (0..i % 5).collect(),
                log_likelihood: rng.random_range(-500.0..500.0),
                cond_expectation: vec![C64::new(0.0, 0.0); i % 5],
            })
            .collect();
        let post = posterior_weights(hyps, 50, rng.random_range(0.001..0.5));
        weight_dev = weight_dev.max((post.weights.iter().sum::<f64>() - 1.0).abs());
    }
    let mut mass_dev: f64 = 0.0;
    for n in 0..=12usize {
        for &p in &[0.01, 0.1, 0.5, 0.9] {
            let total: f64 = (0u32..1 << n)
                .map(|mask| support_prior_log(mask.count_ones() as usize, n, p).exp())
                .sum();
            mass_dev = mass_dev.max((total - 1.0).abs());
        }
    }
    let mut erfc_dev: f64 = 0.0;
    for i in 1..400 {
        let v = i as f64 / 200.0;
        erfc_dev = erfc_dev.max((erfc(erfc_inv(v)?) - v).abs() / v);
    }
    let cap = cluster_max_support(32, 0.01);
    Ok(vec![
        result("posterior weights sum to one", weight_dev, 1e-12),
        result("support prior mass sums to one", mass_dev, 1e-10),
        result("erfc inverse round trip", erfc_dev, 1e-10),
        result("cluster cap at L=32, p=0.01 is 2", (cap as f64 - 2.0).abs(), 0.0),
    ])
}

/// Every suite with its default size.
pub fn run_all(seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = vec![chain_equivalence(200, seed)?];
    let (a, b) = oc_vs_exhaustive(10, seed)?;
    out.push(a);
    out.push(b);
    out.push(dft_correlation_law(1024, 256)?);
    out.push(modulation_transport(100, seed)?);
    out.extend(prior_normalization(seed)?);
    Ok(out)
}
