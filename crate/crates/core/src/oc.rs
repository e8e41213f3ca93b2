//! Orthogonal clustering: threshold the column correlations, group the
//! strong ones into non-overlapping clusters, search each cluster's
//! dominant supports independently and stitch the per-cluster estimates.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{map_support, posterior_weights, Hypothesis, PosteriorSet};
use crate::linalg::norm_sqr;
use crate::model::SensingMatrix;
use crate::priors::{cluster_max_support, correlation_threshold, PriorConfig, PriorKind};
use crate::recursive::{
    beam_search, for_each_subset, gram_block, Chain, ColumnCache, GaussianChainState, UnknownChainState,
};
use crate::{Error, Result, C64};

/// A contiguous run of column indices, wrapping modulo `N` when the matrix
/// is circulant in its columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    pub start: usize,
    pub len: usize,
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn new(start: usize, len: usize, n: usize) -> Self {
        Cluster {
            start,
            len,
            members: (0..len).map(|t| (start + t) % n).collect(),
        }
    }

    pub fn contains(&self, k: usize) -> bool {
        self.members.contains(&k)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormationMode {
    /// An interval overlapping an existing cluster is merged into it.
    #[default]
    VariableLength,
    /// An interval overlapping an existing cluster is dropped.
    FixedLength,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
    pub mode: FormationMode,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    /// Cluster id of every column, `None` outside all clusters.
    pub fn owner(&self, n: usize) -> Vec<Option<usize>> {
        let mut owner = vec![None; n];
        for (id, c) in self.clusters.iter().enumerate() {
            for &k in &c.members {
                owner[k] = Some(id);
            }
        }
        owner
    }
}

/// Default number of supports the greedy fallback keeps per level.
pub const DEFAULT_BEAM_WIDTH: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OcConfig {
    /// Length of the interval centred on each seed position.
    pub cluster_len: usize,
    /// Probability that a pure-noise correlation exceeds the threshold.
    pub tail_probability: f64,
    pub mode: FormationMode,
    /// Largest number of support combinations enumerated per cluster before
    /// falling back to greedy growth.
    pub budget: usize,
    /// Supports kept per level by the greedy fallback.
    pub beam_width: usize,
    /// Variable-length clusters closer than this many columns are merged;
    /// `None` uses the cluster length, `Some(0)` merges only on overlap.
    pub min_separation: Option<usize>,
    /// Keep every enumerated support instead of only the best one per size.
    pub retain_all: bool,
    /// Search clusters on the rayon pool.
    pub parallel: bool,
}

impl Default for OcConfig {
    fn default() -> Self {
        OcConfig {
            cluster_len: 32,
            tail_probability: crate::priors::DEFAULT_TAIL_PROBABILITY,
            mode: FormationMode::VariableLength,
            budget: 100_000,
            beam_width: DEFAULT_BEAM_WIDTH,
            min_separation: None,
            retain_all: false,
            parallel: true,
        }
    }
}

impl OcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cluster_len == 0 {
            return Err(Error::InvalidArgument("cluster length must be at least 1".into()));
        }
        if self.budget < self.cluster_len {
            return Err(Error::InvalidArgument(
                "enumeration budget must be at least the cluster length".into(),
            ));
        }
        if self.beam_width == 0 {
            return Err(Error::InvalidArgument("beam width must be at least 1".into()));
        }
        if !(self.tail_probability > 0.0 && self.tail_probability <= 0.5) {
            return Err(Error::InvalidArgument("tail probability must lie in (0, 0.5]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OcDiagnostics {
    /// Correlation threshold κ.
    pub threshold: f64,
    /// Column correlations `ψ_k^H y` computed.
    pub correlations: usize,
    /// Chain extensions evaluated across all clusters.
    pub hypotheses: usize,
    /// Clusters that exceeded the budget and were searched greedily.
    pub greedy_clusters: usize,
    /// Column correlation at a lag of one cluster length.
    pub lag_correlation: Option<f64>,
    pub wall_time_ms: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OcResult {
    pub mmse: Vec<C64>,
    pub map: Vec<C64>,
    pub clusters: ClusterSet,
    /// Per-cluster hypotheses with normalized weights, in cluster order.
    pub posteriors: Vec<PosteriorSet>,
    pub diagnostics: OcDiagnostics,
}

/// Positions whose correlation modulus strictly exceeds `threshold`, sorted
/// by magnitude descending with ties to the lower index.
pub fn dominant_positions_from(corr: &[C64], threshold: f64) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = corr
        .iter()
        .enumerate()
        .map(|(k, c)| (k, c.norm()))
        .filter(|&(_, v)| v > threshold)
        .collect();
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    out
}

pub fn find_dominant_positions(y: &[C64], m: &SensingMatrix, threshold: f64) -> Result<Vec<(usize, f64)>> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument("threshold must be non-negative".into()));
    }
    Ok(dominant_positions_from(&m.adjoint_apply(y)?, threshold))
}

/// Interval of length `len` around `seed` with `⌈(len-1)/2⌉` indices to its
/// left. Returns `(start, len)` after wrapping or clamping.
fn seed_interval(seed: usize, len: usize, n: usize, wrap: bool) -> (usize, usize) {
    let left = (len - 1).div_ceil(2);
    if wrap {
        let len = len.min(n);
        ((seed + n - left % n) % n, len)
    } else {
        let lo = seed.saturating_sub(left);
        let hi = (seed + len - left).min(n);
        (lo, hi - lo)
    }
}

/// Shortest arc covering every marked index: from the first to the last
/// mark without wrap, the complement of the longest unmarked circular run
/// with it.
fn arc_of(mark: &[bool], wrap: bool) -> (usize, usize) {
    let n = mark.len();
    let Some(first) = mark.iter().position(|&b| b) else {
        return (0, 0);
    };
    if !wrap {
        let last = mark.iter().rposition(|&b| b).unwrap_or(first);
        return (first, last - first + 1);
    }
    // longest run of unmarked indices, scanning circularly from a mark
    let (mut best_len, mut best_end, mut run) = (0, first, 0);
    for t in 1..=n {
        let k = (first + t) % n;
        if mark[k] {
            if run > best_len {
                best_len = run;
                best_end = k;
            }
            run = 0;
        } else {
            run += 1;
        }
    }
    (best_end, n - best_len)
}

/// Groups dominant positions into disjoint clusters, visiting them in the
/// given order. Positions already inside a cluster do not seed a new one.
pub fn form_clusters(
    positions: &[(usize, f64)],
    len: usize,
    n: usize,
    mode: FormationMode,
    wrap: bool,
) -> ClusterSet {
    form_clusters_spaced(positions, len, n, mode, wrap, 0)
}

/// Like [`form_clusters`], but in variable-length mode an interval also
/// merges with clusters fewer than `gap` indices away, so that surviving
/// clusters are separated by at least `gap` columns.
pub fn form_clusters_spaced(
    positions: &[(usize, f64)],
    len: usize,
    n: usize,
    mode: FormationMode,
    wrap: bool,
    gap: usize,
) -> ClusterSet {
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    if len == 0 || n == 0 {
        return ClusterSet { clusters, mode };
    }
    let gap = if mode == FormationMode::FixedLength { 0 } else { gap };
    for &(seed, _) in positions {
        if seed >= n || owner[seed].is_some() {
            continue;
        }
        let (start, ilen) = seed_interval(seed, len, n, wrap);
        let interval = Cluster::new(start, ilen, n);
        let mut hit = neighbours(&owner, start, ilen, gap, wrap);
        if hit.is_empty() {
            for &k in &interval.members {
                owner[k] = Some(clusters.len());
            }
            clusters.push(interval);
            continue;
        }
        if mode == FormationMode::FixedLength {
            continue;
        }
        let mut mark = vec![false; n];
        for &k in &interval.members {
            mark[k] = true;
        }
        // filling the gaps may swallow further clusters; absorb until stable
        let merged = loop {
            for &id in &hit {
                for &k in &clusters[id].members {
                    mark[k] = true;
                }
            }
            let (ms, ml) = arc_of(&mark, wrap);
            let merged = Cluster::new(ms, ml, n);
            let more = neighbours(&owner, ms, ml, 0, wrap);
            if more.iter().all(|id| hit.contains(id)) {
                break merged;
            }
            hit.extend(more);
            hit.sort_unstable();
            hit.dedup();
        };
        // drop the absorbed clusters, keep the merged one in the first slot
        let keep = hit[0];
        for &id in hit.iter().skip(1).rev() {
            clusters.remove(id);
        }
        clusters[keep] = merged;
        owner.iter_mut().for_each(|o| *o = None);
        for (id, c) in clusters.iter().enumerate() {
            for &k in &c.members {
                owner[k] = Some(id);
            }
        }
    }
    ClusterSet { clusters, mode }
}

/// Clusters owning an index of `[start - gap, start + len + gap)`, wrapped
/// or clamped.
fn neighbours(owner: &[Option<usize>], start: usize, len: usize, gap: usize, wrap: bool) -> Vec<usize> {
    let n = owner.len();
    let span: Vec<usize> = if wrap {
        let reach = (len + 2 * gap).min(n);
        (0..reach).map(|t| (start + n - gap % n + t) % n).collect()
    } else {
        (start.saturating_sub(gap)..(start + len + gap).min(n)).collect()
    };
    let mut hit: Vec<usize> = span.into_iter().filter_map(|k| owner[k]).collect();
    hit.sort_unstable();
    hit.dedup();
    hit
}

/// Result of searching one cluster.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// `∅` first, then either the best support found of each size or every
    /// enumerated support.
    pub hypotheses: Vec<Hypothesis>,
    pub evaluated: usize,
    pub greedy: bool,
}

fn binomial_total(len: usize, max_size: usize, cap: usize) -> usize {
    let mut total: usize = 0;
    let mut term: u128 = 1;
    for s in 1..=max_size.min(len) {
        term = term * (len - s + 1) as u128 / s as u128;
        total = total.saturating_add(term.min(usize::MAX as u128) as usize);
        if total > cap {
            return total;
        }
    }
    total
}

fn search_chain<C: Chain>(
    root: C,
    cache: &ColumnCache,
    max_size: usize,
    budget: usize,
    beam_width: usize,
    retain_all: bool,
) -> SearchOutcome {
    let mut hypotheses = vec![root.to_hypothesis(cache)];
    let max_size = max_size.min(cache.len());
    if binomial_total(cache.len(), max_size, budget) <= budget {
        if retain_all {
            let evaluated = for_each_subset(&root, cache, max_size, &mut |c: &C| {
                hypotheses.push(c.to_hypothesis(cache))
            });
            return SearchOutcome {
                hypotheses,
                evaluated,
                greedy: false,
            };
        }
        let mut best: Vec<Option<C>> = vec![None; max_size + 1];
        let evaluated = for_each_subset(&root, cache, max_size, &mut |c: &C| {
            let slot = &mut best[c.len()];
            if slot
                .as_ref()
                .is_none_or(|b| c.log_likelihood() > b.log_likelihood())
            {
                *slot = Some(c.clone());
            }
        });
        hypotheses.extend(best.into_iter().flatten().map(|c| c.to_hypothesis(cache)));
        SearchOutcome {
            hypotheses,
            evaluated,
            greedy: false,
        }
    } else {
        let (levels, evaluated) = beam_search(&root, cache, max_size, beam_width);
        hypotheses.extend(levels.iter().filter_map(|l| l.first()).map(|c| c.to_hypothesis(cache)));
        SearchOutcome {
            hypotheses,
            evaluated,
            greedy: true,
        }
    }
}

/// Dominant-support search over a prepared column cache.
pub fn search_cache(
    cache: &ColumnCache,
    prior: &PriorConfig,
    noise_variance: f64,
    max_size: usize,
    budget: usize,
    beam_width: usize,
    retain_all: bool,
) -> SearchOutcome {
    match prior.kind {
        PriorKind::Gaussian => search_chain(
            GaussianChainState::new(cache, prior.signal_variance, noise_variance),
            cache,
            max_size,
            budget,
            beam_width,
            retain_all,
        ),
        PriorKind::Unknown => search_chain(
            UnknownChainState::new(cache, noise_variance),
            cache,
            max_size,
            budget,
            beam_width,
            retain_all,
        ),
    }
}

/// The empty support plus the most likely support of each size
/// `1..=max_size` inside `cluster`.
pub fn cluster_search(
    y: &[C64],
    m: &SensingMatrix,
    cluster: &Cluster,
    prior: &PriorConfig,
    noise_variance: f64,
    max_size: usize,
    budget: usize,
    beam_width: usize,
) -> Result<Vec<Hypothesis>> {
    let cache = ColumnCache::new(m, cluster.members.clone(), y)?;
    Ok(search_cache(&cache, prior, noise_variance, max_size, budget, beam_width, false).hypotheses)
}

/// Normalizes each cluster's hypotheses and assembles the MMSE and MAP
/// estimates.
pub fn combine_estimates(
    per_cluster: Vec<Vec<Hypothesis>>,
    n: usize,
    p: f64,
) -> (Vec<C64>, Vec<C64>, Vec<PosteriorSet>) {
    let mut mmse = vec![C64::new(0.0, 0.0); n];
    let mut map = vec![C64::new(0.0, 0.0); n];
    let mut posteriors = Vec::with_capacity(per_cluster.len());
    for hyps in per_cluster {
        if hyps.is_empty() {
            continue;
        }
        let post = posterior_weights(hyps, n, p);
        post.accumulate_mmse(&mut mmse);
        if let Some(best) = map_support(&post) {
            for (&i, &v) in best.support.iter().zip(&best.cond_expectation) {
                map[i] = v;
            }
        }
        posteriors.push(post);
    }
    (mmse, map, posteriors)
}

pub fn oc_recover(
    y: &[C64],
    m: &SensingMatrix,
    prior: &PriorConfig,
    noise_variance: f64,
    config: &OcConfig,
) -> Result<OcResult> {
    run(y, m, prior, noise_variance, config, None)
}

/// Runs the pipeline on caller-supplied clusters instead of thresholding.
pub fn oc_recover_with_clusters(
    y: &[C64],
    m: &SensingMatrix,
    prior: &PriorConfig,
    noise_variance: f64,
    config: &OcConfig,
    clusters: ClusterSet,
) -> Result<OcResult> {
    run(y, m, prior, noise_variance, config, Some(clusters))
}

fn run(
    y: &[C64],
    m: &SensingMatrix,
    prior: &PriorConfig,
    noise_variance: f64,
    config: &OcConfig,
    given: Option<ClusterSet>,
) -> Result<OcResult> {
    let started = Instant::now();
    prior.validate()?;
    config.validate()?;
    if !(noise_variance > 0.0) {
        return Err(Error::InvalidArgument("noise variance must be positive".into()));
    }
    let n = m.n();
    let corr = m.adjoint_apply(y)?;
    let threshold = correlation_threshold(noise_variance, config.tail_probability);
    let clusters = match given {
        Some(set) => {
            check_disjoint(&set, n)?;
            set
        }
        None => {
            let positions = dominant_positions_from(&corr, threshold);
            form_clusters_spaced(
                &positions,
                config.cluster_len,
                n,
                config.mode,
                m.wraps(),
                config.min_separation.unwrap_or(config.cluster_len),
            )
        }
    };

    // Partial DFT Gram blocks depend only on the cluster length.
    let mut shared: HashMap<usize, Arc<Vec<C64>>> = HashMap::new();
    if m.as_partial_dft().is_some() {
        for c in &clusters.clusters {
            if !shared.contains_key(&c.len) {
                let cols: Vec<usize> = (0..c.len).collect();
                shared.insert(c.len, Arc::new(gram_block(m, &cols)?));
            }
        }
    }
    let y_norm = norm_sqr(y);
    let search = |c: &Cluster| -> Result<SearchOutcome> {
        let local_corr = c.members.iter().map(|&k| corr[k]).collect();
        let cache = match shared.get(&c.len) {
            Some(g) => ColumnCache::with_gram(c.members.clone(), g.clone(), local_corr, y_norm)?,
            None => ColumnCache::from_correlations(m, c.members.clone(), local_corr, y_norm)?,
        };
        let cap = cluster_max_support(c.len, prior.p).min(c.len);
        Ok(search_cache(&cache, prior, noise_variance, cap, config.budget, config.beam_width, config.retain_all))
    };
    let outcomes: Vec<SearchOutcome> = if config.parallel {
        clusters.clusters.par_iter().map(search).collect::<Result<_>>()?
    } else {
        clusters.clusters.iter().map(search).collect::<Result<_>>()?
    };

    let hypotheses = outcomes.iter().map(|o| o.evaluated).sum();
    let greedy_clusters = outcomes.iter().filter(|o| o.greedy).count();
    let (mmse, map, posteriors) =
        combine_estimates(outcomes.into_iter().map(|o| o.hypotheses).collect(), n, prior.p);
    let lag_correlation = (config.cluster_len < n).then(|| match m.as_partial_dft() {
        Some(d) => d.correlation_at_lag(config.cluster_len as i64),
        None => m.column_correlation(0, config.cluster_len),
    });
    Ok(OcResult {
        mmse,
        map,
        clusters,
        posteriors,
        diagnostics: OcDiagnostics {
            threshold,
            correlations: n,
            hypotheses,
            greedy_clusters,
            lag_correlation,
            wall_time_ms: started.elapsed().as_secs_f64() * 1e3,
        },
    })
}

fn check_disjoint(set: &ClusterSet, n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for c in &set.clusters {
        for &k in &c.members {
            if k >= n {
                return Err(Error::IndexOutOfRange(k, n));
            }
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidArgument(format!("column {k} belongs to two clusters")));
            }
        }
    }
    Ok(())
}
