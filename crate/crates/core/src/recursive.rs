//! Order-recursive likelihood and expectation updates.
//!
//! A chain grows a support one column at a time. Every quantity a chain
//! needs can be expressed through inner products between the candidate
//! columns (`ψ_a^H ψ_b`) and their correlations with the observation
//! (`ψ_a^H y`), so both are cached once per cluster in a [`ColumnCache`]
//! and an extension never touches an `M`-dimensional vector.
//!
//! Gaussian prior: `Σ_S⁻¹` is held implicitly as
//! `I - ρ Σ_k ξ_k ω_k ω_k^H` (`ρ = σx²/σn²`), where each `ω_k = Σ_S⁻¹ ψ_k` is
//! stored as its coefficients over the support columns. Appending column
//! `i` costs `O(|S|²)`:
//!
//! ```text
//! ω_i = Σ_S⁻¹ ψ_i,   ξ_i = (1 + ρ ψ_i^H ω_i)⁻¹
//! ln L  += ln ξ_i + (σx² ξ_i / σn⁴) |ω_i^H y|²
//! E_j   -= ρ² ξ_i (ψ_j^H ω_i)(ω_i^H y)      (existing entries)
//! E_i    = ρ ξ_i ω_i^H y                     (new entry)
//! ```
//!
//! Unknown prior: `Λ_S = (Ψ_S^H Ψ_S)⁻¹` grows by block inversion with
//! `ω_i = Λ_S η_i`, `η_i = Ψ_S^H ψ_i`, `ξ_i = ‖ψ_i‖² - ω_i^H η_i`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::bayes::Hypothesis;
use crate::linalg::{dot_h, norm_sqr, to_dvector, RANK_TOL};
use crate::model::SensingMatrix;
use crate::{Error, Result, C64};

/// Column inner products and observation correlations for a set of
/// candidate columns.
#[derive(Clone, Debug)]
pub struct ColumnCache {
    columns: Vec<usize>,
    gram: Arc<Vec<C64>>,
    corr: Vec<C64>,
    y_norm_sqr: f64,
}

impl ColumnCache {
    /// Computes the Gram block and the correlations `ψ_a^H y` directly.
    pub fn new(m: &SensingMatrix, columns: Vec<usize>, y: &[C64]) -> Result<Self> {
        if y.len() != m.m() {
            return Err(Error::DimensionMismatch {
                expected: m.m(),
                got: y.len(),
            });
        }
        let corr = columns.iter().map(|&k| dot_h(&m.column(k), y)).collect();
        Self::from_correlations(m, columns, corr, norm_sqr(y))
    }

    /// Uses precomputed correlations `ψ_a^H y`, one per entry of `columns`.
    pub fn from_correlations(
        m: &SensingMatrix,
        columns: Vec<usize>,
        corr: Vec<C64>,
        y_norm_sqr: f64,
    ) -> Result<Self> {
        let gram = Arc::new(gram_block(m, &columns)?);
        Self::with_gram(columns, gram, corr, y_norm_sqr)
    }

    /// Reuses a Gram block shared between clusters with identical column
    /// geometry.
    pub fn with_gram(
        columns: Vec<usize>,
        gram: Arc<Vec<C64>>,
        corr: Vec<C64>,
        y_norm_sqr: f64,
    ) -> Result<Self> {
        let len = columns.len();
        if gram.len() != len * len {
            return Err(Error::DimensionMismatch {
                expected: len * len,
                got: gram.len(),
            });
        }
        if corr.len() != len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: corr.len(),
            });
        }
        Ok(ColumnCache {
            columns,
            gram,
            corr,
            y_norm_sqr,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Global column index of local position `a`.
    pub fn column(&self, a: usize) -> usize {
        self.columns[a]
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    /// `ψ_a^H ψ_b` for local positions.
    #[inline]
    pub fn gram(&self, a: usize, b: usize) -> C64 {
        self.gram[a * self.columns.len() + b]
    }

    pub fn gram_block(&self) -> &Arc<Vec<C64>> {
        &self.gram
    }

    /// `ψ_a^H y` for local position `a`.
    #[inline]
    pub fn corr(&self, a: usize) -> C64 {
        self.corr[a]
    }

    pub fn y_norm_sqr(&self) -> f64 {
        self.y_norm_sqr
    }
}

/// Row-major Gram block `[ψ_a^H ψ_b]` over `columns`.
pub fn gram_block(m: &SensingMatrix, columns: &[usize]) -> Result<Vec<C64>> {
    let n = m.n();
    if let Some(&bad) = columns.iter().find(|&&k| k >= n) {
        return Err(Error::IndexOutOfRange(bad, n));
    }
    let len = columns.len();
    let mut g = vec![C64::new(0.0, 0.0); len * len];
    for a in 0..len {
        g[a * len + a] = m.inner(columns[a], columns[a]);
        for b in a + 1..len {
            let v = m.inner(columns[a], columns[b]);
            g[a * len + b] = v;
            g[b * len + a] = v.conj();
        }
    }
    Ok(g)
}

/// Common interface of the two chain kinds.
pub trait Chain: Clone + Send {
    /// Local positions (into the cache) in insertion order.
    fn members(&self) -> &[usize];
    fn log_likelihood(&self) -> f64;
    /// Conditional mean aligned with [`Chain::members`].
    fn expectation(&self) -> &[C64];
    /// Appends local position `a`.
    fn extend(&self, cache: &ColumnCache, a: usize) -> Result<Self>;

    fn len(&self) -> usize {
        self.members().len()
    }

    fn is_empty(&self) -> bool {
        self.members().is_empty()
    }

    /// Hypothesis over global indices, sorted.
    fn to_hypothesis(&self, cache: &ColumnCache) -> Hypothesis {
        let pairs = self
            .members()
            .iter()
            .zip(self.expectation())
            .map(|(&a, &v)| (cache.column(a), v))
            .collect();
        Hypothesis::from_pairs(pairs, self.log_likelihood())
    }
}

fn duplicate_check(members: &[usize], cache: &ColumnCache, a: usize) -> Result<()> {
    if a >= cache.len() {
        return Err(Error::IndexOutOfRange(a, cache.len()));
    }
    if members.contains(&a) {
        return Err(Error::DuplicateIndex(cache.column(a)));
    }
    Ok(())
}

#[derive(Clone, Debug)]
struct GaussianStep {
    /// `ω_k` as coefficients over the first `k + 1` support columns.
    coeffs: Vec<C64>,
    xi: f64,
}

/// Chain state for the Gaussian prior.
#[derive(Clone, Debug)]
pub struct GaussianChainState {
    signal_variance: f64,
    noise_variance: f64,
    members: Vec<usize>,
    steps: Vec<GaussianStep>,
    log_det: f64,
    log_likelihood: f64,
    expectation: Vec<C64>,
}

impl GaussianChainState {
    /// Empty support: `Σ = I`, `ln L = -‖y‖²/σn²`.
    pub fn new(cache: &ColumnCache, signal_variance: f64, noise_variance: f64) -> Self {
        GaussianChainState {
            signal_variance,
            noise_variance,
            members: Vec::new(),
            steps: Vec::new(),
            log_det: 0.0,
            log_likelihood: -cache.y_norm_sqr() / noise_variance,
            expectation: Vec::new(),
        }
    }

    fn ratio(&self) -> f64 {
        self.signal_variance / self.noise_variance
    }

    /// `ln det Σ_S`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `ξ` of every extension step, in order.
    pub fn xis(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.xi).collect()
    }

    /// Materializes `ω_k = Σ_{S_k}⁻¹ ψ_k` for step `k`.
    pub fn omega(&self, step: usize, m: &SensingMatrix, cache: &ColumnCache) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); m.m()];
        for (&a, &c) in self.members.iter().zip(&self.steps[step].coeffs) {
            for (o, v) in out.iter_mut().zip(m.column(cache.column(a))) {
                *o += v * c;
            }
        }
        out
    }

    /// Materializes `Σ_S⁻¹` (`M × M`).
    pub fn sigma_inv(&self, m: &SensingMatrix, cache: &ColumnCache) -> DMatrix<C64> {
        let rho = self.ratio();
        let mut s = DMatrix::<C64>::identity(m.m(), m.m());
        for (k, step) in self.steps.iter().enumerate() {
            let w = to_dvector(&self.omega(k, m, cache));
            s -= &w * w.adjoint() * C64::new(rho * step.xi, 0.0);
        }
        s
    }

    /// `ψ_a^H ω` for a coefficient vector over the first `coeffs.len()`
    /// support members.
    fn psi_h_omega(&self, cache: &ColumnCache, a: usize, coeffs: &[C64], members: &[usize]) -> C64 {
        members
            .iter()
            .zip(coeffs)
            .map(|(&s, &c)| cache.gram(a, s) * c)
            .sum()
    }
}

impl Chain for GaussianChainState {
    fn members(&self) -> &[usize] {
        &self.members
    }

    fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    fn expectation(&self) -> &[C64] {
        &self.expectation
    }

    fn extend(&self, cache: &ColumnCache, a: usize) -> Result<Self> {
        duplicate_check(&self.members, cache, a)?;
        let rho = self.ratio();
        let depth = self.members.len();
        let mut members = self.members.clone();
        members.push(a);

        // ω_a = ψ_a - ρ Σ_k ξ_k ω_k (ω_k^H ψ_a)
        let mut coeffs = vec![C64::new(0.0, 0.0); depth + 1];
        coeffs[depth] = C64::new(1.0, 0.0);
        for step in &self.steps {
            let k_len = step.coeffs.len();
            let t = self.psi_h_omega(cache, a, &step.coeffs, &members[..k_len]).conj();
            let scale = t * (rho * step.xi);
            for (c, &w) in coeffs.iter_mut().zip(&step.coeffs) {
                *c -= w * scale;
            }
        }
        let quad = self.psi_h_omega(cache, a, &coeffs, &members).re;
        let xi = 1.0 / (1.0 + rho * quad);
        let omega_y: C64 = members
            .iter()
            .zip(&coeffs)
            .map(|(&s, &c)| c.conj() * cache.corr(s))
            .sum();

        let sx = self.signal_variance;
        let mut expectation = self.expectation.clone();
        for (j, e) in expectation.iter_mut().enumerate() {
            let u = self.psi_h_omega(cache, members[j], &coeffs, &members);
            *e -= u * omega_y * (rho * rho * xi);
        }
        expectation.push(omega_y * (rho * xi));

        let sn = self.noise_variance;
        let mut steps = self.steps.clone();
        steps.push(GaussianStep { coeffs, xi });
        Ok(GaussianChainState {
            signal_variance: sx,
            noise_variance: sn,
            members,
            steps,
            log_det: self.log_det - xi.ln(),
            log_likelihood: self.log_likelihood + xi.ln() + sx * xi / (sn * sn) * omega_y.norm_sqr(),
            expectation,
        })
    }
}

/// Chain state for the unknown prior (least-squares family).
#[derive(Clone, Debug)]
pub struct UnknownChainState {
    noise_variance: f64,
    members: Vec<usize>,
    /// `Λ_S`, row-major `|S| × |S|`.
    lambda: Vec<C64>,
    /// `Ψ_S^H y`.
    proj: Vec<C64>,
    residual: f64,
    log_likelihood: f64,
    expectation: Vec<C64>,
    last_xi: Option<f64>,
}

impl UnknownChainState {
    pub fn new(cache: &ColumnCache, noise_variance: f64) -> Self {
        UnknownChainState {
            noise_variance,
            members: Vec::new(),
            lambda: Vec::new(),
            proj: Vec::new(),
            residual: cache.y_norm_sqr(),
            log_likelihood: -cache.y_norm_sqr() / noise_variance,
            expectation: Vec::new(),
            last_xi: None,
        }
    }

    /// `Λ_S = (Ψ_S^H Ψ_S)⁻¹` in member order.
    pub fn lambda(&self) -> DMatrix<C64> {
        let k = self.members.len();
        DMatrix::from_row_slice(k, k, &self.lambda)
    }

    /// `‖P_S^⊥ y‖²`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// `ξ` of the most recent extension.
    pub fn last_xi(&self) -> Option<f64> {
        self.last_xi
    }
}

impl Chain for UnknownChainState {
    fn members(&self) -> &[usize] {
        &self.members
    }

    fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    fn expectation(&self) -> &[C64] {
        &self.expectation
    }

    fn extend(&self, cache: &ColumnCache, a: usize) -> Result<Self> {
        duplicate_check(&self.members, cache, a)?;
        let k = self.members.len();
        let eta: Vec<C64> = self.members.iter().map(|&s| cache.gram(s, a)).collect();
        let omega: Vec<C64> = (0..k)
            .map(|r| (0..k).map(|c| self.lambda[r * k + c] * eta[c]).sum())
            .collect();
        let xi = cache.gram(a, a).re - dot_h(&omega, &eta).re;
        if xi <= RANK_TOL {
            return Err(Error::DegenerateExtension {
                index: cache.column(a),
                xi,
            });
        }
        let c = cache.corr(a);
        let innovation = c - dot_h(&omega, &self.proj);
        let residual = self.residual - innovation.norm_sqr() / xi;

        let k1 = k + 1;
        let mut lambda = vec![C64::new(0.0, 0.0); k1 * k1];
        for r in 0..k {
            for col in 0..k {
                lambda[r * k1 + col] = self.lambda[r * k + col] + omega[r] * omega[col].conj() / xi;
            }
            lambda[r * k1 + k] = -omega[r] / xi;
            lambda[k * k1 + r] = -omega[r].conj() / xi;
        }
        lambda[k * k1 + k] = C64::new(1.0 / xi, 0.0);

        let gain = (c - dot_h(&eta, &self.expectation)) / xi;
        let mut expectation: Vec<C64> = self
            .expectation
            .iter()
            .zip(&omega)
            .map(|(&e, &w)| e - w * gain)
            .collect();
        expectation.push(gain);

        let mut members = self.members.clone();
        members.push(a);
        let mut proj = self.proj.clone();
        proj.push(c);
        Ok(UnknownChainState {
            noise_variance: self.noise_variance,
            members,
            lambda,
            proj,
            residual,
            log_likelihood: -residual / self.noise_variance,
            expectation,
            last_xi: Some(xi),
        })
    }
}

/// Depth-first walk over every subset of the cache positions with at most
/// `max_size` members, in lexicographic order of local positions. `visit`
/// sees each non-empty chain once. Degenerate extensions prune their
/// branch. Returns the number of extensions evaluated.
pub fn for_each_subset<C, F>(root: &C, cache: &ColumnCache, max_size: usize, visit: &mut F) -> usize
where
    C: Chain,
    F: FnMut(&C),
{
    fn walk<C: Chain, F: FnMut(&C)>(
        state: &C,
        start: usize,
        cache: &ColumnCache,
        max_size: usize,
        visit: &mut F,
        count: &mut usize,
    ) {
        for a in start..cache.len() {
            *count += 1;
            let Ok(next) = state.extend(cache, a) else {
                continue;
            };
            visit(&next);
            if next.len() < max_size {
                walk(&next, a + 1, cache, max_size, visit, count);
            }
        }
    }
    let mut count = 0;
    if max_size > 0 {
        walk(root, 0, cache, max_size, visit, &mut count);
    }
    count
}

/// Greedy chain growth: at every level the best single extension of the
/// current support. Returns the chain of each size and the number of
/// extensions tried.
pub fn greedy_path<C: Chain>(root: &C, cache: &ColumnCache, max_size: usize) -> (Vec<C>, usize) {
    let (levels, count) = beam_search(root, cache, max_size, 1);
    (levels.into_iter().flatten().collect(), count)
}

/// Breadth-limited tree search: every level extends each kept support by
/// every free column and keeps the `width` most likely distinct results.
/// Level `s - 1` of the output holds the kept supports of size `s`, best
/// first; width one is plain greedy growth.
pub fn beam_search<C: Chain>(root: &C, cache: &ColumnCache, max_size: usize, width: usize) -> (Vec<Vec<C>>, usize) {
    let mut levels: Vec<Vec<C>> = Vec::new();
    let mut count = 0;
    let mut frontier = vec![root.clone()];
    for _ in 0..max_size {
        let mut next: Vec<(Vec<usize>, C)> = Vec::new();
        for node in &frontier {
            for a in 0..cache.len() {
                if node.members().contains(&a) {
                    continue;
                }
                count += 1;
                let Ok(child) = node.extend(cache, a) else { continue };
                let mut key = child.members().to_vec();
                key.sort_unstable();
                if next.iter().any(|(k, _)| *k == key) {
                    continue;
                }
                next.push((key, child));
                if next.len() > width {
                    // evict the weakest; ties keep the earlier candidate
                    let worst = (0..next.len())
                        .rev()
                        .min_by(|&i, &j| next[i].1.log_likelihood().total_cmp(&next[j].1.log_likelihood()))
                        .expect("non-empty");
                    next.remove(worst);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        let mut kept: Vec<C> = next.into_iter().map(|(_, c)| c).collect();
        kept.sort_by(|a, b| b.log_likelihood().total_cmp(&a.log_likelihood()));
        frontier = kept.clone();
        levels.push(kept);
    }
    (levels, count)
}

/// `y ⊙ φ_Δ*`: moves inference for columns shifted by `delta` back onto the
/// unshifted columns of a partial DFT.
pub fn modulate_observation(y: &[C64], delta: i64, m: &SensingMatrix) -> Result<Vec<C64>> {
    let dft = m
        .as_partial_dft()
        .ok_or(Error::WrongVariant("partial DFT"))?;
    if y.len() != dft.m() {
        return Err(Error::DimensionMismatch {
            expected: dft.m(),
            got: y.len(),
        });
    }
    Ok(y.iter()
        .zip(dft.modulation(delta))
        .map(|(v, phi)| v * phi.conj())
        .collect())
}

/// `y ⊙ w`, with `w` the indicator of rows where any of `columns` is
/// non-zero in a sub-sampled Toeplitz matrix.
pub fn window_observation(y: &[C64], columns: &[usize], m: &SensingMatrix) -> Result<Vec<C64>> {
    let t = m
        .as_toeplitz()
        .ok_or(Error::WrongVariant("sub-sampled Toeplitz"))?;
    if y.len() != t.m() {
        return Err(Error::DimensionMismatch {
            expected: t.m(),
            got: y.len(),
        });
    }
    let mut window = vec![false; t.m()];
    for &k in columns {
        if k >= t.n() {
            return Err(Error::IndexOutOfRange(k, t.n()));
        }
        t.row_range(k).for_each(|r| window[r] = true);
    }
    Ok(y.iter()
        .zip(window)
        .map(|(&v, w)| if w { v } else { C64::new(0.0, 0.0) })
        .collect())
}

/// `out[r] = v[r + shift]`, zero outside the range. Aligns a windowed
/// Toeplitz observation with a cluster `shift · d` columns earlier.
pub fn shift_rows(v: &[C64], shift: isize) -> Vec<C64> {
    (0..v.len() as isize)
        .map(|r| {
            let src = r + shift;
            if src >= 0 && (src as usize) < v.len() {
                v[src as usize]
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect()
}
