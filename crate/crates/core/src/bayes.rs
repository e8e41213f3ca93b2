//! Direct Bayesian kernels: per-support likelihoods and conditional means,
//! posterior weighting, and exhaustive MMSE over every support.
//!
//! Log-likelihoods drop the same constants for every support of a given
//! prior kind (`-M ln(π σn²)` for the Gaussian family, and the undefined
//! normalizer of the projected density for the unknown family), so values
//! from one family are directly comparable.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky, chol_log_det, gram_cholesky, log_sum_exp, norm_sqr, to_dvector};
use crate::model::SensingMatrix;
use crate::priors::{support_prior_log, PriorConfig, PriorKind};
use crate::{Error, Result, C64};

/// Largest dimension accepted by [`exhaustive_mmse`].
pub const MAX_EXHAUSTIVE_N: usize = 20;

/// A candidate support with its log-likelihood and conditional mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    /// Strictly increasing column indices.
    pub support: Vec<usize>,
    /// `ln p(y|S)` up to a family-wide constant.
    pub log_likelihood: f64,
    /// `E[x_S | y, S]`, aligned with `support`.
    pub cond_expectation: Vec<C64>,
}

impl Hypothesis {
    pub fn empty(log_likelihood: f64) -> Self {
        Hypothesis {
            support: Vec::new(),
            log_likelihood,
            cond_expectation: Vec::new(),
        }
    }

    /// Builds a hypothesis from unordered `(index, value)` pairs.
    pub fn from_pairs(mut pairs: Vec<(usize, C64)>, log_likelihood: f64) -> Self {
        pairs.sort_by_key(|&(i, _)| i);
        let (support, cond_expectation) = pairs.into_iter().unzip();
        Hypothesis {
            support,
            log_likelihood,
            cond_expectation,
        }
    }

    /// Evaluates `support` with the direct kernels of `prior.kind`.
    pub fn evaluate(
        y: &[C64],
        support: &[usize],
        m: &SensingMatrix,
        prior: &PriorConfig,
        noise_variance: f64,
    ) -> Result<Self> {
        let mut support = support.to_vec();
        support.sort_unstable();
        let (log_likelihood, cond_expectation) = match prior.kind {
            PriorKind::Gaussian => (
                gaussian_log_likelihood(y, &support, m, prior.signal_variance, noise_variance)?,
                gaussian_cond_expectation(y, &support, m, prior.signal_variance, noise_variance)?,
            ),
            PriorKind::Unknown => (
                unknown_log_likelihood(y, &support, m, noise_variance)?,
                blue_cond_expectation(y, &support, m)?,
            ),
        };
        Ok(Hypothesis {
            support,
            log_likelihood,
            cond_expectation,
        })
    }

    /// Zero-padded length-`n` vector.
    pub fn padded(&self, n: usize) -> Vec<C64> {
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (&i, &v) in self.support.iter().zip(&self.cond_expectation) {
            x[i] = v;
        }
        x
    }
}

/// Hypotheses with normalized posterior weights.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PosteriorSet {
    pub hypotheses: Vec<Hypothesis>,
    pub weights: Vec<f64>,
}

impl PosteriorSet {
    /// `Σ_S w_S · E[x | y, S]` as a length-`n` vector.
    pub fn mmse(&self, n: usize) -> Vec<C64> {
        let mut x = vec![C64::new(0.0, 0.0); n];
        self.accumulate_mmse(&mut x);
        x
    }

    pub(crate) fn accumulate_mmse(&self, x: &mut [C64]) {
        for (h, &w) in self.hypotheses.iter().zip(&self.weights) {
            for (&i, &v) in h.support.iter().zip(&h.cond_expectation) {
                x[i] += v * w;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }
}

fn check_support(support: &[usize], n: usize) -> Result<()> {
    for (pos, &i) in support.iter().enumerate() {
        if i >= n {
            return Err(Error::IndexOutOfRange(i, n));
        }
        if support[..pos].contains(&i) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    Ok(())
}

fn check_y(y: &[C64], m: &SensingMatrix) -> Result<()> {
    if y.len() != m.m() {
        return Err(Error::DimensionMismatch {
            expected: m.m(),
            got: y.len(),
        });
    }
    Ok(())
}

/// `Ψ_S` as an `M × |S|` matrix.
pub(crate) fn submatrix(m: &SensingMatrix, support: &[usize]) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(m.m(), support.len());
    for (j, &k) in support.iter().enumerate() {
        out.set_column(j, &to_dvector(&m.column(k)));
    }
    out
}

/// `Σ_S = I + (σx²/σn²) Ψ_S Ψ_S^H`.
fn sigma(m: &SensingMatrix, support: &[usize], ratio: f64) -> DMatrix<C64> {
    let psi = submatrix(m, support);
    let mut s = &psi * psi.adjoint() * C64::new(ratio, 0.0);
    for i in 0..s.nrows() {
        s[(i, i)] += 1.0;
    }
    s
}

/// `-(1/σn²) y^H Σ_S⁻¹ y - ln det Σ_S`.
pub fn gaussian_log_likelihood(
    y: &[C64],
    support: &[usize],
    m: &SensingMatrix,
    signal_variance: f64,
    noise_variance: f64,
) -> Result<f64> {
    check_y(y, m)?;
    check_support(support, m.n())?;
    if support.is_empty() {
        return Ok(-norm_sqr(y) / noise_variance);
    }
    let chol = cholesky(sigma(m, support, signal_variance / noise_variance))?;
    let yv = to_dvector(y);
    let quad = yv.dotc(&chol.solve(&yv)).re;
    Ok(-quad / noise_variance - chol_log_det(&chol))
}

/// `-(1/σn²) ‖P_S^⊥ y‖²`.
pub fn unknown_log_likelihood(
    y: &[C64],
    support: &[usize],
    m: &SensingMatrix,
    noise_variance: f64,
) -> Result<f64> {
    check_y(y, m)?;
    check_support(support, m.n())?;
    if support.is_empty() {
        return Ok(-norm_sqr(y) / noise_variance);
    }
    let psi = submatrix(m, support);
    let yv = to_dvector(y);
    let coef = gram_cholesky(psi.adjoint() * &psi)?.solve(&(psi.adjoint() * &yv));
    let resid = yv - psi * coef;
    Ok(-resid.norm_squared() / noise_variance)
}

/// Linear MMSE `σx² Ψ_S^H (σx² Ψ_S Ψ_S^H + σn² I)⁻¹ y`.
pub fn gaussian_cond_expectation(
    y: &[C64],
    support: &[usize],
    m: &SensingMatrix,
    signal_variance: f64,
    noise_variance: f64,
) -> Result<Vec<C64>> {
    check_y(y, m)?;
    check_support(support, m.n())?;
    if support.is_empty() {
        return Ok(Vec::new());
    }
    let psi = submatrix(m, support);
    let mut cov = &psi * psi.adjoint() * C64::new(signal_variance, 0.0);
    for i in 0..cov.nrows() {
        cov[(i, i)] += noise_variance;
    }
    let v = cholesky(cov)?.solve(&to_dvector(y));
    Ok((psi.adjoint() * v * C64::new(signal_variance, 0.0))
        .as_slice()
        .to_vec())
}

/// Least squares `(Ψ_S^H Ψ_S)⁻¹ Ψ_S^H y`.
pub fn blue_cond_expectation(y: &[C64], support: &[usize], m: &SensingMatrix) -> Result<Vec<C64>> {
    check_y(y, m)?;
    check_support(support, m.n())?;
    if support.is_empty() {
        return Ok(Vec::new());
    }
    let psi = submatrix(m, support);
    let rhs = psi.adjoint() * to_dvector(y);
    let coef = gram_cholesky(psi.adjoint() * &psi)?.solve(&rhs);
    Ok(coef.as_slice().to_vec())
}

/// Normalizes `exp(log_likelihood + ln p(S))` over the given hypotheses.
pub fn posterior_weights(hypotheses: Vec<Hypothesis>, n: usize, p: f64) -> PosteriorSet {
    let logs: Vec<f64> = hypotheses
        .iter()
        .map(|h| h.log_likelihood + support_prior_log(h.support.len(), n, p))
        .collect();
    let norm = log_sum_exp(&logs);
    let weights = logs.iter().map(|l| (l - norm).exp()).collect();
    PosteriorSet { hypotheses, weights }
}

/// Posterior mean restricted to an explicit family of supports.
///
/// Supports that are rank deficient under the unknown prior have no
/// defined likelihood and are left out of the family.
pub fn mmse_over_supports<I>(
    y: &[C64],
    m: &SensingMatrix,
    prior: &PriorConfig,
    noise_variance: f64,
    supports: I,
) -> Result<(Vec<C64>, PosteriorSet)>
where
    I: IntoIterator<Item = Vec<usize>>,
{
    let mut hypotheses = Vec::new();
    for s in supports {
        match Hypothesis::evaluate(y, &s, m, prior, noise_variance) {
            Ok(h) => hypotheses.push(h),
            Err(Error::RankDeficient) if prior.kind == PriorKind::Unknown => {}
            Err(e) => return Err(e),
        }
    }
    if hypotheses.is_empty() {
        return Err(Error::InvalidArgument("empty hypothesis family".into()));
    }
    let post = posterior_weights(hypotheses, m.n(), prior.p);
    Ok((post.mmse(m.n()), post))
}

/// Exact MMSE by enumerating all `2^N` supports.
pub fn exhaustive_mmse(
    y: &[C64],
    m: &SensingMatrix,
    prior: &PriorConfig,
    noise_variance: f64,
) -> Result<(Vec<C64>, PosteriorSet)> {
    let n = m.n();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::TooLarge {
            n,
            max: MAX_EXHAUSTIVE_N,
        });
    }
    let supports = (0u32..1 << n).map(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect());
    mmse_over_supports(y, m, prior, noise_variance, supports)
}

/// Maximum-weight hypothesis; ties go to the smaller support, then to the
/// lexicographically smaller one.
pub fn map_support(posterior: &PosteriorSet) -> Option<&Hypothesis> {
    posterior
        .hypotheses
        .iter()
        .zip(&posterior.weights)
        .reduce(|best, cand| {
            let better = cand.1 > best.1
                || (cand.1 == best.1
                    && (cand.0.support.len(), &cand.0.support)
                        < (best.0.support.len(), &best.0.support));
            if better {
                cand
            } else {
                best
            }
        })
        .map(|(h, _)| h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot_h;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn cn(rng: &mut ChaCha8Rng, var: f64) -> C64 {
        let s = (var / 2.0).sqrt();
        C64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s)
    }

    fn cvec(rng: &mut ChaCha8Rng, len: usize) -> Vec<C64> {
        (0..len).map(|_| cn(rng, 1.0)).collect()
    }

    /// ln of the complex Gaussian density of y with covariance
    /// σx²Ψ_SΨ_S^H + σn²I, plus M ln(π σn²) to match the dropped constant.
    fn literal_density_log(y: &[C64], m: &SensingMatrix, s: &[usize], sx: f64, sn: f64) -> f64 {
        let psi = submatrix(m, s);
        let mut cov = &psi * psi.adjoint() * C64::new(sx, 0.0);
        for i in 0..cov.nrows() {
            cov[(i, i)] += sn;
        }
        let inv = cov.clone().try_inverse().unwrap();
        let yv = to_dvector(y);
        let quad = (yv.adjoint() * inv * &yv)[(0, 0)].re;
        let det = cov.determinant().re;
        let mm = y.len() as f64;
        -quad - det.ln() - mm * std::f64::consts::PI.ln() + mm * (std::f64::consts::PI * sn).ln()
    }

    fn random_dense(rng: &mut ChaCha8Rng, mrows: usize, n: usize) -> SensingMatrix {
        SensingMatrix::dense_gaussian(mrows, n, rng).unwrap()
    }

    #[test]
    fn empty_support_likelihoods() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_dense(&mut rng, 4, 6);
        let y = cvec(&mut rng, 4);
        let expect = -norm_sqr(&y) / 0.3;
        assert!((gaussian_log_likelihood(&y, &[], &m, 2.0, 0.3).unwrap() - expect).abs() < 1e-12);
        assert!((unknown_log_likelihood(&y, &[], &m, 0.3).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn gaussian_likelihood_matches_literal_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let m = random_dense(&mut rng, 4, 6);
            let y = cvec(&mut rng, 4);
            let a = rng.random_range(0..6);
            let b = (a + rng.random_range(1..6)) % 6;
            let (sx, sn) = (rng.random_range(0.5..3.0), rng.random_range(0.05..1.0));
            let got = gaussian_log_likelihood(&y, &[a, b], &m, sx, sn).unwrap();
            let want = literal_density_log(&y, &m, &[a, b], sx, sn);
            assert!(((got - want) / want.abs().max(1.0)).abs() < 1e-9, "{got} vs {want}");
            let swapped = gaussian_log_likelihood(&y, &[b, a], &m, sx, sn).unwrap();
            assert!((swapped - got).abs() < 1e-10);
        }
    }

    #[test]
    fn unknown_likelihood_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_dense(&mut rng, 4, 6);
        let y = m.apply_sparse(&[1, 4], &[C64::new(0.3, -1.0), C64::new(2.0, 0.5)]);
        assert!(unknown_log_likelihood(&y, &[1, 4], &m, 0.1).unwrap().abs() < 1e-10);
        // square orthonormal support spans everything
        let one = C64::new(1.0, 0.0);
        let q = SensingMatrix::dense(2, 2, vec![one, one, one, -one]).unwrap();
        let y2 = cvec(&mut rng, 2);
        assert!(unknown_log_likelihood(&y2, &[0, 1], &q, 1.0).unwrap().abs() < 1e-12);
        let par = SensingMatrix::dense(2, 2, vec![one, one, one, one]).unwrap();
        assert!(matches!(
            unknown_log_likelihood(&y2, &[0, 1], &par, 1.0),
            Err(Error::RankDeficient)
        ));
    }

    #[test]
    fn unknown_likelihood_grows_with_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let m = random_dense(&mut rng, 6, 8);
            let y = cvec(&mut rng, 6);
            let mut s = Vec::new();
            let mut last = unknown_log_likelihood(&y, &s, &m, 0.5).unwrap();
            for k in [5, 0, 3, 7] {
                s.push(k);
                let v = unknown_log_likelihood(&y, &s, &m, 0.5).unwrap();
                assert!(v >= last - 1e-12);
                last = v;
            }
        }
    }

    #[test]
    fn gaussian_expectation_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_dense(&mut rng, 5, 7);
        let zero = vec![C64::new(0.0, 0.0); 5];
        assert!(gaussian_cond_expectation(&zero, &[1, 2], &m, 1.0, 0.1)
            .unwrap()
            .iter()
            .all(|v| v.norm() == 0.0));
        let y = cvec(&mut rng, 5);
        let (sx, sn) = (2.0, 0.5);
        let single = gaussian_cond_expectation(&y, &[3], &m, sx, sn).unwrap();
        let wiener = dot_h(&m.column(3), &y) * (sx / (sx + sn));
        assert!((single[0] - wiener).norm() < 1e-12);
    }

    #[test]
    fn gaussian_expectation_matches_joint_gaussian_conditioning() {
        // E[x_S|y] = Cov(x_S, y) Cov(y)⁻¹ y with Cov(x_S,y) = σx² Ψ_S^H.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..30 {
            let m = random_dense(&mut rng, 4, 6);
            let y = cvec(&mut rng, 4);
            let s = [0, 2, 5];
            let (sx, sn) = (1.5, 0.2);
            let psi = submatrix(&m, &s);
            let cxy = psi.adjoint() * C64::new(sx, 0.0);
            let mut cyy = &psi * psi.adjoint() * C64::new(sx, 0.0);
            for i in 0..4 {
                cyy[(i, i)] += sn;
            }
            let want = cxy * cyy.try_inverse().unwrap() * to_dvector(&y);
            let got = gaussian_cond_expectation(&y, &s, &m, sx, sn).unwrap();
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn blue_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_dense(&mut rng, 6, 8);
        let xs = [C64::new(1.0, 2.0), C64::new(-0.5, 0.1), C64::new(0.0, -3.0)];
        let y = m.apply_sparse(&[1, 4, 6], &xs);
        let got = blue_cond_expectation(&y, &[1, 4, 6], &m).unwrap();
        for (g, w) in got.iter().zip(&xs) {
            assert!((g - w).norm() < 1e-10);
        }
        // normal-equations oracle with explicit inverse
        let y = cvec(&mut rng, 6);
        let psi = submatrix(&m, &[0, 3]);
        let g = (psi.adjoint() * &psi).try_inverse().unwrap();
        let want = g * psi.adjoint() * to_dvector(&y);
        let got = blue_cond_expectation(&y, &[0, 3], &m).unwrap();
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
        // orthonormal columns: plain correlation
        let id = SensingMatrix::dense(
            2,
            2,
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        )
        .unwrap();
        let y = vec![C64::new(0.2, 0.1), C64::new(-1.0, 0.0)];
        assert_eq!(blue_cond_expectation(&y, &[0, 1], &id).unwrap(), y);
    }

    #[test]
    fn posterior_weight_examples() {
        let one = posterior_weights(vec![Hypothesis::empty(-3.0)], 10, 0.1);
        assert_eq!(one.weights, vec![1.0]);
        let h = |s: Vec<usize>, l: f64| Hypothesis {
            cond_expectation: vec![C64::new(0.0, 0.0); s.len()],
            support: s,
            log_likelihood: l,
        };
        let two = posterior_weights(vec![h(vec![1], -2.0), h(vec![4], -2.0)], 10, 0.1);
        assert!((two.weights[0] - 0.5).abs() < 1e-15);
        // hand-set logs, direct normalization
        let hs = vec![h(vec![], 0.3), h(vec![2], -0.4), h(vec![2, 5], 1.1)];
        let raw: Vec<f64> = hs
            .iter()
            .map(|x| (x.log_likelihood).exp() * 0.2f64.powi(x.support.len() as i32) * 0.8f64.powi(6 - x.support.len() as i32))
            .collect();
        let total: f64 = raw.iter().sum();
        let got = posterior_weights(hs.clone(), 6, 0.2);
        for (g, r) in got.weights.iter().zip(&raw) {
            assert!((g - r / total).abs() < 1e-14);
        }
        let shifted: Vec<Hypothesis> = hs
            .into_iter()
            .map(|mut x| {
                x.log_likelihood -= 800.0;
                x
            })
            .collect();
        let got2 = posterior_weights(shifted, 6, 0.2);
        assert!((got2.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (a, b) in got.weights.iter().zip(&got2.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn map_support_tie_rules() {
        let h = |s: Vec<usize>| Hypothesis {
            cond_expectation: vec![C64::new(0.0, 0.0); s.len()],
            support: s,
            log_likelihood: 0.0,
        };
        let post = PosteriorSet {
            hypotheses: vec![h(vec![1]), h(vec![2])],
            weights: vec![0.7, 0.3],
        };
        assert_eq!(map_support(&post).unwrap().support, vec![1]);
        let tie = PosteriorSet {
            hypotheses: vec![h(vec![1, 2]), h(vec![3]), h(vec![0])],
            weights: vec![0.25, 0.25, 0.25],
        };
        assert_eq!(map_support(&tie).unwrap().support, vec![0]);
        let empty = PosteriorSet {
            hypotheses: vec![],
            weights: vec![],
        };
        assert!(map_support(&empty).is_none());
    }

    #[test]
    fn exhaustive_two_hypothesis_scalar_case() {
        let one = C64::new(1.0, 0.0);
        let m = SensingMatrix::dense(1, 1, vec![one]).unwrap();
        let y = vec![C64::new(0.8, -0.3)];
        let (sx, sn, p) = (2.0, 0.5, 0.2);
        let prior = PriorConfig::new(p, sx, PriorKind::Gaussian).unwrap();
        let (xhat, post) = exhaustive_mmse(&y, &m, &prior, sn).unwrap();
        // hand computation: y ~ CN(0, σn²) vs CN(0, σx²+σn²)
        let l0 = (1.0 - p) * (-y[0].norm_sqr() / sn).exp() / sn;
        let l1 = p * (-y[0].norm_sqr() / (sx + sn)).exp() / (sx + sn);
        let w = l1 / (l0 + l1);
        let want = y[0] * (w * sx / (sx + sn));
        assert!((xhat[0] - want).norm() < 1e-12);
        assert_eq!(post.len(), 2);
    }

    #[test]
    fn exhaustive_collapses_for_tiny_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = random_dense(&mut rng, 3, 5);
        let y = cvec(&mut rng, 3);
        let prior = PriorConfig::new(1e-12, 1.0, PriorKind::Gaussian).unwrap();
        let (xhat, post) = exhaustive_mmse(&y, &m, &prior, 1.0).unwrap();
        let empty = post.hypotheses.iter().position(|h| h.support.is_empty()).unwrap();
        assert!(post.weights[empty] > 1.0 - 1e-9);
        assert!(xhat.iter().all(|v| v.norm() < 1e-9));
    }

    #[test]
    fn exhaustive_matches_reversed_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = random_dense(&mut rng, 4, 7);
        let y = cvec(&mut rng, 4);
        for kind in [PriorKind::Gaussian, PriorKind::Unknown] {
            let prior = PriorConfig::new(0.2, 1.0, kind).unwrap();
            let (xhat, post) = exhaustive_mmse(&y, &m, &prior, 0.3).unwrap();
            assert!((post.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            // independent re-enumeration from the top mask downwards
            let mut acc = vec![C64::new(0.0, 0.0); 7];
            let mut logs = Vec::new();
            let mut hs = Vec::new();
            for mask in (0u32..1 << 7).rev() {
                let s: Vec<usize> = (0..7).rev().filter(|i| mask >> i & 1 == 1).collect();
                if let Ok(h) = Hypothesis::evaluate(&y, &s, &m, &prior, 0.3) {
                    logs.push(h.log_likelihood + support_prior_log(s.len(), 7, 0.2));
                    hs.push(h);
                }
            }
            let z = log_sum_exp(&logs);
            for (h, l) in hs.iter().zip(&logs) {
                let w = (l - z).exp();
                for (&i, &v) in h.support.iter().zip(&h.cond_expectation) {
                    acc[i] += v * w;
                }
            }
            for (a, b) in xhat.iter().zip(&acc) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn exhaustive_rejects_large_dimension() {
        let m = SensingMatrix::partial_dft(32, 8, 0).unwrap();
        let y = vec![C64::new(0.0, 0.0); 8];
        let prior = PriorConfig::new(0.1, 1.0, PriorKind::Gaussian).unwrap();
        assert!(matches!(exhaustive_mmse(&y, &m, &prior, 1.0), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn mmse_beats_map_on_average() {
        // N=8, M=6, 2000 synthetic draws
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = random_dense(&mut rng, 6, 8);
        let (p, sx, sn) = (0.2, 1.0, 0.1);
        let prior = PriorConfig::new(p, sx, PriorKind::Gaussian).unwrap();
        let (mut err_mmse, mut err_map) = (0.0, 0.0);
        for _ in 0..2000 {
            let x: Vec<C64> = (0..8)
                .map(|_| if rng.random::<f64>() < p { cn(&mut rng, sx) } else { C64::new(0.0, 0.0) })
                .collect();
            let mut y = m.apply(&x).unwrap();
            y.iter_mut().for_each(|v| *v += cn(&mut rng, sn));
            let (xhat, post) = exhaustive_mmse(&y, &m, &prior, sn).unwrap();
            let map = map_support(&post).unwrap().padded(8);
            err_mmse += xhat.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
            err_map += map.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        }
        assert!(err_mmse <= err_map, "{err_mmse} vs {err_map}");
    }
}
