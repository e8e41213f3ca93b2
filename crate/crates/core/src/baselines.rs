//! Comparison estimators: orthogonal matching pursuit and Bayesian MMSE
//! refinement over the subsets of a candidate support.

use serde::{Deserialize, Serialize};

use crate::bayes::posterior_weights;
use crate::linalg::{gram_cholesky, norm_sqr, to_dvector};
use crate::model::SensingMatrix;
use crate::oc::{search_cache, DEFAULT_BEAM_WIDTH};
use crate::priors::{max_support_size, PriorConfig};
use crate::recursive::ColumnCache;
use crate::{Error, Result, C64};

/// Largest superset refined by full subset enumeration.
pub const DEFAULT_REFINE_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmpConfig {
    pub max_iter: usize,
    pub residual_tol: f64,
}

impl OmpConfig {
    /// Stops at the high-probability support size or at the noise floor
    /// `sqrt(M σn²)`.
    pub fn for_problem(n: usize, m: usize, p: f64, noise_variance: f64) -> Result<Self> {
        Ok(OmpConfig {
            max_iter: max_support_size(n, p, 0.01)?.min(m),
            residual_tol: (m as f64 * noise_variance).sqrt(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmpResult {
    /// Selected columns in selection order.
    pub support: Vec<usize>,
    /// Least-squares coefficients aligned with `support`.
    pub coefficients: Vec<C64>,
    /// `‖r‖` before the first step and after each accepted step.
    pub residual_norms: Vec<f64>,
    /// The last selected column made the least-squares problem singular.
    pub rank_loss: bool,
}

impl OmpResult {
    pub fn estimate(&self, n: usize) -> Vec<C64> {
        let mut x = vec![C64::new(0.0, 0.0); n];
        for (&k, &v) in self.support.iter().zip(&self.coefficients) {
            x[k] = v;
        }
        x
    }
}

fn least_squares(m: &SensingMatrix, support: &[usize], y: &[C64]) -> Result<Vec<C64>> {
    let psi = crate::bayes::submatrix(m, support);
    let rhs = psi.adjoint() * to_dvector(y);
    Ok(gram_cholesky(psi.adjoint() * &psi)?.solve(&rhs).as_slice().to_vec())
}

pub fn omp_recover(y: &[C64], m: &SensingMatrix, max_iter: usize, residual_tol: f64) -> Result<OmpResult> {
    if max_iter > m.m() {
        return Err(Error::InvalidArgument(format!(
            "max_iter {max_iter} exceeds the number of measurements {}",
            m.m()
        )));
    }
    let mut residual = y.to_vec();
    let mut support: Vec<usize> = Vec::new();
    let mut coefficients = Vec::new();
    let mut residual_norms = vec![norm_sqr(y).sqrt()];
    let mut rank_loss = false;
    while support.len() < max_iter && *residual_norms.last().unwrap() > residual_tol {
        let corr = m.adjoint_apply(&residual)?;
        let pick = corr
            .iter()
            .enumerate()
            .filter(|(k, _)| !support.contains(k))
            .map(|(k, c)| (k, c.norm()))
            .reduce(|best, cand| if cand.1 > best.1 { cand } else { best });
        let Some((k, strength)) = pick else { break };
        if strength == 0.0 {
            break;
        }
        support.push(k);
        match least_squares(m, &support, y) {
            Ok(c) => coefficients = c,
            Err(Error::RankDeficient) => {
                support.pop();
                rank_loss = true;
                break;
            }
            Err(e) => return Err(e),
        }
        let fit = m.apply_sparse(&support, &coefficients);
        residual = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
        residual_norms.push(norm_sqr(&residual).sqrt());
    }
    Ok(OmpResult {
        support,
        coefficients,
        residual_norms,
        rank_loss,
    })
}

/// MMSE estimate over the subsets of `superset`. Up to `cap` columns every
/// subset is weighed; beyond that the best supports per size found by the
/// greedy beam search.
pub fn mmse_refine(
    y: &[C64],
    m: &SensingMatrix,
    superset: &[usize],
    prior: &PriorConfig,
    noise_variance: f64,
    cap: usize,
) -> Result<Vec<C64>> {
    prior.validate()?;
    let mut cols = superset.to_vec();
    cols.sort_unstable();
    cols.dedup();
    if cols.is_empty() {
        return Ok(vec![C64::new(0.0, 0.0); m.n()]);
    }
    let size = cols.len();
    let cache = ColumnCache::new(m, cols, y)?;
    let budget = if size <= cap { usize::MAX } else { 0 };
    let outcome = search_cache(&cache, prior, noise_variance, size, budget, DEFAULT_BEAM_WIDTH, true);
    Ok(posterior_weights(outcome.hypotheses, m.n(), prior.p).mmse(m.n()))
}
