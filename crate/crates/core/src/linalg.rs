use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, C64};

/// Schur-complement floor below which a unit-norm column is treated as
/// lying in the span of the ones already selected.
pub(crate) const RANK_TOL: f64 = 1e-10;

/// `a^H b`
pub(crate) fn dot_h(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm_sqr(a: &[C64]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum()
}

pub(crate) fn to_dvector(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}

/// Cholesky factor of a Hermitian matrix, with `Error::NotPositiveDefinite`
/// on failure.
pub(crate) fn cholesky(a: DMatrix<C64>) -> Result<nalgebra::Cholesky<C64, nalgebra::Dyn>> {
    a.cholesky().ok_or(Error::NotPositiveDefinite)
}

/// Cholesky of a Gram matrix with a rank check on every pivot.
///
/// Squared pivots are the successive Schur complements, i.e. the squared
/// distance of each column from the span of the previous ones.
pub(crate) fn gram_cholesky(g: DMatrix<C64>) -> Result<nalgebra::Cholesky<C64, nalgebra::Dyn>> {
    let chol = g.cholesky().ok_or(Error::RankDeficient)?;
    let l = chol.l_dirty();
    for i in 0..l.nrows() {
        if l[(i, i)].re * l[(i, i)].re <= RANK_TOL {
            return Err(Error::RankDeficient);
        }
    }
    Ok(chol)
}

/// `ln det` from a Cholesky factor.
pub(crate) fn chol_log_det(chol: &nalgebra::Cholesky<C64, nalgebra::Dyn>) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| 2.0 * l[(i, i)].re.ln()).sum()
}

/// Numerically stable `ln Σ exp(v)`; `-inf` for an empty slice.
pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
