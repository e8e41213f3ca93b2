//! Structure-aware Bayesian sparse recovery.
//!
//! Observations follow `y = Ψx + n` with a sparse Bernoulli-mixture `x`.
//! The sensing matrix `Ψ` is structured (partial DFT or sub-sampled
//! Toeplitz), so distant columns are nearly or exactly orthogonal. The
//! orthogonal-clustering estimator exploits that: it correlates `y` with
//! the columns, groups the strong correlations into non-overlapping
//! clusters, searches the dominant supports inside each cluster with
//! order-recursive likelihood updates and then stitches the per-cluster
//! MMSE (or MAP) estimates together.
//!
//! Module map:
//! - [`model`]: sensing matrices and measurement instances
//! - [`priors`]: sparsity priors, support-size caps and the noise threshold
//! - [`bayes`]: direct likelihood / expectation kernels and exhaustive MMSE
//! - [`recursive`]: order-recursive chains and cluster-similarity transforms
//! - [`oc`]: the orthogonal-clustering pipeline
//! - [`baselines`]: OMP and MMSE refinement of a support superset
//! - [`bench`]: instance generation, NMSE scoring and parameter sweeps

pub mod baselines;
pub mod bayes;
pub mod bench;
pub mod checks;
mod error;
mod linalg;
pub mod model;
pub mod oc;
pub mod priors;
pub mod recursive;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
