//! Gaussian process density sampler.
//!
//! The random density is `g(x) ∝ g₀(x) σ(f(x))` with `f` a Gaussian process
//! and `g₀` a normal base density. Sampling proposes from `g₀` and accepts
//! with probability `σ(f(y))`, evaluating `f` lazily at each proposal
//! conditionally on every earlier evaluation. Inference reruns that sampler
//! against the current function values to refresh the rejected proposals,
//! after which the function update is a logistic GP classification problem.

mod base;
mod fit;
mod generate;
mod gp;
mod latent;

pub use base::{NigPrior, NormalBase};
pub use fit::{fit_gpds, GpdsConfig, GpdsFit, GpdsState, KernelPrior, PredictiveGrid, RejectedHistogram};
pub use generate::{gpds_generate, FixedFunctionModel, GeneratedSample};
pub use gp::{gpds_conditional_f, GpConditioner, SquaredExponential, COALESCE_TOL, GP_JITTER};
pub use latent::{log_likelihood, update_latent_f, LabelCounts, LatentUpdate};

#[derive(Debug, thiserror::Error)]
pub enum GpdsError {
    #[error("expected points of dimension {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("only 1- and 2-dimensional data are supported, got {0}")]
    UnsupportedDimension(usize),
    #[error("no observations")]
    EmptyData,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("GP covariance of order {size} is not positive definite even with jitter")]
    NotPositiveDefinite { size: usize },
    #[error(transparent)]
    Aug(#[from] crate::aug::AugError),
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<GpdsError>,
    },
}

/// `ln σ(f)` without overflow.
pub(crate) fn log_sigmoid(f: f64) -> f64 {
    -softplus(-f)
}

/// `ln(1 + eˣ)`.
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(f: f64) -> f64 {
    if f >= 0.0 {
        1.0 / (1.0 + (-f).exp())
    } else {
        let e = f.exp();
        e / (1.0 + e)
    }
}
