//! Dirichlet process mixtures of Gaussians observed only inside a box.
//!
//! The truncated model is a rejection sampler with the untruncated mixture as
//! proposal, `M = 1` and acceptance equal to the box indicator. Its rejected
//! proposals complete the data to an untruncated sample, on which the blocked
//! stick-breaking Gibbs sampler runs unchanged.

mod fit;
mod gaussian;
mod gibbs;
mod region;

pub use fit::{fit_truncated_dpmm, standard_blocked_gibbs, DensityGrid, MixtureFit, MixtureFitConfig};
pub use gaussian::Gaussian;
pub use gibbs::{blocked_gibbs_sweep, NiwPrior, StickBreakingState};
pub use region::{BoxScaling, TruncatedMixtureModel, TruncationRegion};

#[derive(Debug, thiserror::Error)]
pub enum MixtureError {
    #[error("invalid region: {0}")]
    Region(String),
    #[error("invalid prior: {0}")]
    Prior(String),
    #[error("data point {index} has dimension {got}, expected {expected}")]
    Dimension { index: usize, got: usize, expected: usize },
    #[error("data point {0} lies outside the truncation region")]
    OutsideRegion(usize),
    #[error("covariance lost positive definiteness even after jitter")]
    NotPositiveDefinite,
    #[error(transparent)]
    Aug(#[from] crate::aug::AugError),
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<MixtureError>,
    },
}
