//! Data augmentation for models whose likelihood is defined by a rejection
//! sampler.
//!
//! A [`RejectionModel`] describes one parameter setting: an unnormalized target
//! `f`, a proposal density `q`, and an envelope constant `M` with `f ≤ M q`.
//! Given observations, the rejected proposals that preceded each of them can be
//! drawn exactly and independently of the observed values, by running the
//! sampler until it has produced as many acceptances as there are observations.
//! On the augmented space the joint density contains no normalizing constant.

mod ergodicity;
mod gibbs;
mod joint;
mod model;
mod sampler;
pub mod toy;

pub use ergodicity::{theorem1_bound, ErgodicityInputs, MixingBound};
pub use gibbs::{gibbs_iteration, run_gibbs, GibbsOutcome};
pub use joint::{log_joint_augmented, AugmentedDataset};
pub use model::{BaseMeasure, RejectionModel};
pub use sampler::{resample_rejected, sample_with_rejections, RejectionDraw, RejectionSampler, DEFAULT_MAX_ATTEMPTS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugError {
    #[error("rejection sampler gave up after {attempts} proposals without an acceptance")]
    MaxAttempts { attempts: u64 },
    #[error("augmented dataset has {observations} observations but {rejected_sets} rejected sets")]
    Misaligned { observations: usize, rejected_sets: usize },
    #[error("inconsistent ergodicity inputs: {0}")]
    Ergodicity(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
}
