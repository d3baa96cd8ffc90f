//! Data augmentation MCMC for models whose generative process is a rejection
//! sampler. Instantiating the rejected proposals behind each observation turns
//! a posterior with an intractable normalizer into one with a tractable joint.

// Negated comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aug;
pub mod diagnostics;
pub mod gpds;
pub mod langevin;
pub mod mixture;
pub mod rng;
pub mod specfun;
pub mod stiefel;
