use std::time::Instant;

use rand::Rng;

use super::joint::AugmentedDataset;
use super::model::RejectionModel;
use super::sampler::RejectionSampler;
use super::AugError;
use crate::diagnostics::{ChainTrace, IterationMeta};

/// Parameters after one two-block sweep, with the augmentation size used.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsOutcome<T1, T2> {
    pub theta1: T1,
    pub theta2: T2,
    /// `Σ |𝓨ᵢ|` for the augmentation that drove the `θ₂` update.
    pub rejected: usize,
}

/// One sweep over `θ = (θ₁, θ₂)`, where `Z(θ) = Z₁(θ₁) Z₂(θ₂)`:
///
/// 1. draw fresh rejected sets for all observations under the current `θ`,
/// 2. move `θ₂` with a kernel invariant for `p(θ₂ | X, 𝓨, θ₁)`,
/// 3. discard the rejected sets,
/// 4. draw `θ₁` exactly from `p(θ₁ | X, θ₂)`.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_iteration<M, T1, T2, E, R, F, K2, K1>(
    model_at: F,
    observations: &[M::Point],
    theta1: &T1,
    theta2: &T2,
    update_theta2: K2,
    update_theta1: K1,
    sampler: &RejectionSampler,
    rng: &mut R,
) -> Result<GibbsOutcome<T1, T2>, E>
where
    M: RejectionModel,
    R: Rng + ?Sized,
    E: From<AugError>,
    F: Fn(&T1, &T2) -> M,
    K2: FnOnce(&AugmentedDataset<M::Point>, &T1, &T2, &mut R) -> Result<T2, E>,
    K1: FnOnce(&[M::Point], &T2, &mut R) -> Result<T1, E>,
{
    let model = model_at(theta1, theta2);
    let rejected_sets = sampler.resample_rejected(&model, observations.len(), rng)?;
    let augmented = AugmentedDataset::new(observations.to_vec(), rejected_sets)?;
    let rejected = augmented.rejected_count();
    let new_theta2 = update_theta2(&augmented, theta1, theta2, rng)?;
    drop(augmented);
    let new_theta1 = update_theta1(observations, &new_theta2, rng)?;
    Ok(GibbsOutcome {
        theta1: new_theta1,
        theta2: new_theta2,
        rejected,
    })
}

/// Runs `sweeps` iterations of [`gibbs_iteration`], recording one trace row
/// per sweep.
#[allow(clippy::too_many_arguments)]
pub fn run_gibbs<M, T1, T2, E, R, F, K2, K1, S>(
    model_at: F,
    observations: &[M::Point],
    init: (T1, T2),
    sweeps: usize,
    mut update_theta2: K2,
    mut update_theta1: K1,
    summarize: S,
    labels: Vec<String>,
    sampler: &RejectionSampler,
    rng: &mut R,
) -> Result<(ChainTrace, T1, T2), E>
where
    M: RejectionModel,
    R: Rng + ?Sized,
    E: From<AugError>,
    F: Fn(&T1, &T2) -> M,
    K2: FnMut(&AugmentedDataset<M::Point>, &T1, &T2, &mut R) -> Result<T2, E>,
    K1: FnMut(&[M::Point], &T2, &mut R) -> Result<T1, E>,
    S: Fn(&T1, &T2) -> Vec<f64>,
{
    let (mut theta1, mut theta2) = init;
    let mut trace = ChainTrace::new(labels);
    for _ in 0..sweeps {
        let start = Instant::now();
        let out = gibbs_iteration(
            &model_at,
            observations,
            &theta1,
            &theta2,
            &mut update_theta2,
            &mut update_theta1,
            sampler,
            rng,
        )?;
        theta1 = out.theta1;
        theta2 = out.theta2;
        trace.push(
            summarize(&theta1, &theta2),
            IterationMeta {
                seconds: start.elapsed().as_secs_f64(),
                accepted: None,
                rejected: out.rejected,
            },
        );
    }
    Ok((trace, theta1, theta2))
}
