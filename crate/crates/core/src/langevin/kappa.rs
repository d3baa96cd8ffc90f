use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::joint::{grad_log_joint_kappa, log_joint_kappa, AugmentedLangevinData};
use super::{diag_gt_s, LangevinError, LangevinPosteriorState, LangevinPriors};
use crate::aug::RejectionSampler;
use crate::specfun::log_z_asymptotic;
use crate::stiefel::LangevinRejectionModel;

/// Result of one `κ` transition.
#[derive(Debug, Clone, PartialEq)]
pub struct KappaMove {
    pub kappa: Vec<f64>,
    pub accepted: bool,
}

impl KappaMove {
    fn stay(kappa: &[f64]) -> Self {
        Self {
            kappa: kappa.to_vec(),
            accepted: false,
        }
    }
}

/// Reflection at zero; a Gaussian step followed by reflection is a symmetric
/// proposal on the positive half-line.
pub fn reflect(x: f64) -> f64 {
    x.abs()
}

fn metropolis<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    !log_ratio.is_nan() && u.ln() < log_ratio
}

fn rw_proposal<R: Rng + ?Sized>(kappa: &[f64], sd: f64, rng: &mut R) -> Vec<f64> {
    kappa
        .iter()
        .map(|k| reflect(k + sd * rng.sample::<f64, _>(StandardNormal)))
        .collect()
}

fn check_sd(sd: f64) -> Result<(), LangevinError> {
    if sd > 0.0 && sd.is_finite() {
        Ok(())
    } else {
        Err(LangevinError::Config(format!("proposal sd {sd} must be positive")))
    }
}

fn log_target(aug: &AugmentedLangevinData, priors: &LangevinPriors, kappa: &[f64]) -> f64 {
    let prior = priors.log_prior_kappa(kappa);
    if prior == f64::NEG_INFINITY {
        return prior;
    }
    prior + log_joint_kappa(aug, kappa)
}

/// Random-walk Metropolis on the augmented joint with a reflecting Gaussian
/// proposal.
pub fn rw_update_kappa<R: Rng + ?Sized>(
    aug: &AugmentedLangevinData,
    priors: &LangevinPriors,
    kappa: &[f64],
    proposal_sd: f64,
    rng: &mut R,
) -> Result<KappaMove, LangevinError> {
    check_sd(proposal_sd)?;
    let proposal = rw_proposal(kappa, proposal_sd, rng);
    let ratio = log_target(aug, priors, &proposal) - log_target(aug, priors, kappa);
    Ok(if metropolis(ratio, rng) {
        KappaMove {
            kappa: proposal,
            accepted: true,
        }
    } else {
        KappaMove::stay(kappa)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum HmcParametrization {
    /// Leapfrog on `κ` itself, reflecting position and momentum at zero.
    #[default]
    Direct,
    /// Leapfrog on `ln κ`, with the Jacobian in the target.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HmcConfig {
    pub step_size: f64,
    pub leapfrog_steps: usize,
    #[serde(default)]
    pub parametrization: HmcParametrization,
}

impl Default for HmcConfig {
    fn default() -> Self {
        Self {
            step_size: 0.3,
            leapfrog_steps: 5,
            parametrization: HmcParametrization::Direct,
        }
    }
}

fn to_kappa(position: &[f64], param: HmcParametrization) -> Vec<f64> {
    match param {
        HmcParametrization::Direct => position.to_vec(),
        HmcParametrization::Log => position.iter().map(|l| l.exp()).collect(),
    }
}

/// Log density in the working coordinates.
fn working_value(
    aug: &AugmentedLangevinData,
    priors: &LangevinPriors,
    position: &[f64],
    param: HmcParametrization,
) -> f64 {
    let mut value = log_target(aug, priors, &to_kappa(position, param));
    if param == HmcParametrization::Log {
        value += position.iter().sum::<f64>();
    }
    value
}

/// Gradient of [`working_value`]; `None` if undefined or non-finite.
fn working_grad(
    aug: &AugmentedLangevinData,
    priors: &LangevinPriors,
    position: &[f64],
    param: HmcParametrization,
) -> Option<Vec<f64>> {
    let kappa = to_kappa(position, param);
    let mut grad: Vec<f64> = grad_log_joint_kappa(aug, &kappa)
        .ok()?
        .iter()
        .zip(priors.grad_log_prior_kappa(&kappa))
        .map(|(a, b)| a + b)
        .collect();
    if param == HmcParametrization::Log {
        for (g, k) in grad.iter_mut().zip(&kappa) {
            *g = *g * k + 1.0;
        }
    }
    grad.iter().all(|g| g.is_finite()).then_some(grad)
}

/// Hamiltonian Monte Carlo on the augmented joint with identity mass matrix.
/// Non-finite values along the trajectory reject the move.
pub fn hmc_update_kappa<R: Rng + ?Sized>(
    aug: &AugmentedLangevinData,
    priors: &LangevinPriors,
    kappa: &[f64],
    config: &HmcConfig,
    rng: &mut R,
) -> Result<KappaMove, LangevinError> {
    if !(config.step_size > 0.0 && config.leapfrog_steps >= 1) {
        return Err(LangevinError::Config(
            "HMC needs step_size > 0 and at least one step".into(),
        ));
    }
    let param = config.parametrization;
    let eps = config.step_size;
    let mut q: Vec<f64> = match param {
        HmcParametrization::Direct => kappa.to_vec(),
        HmcParametrization::Log => kappa.iter().map(|k| k.ln()).collect(),
    };
    let mut mom: Vec<f64> = (0..kappa.len()).map(|_| rng.sample(StandardNormal)).collect();
    let logp0 = working_value(aug, priors, &q, param);
    let Some(mut grad) = working_grad(aug, priors, &q, param) else {
        return Ok(KappaMove::stay(kappa));
    };
    let kinetic0: f64 = 0.5 * mom.iter().map(|m| m * m).sum::<f64>();
    for _ in 0..config.leapfrog_steps {
        for (m, g) in mom.iter_mut().zip(&grad) {
            *m += 0.5 * eps * g;
        }
        for (x, m) in q.iter_mut().zip(mom.iter_mut()) {
            *x += eps * *m;
            if param == HmcParametrization::Direct && *x < 0.0 {
                *x = -*x;
                *m = -*m;
            }
        }
        match working_grad(aug, priors, &q, param) {
            Some(g) => grad = g,
            None => return Ok(KappaMove::stay(kappa)),
        }
        for (m, g) in mom.iter_mut().zip(&grad) {
            *m += 0.5 * eps * g;
        }
    }
    let logp = working_value(aug, priors, &q, param);
    let kinetic1: f64 = 0.5 * mom.iter().map(|m| m * m).sum::<f64>();
    let log_ratio = (logp - kinetic1) - (logp0 - kinetic0);
    if metropolis(log_ratio, rng) {
        Ok(KappaMove {
            kappa: to_kappa(&q, param),
            accepted: true,
        })
    } else {
        Ok(KappaMove::stay(kappa))
    }
}

/// Exchange algorithm: propose `κ*`, simulate a pseudo-dataset of the same
/// size at `κ*` with the exact sampler, and accept with the ratio in which
/// both normalizers cancel.
pub fn exchange_update_kappa<R: Rng + ?Sized>(
    state: &LangevinPosteriorState,
    proposal_sd: f64,
    sampler: &RejectionSampler,
    rng: &mut R,
) -> Result<KappaMove, LangevinError> {
    check_sd(proposal_sd)?;
    let kappa = state.params.kappa.as_slice();
    let proposal = rw_proposal(kappa, proposal_sd, rng);
    if proposal.iter().any(|k| !(*k > 0.0)) {
        return Ok(KappaMove::stay(kappa));
    }
    let g = &state.params.g;
    // Pseudo-data are drawn unrotated, matching the rotated observations in S.
    let model = LangevinRejectionModel::new(g.clone(), nalgebra::DVector::from_vec(proposal.clone()))?;
    let mut w_sum = DMatrix::zeros(g.d(), g.p());
    for _ in 0..state.n() {
        w_sum += sampler.sample(&model, rng)?.accepted.as_matrix();
    }
    let cx = state.kappa_coefficients();
    let cw = diag_gt_s(g, &w_sum);
    let mut log_ratio = state.priors.log_prior_kappa(&proposal) - state.priors.log_prior_kappa(kappa);
    for k in 0..kappa.len() {
        log_ratio += (proposal[k] - kappa[k]) * (cx[k] - cw[k]);
    }
    Ok(if metropolis(log_ratio, rng) {
        KappaMove {
            kappa: proposal,
            accepted: true,
        }
    } else {
        KappaMove::stay(kappa)
    })
}

/// Metropolis–Hastings with the asymptotic normalizer in place of `Z(κ)`.
/// Targets an approximation of the posterior.
pub fn approx_update_kappa<R: Rng + ?Sized>(
    state: &LangevinPosteriorState,
    proposal_sd: f64,
    rng: &mut R,
) -> Result<KappaMove, LangevinError> {
    check_sd(proposal_sd)?;
    let kappa = state.params.kappa.as_slice();
    let proposal = rw_proposal(kappa, proposal_sd, rng);
    if proposal.iter().any(|k| !(*k > 0.0)) {
        return Ok(KappaMove::stay(kappa));
    }
    let c = state.kappa_coefficients();
    let d = state.params.d();
    let n = state.n() as f64;
    let loglik = |k: &[f64]| -> Result<f64, LangevinError> {
        let linear: f64 = k.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
        Ok(linear - n * log_z_asymptotic(k, d)?)
    };
    let log_ratio = loglik(&proposal)? + state.priors.log_prior_kappa(&proposal)
        - loglik(kappa)?
        - state.priors.log_prior_kappa(kappa);
    Ok(if metropolis(log_ratio, rng) {
        KappaMove {
            kappa: proposal,
            accepted: true,
        }
    } else {
        KappaMove::stay(kappa)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_is_symmetric() {
        // q(b | a) = φ(b - a) + φ(b + a) is symmetric in (a, b).
        let phi = |x: f64| (-0.5 * x * x).exp();
        let q = |a: f64, b: f64| phi(b - a) + phi(b + a);
        for &(a, b) in &[(0.3, 2.0), (5.0, 0.1), (1.0, 1.0)] {
            assert!((q(a, b).ln() - q(b, a).ln()).abs() < 1e-15);
        }
        assert_eq!(reflect(-2.0), 2.0);
    }
}
