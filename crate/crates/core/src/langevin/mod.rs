//! Posterior inference for the matrix Langevin distribution on `V_{p,d}`.
//!
//! `G` and `H` have conjugate matrix Langevin conditionals. The concentrations
//! `κ` enter the likelihood through the intractable `Z(κ)`; they are updated
//! either on the joint with the rejected proposals of the exact sampler (HMC or
//! random-walk), by the exchange algorithm, or with an asymptotic `Z(κ)`.

mod conditional;
mod fit;
mod joint;
mod kappa;

pub use conditional::{update_g, update_h};
pub use fit::{fit_langevin, simulate_observations, KappaSampler, LangevinFit, LangevinFitConfig};
pub use joint::{grad_log_joint_kappa, log_joint_kappa, AugmentedLangevinData};
pub use kappa::{
    approx_update_kappa, exchange_update_kappa, hmc_update_kappa, reflect, rw_update_kappa, HmcConfig,
    HmcParametrization, KappaMove,
};

use nalgebra::{DMatrix, DVector};

use crate::stiefel::{LangevinParams, StiefelError, StiefelMatrix};

#[derive(Debug, thiserror::Error)]
pub enum LangevinError {
    #[error(transparent)]
    Stiefel(#[from] StiefelError),
    #[error(transparent)]
    Aug(#[from] crate::aug::AugError),
    #[error(transparent)]
    Specfun(#[from] crate::specfun::SpecfunError),
    #[error("gradient undefined at kappa[{index}] = {value}")]
    GradientDomain { index: usize, value: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<LangevinError>,
    },
}

/// Prior exponents for `H` and `G` and independent `Gamma(shape, rate)`
/// priors on each `κ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LangevinPriors {
    pub f0: DMatrix<f64>,
    pub f1: DMatrix<f64>,
    pub gamma_shape: f64,
    pub gamma_rate: f64,
}

impl LangevinPriors {
    /// Uniform priors on `G` and `H`, exponential(mean 10) on each `κ_k`.
    pub fn default_for(d: usize, p: usize) -> Self {
        Self {
            f0: DMatrix::zeros(p, p),
            f1: DMatrix::zeros(d, p),
            gamma_shape: 1.0,
            gamma_rate: 0.1,
        }
    }

    pub fn log_prior_kappa(&self, kappa: &[f64]) -> f64 {
        if kappa.iter().any(|k| !(*k > 0.0)) {
            return f64::NEG_INFINITY;
        }
        kappa
            .iter()
            .map(|k| (self.gamma_shape - 1.0) * k.ln() - self.gamma_rate * k)
            .sum()
    }

    pub fn grad_log_prior_kappa(&self, kappa: &[f64]) -> Vec<f64> {
        kappa
            .iter()
            .map(|k| (self.gamma_shape - 1.0) / k - self.gamma_rate)
            .collect()
    }
}

/// Current parameters, priors and observations. `s` is `Σ X_i H`, the sum of
/// the observations rotated by the current `H`.
#[derive(Debug, Clone)]
pub struct LangevinPosteriorState {
    pub params: LangevinParams,
    pub priors: LangevinPriors,
    observations: Vec<StiefelMatrix>,
    raw_sum: DMatrix<f64>,
    s: DMatrix<f64>,
}

impl LangevinPosteriorState {
    pub fn new(
        params: LangevinParams,
        priors: LangevinPriors,
        observations: Vec<StiefelMatrix>,
    ) -> Result<Self, LangevinError> {
        let (d, p) = (params.d(), params.p());
        if priors.f0.shape() != (p, p) || priors.f1.shape() != (d, p) {
            return Err(LangevinError::Config("prior exponent shapes".into()));
        }
        if !(priors.gamma_shape > 0.0 && priors.gamma_rate > 0.0) {
            return Err(LangevinError::Config("Gamma prior must be proper".into()));
        }
        if observations.iter().any(|x| x.d() != d || x.p() != p) {
            return Err(LangevinError::Config(format!("observations must be {d}x{p}")));
        }
        let raw_sum = observations
            .iter()
            .fold(DMatrix::zeros(d, p), |acc, x| acc + x.as_matrix());
        let mut state = Self {
            params,
            priors,
            observations,
            raw_sum,
            s: DMatrix::zeros(d, p),
        };
        state.refresh_rotation();
        Ok(state)
    }

    fn refresh_rotation(&mut self) {
        self.s = &self.raw_sum * self.params.h.as_matrix();
    }

    pub fn set_h(&mut self, h: StiefelMatrix) {
        self.params.h = h;
        self.refresh_rotation();
    }

    pub fn observations(&self) -> &[StiefelMatrix] {
        &self.observations
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    /// `Σ X_i` before rotation.
    pub fn raw_sum(&self) -> &DMatrix<f64> {
        &self.raw_sum
    }

    /// `S = Σ X_i H`.
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    /// `(GᵀS)_kk`, the data coefficients of `κ_k` in the log likelihood.
    pub fn kappa_coefficients(&self) -> DVector<f64> {
        diag_gt_s(&self.params.g, &self.s)
    }
}

pub(crate) fn diag_gt_s(g: &StiefelMatrix, s: &DMatrix<f64>) -> DVector<f64> {
    let g = g.as_matrix();
    DVector::from_fn(g.ncols(), |k, _| g.column(k).dot(&s.column(k)))
}
