use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kappa::{approx_update_kappa, exchange_update_kappa, hmc_update_kappa, rw_update_kappa, HmcConfig};
use super::{update_g, update_h, AugmentedLangevinData, LangevinError, LangevinPosteriorState, LangevinPriors};
use crate::aug::RejectionSampler;
use crate::diagnostics::{ChainTrace, IterationMeta};
use crate::stiefel::{sample_matrix_langevin, LangevinParams, LangevinRejectionModel, StiefelMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum KappaSampler {
    Hmc(HmcConfig),
    Rw { proposal_sd: f64 },
    Exchange { proposal_sd: f64 },
    Approx { proposal_sd: f64 },
}

impl KappaSampler {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Hmc(_) => "hmc",
            Self::Rw { .. } => "rw",
            Self::Exchange { .. } => "exchange",
            Self::Approx { .. } => "approx",
        }
    }

    pub fn is_approximate(&self) -> bool {
        matches!(self, Self::Approx { .. })
    }

    fn uses_augmentation(&self) -> bool {
        matches!(self, Self::Hmc(_) | Self::Rw { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinFitConfig {
    pub sampler: KappaSampler,
    pub iterations: usize,
    pub burn_in: usize,
    /// Sample `H`; when false it stays at its initial value.
    pub update_h: bool,
    pub update_g: bool,
    pub priors: Option<LangevinPriors>,
    pub init: Option<LangevinParams>,
    pub max_attempts: u64,
    /// Record the entries of `G` in the trace.
    pub trace_g: bool,
}

impl LangevinFitConfig {
    pub fn new(sampler: KappaSampler, iterations: usize, burn_in: usize) -> Self {
        Self {
            sampler,
            iterations,
            burn_in,
            update_h: false,
            update_g: true,
            priors: None,
            init: None,
            max_attempts: crate::aug::DEFAULT_MAX_ATTEMPTS,
            trace_g: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LangevinFit {
    /// Post-burn-in draws.
    pub trace: ChainTrace,
    pub final_state: LangevinParams,
}

/// `n` exact draws from `ML(G κ Hᵀ)`.
pub fn simulate_observations<R: Rng + ?Sized>(
    params: &LangevinParams,
    n: usize,
    rng: &mut R,
) -> Result<Vec<StiefelMatrix>, LangevinError> {
    (0..n)
        .map(|_| sample_matrix_langevin(params, rng).map_err(Into::into))
        .collect()
}

/// Starts `G` at the orientation of the data mean, `κ = 1` and `H = I`.
fn default_init(observations: &[StiefelMatrix], d: usize, p: usize) -> Result<LangevinParams, LangevinError> {
    let sum = observations
        .iter()
        .fold(DMatrix::zeros(d, p), |acc, x| acc + x.as_matrix());
    let g = if sum.amax() > 1e-12 {
        LangevinParams::from_exponent(&sum)
            .map(|fp| StiefelMatrix::orthonormalize(fp.g.as_matrix() * fp.h.as_matrix().transpose()))
            .ok()
            .and_then(Result::ok)
    } else {
        None
    };
    let g = match g {
        Some(g) => g,
        None => StiefelMatrix::identity(d, p)?,
    };
    Ok(LangevinParams::unrotated(g, DVector::from_element(p, 1.0))?)
}

fn labels(d: usize, p: usize, trace_g: bool) -> Vec<String> {
    let mut l: Vec<String> = (1..=p).map(|k| format!("kappa_{k}")).collect();
    if trace_g {
        for j in 1..=p {
            for i in 1..=d {
                l.push(format!("G_{i}_{j}"));
            }
        }
    }
    l
}

/// Gibbs sampler over `(H, G, κ)`. Each iteration updates `H` (optionally),
/// then `G`, then, for the augmented samplers, draws fresh rejected sets under
/// the current parameters, moves `κ`, and drops the rejected sets.
pub fn fit_langevin<R: Rng + ?Sized>(
    observations: &[StiefelMatrix],
    dims: (usize, usize),
    config: &LangevinFitConfig,
    rng: &mut R,
) -> Result<LangevinFit, LangevinError> {
    let (d, p) = dims;
    let init = match &config.init {
        Some(init) => init.clone(),
        None => default_init(observations, d, p)?,
    };
    if init.d() != d || init.p() != p {
        return Err(LangevinError::Config("initial parameters have the wrong shape".into()));
    }
    let priors = config
        .priors
        .clone()
        .unwrap_or_else(|| LangevinPriors::default_for(d, p));
    let mut state = LangevinPosteriorState::new(init, priors, observations.to_vec())?;
    let sampler = RejectionSampler::new(config.max_attempts);
    let mut trace = ChainTrace::new(labels(d, p, config.trace_g))
        .with_sampler(config.sampler.name(), config.sampler.is_approximate());

    for iteration in 0..config.burn_in + config.iterations {
        let start = Instant::now();
        let (accepted, rejected) = step(&mut state, config, &sampler, rng).map_err(|e| LangevinError::AtIteration {
            iteration,
            source: Box::new(e),
        })?;
        if iteration >= config.burn_in {
            let mut row: Vec<f64> = state.params.kappa.iter().copied().collect();
            if config.trace_g {
                row.extend(state.params.g.as_matrix().iter().copied());
            }
            trace.push(
                row,
                IterationMeta {
                    seconds: start.elapsed().as_secs_f64(),
                    accepted: Some(accepted),
                    rejected,
                },
            );
        }
    }
    Ok(LangevinFit {
        trace,
        final_state: state.params,
    })
}

fn step<R: Rng + ?Sized>(
    state: &mut LangevinPosteriorState,
    config: &LangevinFitConfig,
    sampler: &RejectionSampler,
    rng: &mut R,
) -> Result<(bool, usize), LangevinError> {
    if config.update_h {
        update_h(state, rng)?;
    }
    if config.update_g {
        update_g(state, rng)?;
    }
    let kappa: Vec<f64> = state.params.kappa.iter().copied().collect();
    let (mv, rejected) = if config.sampler.uses_augmentation() {
        let model = LangevinRejectionModel::new(state.params.g.clone(), state.params.kappa.clone())?;
        let sets = sampler.resample_rejected(&model, state.n(), rng)?;
        let aug = AugmentedLangevinData::new(&state.params.g, state.s(), state.n(), sets.into_iter().flatten());
        let rejected = aug.rejected();
        let mv = match config.sampler {
            KappaSampler::Hmc(hmc) => hmc_update_kappa(&aug, &state.priors, &kappa, &hmc, rng)?,
            KappaSampler::Rw { proposal_sd } => rw_update_kappa(&aug, &state.priors, &kappa, proposal_sd, rng)?,
            _ => unreachable!("non-augmented samplers handled below"),
        };
        (mv, rejected)
    } else {
        let mv = match config.sampler {
            KappaSampler::Exchange { proposal_sd } => exchange_update_kappa(state, proposal_sd, sampler, rng)?,
            KappaSampler::Approx { proposal_sd } => approx_update_kappa(state, proposal_sd, rng)?,
            _ => unreachable!("augmented samplers handled above"),
        };
        (mv, 0)
    };
    state.params.kappa = DVector::from_vec(mv.kappa);
    Ok((mv.accepted, rejected))
}
