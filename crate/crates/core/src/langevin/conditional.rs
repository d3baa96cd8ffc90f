use rand::Rng;

use super::{LangevinError, LangevinPosteriorState};
use crate::stiefel::{sample_matrix_langevin, LangevinParams, StiefelMatrix};

fn draw_from_exponent<R: Rng + ?Sized>(
    f: &nalgebra::DMatrix<f64>,
    rng: &mut R,
) -> Result<StiefelMatrix, LangevinError> {
    let params = LangevinParams::from_exponent(f)?;
    Ok(sample_matrix_langevin(&params, rng)?)
}

/// Draws `H ~ ML(SᵀGκ + F₀)` with `S = Σ X_i` unrotated, stores it and
/// re-rotates the sufficient statistic.
pub fn update_h<R: Rng + ?Sized>(
    state: &mut LangevinPosteriorState,
    rng: &mut R,
) -> Result<StiefelMatrix, LangevinError> {
    let exponent = state.raw_sum().transpose()
        * state.params.g.as_matrix()
        * nalgebra::DMatrix::from_diagonal(&state.params.kappa)
        + &state.priors.f0;
    let h = draw_from_exponent(&exponent, rng)?;
    state.set_h(h.clone());
    Ok(h)
}

/// Draws `G ~ ML(Sκ + F₁)` with `S = Σ X_i H`, and stores it.
pub fn update_g<R: Rng + ?Sized>(
    state: &mut LangevinPosteriorState,
    rng: &mut R,
) -> Result<StiefelMatrix, LangevinError> {
    let exponent = state.s() * nalgebra::DMatrix::from_diagonal(&state.params.kappa) + &state.priors.f1;
    let g = draw_from_exponent(&exponent, rng)?;
    state.params.g = g.clone();
    Ok(g)
}
