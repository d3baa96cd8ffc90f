use rand::Rng;

use super::base::NormalBase;
use super::gp::{GpConditioner, BLOCK};
use super::{log_sigmoid, sigmoid, GpdsError};
use crate::aug::{AugError, BaseMeasure, RejectionModel};

/// Output of the generative sampler.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GeneratedSample {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub f_x: Vec<f64>,
    pub f_y: Vec<f64>,
}

/// Proposes from `base`, evaluates `f` retrospectively through `gp` and
/// accepts with probability `σ(f)`, until `n` acceptances. `visit` sees the
/// stored index, location, value and decision of every proposal.
///
/// Proposal locations do not depend on `f` and every proposal is stored
/// whatever the decision, so locations are drawn in blocks and the factor
/// is extended a block at a time. Evaluations past the final acceptance
/// are dropped again.
pub(crate) fn run_generator<R, V>(
    gp: &mut GpConditioner,
    base: &NormalBase,
    n: usize,
    max_attempts: u64,
    rng: &mut R,
    mut visit: V,
) -> Result<(), GpdsError>
where
    R: Rng + ?Sized,
    V: FnMut(usize, Vec<f64>, f64, bool),
{
    if base.dim() != gp.dim() {
        return Err(GpdsError::Dimension {
            expected: gp.dim(),
            got: base.dim(),
        });
    }
    let mut accepted = 0;
    let mut attempts = 0u64;
    while accepted < n {
        let size = BLOCK;
        let locs: Vec<Vec<f64>> = (0..size).map(|_| base.sample(rng)).collect();
        let refs: Vec<&[f64]> = locs.iter().map(|l| l.as_slice()).collect();
        let mark = gp.len();
        let evals = gp.sample_many(&refs, rng)?;
        let mut keep = mark;
        for (y, (f, idx)) in locs.into_iter().zip(evals) {
            if attempts >= max_attempts {
                return Err(AugError::MaxAttempts { attempts }.into());
            }
            attempts += 1;
            if idx >= mark {
                keep = keep.max(idx + 1);
            }
            let accept = rng.random::<f64>() < sigmoid(f);
            visit(idx, y, f, accept);
            if accept {
                accepted += 1;
                attempts = 0;
                if accepted == n {
                    break;
                }
            }
        }
        gp.truncate(keep);
    }
    Ok(())
}

/// Draws `n` points from the random density `g₀ σ(f)`, extending `gp` with
/// every evaluation it makes.
pub fn gpds_generate<R: Rng + ?Sized>(
    gp: &mut GpConditioner,
    base: &NormalBase,
    n: usize,
    max_attempts: u64,
    rng: &mut R,
) -> Result<GeneratedSample, GpdsError> {
    if n == 0 {
        return Err(GpdsError::InvalidParameter("n must be at least 1".into()));
    }
    let mut out = GeneratedSample::default();
    run_generator(gp, base, n, max_attempts, rng, |_, y, f, accept| {
        if accept {
            out.x.push(y);
            out.f_x.push(f);
        } else {
            out.y.push(y);
            out.f_y.push(f);
        }
    })?;
    Ok(out)
}

/// The rejection sampler for a known function `h`: target `g₀ σ(h)`,
/// proposal `g₀`, `M = 1`.
pub struct FixedFunctionModel<F> {
    pub base: NormalBase,
    pub function: F,
}

impl<F: Fn(&[f64]) -> f64> RejectionModel for FixedFunctionModel<F> {
    type Point = Vec<f64>;

    fn log_f(&self, x: &Vec<f64>) -> f64 {
        self.base.log_pdf(x) + log_sigmoid((self.function)(x))
    }

    fn log_q(&self, x: &Vec<f64>) -> f64 {
        self.base.log_pdf(x)
    }

    fn log_m(&self) -> f64 {
        0.0
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.base.sample(rng)
    }

    fn base_measure(&self) -> BaseMeasure {
        BaseMeasure::Lebesgue
    }

    fn log_acceptance(&self, x: &Vec<f64>) -> f64 {
        log_sigmoid((self.function)(x))
    }
}
