use rand::Rng;

use super::model::RejectionModel;
use super::AugError;

pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

/// One accepted draw and the proposals rejected before it, in order.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectionDraw<P> {
    pub accepted: P,
    pub rejected: Vec<P>,
}

/// Rejection loop with a guard on the number of proposals per acceptance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RejectionSampler {
    pub max_attempts: u64,
}

impl Default for RejectionSampler {
    fn default() -> Self {
        Self {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

impl RejectionSampler {
    pub fn new(max_attempts: u64) -> Self {
        Self { max_attempts }
    }

    pub fn sample<M, R>(&self, model: &M, rng: &mut R) -> Result<RejectionDraw<M::Point>, AugError>
    where
        M: RejectionModel,
        R: Rng + ?Sized,
    {
        let mut rejected = Vec::new();
        for _ in 0..self.max_attempts {
            let (y, log_accept) = model.propose_scored(rng);
            let u: f64 = rng.random();
            if u.ln() < log_accept {
                return Ok(RejectionDraw { accepted: y, rejected });
            }
            rejected.push(y);
        }
        Err(AugError::MaxAttempts {
            attempts: self.max_attempts,
        })
    }

    /// Runs the sampler to `n` acceptances and returns the `n` batches of
    /// rejected proposals; the accepted points are discarded.
    ///
    /// Each batch is an exact draw from `p(𝓨 | θ)`, which does not depend on
    /// the observation it will be paired with.
    pub fn resample_rejected<M, R>(&self, model: &M, n: usize, rng: &mut R) -> Result<Vec<Vec<M::Point>>, AugError>
    where
        M: RejectionModel,
        R: Rng + ?Sized,
    {
        (0..n).map(|_| self.sample(model, rng).map(|d| d.rejected)).collect()
    }
}

/// [`RejectionSampler::sample`] with the default attempt guard.
pub fn sample_with_rejections<M, R>(model: &M, rng: &mut R) -> Result<RejectionDraw<M::Point>, AugError>
where
    M: RejectionModel,
    R: Rng + ?Sized,
{
    RejectionSampler::default().sample(model, rng)
}

/// [`RejectionSampler::resample_rejected`] with the default attempt guard.
pub fn resample_rejected<M, R>(model: &M, n: usize, rng: &mut R) -> Result<Vec<Vec<M::Point>>, AugError>
where
    M: RejectionModel,
    R: Rng + ?Sized,
{
    RejectionSampler::default().resample_rejected(model, n, rng)
}
