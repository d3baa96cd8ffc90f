use super::model::RejectionModel;
use super::AugError;

/// Observations paired with the rejected proposals that preceded each one.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedDataset<P> {
    observations: Vec<P>,
    rejected_sets: Vec<Vec<P>>,
}

impl<P> AugmentedDataset<P> {
    pub fn new(observations: Vec<P>, rejected_sets: Vec<Vec<P>>) -> Result<Self, AugError> {
        if observations.len() != rejected_sets.len() {
            return Err(AugError::Misaligned {
                observations: observations.len(),
                rejected_sets: rejected_sets.len(),
            });
        }
        Ok(Self {
            observations,
            rejected_sets,
        })
    }

    /// Observations with no rejected proposals attached.
    pub fn unaugmented(observations: Vec<P>) -> Self {
        let rejected_sets = observations.iter().map(|_| Vec::new()).collect();
        Self {
            observations,
            rejected_sets,
        }
    }

    pub fn observations(&self) -> &[P] {
        &self.observations
    }

    pub fn rejected_sets(&self) -> &[Vec<P>] {
        &self.rejected_sets
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// `Σ |𝓨ᵢ|`.
    pub fn rejected_count(&self) -> usize {
        self.rejected_sets.iter().map(Vec::len).sum()
    }

    /// `N = n + Σ |𝓨ᵢ|`.
    pub fn total_count(&self) -> usize {
        self.len() + self.rejected_count()
    }

    pub fn rejected_points(&self) -> impl Iterator<Item = &P> {
        self.rejected_sets.iter().flatten()
    }

    /// Drops the rejected proposals and returns the observations.
    pub fn into_observations(self) -> Vec<P> {
        self.observations
    }
}

/// Log joint density of observations and rejected proposals:
/// `Σᵢ [ln f(xᵢ) - ln M + Σⱼ ln{q(yᵢⱼ) - f(yᵢⱼ)/M}]`.
///
/// Returns `-∞` if any rejected point sits where the envelope is tight.
pub fn log_joint_augmented<M: RejectionModel>(model: &M, data: &AugmentedDataset<M::Point>) -> f64 {
    let log_m = model.log_m();
    let mut total = 0.0;
    for (x, ys) in data.observations.iter().zip(&data.rejected_sets) {
        total += model.log_f(x) - log_m;
        for y in ys {
            total += model.log_rejected_density(y);
        }
        if total == f64::NEG_INFINITY {
            return total;
        }
    }
    total
}
