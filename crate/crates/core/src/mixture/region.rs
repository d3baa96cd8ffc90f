use nalgebra::DVector;
use rand::Rng;

use super::{MixtureError, StickBreakingState};
use crate::aug::{BaseMeasure, RejectionModel};
use crate::specfun::log_sum_exp;

/// An axis-aligned box `{x : lower ≤ x ≤ upper}`; infinite bounds allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TruncationRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, MixtureError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(MixtureError::Region("bounds must have equal, nonzero length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(MixtureError::Region("need lower < upper in every coordinate".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unit_cube(d: usize) -> Self {
        Self {
            lower: vec![0.0; d],
            upper: vec![1.0; d],
        }
    }

    pub fn whole_space(d: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; d],
            upper: vec![f64::INFINITY; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_whole_space(&self) -> bool {
        self.lower.iter().all(|l| *l == f64::NEG_INFINITY) && self.upper.iter().all(|u| *u == f64::INFINITY)
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| l <= v && v <= u)
    }

    /// Midpoint of the box, or 0 along unbounded coordinates.
    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower.iter().zip(&self.upper).map(|(l, u)| {
                if l.is_finite() && u.is_finite() {
                    0.5 * (l + u)
                } else {
                    0.0
                }
            }),
        )
    }
}

/// Affine map from raw measurement units onto the unit cube.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxScaling {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxScaling {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, MixtureError> {
        let region = TruncationRegion::new(lower, upper)?;
        if !region.is_bounded() {
            return Err(MixtureError::Region("scaling needs finite bounds".into()));
        }
        Ok(Self {
            lower: region.lower,
            upper: region.upper,
        })
    }

    pub fn to_unit(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(v, (l, u))| (v - l) / (u - l)),
        )
    }

    pub fn from_unit(&self, x: &DVector<f64>) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| l + v * (u - l))
            .collect()
    }
}

/// The truncated mixture as a rejection sampler: `q` is the untruncated
/// mixture, `f = q · 1_C` and `M = 1`.
#[derive(Debug, Clone)]
pub struct TruncatedMixtureModel {
    state: StickBreakingState,
    region: TruncationRegion,
    log_weights: Vec<f64>,
}

impl TruncatedMixtureModel {
    pub fn new(state: StickBreakingState, region: TruncationRegion) -> Self {
        let log_weights = state.weights().iter().map(|w| w.ln()).collect();
        Self {
            state,
            region,
            log_weights,
        }
    }

    pub fn state(&self) -> &StickBreakingState {
        &self.state
    }

    pub fn region(&self) -> &TruncationRegion {
        &self.region
    }

    pub fn log_mixture_density(&self, x: &DVector<f64>) -> f64 {
        let terms: Vec<f64> = self
            .log_weights
            .iter()
            .zip(self.state.components())
            .map(|(lw, c)| lw + c.log_pdf(x))
            .collect();
        log_sum_exp(&terms)
    }
}

impl RejectionModel for TruncatedMixtureModel {
    type Point = DVector<f64>;

    fn log_f(&self, x: &DVector<f64>) -> f64 {
        if self.region.contains(x) {
            self.log_mixture_density(x)
        } else {
            f64::NEG_INFINITY
        }
    }

    fn log_q(&self, x: &DVector<f64>) -> f64 {
        self.log_mixture_density(x)
    }

    fn log_m(&self) -> f64 {
        0.0
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        self.state.sample_point(rng)
    }

    fn propose_scored<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, f64) {
        let x = self.propose(rng);
        let a = if self.region.contains(&x) {
            0.0
        } else {
            f64::NEG_INFINITY
        };
        (x, a)
    }

    fn base_measure(&self) -> BaseMeasure {
        BaseMeasure::Lebesgue
    }
}
