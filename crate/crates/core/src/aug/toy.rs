//! Small enumerable models with known answers, used to validate the framework
//! and exposed through the CLI's `toy-discrete` model.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::ergodicity::ErgodicityInputs;
use super::joint::AugmentedDataset;
use super::model::{BaseMeasure, RejectionModel};
use super::AugError;

/// Rejection sampler on `{0, …, k-1}` with target weights `f`, proposal
/// probabilities `q` and envelope `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    f: Vec<f64>,
    q: Vec<f64>,
    m: f64,
    cumulative_q: Vec<f64>,
}

impl DiscreteModel {
    pub fn new(f: Vec<f64>, q: Vec<f64>, m: f64) -> Result<Self, AugError> {
        let invalid = |msg: String| Err(AugError::InvalidModel(msg));
        if f.is_empty() || f.len() != q.len() {
            return invalid(format!("f has {} atoms, q has {}", f.len(), q.len()));
        }
        if !(m > 0.0 && m.is_finite()) {
            return invalid(format!("envelope constant {m} must be positive"));
        }
        if f.iter().chain(&q).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("weights must be finite and non-negative".into());
        }
        let total: f64 = q.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("proposal sums to {total}"));
        }
        for (i, (fi, qi)) in f.iter().zip(&q).enumerate() {
            if *fi > m * qi * (1.0 + 1e-12) {
                return invalid(format!("envelope violated at atom {i}: f={fi} > M q={}", m * qi));
            }
        }
        let cumulative_q = q
            .iter()
            .scan(0.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        Ok(Self { f, q, m, cumulative_q })
    }

    pub fn atoms(&self) -> usize {
        self.f.len()
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    /// `Z = Σ f`.
    pub fn normalizer(&self) -> f64 {
        self.f.iter().sum()
    }
}

impl RejectionModel for DiscreteModel {
    type Point = usize;

    fn log_f(&self, x: &usize) -> f64 {
        self.f[*x].ln()
    }

    fn log_q(&self, x: &usize) -> f64 {
        self.q[*x].ln()
    }

    fn log_m(&self) -> f64 {
        self.m.ln()
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cumulative_q
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.atoms() - 1)
    }

    fn base_measure(&self) -> BaseMeasure {
        BaseMeasure::Counting
    }
}

/// Ergodicity constants of a finite family of discrete models, using the
/// joint minimum over atoms and parameter values.
pub fn discrete_family_ergodicity(models: &[DiscreteModel], observations: usize) -> ErgodicityInputs {
    let fold = |it: &mut dyn Iterator<Item = f64>, min: bool| {
        it.fold(if min { f64::INFINITY } else { f64::NEG_INFINITY }, |a, b| {
            if min {
                a.min(b)
            } else {
                a.max(b)
            }
        })
    };
    let f_lower = fold(&mut models.iter().flat_map(|m| m.f.clone()), true);
    let f_upper = fold(&mut models.iter().flat_map(|m| m.f.clone()), false);
    let q_lower = fold(&mut models.iter().flat_map(|m| m.q.clone()), true);
    let q_upper = fold(&mut models.iter().flat_map(|m| m.q.clone()), false);
    let rejection_floor = fold(
        &mut models.iter().flat_map(|m| {
            let z = m.normalizer();
            m.f.iter().map(move |f| 1.0 - f / (m.m * z)).collect::<Vec<_>>()
        }),
        true,
    );
    let acceptance_floor = fold(&mut models.iter().map(|m| m.normalizer() / m.m), true);
    ErgodicityInputs {
        f_lower,
        f_upper,
        q_lower,
        q_upper,
        rejection_floor,
        acceptance_floor,
        observations,
    }
}

/// A parameter with two values, each selecting a target table over a shared
/// sample space, with a uniform proposal and a common envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStateToy {
    models: [DiscreteModel; 2],
    prior: [f64; 2],
}

impl TwoStateToy {
    pub fn new(f0: Vec<f64>, f1: Vec<f64>, q: Vec<f64>, m: f64, prior: [f64; 2]) -> Result<Self, AugError> {
        if !(prior[0] > 0.0 && prior[1] > 0.0) {
            return Err(AugError::InvalidModel("prior must be positive".into()));
        }
        Ok(Self {
            models: [DiscreteModel::new(f0, q.clone(), m)?, DiscreteModel::new(f1, q, m)?],
            prior,
        })
    }

    /// Two atoms, `f = (2, 1)` or `(1, 2)`, `q` uniform, `M = 4`, uniform prior.
    pub fn standard() -> Self {
        Self::new(vec![2.0, 1.0], vec![1.0, 2.0], vec![0.5, 0.5], 4.0, [0.5, 0.5]).expect("valid toy")
    }

    pub fn model(&self, theta: usize) -> &DiscreteModel {
        &self.models[theta]
    }

    pub fn models(&self) -> &[DiscreteModel; 2] {
        &self.models
    }

    pub fn prior(&self) -> [f64; 2] {
        self.prior
    }

    /// `p(θ | X, 𝓨)`, by enumerating both parameter values.
    pub fn augmented_posterior(&self, data: &AugmentedDataset<usize>) -> [f64; 2] {
        let logw: Vec<f64> = (0..2)
            .map(|t| self.prior[t].ln() + crate::aug::log_joint_augmented(&self.models[t], data))
            .collect();
        normalize_pair(logw[0], logw[1])
    }

    pub fn sample_theta<R: Rng + ?Sized>(&self, data: &AugmentedDataset<usize>, rng: &mut R) -> usize {
        let p = self.augmented_posterior(data);
        usize::from(rng.random::<f64>() >= p[0])
    }

    pub fn ergodicity_inputs(&self, observations: usize) -> ErgodicityInputs {
        discrete_family_ergodicity(&self.models, observations)
    }
}

fn normalize_pair(a: f64, b: f64) -> [f64; 2] {
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    [ea / (ea + eb), eb / (ea + eb)]
}

/// Points `(u, v) ∈ {0,1}²` encoded as `2u + v`. The `u` coordinate is
/// Bernoulli(`θ₁`) and is proposed exactly; `v` is tilted by a table selected
/// by `θ₂ ∈ {0, 1}`. The normalizer depends on `θ₂` only, so `θ₁` has a
/// conjugate Beta update while `θ₂` needs augmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliTiltedToy {
    pub tilt: [[f64; 2]; 2],
    pub beta_prior: (f64, f64),
    pub theta2_prior: [f64; 2],
}

impl Default for BernoulliTiltedToy {
    fn default() -> Self {
        Self {
            tilt: [[2.0, 1.0], [1.0, 1.0]],
            beta_prior: (2.0, 2.0),
            theta2_prior: [0.5, 0.5],
        }
    }
}

pub const TILTED_ENVELOPE: f64 = 4.0;

impl BernoulliTiltedToy {
    pub fn model(&self, theta1: f64, theta2: usize) -> DiscreteModel {
        let g = self.tilt[theta2];
        let f = vec![
            (1.0 - theta1) * g[0],
            (1.0 - theta1) * g[1],
            theta1 * g[0],
            theta1 * g[1],
        ];
        let q = vec![(1.0 - theta1) / 2.0, (1.0 - theta1) / 2.0, theta1 / 2.0, theta1 / 2.0];
        DiscreteModel::new(f, q, TILTED_ENVELOPE).expect("tilt table bounded by 2")
    }

    /// Exact `θ₁ | X ~ Beta(a + Σu, b + n - Σu)`.
    pub fn sample_theta1<R: Rng + ?Sized>(&self, obs: &[usize], rng: &mut R) -> f64 {
        let ones = obs.iter().filter(|x| **x >= 2).count() as f64;
        let n = obs.len() as f64;
        Beta::new(self.beta_prior.0 + ones, self.beta_prior.1 + n - ones)
            .expect("positive Beta parameters")
            .sample(rng)
    }

    /// Exact `θ₂ | X, 𝓨, θ₁`; the `θ₁` factors cancel between the two values.
    pub fn sample_theta2<R: Rng + ?Sized>(&self, data: &AugmentedDataset<usize>, theta1: f64, rng: &mut R) -> usize {
        let logw: Vec<f64> = (0..2)
            .map(|t| self.theta2_prior[t].ln() + crate::aug::log_joint_augmented(&self.model(theta1, t), data))
            .collect();
        let p = normalize_pair(logw[0], logw[1]);
        usize::from(rng.random::<f64>() >= p[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_validation() {
        assert!(DiscreteModel::new(vec![3.0, 1.0], vec![0.5, 0.5], 4.0).is_err());
        assert!(DiscreteModel::new(vec![1.0], vec![0.5, 0.5], 4.0).is_err());
        assert!(DiscreteModel::new(vec![1.0, 1.0], vec![0.4, 0.5], 4.0).is_err());
        assert!(DiscreteModel::new(vec![1.0, 1.0], vec![0.5, 0.5], -1.0).is_err());
        let m = DiscreteModel::new(vec![2.0, 1.0], vec![0.5, 0.5], 4.0).unwrap();
        assert_eq!(m.normalizer(), 3.0);
    }

    #[test]
    fn standard_toy_constants() {
        let inputs = TwoStateToy::standard().ergodicity_inputs(1);
        assert_eq!(inputs.f_lower, 1.0);
        assert_eq!(inputs.f_upper, 2.0);
        assert_eq!(inputs.q_lower, 0.5);
        assert_eq!(inputs.q_upper, 0.5);
        assert!((inputs.rejection_floor - 5.0 / 6.0).abs() < 1e-15);
        assert!((inputs.acceptance_floor - 0.75).abs() < 1e-15);
    }

    #[test]
    fn tilted_model_satisfies_envelope_everywhere() {
        let toy = BernoulliTiltedToy::default();
        for t2 in 0..2 {
            for k in 1..10 {
                let m = toy.model(k as f64 / 10.0, t2);
                for x in 0..4 {
                    assert!(m.log_acceptance(&x) <= 1e-12);
                }
            }
        }
    }
}
