use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::GpdsError;

/// Isotropic normal `N(μ, σ² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalBase {
    pub mean: Vec<f64>,
    pub variance: f64,
}

impl NormalBase {
    pub fn new(mean: Vec<f64>, variance: f64) -> Result<Self, GpdsError> {
        if !(variance > 0.0 && variance.is_finite()) || mean.iter().any(|m| !m.is_finite()) {
            return Err(GpdsError::InvalidParameter(format!(
                "base N({mean:?}, {variance}) is not a proper normal"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(&self.mean).map(|(a, m)| (a - m) * (a - m)).sum();
        -0.5 * sq / self.variance - 0.5 * self.dim() as f64 * (2.0 * std::f64::consts::PI * self.variance).ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let sd = self.sd();
        self.mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + sd * z
            })
            .collect()
    }
}

/// Normal–inverse-gamma prior on the base: `σ² ~ IG(shape, scale)` and each
/// mean coordinate `μⱼ | σ² ~ N(mean, σ²/precision)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NigPrior {
    pub mean: f64,
    pub precision: f64,
    pub shape: f64,
    pub scale: f64,
}

impl Default for NigPrior {
    fn default() -> Self {
        Self {
            mean: 0.0,
            precision: 0.1,
            shape: 1.0,
            scale: 10.0,
        }
    }
}

impl NigPrior {
    pub fn validate(&self) -> Result<(), GpdsError> {
        if self.mean.is_finite() && self.precision > 0.0 && self.shape > 0.0 && self.scale > 0.0 {
            Ok(())
        } else {
            Err(GpdsError::InvalidParameter(format!(
                "{self:?} is not a proper normal-inverse-gamma"
            )))
        }
    }

    /// Exact draw from the conditional given i.i.d. base draws `points`.
    pub fn sample_posterior<'a, R, I>(&self, dim: usize, points: I, rng: &mut R) -> NormalBase
    where
        R: Rng + ?Sized,
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut n = 0.0;
        let mut sum = vec![0.0; dim];
        let mut sumsq = 0.0;
        for x in points {
            n += 1.0;
            for (s, v) in sum.iter_mut().zip(x) {
                *s += v;
            }
            sumsq += x.iter().map(|v| v * v).sum::<f64>();
        }
        let xbar: Vec<f64> = sum.iter().map(|s| if n > 0.0 { s / n } else { 0.0 }).collect();
        let scatter = (sumsq - n * xbar.iter().map(|v| v * v).sum::<f64>()).max(0.0);
        let lambda = self.precision + n;
        let shape = self.shape + 0.5 * n * dim as f64;
        let dev: f64 = xbar.iter().map(|v| (v - self.mean).powi(2)).sum();
        let scale = self.scale + 0.5 * scatter + 0.5 * self.precision * n / lambda * dev;
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        let variance = scale / g;
        let sd = (variance / lambda).sqrt();
        let mean = xbar
            .iter()
            .map(|xb| {
                let z: f64 = StandardNormal.sample(rng);
                (self.precision * self.mean + n * xb) / lambda + sd * z
            })
            .collect();
        NormalBase { mean, variance }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;

    #[test]
    fn posterior_concentrates_on_data_moments() {
        let mut rng = chain_rng(1, 0);
        let truth = NormalBase::new(vec![2.0], 0.25).unwrap();
        let pts: Vec<Vec<f64>> = (0..20_000).map(|_| truth.sample(&mut rng)).collect();
        let post = NigPrior::default().sample_posterior(1, pts.iter().map(|p| p.as_slice()), &mut rng);
        assert!((post.mean[0] - 2.0).abs() < 0.02);
        assert!((post.variance - 0.25).abs() < 0.02);
    }

    #[test]
    fn no_data_draws_from_prior() {
        let prior = NigPrior {
            mean: 0.0,
            precision: 1.0,
            shape: 5.0,
            scale: 4.0,
        };
        let mut rng = chain_rng(2, 0);
        let n = 40_000;
        let mean_var: f64 = (0..n)
            .map(|_| prior.sample_posterior(1, std::iter::empty(), &mut rng).variance)
            .sum::<f64>()
            / n as f64;
        // E[σ²] = scale / (shape - 1)
        assert!((mean_var - 1.0).abs() < 0.03, "{mean_var}");
    }
}
