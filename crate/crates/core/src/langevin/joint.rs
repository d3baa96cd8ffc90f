use nalgebra::{DMatrix, DVector};

use super::{diag_gt_s, LangevinError};
use crate::aug::AugmentedDataset;
use crate::specfun::{log1m_exp, log_bessel_i_normalized, log_bessel_i_normalized_with_ratio};
use crate::stiefel::{nullspace_projections, StiefelMatrix};

/// Rotated observations plus rejected proposals, reduced to what the `κ`
/// conditional needs at fixed `G`: the coefficients `(GᵀS_aug)_kk` with
/// `S_aug = Σ X_i + Σ Y_ij`, and each rejected point's projections `a_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedLangevinData {
    g: StiefelMatrix,
    observations: usize,
    coefficients: DVector<f64>,
    projections: Vec<Vec<f64>>,
    rejected_sum: DMatrix<f64>,
}

impl AugmentedLangevinData {
    /// `rotated_sum` is `Σ X_i H` over the `observations` data points.
    pub fn new(
        g: &StiefelMatrix,
        rotated_sum: &DMatrix<f64>,
        observations: usize,
        rejected: impl IntoIterator<Item = StiefelMatrix>,
    ) -> Self {
        let (d, p) = (g.d(), g.p());
        let mut rejected_sum = DMatrix::zeros(d, p);
        let mut projections = Vec::new();
        for y in rejected {
            rejected_sum += y.as_matrix();
            projections.push(nullspace_projections(&y, g));
        }
        let coefficients = diag_gt_s(g, &(rotated_sum + &rejected_sum));
        Self {
            g: g.clone(),
            observations,
            coefficients,
            projections,
            rejected_sum,
        }
    }

    pub fn from_dataset(g: &StiefelMatrix, data: &AugmentedDataset<StiefelMatrix>) -> Self {
        let sum = data
            .observations()
            .iter()
            .fold(DMatrix::zeros(g.d(), g.p()), |acc, x| acc + x.as_matrix());
        Self::new(g, &sum, data.len(), data.rejected_points().cloned())
    }

    pub fn g(&self) -> &StiefelMatrix {
        &self.g
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    pub fn rejected(&self) -> usize {
        self.projections.len()
    }

    /// `N = n + Σ|𝓨_i|`.
    pub fn total(&self) -> usize {
        self.observations + self.rejected()
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    pub fn projections(&self) -> &[Vec<f64>] {
        &self.projections
    }

    /// Recomputes the projections of `points` (which must be the rejected
    /// proposals used at construction, in order) and returns the largest
    /// discrepancy with the cache.
    pub fn cache_discrepancy<'a>(&self, points: impl IntoIterator<Item = &'a StiefelMatrix>) -> f64 {
        let mut worst = 0.0f64;
        let mut sum = DMatrix::zeros(self.g.d(), self.g.p());
        for (y, cached) in points.into_iter().zip(&self.projections) {
            sum += y.as_matrix();
            for (a, b) in nullspace_projections(y, &self.g).iter().zip(cached) {
                worst = worst.max((a - b).abs());
            }
        }
        worst.max((sum - &self.rejected_sum).amax())
    }

    fn dimension(&self) -> usize {
        self.g.d()
    }
}

fn order(d: usize, k: usize) -> f64 {
    (d as f64 - k as f64 - 2.0) / 2.0
}

/// `ln P({X_i, 𝓨_i} | G, κ)` up to terms free of `κ`:
///
/// `Σ_k κ_k (GᵀS_aug)_kk + Σ_Y [ln{D(κ) - D(Y)} - ln D(Y)] - N ln D(κ)`.
///
/// Returns `-∞` when some `D(Y) ≥ D(κ)`.
pub fn log_joint_kappa(aug: &AugmentedLangevinData, kappa: &[f64]) -> f64 {
    let d = aug.dimension();
    let per_column: Vec<f64> = (0..kappa.len())
        .map(|k| log_bessel_i_normalized(order(d, k), kappa[k]))
        .collect();
    let log_dk: f64 = per_column.iter().sum();
    let linear: f64 = kappa.iter().zip(aug.coefficients.iter()).map(|(k, c)| k * c).sum();
    let mut total = linear - aug.total() as f64 * log_dk;
    for a in &aug.projections {
        let log_dy: f64 = kappa
            .iter()
            .zip(a)
            .enumerate()
            .map(|(j, (&k, &aj))| {
                if aj == 1.0 {
                    per_column[j]
                } else {
                    log_bessel_i_normalized(order(d, j), k * aj)
                }
            })
            .sum();
        total += log_dk + log1m_exp(log_dy - log_dk) - log_dy;
    }
    total
}

/// Gradient of [`log_joint_kappa`] in `κ`. With `ρ_k(x) = I_{ν_k+1}(x)/I_{ν_k}(x)`,
/// `w = D(Y)/D(κ)` and projections `a_k`, each rejected point contributes
///
/// `(ρ_k(κ_k) - w a_k ρ_k(κ_k a_k)) / (1 - w) - a_k ρ_k(κ_k a_k)`.
pub fn grad_log_joint_kappa(aug: &AugmentedLangevinData, kappa: &[f64]) -> Result<Vec<f64>, LangevinError> {
    if let Some((index, &value)) = kappa.iter().enumerate().find(|(_, k)| !(**k > 0.0)) {
        return Err(LangevinError::GradientDomain { index, value });
    }
    let d = aug.dimension();
    let p = kappa.len();
    let at_kappa: Vec<(f64, f64)> = (0..p)
        .map(|k| log_bessel_i_normalized_with_ratio(order(d, k), kappa[k]))
        .collect();
    let log_dk: f64 = at_kappa.iter().map(|v| v.0).sum();
    let n_total = aug.total() as f64;
    let mut grad: Vec<f64> = (0..p).map(|k| aug.coefficients[k] - n_total * at_kappa[k].1).collect();
    let mut rho_y = vec![0.0; p];
    for a in &aug.projections {
        let mut log_dy = 0.0;
        for k in 0..p {
            // The first column always has a = 1; reuse the κ evaluation.
            let (v, r) = if a[k] == 1.0 {
                at_kappa[k]
            } else {
                log_bessel_i_normalized_with_ratio(order(d, k), kappa[k] * a[k])
            };
            log_dy += v;
            rho_y[k] = r;
        }
        let w = (log_dy - log_dk).exp();
        let one_minus_w = -(log_dy - log_dk).exp_m1();
        for k in 0..p {
            let ay = a[k] * rho_y[k];
            grad[k] += (at_kappa[k].1 - w * ay) / one_minus_w - ay;
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;
    use crate::stiefel::sample_haar_uniform;

    #[test]
    fn single_observation_at_mode_reduces_to_trace_minus_log_d() {
        let g = StiefelMatrix::identity(4, 2).unwrap();
        let aug = AugmentedLangevinData::new(&g, g.as_matrix(), 1, Vec::new());
        let kappa = [3.0, 1.5];
        let expected = 4.5 - crate::stiefel::log_d_kappa(&kappa, 4);
        assert!((log_joint_kappa(&aug, &kappa) - expected).abs() < 1e-12);
    }

    #[test]
    fn gradient_rejects_zero_concentration() {
        let g = StiefelMatrix::identity(3, 2).unwrap();
        let aug = AugmentedLangevinData::new(&g, g.as_matrix(), 1, Vec::new());
        assert!(grad_log_joint_kappa(&aug, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn cache_spot_check() {
        let mut rng = chain_rng(9, 0);
        let g = sample_haar_uniform(4, 2, &mut rng).unwrap();
        let ys: Vec<_> = (0..5).map(|_| sample_haar_uniform(4, 2, &mut rng).unwrap()).collect();
        let aug = AugmentedLangevinData::new(&g, &DMatrix::zeros(4, 2), 3, ys.clone());
        assert_eq!(aug.total(), 8);
        assert!(aug.cache_discrepancy(&ys) < 1e-14);
    }
}
