use nalgebra::DVector;
use rand::Rng;

use super::pseq::{log_d_kappa, log_d_of_projections, nullspace_projections, propose_pseq};
use super::vmf::sample_haar_uniform;
use super::{LangevinParams, StiefelError, StiefelMatrix};
use crate::aug::{BaseMeasure, RejectionModel, RejectionSampler};

/// The matrix Langevin law `ML(G κ)` (rotation `H = I`) as a rejection model
/// with proposal `p_seq`, target `etr(κGᵀX)` and envelope `M = D(κ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LangevinRejectionModel {
    g: StiefelMatrix,
    kappa: DVector<f64>,
    log_d_kappa: f64,
}

impl LangevinRejectionModel {
    pub fn new(g: StiefelMatrix, kappa: DVector<f64>) -> Result<Self, StiefelError> {
        let params = LangevinParams::unrotated(g, kappa)?;
        let log_d_kappa = log_d_kappa(params.kappa.as_slice(), params.d());
        Ok(Self {
            g: params.g,
            kappa: params.kappa,
            log_d_kappa,
        })
    }

    pub fn g(&self) -> &StiefelMatrix {
        &self.g
    }

    pub fn kappa(&self) -> &DVector<f64> {
        &self.kappa
    }

    fn trace_term(&self, x: &StiefelMatrix) -> f64 {
        let (g, x) = (self.g.as_matrix(), x.as_matrix());
        (0..self.kappa.len())
            .map(|k| self.kappa[k] * g.column(k).dot(&x.column(k)))
            .sum()
    }
}

impl RejectionModel for LangevinRejectionModel {
    type Point = StiefelMatrix;

    fn log_f(&self, x: &StiefelMatrix) -> f64 {
        self.trace_term(x)
    }

    fn log_q(&self, x: &StiefelMatrix) -> f64 {
        let a = nullspace_projections(x, &self.g);
        self.trace_term(x) - log_d_of_projections(self.kappa.as_slice(), &a, self.g.d())
    }

    fn log_m(&self) -> f64 {
        self.log_d_kappa
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> StiefelMatrix {
        self.propose_scored(rng).0
    }

    fn propose_scored<R: Rng + ?Sized>(&self, rng: &mut R) -> (StiefelMatrix, f64) {
        // Inputs were validated on construction, so only a numerical-rank
        // failure of the nullspace completion can occur; redraw on it.
        let mut last = None;
        for _ in 0..16 {
            match propose_pseq(&self.g, &self.kappa, rng) {
                Ok((x, cert)) => return (x, cert.log_acceptance()),
                Err(e) => last = Some(e),
            }
        }
        panic!("sequential proposal failed repeatedly: {last:?}");
    }

    fn base_measure(&self) -> BaseMeasure {
        BaseMeasure::HaarStiefel
    }
}

/// Exact draw from `ML(G κ Hᵀ)`: a draw from `ML(G κ)` post-multiplied by `Hᵀ`.
pub fn sample_matrix_langevin<R: Rng + ?Sized>(
    params: &LangevinParams,
    rng: &mut R,
) -> Result<StiefelMatrix, StiefelError> {
    Ok(sample_matrix_langevin_counted(params, &RejectionSampler::default(), rng)?.0)
}

/// As [`sample_matrix_langevin`], also returning the number of rejected
/// proposals.
pub fn sample_matrix_langevin_counted<R: Rng + ?Sized>(
    params: &LangevinParams,
    sampler: &RejectionSampler,
    rng: &mut R,
) -> Result<(StiefelMatrix, usize), StiefelError> {
    let model = LangevinRejectionModel::new(params.g.clone(), params.kappa.clone())?;
    let draw = sampler.sample(&model, rng)?;
    let ht = StiefelMatrix::from_trusted(params.h.as_matrix().transpose());
    Ok((draw.accepted.rotate(&ht)?, draw.rejected.len()))
}

/// Monte Carlo estimate of `ln Z(κ)` as a Haar average of `etr(κGᵀX)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McLogZ {
    pub estimate: f64,
    /// Delta-method standard error of `estimate`.
    pub std_error: f64,
}

pub fn mc_log_z<R: Rng + ?Sized>(
    kappa: &[f64],
    d: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<McLogZ, StiefelError> {
    let p = kappa.len();
    StiefelMatrix::check_dims(d, p)?;
    if n_samples == 0 {
        return Err(StiefelError::Dimension("need at least one sample".into()));
    }
    if let Some(&k) = kappa.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
        return Err(StiefelError::Concentration(k));
    }
    // With G the leading columns of the identity, tr(κGᵀX) = Σ κ_k X_kk.
    let log_w: Vec<f64> = (0..n_samples)
        .map(|_| {
            let x = sample_haar_uniform(d, p, rng)?;
            Ok((0..p).map(|k| kappa[k] * x.as_matrix()[(k, k)]).sum())
        })
        .collect::<Result<_, StiefelError>>()?;
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log_w.iter().map(|w| (w - max).exp()).collect();
    let n = n_samples as f64;
    let mean = scaled.iter().sum::<f64>() / n;
    let var = if n_samples > 1 {
        scaled.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(McLogZ {
        estimate: max + mean.ln(),
        std_error: (var / n).sqrt() / mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;

    #[test]
    fn zero_concentration_log_z_is_exactly_zero() {
        let mut rng = chain_rng(0, 0);
        let z = mc_log_z(&[0.0, 0.0], 4, 100, &mut rng).unwrap();
        assert_eq!(z.estimate, 0.0);
        assert_eq!(z.std_error, 0.0);
    }

    #[test]
    fn zero_concentration_accepts_every_proposal() {
        let mut rng = chain_rng(1, 0);
        let params = LangevinParams::unrotated(
            StiefelMatrix::identity(3, 2).unwrap(),
            DVector::from_vec(vec![0.0, 0.0]),
        )
        .unwrap();
        for _ in 0..100 {
            let (_, rejected) =
                sample_matrix_langevin_counted(&params, &RejectionSampler::default(), &mut rng).unwrap();
            assert_eq!(rejected, 0);
        }
    }

    #[test]
    fn model_acceptance_matches_certificate() {
        let mut rng = chain_rng(2, 0);
        let g = sample_haar_uniform(4, 2, &mut rng).unwrap();
        let model = LangevinRejectionModel::new(g, DVector::from_vec(vec![6.0, 3.0])).unwrap();
        for _ in 0..20 {
            let (x, a) = model.propose_scored(&mut rng);
            assert!((model.log_acceptance(&x) - a).abs() < 1e-8);
            assert!(a <= 1e-12);
        }
    }
}
