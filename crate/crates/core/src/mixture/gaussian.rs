use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::MixtureError;

pub(crate) const JITTER: f64 = 1e-8;

/// Multivariate normal with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    l: DMatrix<f64>,
    log_norm: f64,
}

impl PartialEq for Gaussian {
    fn eq(&self, other: &Self) -> bool {
        self.mean == other.mean && self.cov == other.cov
    }
}

impl Gaussian {
    /// Fails if `cov` is not positive definite; see [`Gaussian::new_jittered`].
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self, MixtureError> {
        let d = mean.len();
        if cov.shape() != (d, d) {
            return Err(MixtureError::Dimension {
                index: 0,
                got: cov.nrows(),
                expected: d,
            });
        }
        let cov = 0.5 * (&cov + cov.transpose());
        let l = Cholesky::new(cov.clone())
            .ok_or(MixtureError::NotPositiveDefinite)?
            .unpack();
        let log_det_half: f64 = l.diagonal().iter().map(|v| v.ln()).sum();
        let log_norm = -0.5 * d as f64 * (2.0 * PI).ln() - log_det_half;
        Ok(Self { mean, cov, l, log_norm })
    }

    /// As [`Gaussian::new`], retrying once with `1e-8·I` added. The flag
    /// reports whether the jitter was needed.
    pub fn new_jittered(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<(Self, bool), MixtureError> {
        match Self::new(mean.clone(), cov.clone()) {
            Ok(g) => Ok((g, false)),
            Err(MixtureError::NotPositiveDefinite) => {
                let d = mean.len();
                Self::new(mean, cov + DMatrix::identity(d, d) * JITTER).map(|g| (g, true))
            }
            Err(e) => Err(e),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let z = self
            .l
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has positive diagonal");
        self.log_norm - 0.5 * z.norm_squared()
    }

    /// Density of the coordinates `(i, j)` at `(u, v)`.
    pub fn log_pdf_pair(&self, (i, j): (usize, usize), u: f64, v: f64) -> f64 {
        let (a, b, c) = (self.cov[(i, i)], self.cov[(i, j)], self.cov[(j, j)]);
        let det = a * c - b * b;
        let (du, dv) = (u - self.mean[i], v - self.mean[j]);
        let q = (c * du * du - 2.0 * b * du * dv + a * dv * dv) / det;
        -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * q
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.l * z
    }
}
