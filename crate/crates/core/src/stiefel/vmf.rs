use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

use super::{StiefelError, StiefelMatrix};

/// Uniform draw on the unit sphere in `ℝᵐ`.
pub fn sample_unit_sphere<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-300 {
            return v / n;
        }
    }
}

/// Draw from the von Mises–Fisher law `∝ exp(κ μᵀx)` on the unit sphere.
pub fn sample_vmf<R: Rng + ?Sized>(
    mean_direction: &DVector<f64>,
    concentration: f64,
    rng: &mut R,
) -> Result<DVector<f64>, StiefelError> {
    if mean_direction.len() < 2 {
        return Err(StiefelError::Dimension("vMF needs d >= 2".into()));
    }
    if !(concentration.is_finite() && concentration >= 0.0) {
        return Err(StiefelError::Concentration(concentration));
    }
    if (mean_direction.norm() - 1.0).abs() > 1e-10 {
        return Err(StiefelError::Dimension("mean direction must be a unit vector".into()));
    }
    Ok(vmf_any_dim(mean_direction, concentration, rng))
}

/// As [`sample_vmf`] but also accepts `ℝ¹`, where the sphere is `{-1, +1}`.
pub(crate) fn vmf_any_dim<R: Rng + ?Sized>(mu: &DVector<f64>, kappa: f64, rng: &mut R) -> DVector<f64> {
    let m = mu.len();
    if kappa == 0.0 {
        return sample_unit_sphere(m, rng);
    }
    if m == 1 {
        // P(x = μ) = e^κ / (e^κ + e^{-κ}).
        let p_keep = 1.0 / (1.0 + (-2.0 * kappa).exp());
        return if rng.random::<f64>() < p_keep { mu.clone() } else { -mu };
    }
    let w = wood_cosine(m, kappa, rng);
    // Tangent direction uniform on the sphere orthogonal to μ.
    let v = loop {
        let mut v = sample_unit_sphere(m, rng);
        v.axpy(-mu.dot(&v), mu, 1.0);
        let n = v.norm();
        if n > 1e-8 {
            break v / n;
        }
    };
    let mut x = v * (1.0 - w * w).max(0.0).sqrt();
    x.axpy(w, mu, 1.0);
    let n = x.norm();
    x / n
}

/// `W = μᵀx` by Wood's beta-envelope rejection scheme, `m ≥ 2`.
fn wood_cosine<R: Rng + ?Sized>(m: usize, kappa: f64, rng: &mut R) -> f64 {
    let m1 = (m - 1) as f64;
    let b = m1 / (2.0 * kappa + (4.0 * kappa * kappa + m1 * m1).sqrt());
    let x0 = (1.0 - b) / (1.0 + b);
    // 1 - x0² = 4b / (1 + b)², written to avoid cancellation at large κ.
    let c = kappa * x0 + m1 * (4.0 * b / ((1.0 + b) * (1.0 + b))).ln();
    let beta = Beta::new(m1 / 2.0, m1 / 2.0).expect("positive shape");
    loop {
        let z: f64 = beta.sample(rng);
        let w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
        let u: f64 = rng.random();
        if kappa * w + m1 * (1.0 - x0 * w).ln() - c >= u.ln() {
            return w;
        }
    }
}

/// Uniform draw on `V_{p,d}` from an orthonormalized Gaussian matrix.
pub fn sample_haar_uniform<R: Rng + ?Sized>(d: usize, p: usize, rng: &mut R) -> Result<StiefelMatrix, StiefelError> {
    StiefelMatrix::check_dims(d, p)?;
    loop {
        let z = DMatrix::from_fn(d, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        if let Ok(x) = StiefelMatrix::orthonormalize(z) {
            return Ok(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;

    #[test]
    fn rejects_bad_inputs() {
        let mut rng = chain_rng(0, 0);
        let mu1 = DVector::from_vec(vec![1.0]);
        assert!(sample_vmf(&mu1, 1.0, &mut rng).is_err());
        let mu = DVector::from_vec(vec![1.0, 1.0]);
        assert!(sample_vmf(&mu, 1.0, &mut rng).is_err());
        let mu = DVector::from_vec(vec![1.0, 0.0]);
        assert!(sample_vmf(&mu, -1.0, &mut rng).is_err());
    }

    #[test]
    fn draws_are_unit_vectors_even_at_huge_concentration() {
        let mut rng = chain_rng(1, 0);
        let mu = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        for &k in &[0.0, 1e-3, 5.0, 1e4, 1e8] {
            let x = sample_vmf(&mu, k, &mut rng).unwrap();
            assert!((x.norm() - 1.0).abs() < 1e-12);
            if k >= 1e4 {
                assert!(mu.dot(&x) > 0.99);
            }
        }
    }

    #[test]
    fn haar_square_draw_is_orthogonal() {
        let mut rng = chain_rng(2, 0);
        let x = sample_haar_uniform(4, 4, &mut rng).unwrap();
        assert!(x.orthogonality_error() < 1e-12);
        assert!((x.as_matrix().determinant().abs() - 1.0).abs() < 1e-8);
    }
}
