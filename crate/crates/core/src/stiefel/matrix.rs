use nalgebra::{DMatrix, DVector};

use super::StiefelError;

/// Tolerance on `max |XᵀX - I|` accepted before re-orthonormalization.
pub const ORTHONORMAL_TOL: f64 = 1e-6;

/// A `d × p` matrix with orthonormal columns, `d ≥ p ≥ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StiefelMatrix(DMatrix<f64>);

/// Two passes of modified Gram–Schmidt. Column order and signs are kept.
fn gram_schmidt(mut m: DMatrix<f64>) -> Result<DMatrix<f64>, StiefelError> {
    let p = m.ncols();
    for j in 0..p {
        for _ in 0..2 {
            for i in 0..j {
                let proj = m.column(i).dot(&m.column(j));
                let ci = m.column(i).clone_owned();
                m.column_mut(j).axpy(-proj, &ci, 1.0);
            }
        }
        let norm = m.column(j).norm();
        if !(norm > 1e-12) {
            return Err(StiefelError::Dimension(format!("column {j} is linearly dependent")));
        }
        m.column_mut(j).unscale_mut(norm);
    }
    Ok(m)
}

pub(crate) fn orthogonality_error(m: &DMatrix<f64>) -> f64 {
    let g = m.transpose() * m;
    let p = g.nrows();
    (0..p)
        .flat_map(|i| (0..p).map(move |j| (i, j)))
        .map(|(i, j)| (g[(i, j)] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

impl StiefelMatrix {
    /// Accepts a matrix that is orthonormal up to [`ORTHONORMAL_TOL`] and
    /// polishes it to working precision.
    pub fn new(m: DMatrix<f64>) -> Result<Self, StiefelError> {
        Self::check_dims(m.nrows(), m.ncols())?;
        if m.iter().any(|v| !v.is_finite()) {
            return Err(StiefelError::NotOrthonormal(f64::INFINITY));
        }
        let err = orthogonality_error(&m);
        if err > ORTHONORMAL_TOL {
            return Err(StiefelError::NotOrthonormal(err));
        }
        Ok(Self(gram_schmidt(m)?))
    }

    /// Orthonormalizes an arbitrary full-column-rank matrix (the `Q` factor
    /// with positive `R` diagonal).
    pub fn orthonormalize(m: DMatrix<f64>) -> Result<Self, StiefelError> {
        Self::check_dims(m.nrows(), m.ncols())?;
        Ok(Self(gram_schmidt(m)?))
    }

    /// The first `p` columns of the `d × d` identity.
    pub fn identity(d: usize, p: usize) -> Result<Self, StiefelError> {
        Self::check_dims(d, p)?;
        Ok(Self(DMatrix::identity(d, p)))
    }

    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        debug_assert!(orthogonality_error(&m) < 1e-8);
        Self(m)
    }

    pub(crate) fn check_dims(d: usize, p: usize) -> Result<(), StiefelError> {
        if p == 0 || d < p {
            return Err(StiefelError::Dimension(format!("need d >= p >= 1, got d={d}, p={p}")));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.0.nrows()
    }

    pub fn p(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn orthogonality_error(&self) -> f64 {
        orthogonality_error(&self.0)
    }

    /// `X · A` for a `p × p` orthogonal `A`, which stays on the manifold.
    pub fn rotate(&self, a: &StiefelMatrix) -> Result<StiefelMatrix, StiefelError> {
        if a.d() != self.p() || a.p() != self.p() {
            return Err(StiefelError::Dimension("rotation must be p x p".into()));
        }
        Ok(Self(gram_schmidt(&self.0 * &a.0)?))
    }

    /// Column-major entries.
    pub fn to_column_major(&self) -> Vec<f64> {
        self.0.as_slice().to_vec()
    }

    pub fn from_column_major(d: usize, p: usize, values: &[f64]) -> Result<Self, StiefelError> {
        if values.len() != d * p {
            return Err(StiefelError::Dimension(format!(
                "expected {} entries, got {}",
                d * p,
                values.len()
            )));
        }
        Self::new(DMatrix::from_column_slice(d, p, values))
    }
}

/// Matrix Langevin parameters `(G, κ, H)` with exponent `F = G diag(κ) Hᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LangevinParams {
    pub g: StiefelMatrix,
    pub kappa: DVector<f64>,
    pub h: StiefelMatrix,
}

impl LangevinParams {
    pub fn new(g: StiefelMatrix, kappa: DVector<f64>, h: StiefelMatrix) -> Result<Self, StiefelError> {
        let p = g.p();
        if kappa.len() != p || h.d() != p || h.p() != p {
            return Err(StiefelError::Dimension(format!(
                "G is {}x{p}, κ has {} entries, H is {}x{}",
                g.d(),
                kappa.len(),
                h.d(),
                h.p()
            )));
        }
        if let Some(&k) = kappa.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
            return Err(StiefelError::Concentration(k));
        }
        Ok(Self { g, kappa, h })
    }

    /// `H = I`.
    pub fn unrotated(g: StiefelMatrix, kappa: DVector<f64>) -> Result<Self, StiefelError> {
        let p = g.p();
        Self::new(g, kappa, StiefelMatrix::identity(p, p)?)
    }

    /// Decomposes `F` by SVD with singular values in decreasing order.
    pub fn from_exponent(f: &DMatrix<f64>) -> Result<Self, StiefelError> {
        let (d, p) = f.shape();
        StiefelMatrix::check_dims(d, p)?;
        let svd = f.clone().svd(true, true);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let u = svd.u.as_ref().expect("requested U");
        let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
        let g = DMatrix::from_fn(d, p, |i, j| u[(i, order[j])]);
        let h = DMatrix::from_fn(p, p, |i, j| v_t[(order[j], i)]);
        let kappa = DVector::from_fn(p, |j, _| svd.singular_values[order[j]].max(0.0));
        Self::new(
            StiefelMatrix::orthonormalize(g)?,
            kappa,
            StiefelMatrix::orthonormalize(h)?,
        )
    }

    pub fn d(&self) -> usize {
        self.g.d()
    }

    pub fn p(&self) -> usize {
        self.g.p()
    }

    pub fn exponent(&self) -> DMatrix<f64> {
        self.g.as_matrix() * DMatrix::from_diagonal(&self.kappa) * self.h.as_matrix().transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_orthonormal_input() {
        let m = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(StiefelMatrix::new(m), Err(StiefelError::NotOrthonormal(_))));
        assert!(StiefelMatrix::identity(2, 3).is_err());
    }

    #[test]
    fn exponent_round_trip_through_svd() {
        let f = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, -0.5, 0.3, 4.0, 1.0]);
        let params = LangevinParams::from_exponent(&f).unwrap();
        assert!(params.kappa[0] >= params.kappa[1]);
        assert!((params.exponent() - f).amax() < 1e-12);
    }
}
