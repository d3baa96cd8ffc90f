//! The sequential column-by-column proposal for the matrix Langevin law and
//! the bound `D(X) ≤ D(κ)` that turns it into an exact rejection sampler.
//!
//! Column `r` (1-based) is drawn from a vMF on the unit sphere of the
//! nullspace `N_r` of the earlier columns, which has dimension `d - r + 1`.
//! With `a_r = ‖N_rᵀ g_r‖` and `C_ν(x) = Γ(ν+1) I_ν(x) / (x/2)^ν`,
//!
//! ```text
//! p_seq(X) = etr(κ GᵀX) / D(X),   D(X) = ∏_r C_{ν_r}(κ_r a_r),   ν_r = (d - r - 1)/2,
//! ```
//!
//! and since `a_r ≤ 1` and `C_ν` is increasing, `D(X) ≤ D(κ) = ∏_r C_{ν_r}(κ_r)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::vmf::vmf_any_dim;
use super::{LangevinParams, StiefelError, StiefelMatrix};
use crate::specfun::log_bessel_i_normalized;

/// By-products of one [`propose_pseq`] draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqProposalCert {
    /// `ln p_seq(X | G, κ)` w.r.t. normalized Haar measure.
    pub log_density: f64,
    pub log_d_x: f64,
    pub log_d_kappa: f64,
    /// `a_r = ‖N_rᵀ g_r‖` for each column.
    pub nullspace_projections: Vec<f64>,
}

impl SeqProposalCert {
    /// Log acceptance probability `ln D(X) - ln D(κ) ≤ 0`.
    pub fn log_acceptance(&self) -> f64 {
        self.log_d_x - self.log_d_kappa
    }
}

fn column_order(d: usize, r: usize) -> f64 {
    (d as f64 - r as f64 - 1.0) / 2.0
}

/// `ln D(κ)` on `V_{p,d}` with `p = κ.len()`.
pub fn log_d_kappa(kappa: &[f64], d: usize) -> f64 {
    kappa
        .iter()
        .enumerate()
        .map(|(j, &k)| log_bessel_i_normalized(column_order(d, j + 1), k))
        .sum()
}

/// `ln ∏_r C_{ν_r}(κ_r a_r)`.
pub fn log_d_of_projections(kappa: &[f64], projections: &[f64], d: usize) -> f64 {
    kappa
        .iter()
        .zip(projections)
        .enumerate()
        .map(|(j, (&k, &a))| log_bessel_i_normalized(column_order(d, j + 1), k * a))
        .sum()
}

/// Orthonormal basis (`d × (d - r)`) of the orthogonal complement of the `r`
/// orthonormal columns of `prev`, completed from the standard basis by QR.
pub fn nullspace_basis(prev: &DMatrix<f64>) -> Result<DMatrix<f64>, StiefelError> {
    let (d, r) = prev.shape();
    if r >= d {
        return Err(StiefelError::Dimension(format!(
            "no complement for {r} columns in R^{d}"
        )));
    }
    if r == 0 {
        return Ok(DMatrix::identity(d, d));
    }
    let mut aug = DMatrix::zeros(d, r + d);
    aug.columns_mut(0, r).copy_from(prev);
    aug.columns_mut(r, d).fill_with_identity();
    let q = aug.qr().q();
    let n = q.columns(r, d - r).clone_owned();
    let leak = (prev.transpose() * &n).amax();
    let ortho = super::matrix::orthogonality_error(&n);
    if leak > 1e-8 || ortho > 1e-8 {
        return Err(StiefelError::NumericalRank(leak.max(ortho)));
    }
    Ok(n)
}

/// `a_r` recomputed from `X` alone: `a_r² = 1 - Σ_{j<r} (x_jᵀ g_r)²`.
pub fn nullspace_projections(x: &StiefelMatrix, g: &StiefelMatrix) -> Vec<f64> {
    let m = x.as_matrix().transpose() * g.as_matrix();
    (0..g.p())
        .map(|r| {
            let captured: f64 = (0..r).map(|j| m[(j, r)] * m[(j, r)]).sum();
            (1.0 - captured).clamp(0.0, 1.0).sqrt()
        })
        .collect()
}

/// `tr(H κ Gᵀ X)`, the log of `etr(FᵀX)` for `F = G κ Hᵀ`.
pub fn log_dml_unnormalized(x: &StiefelMatrix, params: &LangevinParams) -> Result<f64, StiefelError> {
    if x.d() != params.d() || x.p() != params.p() {
        return Err(StiefelError::Dimension(format!(
            "X is {}x{}, parameters are {}x{}",
            x.d(),
            x.p(),
            params.d(),
            params.p()
        )));
    }
    let m = params.g.as_matrix().transpose() * x.as_matrix();
    let h = params.h.as_matrix();
    let p = params.p();
    let mut total = 0.0;
    for i in 0..p {
        for k in 0..p {
            total += h[(i, k)] * params.kappa[k] * m[(k, i)];
        }
    }
    Ok(total)
}

fn trace_kappa_gtx(g: &DMatrix<f64>, kappa: &DVector<f64>, x: &DMatrix<f64>) -> f64 {
    (0..kappa.len()).map(|k| kappa[k] * g.column(k).dot(&x.column(k))).sum()
}

/// One draw from the sequential proposal given `(G, κ)`.
pub fn propose_pseq<R: Rng + ?Sized>(
    g: &StiefelMatrix,
    kappa: &DVector<f64>,
    rng: &mut R,
) -> Result<(StiefelMatrix, SeqProposalCert), StiefelError> {
    let (d, p) = (g.d(), g.p());
    if kappa.len() != p {
        return Err(StiefelError::Dimension("κ length must equal p".into()));
    }
    if let Some(&k) = kappa.iter().find(|k| !(k.is_finite() && **k >= 0.0)) {
        return Err(StiefelError::Concentration(k));
    }
    let gm = g.as_matrix();
    let mut x = DMatrix::zeros(d, p);
    let mut projections = Vec::with_capacity(p);
    let mut log_d_x = 0.0;
    for r in 0..p {
        let basis = nullspace_basis(&x.columns(0, r).clone_owned())?;
        let v = basis.transpose() * gm.column(r);
        let a = v.norm().min(1.0);
        let (mu, conc) = if a > 1e-300 {
            (v / a, kappa[r] * a)
        } else {
            let mut e = DVector::zeros(basis.ncols());
            e[0] = 1.0;
            (e, 0.0)
        };
        let z = vmf_any_dim(&mu, conc, rng);
        let mut col = &basis * z;
        let n = col.norm();
        col /= n;
        x.set_column(r, &col);
        projections.push(a);
        log_d_x += log_bessel_i_normalized(column_order(d, r + 1), conc);
    }
    let log_d_k = log_d_kappa(kappa.as_slice(), d);
    let cert = SeqProposalCert {
        log_density: trace_kappa_gtx(gm, kappa, &x) - log_d_x,
        log_d_x,
        log_d_kappa: log_d_k,
        nullspace_projections: projections,
    };
    Ok((StiefelMatrix::from_trusted(x), cert))
}
