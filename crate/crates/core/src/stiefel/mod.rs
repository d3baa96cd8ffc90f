//! Stiefel manifold geometry and exact matrix Langevin simulation.
//!
//! Densities are taken with respect to the normalized Haar measure on
//! `V_{p,d}`, so `Z(κ) = ₀F₁(d/2; κ²/4)` and `Z(0) = 1`.

mod matrix;
mod pseq;
mod sampler;
mod vmf;

pub use matrix::{LangevinParams, StiefelMatrix, ORTHONORMAL_TOL};
pub use pseq::{
    log_d_kappa, log_d_of_projections, log_dml_unnormalized, nullspace_basis, nullspace_projections, propose_pseq,
    SeqProposalCert,
};
pub use sampler::{mc_log_z, sample_matrix_langevin, sample_matrix_langevin_counted, LangevinRejectionModel, McLogZ};
pub use vmf::{sample_haar_uniform, sample_unit_sphere, sample_vmf};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StiefelError {
    #[error("invalid dimensions: {0}")]
    Dimension(String),
    #[error("columns are not orthonormal (max deviation {0:e})")]
    NotOrthonormal(f64),
    #[error("nullspace basis lost orthogonality (max deviation {0:e})")]
    NumericalRank(f64),
    #[error("invalid concentration {0}")]
    Concentration(f64),
    #[error(transparent)]
    Aug(#[from] crate::aug::AugError),
}
