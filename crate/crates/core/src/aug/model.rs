use rand::Rng;

use crate::specfun::log_diff_exp;

/// Reference measure of a model's densities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseMeasure {
    Counting,
    /// Lebesgue measure, possibly restricted to a subset.
    Lebesgue,
    /// Normalized (probability) Haar measure on a Stiefel manifold.
    HaarStiefel,
}

/// A rejection sampler at a fixed parameter value.
///
/// Implementors must satisfy `log_f(x) - log_m() <= log_q(x)` on the support.
/// `log_q` is normalized with respect to [`RejectionModel::base_measure`];
/// `log_f` need not be.
pub trait RejectionModel {
    type Point: Clone;

    fn log_f(&self, x: &Self::Point) -> f64;

    fn log_q(&self, x: &Self::Point) -> f64;

    fn log_m(&self) -> f64;

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point;

    fn base_measure(&self) -> BaseMeasure;

    /// Log probability that a proposal at `x` is accepted, `f / (M q)`.
    fn log_acceptance(&self, x: &Self::Point) -> f64 {
        self.log_f(x) - self.log_m() - self.log_q(x)
    }

    /// A proposal together with its log acceptance probability. Models that
    /// compute both at once should override this.
    fn propose_scored<R: Rng + ?Sized>(&self, rng: &mut R) -> (Self::Point, f64) {
        let x = self.propose(rng);
        let a = self.log_acceptance(&x);
        (x, a)
    }

    /// `ln{q(y) - f(y)/M}`, the density contribution of a rejected proposal.
    /// Returns `-∞` when the envelope is tight (or violated) at `y`.
    fn log_rejected_density(&self, y: &Self::Point) -> f64 {
        log_diff_exp(self.log_q(y), self.log_f(y) - self.log_m())
    }
}
