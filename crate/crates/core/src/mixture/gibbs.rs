use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, StandardNormal};

use super::gaussian::Gaussian;
use super::{MixtureError, TruncationRegion};

/// Normal–inverse-Wishart base measure: `Σ ~ IW(Ψ, ν)`, `μ | Σ ~ N(μ₀, Σ/λ₀)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NiwPrior {
    pub mu0: DVector<f64>,
    pub lambda0: f64,
    pub psi: DMatrix<f64>,
    pub nu: f64,
}

impl NiwPrior {
    pub fn new(mu0: DVector<f64>, lambda0: f64, psi: DMatrix<f64>, nu: f64) -> Result<Self, MixtureError> {
        let d = mu0.len();
        if psi.shape() != (d, d) {
            return Err(MixtureError::Prior(format!("Ψ must be {d}x{d}")));
        }
        if !(lambda0 > 0.0) {
            return Err(MixtureError::Prior(format!("λ₀ = {lambda0} must be positive")));
        }
        if !(nu > d as f64 - 1.0) {
            return Err(MixtureError::Prior(format!("ν = {nu} must exceed d - 1 = {}", d - 1)));
        }
        if psi.clone().cholesky().is_none() {
            return Err(MixtureError::Prior("Ψ must be positive definite".into()));
        }
        Ok(Self { mu0, lambda0, psi, nu })
    }

    /// `μ₀` at the box center, `λ₀ = 0.01`, `Ψ = 0.1·I`, `ν = d + 2`.
    pub fn default_for(region: &TruncationRegion) -> Self {
        let d = region.dim();
        Self {
            mu0: region.center(),
            lambda0: 0.01,
            psi: DMatrix::identity(d, d) * 0.1,
            nu: d as f64 + 2.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu0.len()
    }

    /// Conjugate update given the points assigned to one component.
    fn posterior(&self, points: &[&DVector<f64>]) -> NiwPrior {
        let n = points.len() as f64;
        if points.is_empty() {
            return self.clone();
        }
        let d = self.dim();
        let mean = points.iter().fold(DVector::zeros(d), |acc, x| acc + *x) / n;
        let mut scatter = DMatrix::zeros(d, d);
        for x in points {
            let c = *x - &mean;
            scatter += &c * c.transpose();
        }
        let lambda_n = self.lambda0 + n;
        let dev = &mean - &self.mu0;
        NiwPrior {
            mu0: (&self.mu0 * self.lambda0 + &mean * n) / lambda_n,
            lambda0: lambda_n,
            psi: &self.psi + scatter + &dev * dev.transpose() * (self.lambda0 * n / lambda_n),
            nu: self.nu + n,
        }
    }

    /// Draws `(μ, Σ)`; the flag reports whether jitter was needed.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(Gaussian, bool), MixtureError> {
        let d = self.dim();
        let psi = 0.5 * (&self.psi + self.psi.transpose());
        let c = psi.cholesky().ok_or(MixtureError::NotPositiveDefinite)?.unpack();
        // Bartlett: with Ψ = C Cᵀ and A lower triangular, Σ = B Bᵀ, B = C A⁻ᵀ.
        let mut a = DMatrix::zeros(d, d);
        for i in 0..d {
            let chi = ChiSquared::new(self.nu - i as f64).expect("ν > d - 1");
            a[(i, i)] = chi.sample(rng).sqrt();
            for j in 0..i {
                a[(i, j)] = rng.sample(StandardNormal);
            }
        }
        let a_inv = a
            .solve_lower_triangular(&DMatrix::identity(d, d))
            .ok_or(MixtureError::NotPositiveDefinite)?;
        let b = c * a_inv.transpose();
        let sigma = &b * b.transpose();
        let (mean_law, jitter_mean) = Gaussian::new_jittered(self.mu0.clone(), &sigma / self.lambda0)?;
        let (g, jitter_cov) = Gaussian::new_jittered(mean_law.sample(rng), sigma)?;
        Ok((g, jitter_mean || jitter_cov))
    }
}

/// Truncated stick-breaking representation of a DP mixture with `K` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct StickBreakingState {
    weights: Vec<f64>,
    components: Vec<Gaussian>,
    alpha: f64,
    base: NiwPrior,
    counts: Vec<usize>,
    /// Covariance draws that needed diagonal jitter so far.
    pub jitter_events: usize,
}

fn weights_from_sticks(sticks: &[f64]) -> Vec<f64> {
    let mut remaining = 1.0;
    sticks
        .iter()
        .map(|v| {
            let w = remaining * v;
            remaining *= 1.0 - v;
            w
        })
        .collect()
}

impl StickBreakingState {
    pub fn from_prior<R: Rng + ?Sized>(
        truncation: usize,
        alpha: f64,
        base: NiwPrior,
        rng: &mut R,
    ) -> Result<Self, MixtureError> {
        if truncation == 0 || !(alpha > 0.0) {
            return Err(MixtureError::Prior("need K >= 1 and α > 0".into()));
        }
        let mut state = Self {
            weights: Vec::new(),
            components: Vec::new(),
            alpha,
            base,
            counts: vec![0; truncation],
            jitter_events: 0,
        };
        state.redraw(&[], &vec![Vec::new(); truncation], rng)?;
        Ok(state)
    }

    pub fn truncation(&self) -> usize {
        self.counts.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Gaussian] {
        &self.components
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn base(&self) -> &NiwPrior {
        &self.base
    }

    /// Allocation counts from the most recent sweep.
    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn occupied(&self) -> usize {
        self.counts.iter().filter(|c| **c > 0).count()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Untruncated mixture mean.
    pub fn mixture_mean(&self) -> DVector<f64> {
        self.weights
            .iter()
            .zip(&self.components)
            .fold(DVector::zeros(self.dim()), |acc, (w, c)| acc + c.mean() * *w)
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let k = self
            .weights
            .iter()
            .position(|w| {
                acc += w;
                u < acc
            })
            .unwrap_or(self.weights.len() - 1);
        self.components[k].sample(rng)
    }

    /// Weights given allocation counts, then components given members.
    fn redraw<R: Rng + ?Sized>(
        &mut self,
        data: &[&DVector<f64>],
        members: &[Vec<usize>],
        rng: &mut R,
    ) -> Result<(), MixtureError> {
        let k_max = members.len();
        let counts: Vec<usize> = members.iter().map(Vec::len).collect();
        let mut tail: usize = counts.iter().sum();
        let mut sticks = Vec::with_capacity(k_max);
        for (k, &n_k) in counts.iter().enumerate() {
            tail -= n_k;
            sticks.push(if k + 1 == k_max {
                1.0
            } else {
                Beta::new(1.0 + n_k as f64, self.alpha + tail as f64)
                    .expect("positive Beta parameters")
                    .sample(rng)
            });
        }
        self.weights = weights_from_sticks(&sticks);
        self.components.clear();
        for idx in members {
            let pts: Vec<&DVector<f64>> = idx.iter().map(|&i| data[i]).collect();
            let (g, jittered) = self.base.posterior(&pts).sample(rng)?;
            self.jitter_events += usize::from(jittered);
            self.components.push(g);
        }
        self.counts = counts;
        Ok(())
    }
}

/// One blocked Gibbs sweep on completed (untruncated) data: allocations,
/// then stick weights `V_k ~ Beta(1 + n_k, α + Σ_{j>k} n_j)`, then component
/// parameters from their normal–inverse-Wishart conditionals.
pub fn blocked_gibbs_sweep<'a, R: Rng + ?Sized>(
    state: &StickBreakingState,
    data: impl IntoIterator<Item = &'a DVector<f64>>,
    rng: &mut R,
) -> Result<StickBreakingState, MixtureError> {
    let data: Vec<&DVector<f64>> = data.into_iter().collect();
    let d = state.dim();
    if let Some((index, x)) = data.iter().enumerate().find(|(_, x)| x.len() != d) {
        return Err(MixtureError::Dimension {
            index,
            got: x.len(),
            expected: d,
        });
    }
    let k_max = state.truncation();
    let log_w: Vec<f64> = state.weights.iter().map(|w| w.ln()).collect();
    let mut members = vec![Vec::new(); k_max];
    let mut logp = vec![0.0; k_max];
    for (i, x) in data.iter().enumerate() {
        for k in 0..k_max {
            logp[k] = log_w[k] + state.components[k].log_pdf(x);
        }
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logp.iter().map(|l| (l - max).exp()).sum();
        let u = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = k_max - 1;
        for (k, l) in logp.iter().enumerate() {
            acc += (l - max).exp();
            if u < acc {
                chosen = k;
                break;
            }
        }
        members[chosen].push(i);
    }
    let mut next = state.clone();
    next.redraw(&data, &members, rng)?;
    Ok(next)
}
