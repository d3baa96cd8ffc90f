use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::base::{NigPrior, NormalBase};
use super::generate::run_generator;
use super::gp::{GpConditioner, SquaredExponential, BLOCK};
use super::latent::{update_latent_f, LabelCounts, LatentUpdate};
use super::{sigmoid, GpdsError};
use crate::aug::DEFAULT_MAX_ATTEMPTS;
use crate::diagnostics::{ChainTrace, IterationMeta};

/// Log-normal prior on each kernel hyperparameter, centered at the initial
/// kernel, with a Gaussian random-walk proposal on the log scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KernelPrior {
    pub log_sd: f64,
    pub step: f64,
}

impl Default for KernelPrior {
    fn default() -> Self {
        Self { log_sd: 0.5, step: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpdsConfig {
    pub kernel: SquaredExponential,
    /// Constant prior mean of the latent function.
    pub gp_mean: f64,
    pub base_prior: NigPrior,
    pub iterations: usize,
    pub burn_in: usize,
    pub latent_update: LatentUpdate,
    pub latent_sweeps: usize,
    /// `None` keeps the kernel fixed.
    pub kernel_prior: Option<KernelPrior>,
    pub update_base: bool,
    pub max_attempts: u64,
    /// Points on the predictive grid (1-D data only); 0 disables it.
    pub grid_size: usize,
    pub grid_every: usize,
    pub histogram_bin: usize,
}

impl Default for GpdsConfig {
    fn default() -> Self {
        Self {
            kernel: SquaredExponential::default(),
            gp_mean: 0.0,
            base_prior: NigPrior::default(),
            iterations: 2000,
            burn_in: 500,
            latent_update: LatentUpdate::EllipticalSlice,
            latent_sweeps: 1,
            kernel_prior: Some(KernelPrior::default()),
            update_base: true,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            grid_size: 1024,
            grid_every: 5,
            histogram_bin: 10,
        }
    }
}

/// Latent function values at the distinct observations (stored first) and
/// the current rejected proposals, plus the base density.
#[derive(Debug, Clone)]
pub struct GpdsState {
    pub gp: GpConditioner,
    pub counts: LabelCounts,
    pub base: NormalBase,
    observed_locations: usize,
}

impl GpdsState {
    pub fn observed_locations(&self) -> usize {
        self.observed_locations
    }

    pub fn rejected(&self) -> usize {
        self.counts.total_rejected()
    }
}

/// Posterior summaries of the normalized density `g₀σ(f)/Z` and of `f` on a
/// regular 1-D grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveGrid {
    pub xs: Vec<f64>,
    pub mean: Vec<f64>,
    pub q10: Vec<f64>,
    pub q50: Vec<f64>,
    pub q90: Vec<f64>,
    pub f_q10: Vec<f64>,
    pub f_q50: Vec<f64>,
    pub f_q90: Vec<f64>,
    pub snapshots: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl PredictiveGrid {
    fn from_snapshots(xs: Vec<f64>, dens: &[Vec<f64>], fs: &[Vec<f64>]) -> Self {
        let s = dens.len();
        let n = xs.len();
        let mut out = Self {
            xs,
            mean: vec![0.0; n],
            q10: vec![0.0; n],
            q50: vec![0.0; n],
            q90: vec![0.0; n],
            f_q10: vec![0.0; n],
            f_q50: vec![0.0; n],
            f_q90: vec![0.0; n],
            snapshots: s,
        };
        let mut col = vec![0.0; s];
        for i in 0..n {
            col.iter_mut().zip(dens).for_each(|(c, d)| *c = d[i]);
            out.mean[i] = col.iter().sum::<f64>() / s as f64;
            col.sort_by(f64::total_cmp);
            out.q10[i] = quantile(&col, 0.1);
            out.q50[i] = quantile(&col, 0.5);
            out.q90[i] = quantile(&col, 0.9);
            col.iter_mut().zip(fs).for_each(|(c, f)| *c = f[i]);
            col.sort_by(f64::total_cmp);
            out.f_q10[i] = quantile(&col, 0.1);
            out.f_q50[i] = quantile(&col, 0.5);
            out.f_q90[i] = quantile(&col, 0.9);
        }
        out
    }

    pub fn spacing(&self) -> f64 {
        if self.xs.len() > 1 {
            self.xs[1] - self.xs[0]
        } else {
            1.0
        }
    }

    /// Quadrature of the posterior-mean density over the grid.
    pub fn integral(&self) -> f64 {
        self.mean.iter().sum::<f64>() * self.spacing()
    }

    /// `∫ |mean - truth|` over the grid.
    pub fn l1_distance(&self, truth: impl Fn(f64) -> f64) -> f64 {
        self.xs
            .iter()
            .zip(&self.mean)
            .map(|(&x, m)| (m - truth(x)).abs())
            .sum::<f64>()
            * self.spacing()
    }

    /// Local maxima of the posterior-mean density at least `min_relative`
    /// of the global maximum, highest first.
    pub fn local_maxima(&self, min_relative: f64) -> Vec<(f64, f64)> {
        let top = self.mean.iter().copied().fold(0.0, f64::max);
        let n = self.mean.len();
        let mut out: Vec<(f64, f64)> = (0..n)
            .filter(|&i| {
                let v = self.mean[i];
                v >= min_relative * top && (i == 0 || self.mean[i - 1] < v) && (i + 1 == n || self.mean[i + 1] <= v)
            })
            .map(|i| (self.xs[i], self.mean[i]))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1));
        out
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "x",
            "density_mean",
            "density_q10",
            "density_q50",
            "density_q90",
            "f_q10",
            "f_q50",
            "f_q90",
        ])?;
        for i in 0..self.xs.len() {
            w.write_record(
                [
                    self.xs[i],
                    self.mean[i],
                    self.q10[i],
                    self.q50[i],
                    self.q90[i],
                    self.f_q10[i],
                    self.f_q50[i],
                    self.f_q90[i],
                ]
                .map(|v| v.to_string()),
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Counts of per-iteration rejected-proposal totals in bins of equal width.
#[derive(Debug, Clone, PartialEq)]
pub struct RejectedHistogram {
    pub bin_width: usize,
    pub counts: Vec<usize>,
}

impl RejectedHistogram {
    pub fn from_counts(values: &[usize], bin_width: usize) -> Self {
        let bin_width = bin_width.max(1);
        let bins = values.iter().max().map_or(0, |m| m / bin_width + 1);
        let mut counts = vec![0; bins];
        for v in values {
            counts[v / bin_width] += 1;
        }
        Self { bin_width, counts }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_start", "bin_end", "iterations"])?;
        for (i, c) in self.counts.iter().enumerate() {
            let start = i * self.bin_width;
            w.write_record([start, start + self.bin_width, *c].map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GpdsFit {
    pub trace: ChainTrace,
    pub final_state: GpdsState,
    pub predictive: Option<PredictiveGrid>,
    pub histogram: RejectedHistogram,
}

fn validate(data: &[Vec<f64>]) -> Result<usize, GpdsError> {
    let d = data.first().ok_or(GpdsError::EmptyData)?.len();
    if !(1..=2).contains(&d) {
        return Err(GpdsError::UnsupportedDimension(d));
    }
    for x in data {
        if x.len() != d {
            return Err(GpdsError::Dimension {
                expected: d,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GpdsError::InvalidParameter("non-finite observation".into()));
        }
    }
    Ok(d)
}

fn labels(d: usize) -> Vec<String> {
    let mut l: Vec<String> = if d == 1 {
        vec!["mu".into()]
    } else {
        (1..=d).map(|j| format!("mu_{j}")).collect()
    };
    l.extend(["sigma2", "kernel_variance", "length_scale", "mean_f_obs"].map(String::from));
    l
}

/// Refreshes the rejected proposals: runs the generative sampler to `n`
/// acceptances against the current evaluations, then keeps the observations
/// and the new rejections only.
fn refresh_rejected<R: Rng + ?Sized>(
    state: &mut GpdsState,
    n: usize,
    config: &GpdsConfig,
    rng: &mut R,
) -> Result<(), GpdsError> {
    let m = state.observed_locations;
    let mut fresh: Vec<(Vec<f64>, f64)> = Vec::new();
    run_generator(
        &mut state.gp,
        &state.base,
        n,
        config.max_attempts,
        rng,
        |_, y, f, accept| {
            if !accept {
                fresh.push((y, f));
            }
        },
    )?;
    state.gp.truncate(m);
    state.counts.accepted.truncate(m);
    state.counts.rejected.clear();
    state.counts.rejected.resize(m, 0);
    for chunk in fresh.chunks(BLOCK) {
        let locs: Vec<&[f64]> = chunk.iter().map(|(y, _)| y.as_slice()).collect();
        let vals: Vec<f64> = chunk.iter().map(|(_, f)| *f).collect();
        for i in state.gp.push_many(&locs, &vals)? {
            state.counts.record(i, false);
        }
    }
    Ok(())
}

fn update_kernel<R: Rng + ?Sized>(
    state: &mut GpdsState,
    center: SquaredExponential,
    prior: &KernelPrior,
    rng: &mut R,
) -> Result<bool, GpdsError> {
    let cur = state.gp.kernel();
    let z1: f64 = StandardNormal.sample(rng);
    let z2: f64 = StandardNormal.sample(rng);
    let (lv, ll) = (
        cur.variance.ln() + prior.step * z1,
        cur.length_scale.ln() + prior.step * z2,
    );
    let log_prior = |lv: f64, ll: f64| {
        let a = (lv - center.variance.ln()) / prior.log_sd;
        let b = (ll - center.length_scale.ln()) / prior.log_sd;
        -0.5 * (a * a + b * b)
    };
    let kernel = SquaredExponential::new(lv.exp(), ll.exp())?;
    let gp = &state.gp;
    let points = (0..gp.len()).map(|i| (gp.location(i), gp.values()[i]));
    let proposal = match GpConditioner::from_points(kernel, gp.prior_mean(), gp.dim(), points) {
        Ok(p) if p.len() == gp.len() => p,
        Ok(_) | Err(GpdsError::NotPositiveDefinite { .. }) => return Ok(false),
        Err(e) => return Err(e),
    };
    let log_ratio = proposal.log_prior_density() - gp.log_prior_density() + log_prior(lv, ll)
        - log_prior(cur.variance.ln(), cur.length_scale.ln());
    let u: f64 = rng.random();
    if u.ln() < log_ratio {
        state.gp = proposal;
        Ok(true)
    } else {
        Ok(false)
    }
}

struct GridPlan {
    xs: Vec<f64>,
    lo: f64,
    hi: f64,
}

/// Draws `f` jointly at anchor points spaced a quarter length-scale apart,
/// fills in by the conditional mean, and normalizes `g₀σ(f)` by quadrature
/// over a window reaching eight base standard deviations past the grid.
fn grid_snapshot<R: Rng + ?Sized>(
    state: &GpdsState,
    plan: &GridPlan,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>), GpdsError> {
    let base = &state.base;
    let (mu, sd) = (base.mean[0], base.sd());
    let lo = plan.lo.min(mu - 8.0 * sd);
    let hi = plan.hi.max(mu + 8.0 * sd);
    let ell = state.gp.kernel().length_scale;
    let anchors = (((hi - lo) / (0.25 * ell)).ceil() as usize + 1).clamp(32, 512);
    let mut gp = state.gp.clone();
    let xs: Vec<[f64; 1]> = (0..anchors)
        .map(|a| [lo + (hi - lo) * a as f64 / (anchors - 1) as f64])
        .collect();
    for chunk in xs.chunks(BLOCK) {
        let refs: Vec<&[f64]> = chunk.iter().map(|x| x.as_slice()).collect();
        gp.sample_many(&refs, rng)?;
    }
    let dual = gp.dual_weights();
    let unnorm = |x: f64| -> (f64, f64) {
        let f = gp.mean_with(&[x], &dual);
        (f, base.log_pdf(&[x]).exp() * sigmoid(f))
    };
    let nq = 4096;
    let hq = (hi - lo) / nq as f64;
    let z: f64 = (0..nq).map(|i| unnorm(lo + (i as f64 + 0.5) * hq).1).sum::<f64>() * hq;
    let (fs, dens) = plan
        .xs
        .iter()
        .map(|&x| {
            let (f, g) = unnorm(x);
            (f, g / z)
        })
        .unzip();
    Ok((dens, fs))
}

/// Posterior inference by augmentation with the rejected proposals.
///
/// Each iteration refreshes the rejected proposals, updates `f` at the
/// observations and rejections, draws the base density from its conjugate
/// conditional given all proposals, and optionally moves the kernel
/// hyperparameters by Metropolis–Hastings.
pub fn fit_gpds<R: Rng + ?Sized>(data: &[Vec<f64>], config: &GpdsConfig, rng: &mut R) -> Result<GpdsFit, GpdsError> {
    let d = validate(data)?;
    config.base_prior.validate()?;
    let center = SquaredExponential::new(config.kernel.variance, config.kernel.length_scale)?;
    if config.kernel_prior.is_some() && center.variance == 0.0 {
        return Err(GpdsError::InvalidParameter(
            "kernel updates need a positive variance".into(),
        ));
    }

    let n = data.len();
    let mut gp = GpConditioner::new(center, config.gp_mean, d);
    let mut counts = LabelCounts::default();
    for x in data {
        let i = gp.push(x, config.gp_mean)?;
        counts.record(i, true);
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| data.iter().map(|x| x[j]).sum::<f64>() / n as f64)
        .collect();
    let var = data
        .iter()
        .map(|x| x.iter().zip(&mean).map(|(a, m)| (a - m).powi(2)).sum::<f64>())
        .sum::<f64>()
        / (n * d).max(2) as f64;
    let var = if var > 0.0 { var } else { 1.0 };
    let observed_locations = gp.len();
    let mut state = GpdsState {
        gp,
        counts,
        base: NormalBase::new(mean, var)?,
        observed_locations,
    };

    let plan = (d == 1 && config.grid_size > 0).then(|| {
        let lo = data.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min) - 3.0 * var.sqrt();
        let hi = data.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max) + 3.0 * var.sqrt();
        let h = (hi - lo) / config.grid_size as f64;
        GridPlan {
            xs: (0..config.grid_size).map(|i| lo + (i as f64 + 0.5) * h).collect(),
            lo,
            hi,
        }
    });
    let mut dens_snaps = Vec::new();
    let mut f_snaps = Vec::new();
    let mut trace = ChainTrace::new(labels(d)).with_sampler("gpds-augmented", false);

    for iteration in 0..config.burn_in + config.iterations {
        let start = Instant::now();
        let step = |state: &mut GpdsState, rng: &mut R| -> Result<Option<bool>, GpdsError> {
            refresh_rejected(state, n, config, rng)?;
            for _ in 0..config.latent_sweeps.max(1) {
                update_latent_f(&mut state.gp, &state.counts, &config.latent_update, rng);
            }
            if config.update_base {
                let gp = &state.gp;
                let rejected =
                    (0..gp.len()).flat_map(|i| std::iter::repeat_n(gp.location(i), state.counts.rejected[i] as usize));
                state.base =
                    config
                        .base_prior
                        .sample_posterior(d, data.iter().map(|x| x.as_slice()).chain(rejected), rng);
            }
            config
                .kernel_prior
                .map(|p| update_kernel(state, center, &p, rng))
                .transpose()
        };
        let kernel_accepted = step(&mut state, rng).map_err(|e| GpdsError::AtIteration {
            iteration,
            source: Box::new(e),
        })?;
        if iteration < config.burn_in {
            continue;
        }
        let mut row = state.base.mean.clone();
        let k = state.gp.kernel();
        let f_obs = state.gp.values()[..observed_locations].iter().sum::<f64>() / observed_locations as f64;
        row.extend([state.base.variance, k.variance, k.length_scale, f_obs]);
        trace.push(
            row,
            IterationMeta {
                seconds: start.elapsed().as_secs_f64(),
                accepted: kernel_accepted,
                rejected: state.rejected(),
            },
        );
        if let Some(plan) = &plan {
            if (iteration - config.burn_in).is_multiple_of(config.grid_every.max(1)) {
                let (dn, f) = grid_snapshot(&state, plan, rng).map_err(|e| GpdsError::AtIteration {
                    iteration,
                    source: Box::new(e),
                })?;
                dens_snaps.push(dn);
                f_snaps.push(f);
            }
        }
    }

    let predictive = plan
        .filter(|_| !dens_snaps.is_empty())
        .map(|p| PredictiveGrid::from_snapshots(p.xs, &dens_snaps, &f_snaps));
    let histogram = RejectedHistogram::from_counts(&trace.rejected_counts(), config.histogram_bin);
    Ok(GpdsFit {
        trace,
        final_state: state,
        predictive,
        histogram,
    })
}
