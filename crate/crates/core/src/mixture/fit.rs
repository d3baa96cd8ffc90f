use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;

use super::gibbs::{blocked_gibbs_sweep, NiwPrior, StickBreakingState};
use super::region::{TruncatedMixtureModel, TruncationRegion};
use super::MixtureError;
use crate::aug::{gibbs_iteration, RejectionSampler, DEFAULT_MAX_ATTEMPTS};
use crate::diagnostics::{ChainTrace, IterationMeta};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureFitConfig {
    pub truncation: usize,
    pub alpha: f64,
    pub prior: Option<NiwPrior>,
    pub iterations: usize,
    pub burn_in: usize,
    /// Unaugmented sweeps on the observations before the chain proper.
    pub init_sweeps: usize,
    pub max_attempts: u64,
    /// Points per side of the density grid; 0 disables it.
    pub grid_size: usize,
    /// Coordinates shown on the grid.
    pub grid_dims: (usize, usize),
    /// Grid window; defaults to the region, or the padded data range.
    pub grid_bounds: Option<[(f64, f64); 2]>,
    /// Take a grid snapshot every this many post-burn-in iterations.
    pub grid_every: usize,
}

impl Default for MixtureFitConfig {
    fn default() -> Self {
        Self {
            truncation: 50,
            alpha: 1.0,
            prior: None,
            iterations: 1000,
            burn_in: 100,
            init_sweeps: 5,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            grid_size: 100,
            grid_dims: (0, 1),
            grid_bounds: None,
            grid_every: 5,
        }
    }
}

/// Density on a regular grid of cell centers, stored row by row (`y` outer).
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub dims: (usize, usize),
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub density: Vec<f64>,
    pub snapshots: usize,
}

impl DensityGrid {
    fn axis((lo, hi): (f64, f64), n: usize) -> Vec<f64> {
        let h = (hi - lo) / n as f64;
        (0..n).map(|i| lo + (i as f64 + 0.5) * h).collect()
    }

    /// Evaluates `f` on the grid and normalizes it to integrate to one.
    pub fn from_fn(bounds: [(f64, f64); 2], n: usize, dims: (usize, usize), f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = Self::axis(bounds[0], n);
        let ys = Self::axis(bounds[1], n);
        let density = ys
            .iter()
            .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        let mut g = Self {
            dims,
            xs,
            ys,
            density,
            snapshots: 1,
        };
        g.normalize();
        g
    }

    pub fn cell_area(&self) -> f64 {
        let hx = if self.xs.len() > 1 {
            self.xs[1] - self.xs[0]
        } else {
            1.0
        };
        let hy = if self.ys.len() > 1 {
            self.ys[1] - self.ys[0]
        } else {
            1.0
        };
        hx * hy
    }

    fn normalize(&mut self) {
        let total: f64 = self.density.iter().sum::<f64>() * self.cell_area();
        if total > 0.0 {
            self.density.iter_mut().for_each(|v| *v /= total);
        }
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.density[iy * self.xs.len() + ix]
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_area()
    }

    /// `∫ |a - b|` over the common grid.
    pub fn l1_distance(&self, other: &DensityGrid) -> f64 {
        self.density
            .iter()
            .zip(&other.density)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.cell_area()
    }

    /// Strict local maxima over the 8-neighbourhood whose height is at least
    /// `min_relative` of the global maximum, highest first.
    pub fn local_maxima(&self, min_relative: f64) -> Vec<(f64, f64, f64)> {
        let (nx, ny) = (self.xs.len(), self.ys.len());
        let top = self.density.iter().copied().fold(0.0, f64::max);
        let mut out = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let v = self.value(ix, iy);
                if v < min_relative * top {
                    continue;
                }
                let mut is_max = true;
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
                        if (dx, dy) == (0, 0) || jx < 0 || jy < 0 || jx >= nx as i64 || jy >= ny as i64 {
                            continue;
                        }
                        let w = self.value(jx as usize, jy as usize);
                        // Ties are broken toward the lower index to keep plateaus single.
                        if w > v || (w == v && (jy, jx) < (iy as i64, ix as i64)) {
                            is_max = false;
                        }
                    }
                }
                if is_max {
                    out.push((self.xs[ix], self.ys[iy], v));
                }
            }
        }
        out.sort_by(|a, b| b.2.total_cmp(&a.2));
        out
    }

    /// CSV with columns `x, y, density, log_density`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "density", "log_density"])?;
        for (iy, y) in self.ys.iter().enumerate() {
            for (ix, x) in self.xs.iter().enumerate() {
                let v = self.value(ix, iy);
                w.write_record([x.to_string(), y.to_string(), v.to_string(), v.ln().to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Normalized density of `state` on the grid window, restricted to `region`.
fn grid_snapshot(
    state: &StickBreakingState,
    region: Option<&TruncationRegion>,
    bounds: [(f64, f64); 2],
    n: usize,
    dims: (usize, usize),
) -> DensityGrid {
    let inside = |x: f64, y: f64| match region {
        Some(r) => {
            let (l, u) = (r.lower(), r.upper());
            l[dims.0] <= x && x <= u[dims.0] && l[dims.1] <= y && y <= u[dims.1]
        }
        None => true,
    };
    DensityGrid::from_fn(bounds, n, dims, |x, y| {
        if !inside(x, y) {
            return 0.0;
        }
        state
            .weights()
            .iter()
            .zip(state.components())
            .map(|(w, c)| w * c.log_pdf_pair(dims, x, y).exp())
            .sum()
    })
}

#[derive(Debug, Clone)]
pub struct MixtureFit {
    pub trace: ChainTrace,
    pub final_state: StickBreakingState,
    /// Posterior mean of the (grid-normalized) density.
    pub density: Option<DensityGrid>,
}

impl MixtureFit {
    pub fn mean_rejected(&self) -> f64 {
        self.trace.mean_rejected()
    }
}

fn default_bounds(data: &[DVector<f64>], region: Option<&TruncationRegion>, dims: (usize, usize)) -> [(f64, f64); 2] {
    let axis = |j: usize| {
        if let Some(r) = region {
            if r.lower()[j].is_finite() && r.upper()[j].is_finite() {
                return (r.lower()[j], r.upper()[j]);
            }
        }
        let lo = data.iter().map(|x| x[j]).fold(f64::INFINITY, f64::min);
        let hi = data.iter().map(|x| x[j]).fold(f64::NEG_INFINITY, f64::max);
        let pad = 0.25 * (hi - lo).max(1e-6);
        (lo - pad, hi + pad)
    };
    [axis(dims.0), axis(dims.1)]
}

fn labels(d: usize) -> Vec<String> {
    let mut l = vec!["occupied".to_string(), "max_weight".to_string()];
    l.extend((1..=d).map(|j| format!("mean_{j}")));
    l
}

fn summary(state: &StickBreakingState) -> Vec<f64> {
    let mut row = vec![
        state.occupied() as f64,
        state.weights().iter().copied().fold(0.0, f64::max),
    ];
    row.extend(state.mixture_mean().iter().copied());
    row
}

/// Blocked Gibbs for the mixture truncated to `region`. Each iteration draws
/// proposals from the current untruncated mixture until every observation has
/// an accepted counterpart, keeps the out-of-region proposals as rejected
/// points, and sweeps on observations plus rejected points. With the whole
/// space as region no proposal can be rejected and the chain is exactly
/// [`standard_blocked_gibbs`].
pub fn fit_truncated_dpmm<R: Rng + ?Sized>(
    data: &[DVector<f64>],
    region: &TruncationRegion,
    config: &MixtureFitConfig,
    rng: &mut R,
) -> Result<MixtureFit, MixtureError> {
    for (i, x) in data.iter().enumerate() {
        if x.len() != region.dim() {
            return Err(MixtureError::Dimension {
                index: i,
                got: x.len(),
                expected: region.dim(),
            });
        }
        if !region.contains(x) {
            return Err(MixtureError::OutsideRegion(i));
        }
    }
    run(
        data,
        (!region.is_whole_space()).then_some(region),
        region.dim(),
        config,
        rng,
    )
}

/// The untruncated blocked Gibbs sampler on the observations alone.
pub fn standard_blocked_gibbs<R: Rng + ?Sized>(
    data: &[DVector<f64>],
    config: &MixtureFitConfig,
    rng: &mut R,
) -> Result<MixtureFit, MixtureError> {
    let d = data.first().map_or(0, |x| x.len());
    if d == 0 {
        return Err(MixtureError::Region("no data".into()));
    }
    run(data, None, d, config, rng)
}

fn run<R: Rng + ?Sized>(
    data: &[DVector<f64>],
    region: Option<&TruncationRegion>,
    d: usize,
    config: &MixtureFitConfig,
    rng: &mut R,
) -> Result<MixtureFit, MixtureError> {
    let whole = TruncationRegion::whole_space(d);
    let prior = config
        .prior
        .clone()
        .unwrap_or_else(|| NiwPrior::default_for(region.unwrap_or(&whole)));
    let mut state = StickBreakingState::from_prior(config.truncation, config.alpha, prior, rng)?;
    for _ in 0..config.init_sweeps {
        state = blocked_gibbs_sweep(&state, data, rng)?;
    }
    let sampler = RejectionSampler::new(config.max_attempts);
    let bounds = config
        .grid_bounds
        .unwrap_or_else(|| default_bounds(data, region, config.grid_dims));
    let mut grid: Option<DensityGrid> = None;
    let mut trace = ChainTrace::new(labels(d)).with_sampler("blocked-gibbs", false);

    for iteration in 0..config.burn_in + config.iterations {
        let start = Instant::now();
        let (next, rejected) = match region {
            Some(region) => {
                let out = gibbs_iteration(
                    |_: &(), s: &StickBreakingState| TruncatedMixtureModel::new(s.clone(), region.clone()),
                    data,
                    &(),
                    &state,
                    |aug, _, s, rng| {
                        blocked_gibbs_sweep(s, aug.observations().iter().chain(aug.rejected_points()), rng)
                    },
                    |_, _, _| Ok::<(), MixtureError>(()),
                    &sampler,
                    rng,
                );
                let out = out.map_err(|e| MixtureError::AtIteration {
                    iteration,
                    source: Box::new(e),
                })?;
                (out.theta2, out.rejected)
            }
            None => (blocked_gibbs_sweep(&state, data, rng)?, 0),
        };
        state = next;
        if iteration < config.burn_in {
            continue;
        }
        trace.push(
            summary(&state),
            IterationMeta {
                seconds: start.elapsed().as_secs_f64(),
                accepted: None,
                rejected,
            },
        );
        let post = iteration - config.burn_in;
        if config.grid_size > 0 && d >= 2 && post.is_multiple_of(config.grid_every.max(1)) {
            let snap = grid_snapshot(&state, region, bounds, config.grid_size, config.grid_dims);
            match grid.as_mut() {
                None => grid = Some(snap),
                Some(g) => {
                    let m = g.snapshots as f64;
                    for (a, b) in g.density.iter_mut().zip(&snap.density) {
                        *a = (*a * m + b) / (m + 1.0);
                    }
                    g.snapshots += 1;
                }
            }
        }
    }
    Ok(MixtureFit {
        trace,
        final_state: state,
        density: grid,
    })
}
