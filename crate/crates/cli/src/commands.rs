//! The subcommands. Each writes only inside its output directory and leaves a
//! manifest there describing how the directory was produced.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use rejaug::aug::toy::{DiscreteModel, TwoStateToy};
use rejaug::aug::{AugmentedDataset, RejectionSampler};
use rejaug::diagnostics::{compare_samplers, summarize, ChainTrace, IterationMeta};
use rejaug::gpds::{
    fit_gpds, gpds_generate, GpConditioner, GpdsConfig, KernelPrior, LatentUpdate, NormalBase, SquaredExponential,
};
use rejaug::langevin::{fit_langevin, HmcConfig, KappaSampler, LangevinFitConfig, LangevinPriors};
use rejaug::mixture::{
    fit_truncated_dpmm, BoxScaling, MixtureFitConfig, NiwPrior, StickBreakingState, TruncatedMixtureModel,
    TruncationRegion,
};
use rejaug::rng::{chain_rng, ChainRng};
use rejaug::stiefel::{sample_matrix_langevin_counted, LangevinParams, StiefelMatrix};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::ingest::{atom_rows, data_box, read_numeric_csv, stiefel_rows, vector_rows, NumericTable};
use crate::manifest::{Format, Method, ModelKind, Normalization, RunManifest};

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> std::result::Result<(), csv::Error>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| CliError::numerical("csv", e))?;
    Ok(buf)
}

/// Runs `f` on a pool of `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Serialize)]
pub struct PriorSummary {
    pub model: ModelKind,
    pub draws: usize,
    pub proposals: usize,
    pub acceptance_rate: f64,
    pub mean_rejected: f64,
}

fn langevin_mode(manifest: &RunManifest) -> Result<StiefelMatrix> {
    let l = &manifest.langevin;
    match &l.g {
        Some(values) => {
            StiefelMatrix::from_column_major(l.d, l.p, values).map_err(|e| CliError::Config(format!("langevin.g: {e}")))
        }
        None => StiefelMatrix::identity(l.d, l.p).map_err(|e| CliError::Config(format!("langevin: {e}"))),
    }
}

fn mixture_region(manifest: &RunManifest, dim: usize) -> Result<TruncationRegion> {
    let m = &manifest.mixture;
    if m.whole_space {
        return Ok(TruncationRegion::whole_space(dim));
    }
    match (&m.lower, &m.upper) {
        (Some(l), Some(u)) => {
            if l.len() != dim {
                return Err(CliError::Config(format!(
                    "mixture.lower: expected {dim} bounds, got {}",
                    l.len()
                )));
            }
            TruncationRegion::new(l.clone(), u.clone()).map_err(|e| CliError::Config(format!("mixture.lower: {e}")))
        }
        _ => Ok(TruncationRegion::unit_cube(dim)),
    }
}

fn header(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("{prefix}_{i}")).collect()
}

/// Draws from the model's generative process and writes `samples.csv` and
/// `summary.json`.
pub fn sample_prior(manifest: &RunManifest, format: Format) -> Result<PriorSummary> {
    manifest.validate()?;
    create_dir(&manifest.out)?;
    manifest.echo(format)?;
    let mut rng = chain_rng(manifest.seed, 0);
    let sampler = RejectionSampler::new(manifest.sampler.max_attempts);
    let numerical = |e: &dyn std::fmt::Display| CliError::numerical("sample-prior", e);
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::numerical("samples.csv", e);
    let (draws, rejected) = match manifest.model {
        ModelKind::Langevin => {
            let l = &manifest.langevin;
            let params = LangevinParams::unrotated(langevin_mode(manifest)?, DVector::from_vec(l.kappa.clone()))
                .map_err(|e| CliError::Config(format!("langevin: {e}")))?;
            let mut cols: Vec<String> = (1..=l.p)
                .flat_map(|j| (1..=l.d).map(move |i| format!("x_{i}_{j}")))
                .collect();
            cols.push("rejected".into());
            w.write_record(&cols).map_err(csv_err)?;
            let mut total = 0;
            for _ in 0..l.draws {
                let (x, r) = sample_matrix_langevin_counted(&params, &sampler, &mut rng).map_err(|e| numerical(&e))?;
                total += r;
                let mut rec: Vec<String> = x.to_column_major().iter().map(f64::to_string).collect();
                rec.push(r.to_string());
                w.write_record(&rec).map_err(csv_err)?;
            }
            (l.draws, total)
        }
        ModelKind::TruncMixture => {
            let m = &manifest.mixture;
            let region = mixture_region(manifest, m.dim)?;
            let prior = NiwPrior::default_for(&region);
            let state =
                StickBreakingState::from_prior(m.truncation, m.alpha, prior, &mut rng).map_err(|e| numerical(&e))?;
            let model = TruncatedMixtureModel::new(state, region);
            let mut cols = header("x", m.dim);
            cols.push("rejected".into());
            w.write_record(&cols).map_err(csv_err)?;
            let mut total = 0;
            for _ in 0..m.draws {
                let draw = sampler.sample(&model, &mut rng).map_err(|e| numerical(&e))?;
                total += draw.rejected.len();
                let mut rec: Vec<String> = draw.accepted.iter().map(f64::to_string).collect();
                rec.push(draw.rejected.len().to_string());
                w.write_record(&rec).map_err(csv_err)?;
            }
            (m.draws, total)
        }
        ModelKind::Gpds => {
            let g = &manifest.gpds;
            let dim = g.base_mean.len();
            let base = NormalBase::new(g.base_mean.clone(), g.base_variance).map_err(|e| numerical(&e))?;
            let kernel = SquaredExponential::new(g.kernel_variance, g.length_scale).map_err(|e| numerical(&e))?;
            let mut gp = GpConditioner::new(kernel, g.gp_mean, dim);
            let out = gpds_generate(&mut gp, &base, g.draws, manifest.sampler.max_attempts, &mut rng)
                .map_err(|e| numerical(&e))?;
            let mut cols = header("x", dim);
            cols.extend(["f".into(), "accepted".into()]);
            w.write_record(&cols).map_err(csv_err)?;
            let rows = out
                .x
                .iter()
                .zip(&out.f_x)
                .map(|r| (r, 1))
                .chain(out.y.iter().zip(&out.f_y).map(|r| (r, 0)));
            for ((x, f), flag) in rows {
                let mut rec: Vec<String> = x.iter().map(f64::to_string).collect();
                rec.extend([f.to_string(), flag.to_string()]);
                w.write_record(&rec).map_err(csv_err)?;
            }
            (g.draws, out.y.len())
        }
        ModelKind::ToyDiscrete => {
            let t = &manifest.toy;
            let f = if t.theta == 0 { &t.f0 } else { &t.f1 };
            let model =
                DiscreteModel::new(f.clone(), t.q.clone(), t.m).map_err(|e| CliError::Config(format!("toy: {e}")))?;
            w.write_record(["atom", "rejected"]).map_err(csv_err)?;
            let mut total = 0;
            for _ in 0..t.draws {
                let draw = sampler.sample(&model, &mut rng).map_err(|e| numerical(&e))?;
                total += draw.rejected.len();
                w.write_record([draw.accepted.to_string(), draw.rejected.len().to_string()])
                    .map_err(csv_err)?;
            }
            (t.draws, total)
        }
    };
    let bytes = w.into_inner().map_err(|e| CliError::numerical("samples.csv", e))?;
    write_file(&manifest.out.join("samples.csv"), bytes)?;
    let proposals = draws + rejected;
    let summary = PriorSummary {
        model: manifest.model,
        draws,
        proposals,
        acceptance_rate: if proposals == 0 {
            1.0
        } else {
            draws as f64 / proposals as f64
        },
        mean_rejected: if draws == 0 {
            0.0
        } else {
            rejected as f64 / draws as f64
        },
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| CliError::numerical("summary.json", e))?;
    write_file(&manifest.out.join("summary.json"), json)?;
    Ok(summary)
}

/// Model-ready data, after ingestion and normalization.
#[derive(Debug, Clone)]
pub enum Dataset {
    Stiefel(Vec<StiefelMatrix>),
    Points(Vec<DVector<f64>>),
    Atoms(Vec<usize>),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Self::Stiefel(v) => v.len(),
            Self::Points(v) => v.len(),
            Self::Atoms(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reads the manifest's data file. For unit-box normalization the bounds are
/// taken from the manifest when recorded there and from the data otherwise;
/// the returned manifest records the bounds actually used.
pub fn load_data(manifest: &RunManifest) -> Result<(Dataset, RunManifest, NumericTable)> {
    let section = manifest
        .data
        .as_ref()
        .ok_or_else(|| CliError::Config("data: section with a path is required".into()))?;
    if !section.path.exists() {
        return Err(CliError::io(
            &section.path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "data file not found"),
        ));
    }
    let mut effective = manifest.clone();
    let table = read_numeric_csv(&section.path, None)?;
    let ingest = |line: u64, message: String| CliError::Ingest {
        path: section.path.clone(),
        line,
        message,
    };
    let data = match manifest.model {
        ModelKind::Langevin => Dataset::Stiefel(stiefel_rows(&table, manifest.langevin.d, manifest.langevin.p)?),
        ModelKind::ToyDiscrete => Dataset::Atoms(atom_rows(&table, manifest.toy.q.len())?),
        ModelKind::Gpds => {
            if !(1..=2).contains(&table.width()) {
                return Err(ingest(
                    table.lines[0],
                    format!("expected 1 or 2 columns, found {}", table.width()),
                ));
            }
            Dataset::Points(vector_rows(&table))
        }
        ModelKind::TruncMixture => {
            let mut points = vector_rows(&table);
            if section.normalization == Normalization::UnitBox {
                let (lower, upper) = match (&section.lower, &section.upper) {
                    (Some(l), Some(u)) => (l.clone(), u.clone()),
                    _ => data_box(&table),
                };
                if lower.len() != table.width() {
                    return Err(CliError::Config(format!(
                        "data.lower: expected {} bounds, got {}",
                        table.width(),
                        lower.len()
                    )));
                }
                let scaling = BoxScaling::new(lower.clone(), upper.clone())
                    .map_err(|e| CliError::Config(format!("data.lower: {e}")))?;
                points = table.rows.iter().map(|r| scaling.to_unit(r)).collect();
                let data = effective.data.as_mut().expect("checked above");
                data.lower = Some(lower);
                data.upper = Some(upper);
            }
            let region = mixture_region(manifest, table.width())?;
            if let Some(i) = points.iter().position(|x| !region.contains(x)) {
                return Err(ingest(
                    table.lines[i],
                    "point lies outside the truncation region".into(),
                ));
            }
            Dataset::Points(points)
        }
    };
    if let Some(d) = effective.data.as_mut() {
        if let Ok(abs) = d.path.canonicalize() {
            d.path = abs;
        }
    }
    Ok((data, effective, table))
}

/// Output of one chain: its trace plus any extra files keyed by name.
struct ChainOutput {
    trace: ChainTrace,
    extras: Vec<(String, Vec<u8>)>,
}

fn run_chain(manifest: &RunManifest, data: &Dataset, chain: usize, rng: &mut ChainRng) -> Result<ChainOutput> {
    let s = &manifest.sampler;
    let hmc = HmcConfig {
        step_size: s.step_size,
        leapfrog_steps: s.leapfrog_steps,
        parametrization: s.parametrization,
    };
    match (manifest.model, data) {
        (ModelKind::Langevin, Dataset::Stiefel(obs)) => {
            let l = &manifest.langevin;
            let sampler = match manifest.method() {
                Method::Hmc => KappaSampler::Hmc(hmc),
                Method::Rw => KappaSampler::Rw {
                    proposal_sd: s.proposal_sd,
                },
                Method::Exchange => KappaSampler::Exchange {
                    proposal_sd: s.proposal_sd,
                },
                _ => KappaSampler::Approx {
                    proposal_sd: s.proposal_sd,
                },
            };
            let mut cfg = LangevinFitConfig::new(sampler, s.iterations, s.burn_in);
            cfg.update_h = l.update_h;
            cfg.update_g = l.update_g;
            cfg.max_attempts = s.max_attempts;
            cfg.priors = Some(LangevinPriors {
                gamma_shape: l.kappa_prior_shape,
                gamma_rate: l.kappa_prior_rate,
                ..LangevinPriors::default_for(l.d, l.p)
            });
            let fit = fit_langevin(obs, (l.d, l.p), &cfg, rng).map_err(|e| CliError::numerical("langevin", e))?;
            Ok(ChainOutput {
                trace: fit.trace,
                extras: Vec::new(),
            })
        }
        (ModelKind::TruncMixture, Dataset::Points(points)) => {
            let m = &manifest.mixture;
            let d = points[0].len();
            let region = mixture_region(manifest, d)?;
            let cfg = MixtureFitConfig {
                truncation: m.truncation,
                alpha: m.alpha,
                iterations: s.iterations,
                burn_in: s.burn_in,
                init_sweeps: m.init_sweeps,
                max_attempts: s.max_attempts,
                grid_size: if d >= 2 { m.grid_size } else { 0 },
                grid_every: m.grid_every,
                ..MixtureFitConfig::default()
            };
            let fit =
                fit_truncated_dpmm(points, &region, &cfg, rng).map_err(|e| CliError::numerical("trunc-mixture", e))?;
            let mut extras = Vec::new();
            if let Some(grid) = &fit.density {
                extras.push((format!("density_chain_{chain}.csv"), csv_bytes(|b| grid.write_csv(b))?));
            }
            Ok(ChainOutput {
                trace: fit.trace,
                extras,
            })
        }
        (ModelKind::Gpds, Dataset::Points(points)) => {
            let g = &manifest.gpds;
            let cfg = GpdsConfig {
                kernel: SquaredExponential::new(g.kernel_variance, g.length_scale)
                    .map_err(|e| CliError::Config(format!("gpds: {e}")))?,
                gp_mean: g.gp_mean,
                iterations: s.iterations,
                burn_in: s.burn_in,
                latent_update: match manifest.method() {
                    Method::Hmc => LatentUpdate::Hmc {
                        step_size: s.step_size,
                        leapfrog_steps: s.leapfrog_steps,
                    },
                    _ => LatentUpdate::EllipticalSlice,
                },
                latent_sweeps: g.latent_sweeps,
                kernel_prior: g.update_kernel.then(KernelPrior::default),
                update_base: g.update_base,
                max_attempts: s.max_attempts,
                grid_size: g.grid_size,
                grid_every: g.grid_every,
                histogram_bin: g.histogram_bin,
                ..GpdsConfig::default()
            };
            let rows: Vec<Vec<f64>> = points.iter().map(|p| p.iter().copied().collect()).collect();
            let fit = fit_gpds(&rows, &cfg, rng).map_err(|e| CliError::numerical("gpds", e))?;
            let mut extras = vec![(
                format!("rejected_histogram_chain_{chain}.csv"),
                csv_bytes(|b| fit.histogram.write_csv(b))?,
            )];
            if let Some(grid) = &fit.predictive {
                extras.push((
                    format!("predictive_chain_{chain}.csv"),
                    csv_bytes(|b| grid.write_csv(b))?,
                ));
            }
            Ok(ChainOutput {
                trace: fit.trace,
                extras,
            })
        }
        (ModelKind::ToyDiscrete, Dataset::Atoms(obs)) => {
            let t = &manifest.toy;
            let toy = TwoStateToy::new(t.f0.clone(), t.f1.clone(), t.q.clone(), t.m, t.prior)
                .map_err(|e| CliError::Config(format!("toy: {e}")))?;
            Ok(ChainOutput {
                trace: run_toy_chain(&toy, obs, s.iterations, s.burn_in, s.max_attempts, rng)?,
                extras: Vec::new(),
            })
        }
        _ => Err(CliError::Config("data does not match the model".into())),
    }
}

/// Augmented Gibbs on the two-state toy: refresh the rejected proposals under
/// the current `θ`, then draw `θ` exactly given observations and rejections.
pub fn run_toy_chain(
    toy: &TwoStateToy,
    obs: &[usize],
    iterations: usize,
    burn_in: usize,
    max_attempts: u64,
    rng: &mut ChainRng,
) -> Result<ChainTrace> {
    let sampler = RejectionSampler::new(max_attempts);
    let mut trace = ChainTrace::new(vec!["theta".into()]).with_sampler("gibbs", false);
    let mut theta = 0;
    for it in 0..burn_in + iterations {
        let start = std::time::Instant::now();
        let sets = sampler
            .resample_rejected(toy.model(theta), obs.len(), rng)
            .map_err(|e| CliError::numerical(format!("toy iteration {it}"), e))?;
        let data = AugmentedDataset::new(obs.to_vec(), sets).map_err(|e| CliError::numerical("toy", e))?;
        let rejected = data.rejected_count();
        let next = toy.sample_theta(&data, rng);
        let moved = next != theta;
        theta = next;
        if it >= burn_in {
            trace.push(
                vec![theta as f64],
                IterationMeta {
                    seconds: start.elapsed().as_secs_f64(),
                    accepted: Some(moved),
                    rejected,
                },
            );
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub traces: Vec<PathBuf>,
    pub manifest: PathBuf,
    pub summary: String,
}

/// Fits every chain (in parallel over `threads` workers) and writes
/// `chain_<c>.csv` per chain, model-specific grids and `summary.csv`. Chain
/// `c` draws from stream `c` of the manifest seed, so the files do not depend
/// on the number of threads.
pub fn fit(manifest: &RunManifest, format: Format, threads: Option<usize>) -> Result<FitReport> {
    manifest.validate()?;
    let (data, effective, _) = load_data(manifest)?;
    create_dir(&effective.out)?;
    let manifest_path = effective.echo(format)?;
    let chains = effective.sampler.chains;
    let outputs: Vec<Result<ChainOutput>> = with_threads(threads, || {
        (0..chains)
            .into_par_iter()
            .map(|c| {
                let mut rng = chain_rng(effective.seed, c as u64);
                run_chain(&effective, &data, c, &mut rng).map_err(|e| e.within(&format!("chain {c}")))
            })
            .collect()
    })?;
    let mut traces = Vec::with_capacity(chains);
    let mut summary = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::numerical("summary.csv", e);
    summary
        .write_record([
            "chain",
            "parameter",
            "mean",
            "sd",
            "ess",
            "mcse",
            "q05",
            "q50",
            "q95",
            "mean_rejected",
        ])
        .map_err(csv_err)?;
    let mut text = String::new();
    for (c, out) in outputs.into_iter().enumerate() {
        let out = out?;
        let path = effective.out.join(format!("chain_{c}.csv"));
        out.trace.write_csv(&path).map_err(|e| CliError::io(&path, to_io(e)))?;
        for (name, bytes) in &out.extras {
            write_file(&effective.out.join(name), bytes)?;
        }
        let _ = writeln!(
            text,
            "chain {c}: {} draws, acceptance {}, mean rejected {:.2}",
            out.trace.len(),
            out.trace.acceptance_rate().map_or("-".into(), |a| format!("{a:.3}")),
            out.trace.mean_rejected()
        );
        for (j, label) in out.trace.labels().iter().enumerate() {
            let mut rec = vec![c.to_string(), label.clone()];
            match summarize(&out.trace.column(j)) {
                Ok(s) => rec.extend([s.mean, s.sd, s.ess, s.mcse, s.q05, s.q50, s.q95].map(|v| v.to_string())),
                Err(_) => rec.extend(std::iter::repeat_n(String::new(), 7)),
            }
            rec.push(out.trace.mean_rejected().to_string());
            summary.write_record(&rec).map_err(csv_err)?;
        }
        traces.push(path);
    }
    let bytes = summary
        .into_inner()
        .map_err(|e| CliError::numerical("summary.csv", e))?;
    write_file(&effective.out.join("summary.csv"), bytes)?;
    Ok(FitReport {
        traces,
        manifest: manifest_path,
        summary: text,
    })
}

fn to_io(e: rejaug::diagnostics::DiagnosticsError) -> std::io::Error {
    match e {
        rejaug::diagnostics::DiagnosticsError::Io(io) => io,
        other => std::io::Error::other(other.to_string()),
    }
}

#[derive(Debug, Clone, Serialize)]
struct DiagnoseManifest {
    command: &'static str,
    traces: Vec<PathBuf>,
    burn_in: usize,
}

/// ESS summaries of trace files and, for two or more, a sampler comparison.
/// With `out`, also writes `summary.csv` and `comparison.csv` there.
pub fn diagnose(paths: &[PathBuf], burn_in: usize, out: Option<&Path>) -> Result<String> {
    if paths.is_empty() {
        return Err(CliError::Config("diagnose: no trace files given".into()));
    }
    let traces = paths
        .iter()
        .map(|p| {
            if !p.exists() {
                return Err(CliError::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "trace not found"),
                ));
            }
            ChainTrace::read_csv(p)
                .map(|t| t.after_burn_in(burn_in))
                .map_err(|e| CliError::Ingest {
                    path: p.clone(),
                    line: 0,
                    message: e.to_string(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut text = String::new();
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| CliError::numerical("summary.csv", e);
    w.write_record([
        "trace",
        "sampler",
        "parameter",
        "mean",
        "sd",
        "ess",
        "mcse",
        "ess_per_sec",
        "q05",
        "q50",
        "q95",
    ])
    .map_err(csv_err)?;
    for (path, t) in paths.iter().zip(&traces) {
        let _ = writeln!(text, "{} ({}, {} draws)", path.display(), t.sampler, t.len());
        let seconds = t.total_seconds();
        for (j, label) in t.labels().iter().enumerate() {
            let s =
                summarize(&t.column(j)).map_err(|e| CliError::numerical(format!("{}: {label}", path.display()), e))?;
            let per_sec = if seconds > 0.0 { s.ess / seconds } else { f64::NAN };
            let _ = writeln!(
                text,
                "  {label:<16} mean {:>10.4}  sd {:>9.4}  ess {:>8.1}  mcse {:>8.4}  ess/s {:>9.1}",
                s.mean, s.sd, s.ess, s.mcse, per_sec
            );
            w.write_record(
                [path.display().to_string(), t.sampler.clone(), label.clone()]
                    .into_iter()
                    .chain([s.mean, s.sd, s.ess, s.mcse, per_sec, s.q05, s.q50, s.q95].map(|v| v.to_string())),
            )
            .map_err(csv_err)?;
        }
    }
    let comparison = if traces.len() >= 2 {
        let c = compare_samplers(&traces).map_err(|e| CliError::numerical("compare", e))?;
        text.push('\n');
        text.push_str(&c.to_markdown());
        Some(c)
    } else {
        None
    };
    if let Some(dir) = out {
        create_dir(dir)?;
        let echo = DiagnoseManifest {
            command: "diagnose",
            traces: paths.to_vec(),
            burn_in,
        };
        let toml = toml::to_string_pretty(&echo).map_err(|e| CliError::Config(e.to_string()))?;
        write_file(&dir.join("manifest.toml"), toml)?;
        let bytes = w.into_inner().map_err(|e| CliError::numerical("summary.csv", e))?;
        write_file(&dir.join("summary.csv"), bytes)?;
        if let Some(c) = comparison {
            let mut buf = Vec::new();
            c.write_csv(&mut buf)
                .map_err(|e| CliError::numerical("comparison.csv", e))?;
            write_file(&dir.join("comparison.csv"), buf)?;
        }
    }
    Ok(text)
}

/// Validates a data file, either against a manifest's model or as a plain
/// numeric table, and describes it.
pub fn ingest_check(manifest: Option<&RunManifest>, path: Option<&Path>) -> Result<String> {
    let mut text = String::new();
    let table = match (manifest, path) {
        (Some(m), _) => {
            m.validate()?;
            let (data, effective, table) = load_data(m)?;
            let _ = writeln!(text, "model {:?}: {} observations", m.model, data.len());
            if let Some(d) = &effective.data {
                if let (Some(l), Some(u)) = (&d.lower, &d.upper) {
                    let _ = writeln!(text, "unit-box normalization from {l:?} to {u:?}");
                }
            }
            table
        }
        (None, Some(p)) => read_numeric_csv(p, None)?,
        (None, None) => return Err(CliError::Config("ingest-check: give a data path or --config".into())),
    };
    let _ = writeln!(
        text,
        "{}: {} rows, {} columns",
        table.path.display(),
        table.rows.len(),
        table.width()
    );
    for (j, (lo, hi)) in table.column_ranges().into_iter().enumerate() {
        let name = table
            .header
            .as_ref()
            .and_then(|h| h.get(j).cloned())
            .unwrap_or_else(|| format!("column {}", j + 1));
        let _ = writeln!(text, "  {name}: [{lo}, {hi}]");
    }
    Ok(text)
}
