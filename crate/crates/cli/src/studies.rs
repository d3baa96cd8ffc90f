//! Desk-scale simulation studies behind `rejaug reproduce`: sampler
//! efficiency on a vectorcardiogram-sized matrix Langevin problem, the bias
//! of the asymptotic normalizer approximation as the dimension grows, and
//! density recovery with the GP density sampler.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use rejaug::diagnostics::{summarize, ChainTrace};
use rejaug::gpds::{fit_gpds, GpdsConfig, PredictiveGrid, RejectedHistogram};
use rejaug::langevin::{
    fit_langevin, simulate_observations, HmcConfig, HmcParametrization, KappaSampler, LangevinFitConfig,
};
use rejaug::rng::{chain_rng, task_rng};
use rejaug::stiefel::{sample_haar_uniform, LangevinParams, StiefelMatrix};
use serde::Serialize;

use crate::commands::{create_dir, with_threads};
use crate::error::{CliError, Result};
use crate::manifest::StudyManifest;

/// `base · scale`, rounded up and floored at `min`.
pub fn scaled(base: usize, scale: f64, min: usize) -> usize {
    ((base as f64 * scale).ceil() as usize).max(min)
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale <= 1.0 {
        Ok(())
    } else {
        Err(CliError::Config(format!("--scale must lie in (0, 1], got {scale}")))
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Synthetic observations from `ML(G κ)` with a Haar-random `G`.
pub fn langevin_dataset(seed: u64, stream: u64, d: usize, kappa: &[f64], n: usize) -> Result<Vec<StiefelMatrix>> {
    let mut rng = task_rng(seed, stream, 1);
    let p = kappa.len();
    let g = sample_haar_uniform(d, p, &mut rng).map_err(|e| CliError::numerical("data", e))?;
    let truth =
        LangevinParams::unrotated(g, DVector::from_row_slice(kappa)).map_err(|e| CliError::numerical("data", e))?;
    simulate_observations(&truth, n, &mut rng).map_err(|e| CliError::numerical("data", e))
}

/// Posterior summary of one chain over the `κ` columns.
#[derive(Debug, Clone, Serialize)]
pub struct ChainSummary {
    pub sampler: String,
    pub setting: String,
    pub acceptance: f64,
    pub mean_rejected: f64,
    pub seconds: f64,
    pub mean: Vec<f64>,
    pub mcse: Vec<f64>,
    pub ess: Vec<f64>,
    pub median_ess_per_sec: f64,
}

impl ChainSummary {
    pub fn from_trace(trace: &ChainTrace, setting: String, p: usize) -> Result<Self> {
        let seconds = trace.total_seconds();
        let (mut mean, mut mcse, mut ess) = (Vec::new(), Vec::new(), Vec::new());
        for k in 0..p {
            let s = summarize(&trace.column(k)).map_err(|e| CliError::numerical("summary", e))?;
            mean.push(s.mean);
            mcse.push(s.mcse);
            ess.push(s.ess);
        }
        let per_sec: Vec<f64> = ess.iter().map(|e| e / seconds).collect();
        Ok(Self {
            sampler: trace.sampler.clone(),
            setting,
            acceptance: trace.acceptance_rate().unwrap_or(f64::NAN),
            mean_rejected: trace.mean_rejected(),
            seconds,
            mean,
            mcse,
            ess,
            median_ess_per_sec: median(&per_sec),
        })
    }

    pub fn seconds_per_iteration(&self, iterations: usize) -> f64 {
        self.seconds / iterations as f64
    }
}

fn hmc(step_size: f64, leapfrog_steps: usize) -> KappaSampler {
    KappaSampler::Hmc(HmcConfig {
        step_size,
        leapfrog_steps,
        parametrization: HmcParametrization::Direct,
    })
}

fn setting_label(s: &KappaSampler) -> String {
    match s {
        KappaSampler::Hmc(h) => format!("eps={} L={}", h.step_size, h.leapfrog_steps),
        KappaSampler::Rw { proposal_sd }
        | KappaSampler::Exchange { proposal_sd }
        | KappaSampler::Approx { proposal_sd } => format!("var={}", round6(proposal_sd * proposal_sd)),
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn run_kappa_chain(
    obs: &[StiefelMatrix],
    (d, p): (usize, usize),
    sampler: KappaSampler,
    iterations: usize,
    burn_in: usize,
    seed: u64,
    stream: u64,
) -> Result<ChainTrace> {
    let mut cfg = LangevinFitConfig::new(sampler, iterations, burn_in);
    cfg.trace_g = false;
    fit_langevin(obs, (d, p), &cfg, &mut chain_rng(seed, stream))
        .map(|f| f.trace)
        .map_err(|e| CliError::numerical(format!("{} {}", sampler.name(), setting_label(&sampler)), e))
}

#[derive(Debug, Clone)]
pub struct EssStudyConfig {
    pub d: usize,
    pub kappa: Vec<f64>,
    pub n: usize,
    pub rw_variances: Vec<f64>,
    pub exchange_variances: Vec<f64>,
    pub hmc_step_sizes: Vec<f64>,
    pub hmc_leapfrog_steps: Vec<usize>,
    pub iterations: usize,
    pub burn_in: usize,
}

impl EssStudyConfig {
    /// Three-dimensional two-frame data with 98 observations, concentrations
    /// near those of the vectorcardiogram fit, over grids of proposal
    /// variances and leapfrog settings. `scale` shrinks the chain lengths.
    pub fn desk(scale: f64) -> Self {
        let variances = vec![0.25, 0.5, 1.0, 1.5, 2.0, 3.0];
        Self {
            d: 3,
            kappa: vec![11.9, 5.9],
            n: 98,
            rw_variances: variances.clone(),
            exchange_variances: variances,
            hmc_step_sizes: vec![0.1, 0.3, 0.5, 0.7],
            hmc_leapfrog_steps: vec![1, 3, 5, 10],
            iterations: scaled(10_000, scale, 200),
            burn_in: scaled(1_000, scale, 50),
        }
    }

    fn samplers(&self) -> Vec<KappaSampler> {
        let mut out: Vec<KappaSampler> = self
            .rw_variances
            .iter()
            .map(|v| KappaSampler::Rw { proposal_sd: v.sqrt() })
            .collect();
        out.extend(
            self.exchange_variances
                .iter()
                .map(|v| KappaSampler::Exchange { proposal_sd: v.sqrt() }),
        );
        for &e in &self.hmc_step_sizes {
            out.extend(self.hmc_leapfrog_steps.iter().map(|&l| hmc(e, l)));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EssStudy {
    pub rows: Vec<ChainSummary>,
}

impl EssStudy {
    /// Highest median ESS per second among rows of `sampler`.
    pub fn best(&self, sampler: &str) -> Option<&ChainSummary> {
        self.rows
            .iter()
            .filter(|r| r.sampler == sampler)
            .max_by(|a, b| a.median_ess_per_sec.total_cmp(&b.median_ess_per_sec))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| CliError::numerical("ess.csv", e))?;
        let p = self.rows.first().map_or(0, |r| r.mean.len());
        let mut header: Vec<String> = ["sampler", "setting", "acceptance", "mean_rejected", "seconds"]
            .map(String::from)
            .to_vec();
        for k in 1..=p {
            header.extend([
                format!("mean_kappa_{k}"),
                format!("mcse_kappa_{k}"),
                format!("ess_kappa_{k}"),
            ]);
        }
        header.push("median_ess_per_sec".into());
        w.write_record(&header).map_err(|e| CliError::numerical("ess.csv", e))?;
        for r in &self.rows {
            let mut rec = vec![
                r.sampler.clone(),
                r.setting.clone(),
                r.acceptance.to_string(),
                r.mean_rejected.to_string(),
                r.seconds.to_string(),
            ];
            for k in 0..p {
                rec.extend([r.mean[k], r.mcse[k], r.ess[k]].map(|v| v.to_string()));
            }
            rec.push(r.median_ess_per_sec.to_string());
            w.write_record(&rec).map_err(|e| CliError::numerical("ess.csv", e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| sampler | setting | acceptance | median ESS/s |\n|---|---|---|---|\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "| {} | {} | {:.3} | {:.1} |",
                r.sampler, r.setting, r.acceptance, r.median_ess_per_sec
            );
        }
        s
    }
}

/// Runs every configuration on one shared dataset. Configuration `i` uses
/// stream `i + 1` of `seed`.
pub fn ess_study(cfg: &EssStudyConfig, seed: u64, threads: Option<usize>) -> Result<EssStudy> {
    let obs = langevin_dataset(seed, 0, cfg.d, &cfg.kappa, cfg.n)?;
    let p = cfg.kappa.len();
    let samplers = cfg.samplers();
    let rows = with_threads(threads, || {
        samplers
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let trace = run_kappa_chain(&obs, (cfg.d, p), *s, cfg.iterations, cfg.burn_in, seed, i as u64 + 1)?;
                ChainSummary::from_trace(&trace, setting_label(s), p)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(EssStudy { rows })
}

#[derive(Debug, Clone)]
pub struct BiasStudyConfig {
    pub dims: Vec<usize>,
    pub kappa: Vec<f64>,
    pub n: usize,
    pub exact_iterations: usize,
    pub exact_burn_in: usize,
    pub approx_iterations: usize,
    pub approx_burn_in: usize,
    pub approx_proposal_sd: f64,
    /// HMC step sizes tried in decreasing order; the first whose pilot run
    /// accepts at least `target_acceptance` of its moves is used.
    pub step_candidates: Vec<f64>,
    pub leapfrog_steps: usize,
    pub pilot_iterations: usize,
    pub target_acceptance: f64,
}

impl BiasStudyConfig {
    pub fn desk(scale: f64) -> Self {
        Self {
            dims: vec![3, 4, 5, 8, 10],
            kappa: vec![1.0, 5.0, 10.0],
            n: 50,
            exact_iterations: scaled(30_000, scale, 200),
            exact_burn_in: scaled(1_000, scale, 50),
            approx_iterations: scaled(300_000, scale, 2_000),
            approx_burn_in: scaled(10_000, scale, 500),
            approx_proposal_sd: 0.3,
            step_candidates: vec![0.3, 0.2, 0.1, 0.05],
            leapfrog_steps: 5,
            pilot_iterations: 300,
            target_acceptance: 0.6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasRow {
    pub d: usize,
    pub exact_step_size: f64,
    pub exact: ChainSummary,
    pub approx: ChainSummary,
    pub exact_seconds_per_iteration: f64,
    pub approx_seconds_per_iteration: f64,
}

impl BiasRow {
    /// Approximate minus exact posterior mean, per component.
    pub fn bias(&self) -> Vec<f64> {
        self.approx
            .mean
            .iter()
            .zip(&self.exact.mean)
            .map(|(a, e)| a - e)
            .collect()
    }

    /// Bias over its combined Monte Carlo standard error.
    pub fn z(&self) -> Vec<f64> {
        self.bias()
            .iter()
            .enumerate()
            .map(|(k, b)| b / (self.approx.mcse[k].powi(2) + self.exact.mcse[k].powi(2)).sqrt())
            .collect()
    }

    pub fn speedup(&self) -> f64 {
        self.exact_seconds_per_iteration / self.approx_seconds_per_iteration
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BiasStudy {
    pub rows: Vec<BiasRow>,
}

impl BiasStudy {
    pub fn row(&self, d: usize) -> Option<&BiasRow> {
        self.rows.iter().find(|r| r.d == d)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let err = |e: csv::Error| CliError::numerical("bias.csv", e);
        let mut w = csv::Writer::from_path(path).map_err(err)?;
        w.write_record([
            "d",
            "component",
            "exact_mean",
            "exact_mcse",
            "approx_mean",
            "approx_mcse",
            "bias",
            "z",
            "exact_step_size",
            "exact_sec_per_iter",
            "approx_sec_per_iter",
        ])
        .map_err(err)?;
        for r in &self.rows {
            let (bias, z) = (r.bias(), r.z());
            for k in 0..bias.len() {
                w.write_record(
                    [r.d.to_string(), (k + 1).to_string()].into_iter().chain(
                        [
                            r.exact.mean[k],
                            r.exact.mcse[k],
                            r.approx.mean[k],
                            r.approx.mcse[k],
                            bias[k],
                            z[k],
                            r.exact_step_size,
                            r.exact_seconds_per_iteration,
                            r.approx_seconds_per_iteration,
                        ]
                        .map(|v| v.to_string()),
                    ),
                )
                .map_err(err)?;
            }
        }
        w.flush().map_err(|e| CliError::io(path, e))
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| d | exact mean | approx mean | bias | speedup |\n|---|---|---|---|---|\n");
        for r in &self.rows {
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ");
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {:.1}x |",
                r.d,
                fmt(&r.exact.mean),
                fmt(&r.approx.mean),
                fmt(&r.bias()),
                r.speedup()
            );
        }
        s
    }
}

fn tune_step_size(obs: &[StiefelMatrix], d: usize, cfg: &BiasStudyConfig, seed: u64, stream: u64) -> Result<f64> {
    let p = cfg.kappa.len();
    for &eps in &cfg.step_candidates {
        let pilot = cfg.pilot_iterations;
        let mut fit_cfg = LangevinFitConfig::new(hmc(eps, cfg.leapfrog_steps), pilot, pilot / 2);
        fit_cfg.trace_g = false;
        let mut rng = task_rng(seed, stream, 2);
        let trace = fit_langevin(obs, (d, p), &fit_cfg, &mut rng)
            .map_err(|e| CliError::numerical(format!("pilot d={d} eps={eps}"), e))?
            .trace;
        if trace.acceptance_rate().unwrap_or(0.0) >= cfg.target_acceptance {
            return Ok(eps);
        }
    }
    Ok(*cfg.step_candidates.last().unwrap_or(&0.05))
}

/// For each dimension, fits one exact (augmented HMC) and one approximate
/// chain to the same data.
pub fn bias_study(cfg: &BiasStudyConfig, seed: u64, threads: Option<usize>) -> Result<BiasStudy> {
    let p = cfg.kappa.len();
    let rows = with_threads(threads, || {
        cfg.dims
            .par_iter()
            .map(|&d| {
                let stream = d as u64;
                let obs = langevin_dataset(seed, stream, d, &cfg.kappa, cfg.n)?;
                let eps = tune_step_size(&obs, d, cfg, seed, stream)?;
                let exact_sampler = hmc(eps, cfg.leapfrog_steps);
                let exact = run_kappa_chain(
                    &obs,
                    (d, p),
                    exact_sampler,
                    cfg.exact_iterations,
                    cfg.exact_burn_in,
                    seed,
                    2 * stream,
                )?;
                let approx_sampler = KappaSampler::Approx {
                    proposal_sd: cfg.approx_proposal_sd,
                };
                let approx = run_kappa_chain(
                    &obs,
                    (d, p),
                    approx_sampler,
                    cfg.approx_iterations,
                    cfg.approx_burn_in,
                    seed,
                    2 * stream + 1,
                )?;
                let exact = ChainSummary::from_trace(&exact, setting_label(&exact_sampler), p)?;
                let approx = ChainSummary::from_trace(&approx, setting_label(&approx_sampler), p)?;
                Ok(BiasRow {
                    d,
                    exact_step_size: eps,
                    exact_seconds_per_iteration: exact.seconds_per_iteration(cfg.exact_iterations),
                    approx_seconds_per_iteration: approx.seconds_per_iteration(cfg.approx_iterations),
                    exact,
                    approx,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(BiasStudy { rows })
}

/// Two-component normal mixture used as the GPDS ground truth.
pub fn bimodal_density(x: f64) -> f64 {
    let n = |m: f64, s: f64| (-0.5 * ((x - m) / s).powi(2)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    0.55 * n(1.5, 0.45) + 0.45 * n(3.4, 0.55)
}

/// Local maxima of the truth, located on a fine grid.
pub fn bimodal_modes() -> Vec<f64> {
    let h = 1e-4;
    let xs: Vec<f64> = (0..80_000).map(|i| -1.0 + i as f64 * h).collect();
    (1..xs.len() - 1)
        .filter(|&i| {
            let v = bimodal_density(xs[i]);
            v > bimodal_density(xs[i - 1]) && v >= bimodal_density(xs[i + 1])
        })
        .map(|i| xs[i])
        .collect()
}

fn sample_bimodal(n: usize, seed: u64) -> Vec<Vec<f64>> {
    use rand::Rng;
    use rand_distr::{Distribution, Normal};
    let mut rng = task_rng(seed, 0, 1);
    (0..n)
        .map(|_| {
            let (m, s) = if rng.random::<f64>() < 0.55 {
                (1.5, 0.45)
            } else {
                (3.4, 0.55)
            };
            vec![Normal::new(m, s).expect("valid normal").sample(&mut rng)]
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct GpdsStudyConfig {
    pub n: usize,
    pub iterations: usize,
    pub burn_in: usize,
}

impl GpdsStudyConfig {
    pub fn desk(scale: f64) -> Self {
        Self {
            n: 300,
            iterations: scaled(500, scale, 20),
            burn_in: scaled(100, scale, 10),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GpdsMetrics {
    pub n: usize,
    pub l1: f64,
    pub integral: f64,
    pub true_modes: Vec<f64>,
    pub estimated_modes: Vec<f64>,
    /// Distance from each true mode to the nearest estimated mode.
    pub mode_errors: Vec<f64>,
    pub rejected_median: f64,
    pub rejected_q90: f64,
    pub rejected_max: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct GpdsStudy {
    pub metrics: GpdsMetrics,
    pub predictive: PredictiveGrid,
    pub histogram: RejectedHistogram,
    pub trace: ChainTrace,
}

pub fn gpds_study(cfg: &GpdsStudyConfig, seed: u64) -> Result<GpdsStudy> {
    let data = sample_bimodal(cfg.n, seed);
    let config = GpdsConfig {
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        ..GpdsConfig::default()
    };
    let fit =
        fit_gpds(&data, &config, &mut chain_rng(seed, 1)).map_err(|e| CliError::numerical("gpds-synthetic", e))?;
    let predictive = fit
        .predictive
        .ok_or_else(|| CliError::numerical("gpds-synthetic", "no predictive grid"))?;
    let true_modes = bimodal_modes();
    let estimated_modes: Vec<f64> = predictive.local_maxima(0.1).into_iter().map(|(x, _)| x).collect();
    let mode_errors = true_modes
        .iter()
        .map(|t| {
            estimated_modes
                .iter()
                .map(|e| (e - t).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut rejected: Vec<f64> = fit.trace.rejected_counts().iter().map(|&r| r as f64).collect();
    rejected.sort_by(f64::total_cmp);
    let q = |p: f64| rejected[((rejected.len() - 1) as f64 * p).round() as usize];
    let metrics = GpdsMetrics {
        n: cfg.n,
        l1: predictive.l1_distance(bimodal_density),
        integral: predictive.integral(),
        true_modes,
        estimated_modes,
        mode_errors,
        rejected_median: q(0.5),
        rejected_q90: q(0.9),
        rejected_max: q(1.0),
        seconds: fit.trace.total_seconds(),
    };
    Ok(GpdsStudy {
        metrics,
        predictive,
        histogram: fit.histogram,
        trace: fit.trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Fig3Ess,
    ApproxBias,
    GpdsSynthetic,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fig3Ess => "fig3-ess",
            Self::ApproxBias => "approx-bias",
            Self::GpdsSynthetic => "gpds-synthetic",
        }
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// Runs a study and writes its tables into `out`; returns a printable report.
pub fn reproduce(study: Study, scale: f64, seed: u64, out: &Path, threads: Option<usize>) -> Result<String> {
    check_scale(scale)?;
    create_dir(out)?;
    let manifest = StudyManifest {
        study: study.name().into(),
        seed,
        scale,
    };
    write(
        &out.join("manifest.toml"),
        toml::to_string_pretty(&manifest).map_err(|e| CliError::Config(e.to_string()))?,
    )?;
    let context = |e: CliError| e.within(study.name());
    match study {
        Study::Fig3Ess => {
            let result = ess_study(&EssStudyConfig::desk(scale), seed, threads).map_err(context)?;
            result.write_csv(&out.join("ess.csv"))?;
            let md = result.to_markdown();
            write(&out.join("ess.md"), &md)?;
            Ok(md)
        }
        Study::ApproxBias => {
            let result = bias_study(&BiasStudyConfig::desk(scale), seed, threads).map_err(context)?;
            result.write_csv(&out.join("bias.csv"))?;
            let md = result.to_markdown();
            write(&out.join("bias.md"), &md)?;
            Ok(md)
        }
        Study::GpdsSynthetic => {
            let result = gpds_study(&GpdsStudyConfig::desk(scale), seed).map_err(context)?;
            let mut buf = Vec::new();
            result
                .predictive
                .write_csv(&mut buf)
                .map_err(|e| CliError::numerical("predictive.csv", e))?;
            write(&out.join("predictive.csv"), buf)?;
            let mut buf = Vec::new();
            result
                .histogram
                .write_csv(&mut buf)
                .map_err(|e| CliError::numerical("rejected_histogram.csv", e))?;
            write(&out.join("rejected_histogram.csv"), buf)?;
            let trace_path = out.join("chain_0.csv");
            result
                .trace
                .write_csv(&trace_path)
                .map_err(|e| CliError::numerical("chain_0.csv", e))?;
            let json = serde_json::to_string_pretty(&result.metrics).map_err(|e| CliError::numerical("metrics", e))?;
            write(&out.join("metrics.json"), &json)?;
            Ok(json)
        }
    }
}
