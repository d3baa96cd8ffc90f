use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rejaug_cli::commands::{diagnose, fit, ingest_check, sample_prior};
use rejaug_cli::manifest::RunManifest;
use rejaug_cli::studies::{reproduce, Study};
use rejaug_cli::CliError;

/// Data augmentation MCMC for models defined by rejection samplers.
#[derive(Parser)]
#[command(name = "rejaug", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunFlags {
    /// Manifest file (TOML, or JSON by extension).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the manifest output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for chains (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyArg {
    #[value(name = "fig3-ess")]
    Fig3Ess,
    #[value(name = "approx-bias")]
    ApproxBias,
    #[value(name = "gpds-synthetic")]
    GpdsSynthetic,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate from the model's generative process.
    SamplePrior(RunFlags),
    /// Run posterior chains on the manifest's data.
    Fit(RunFlags),
    /// Run one of the bundled simulation studies.
    Reproduce {
        study: StudyArg,
        /// Fraction of the full chain lengths, in (0, 1].
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Effective sample sizes and sampler comparison for trace files.
    Diagnose {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        burn_in: usize,
        /// Also write summary tables here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a data file, on its own or against a manifest.
    IngestCheck {
        path: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(flags: &RunFlags) -> Result<(RunManifest, rejaug_cli::manifest::Format), CliError> {
    let (mut manifest, format) = RunManifest::load(&flags.config)?;
    if let Some(seed) = flags.seed {
        manifest.seed = seed;
    }
    if let Some(out) = &flags.out {
        manifest.out = out.clone();
    }
    Ok((manifest, format))
}

fn run(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::SamplePrior(flags) => {
            let (manifest, format) = load(&flags)?;
            let s = sample_prior(&manifest, format)?;
            Ok(format!(
                "{} draws from {} proposals (acceptance rate {:.4}) written to {}",
                s.draws,
                s.proposals,
                s.acceptance_rate,
                manifest.out.display()
            ))
        }
        Command::Fit(flags) => {
            let (manifest, format) = load(&flags)?;
            let report = fit(&manifest, format, flags.threads)?;
            Ok(format!(
                "{}traces written to {}",
                report.summary,
                manifest.out.display()
            ))
        }
        Command::Reproduce {
            study,
            scale,
            seed,
            out,
            threads,
        } => {
            let study = match study {
                StudyArg::Fig3Ess => Study::Fig3Ess,
                StudyArg::ApproxBias => Study::ApproxBias,
                StudyArg::GpdsSynthetic => Study::GpdsSynthetic,
            };
            reproduce(study, scale, seed, &out, threads)
        }
        Command::Diagnose { traces, burn_in, out } => diagnose(&traces, burn_in, out.as_deref()),
        Command::IngestCheck { path, config } => {
            let manifest = config.as_deref().map(RunManifest::load).transpose()?.map(|(m, _)| m);
            ingest_check(manifest.as_ref(), path.as_deref())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            println!("{}", text.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
