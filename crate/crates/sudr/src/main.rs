use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sudr::commands;
use sudr::config::{Adaptation, PriorConfig, RunConfig, SamplerConfig, Source, SyntheticSpec};
use sudr::manifest::{Manifest, DEFAULT_ALPHA};
use sudr::robustness::{RobustnessOptions, SPARSITY_LEVELS};
use sudr::{Error, Result};

#[derive(Parser)]
#[command(name = "sudr", version, about = "Bayesian SUDR epidemic model fits and reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the posterior and write samples, summaries and trajectory bands.
    Fit(FitArgs),
    /// Compare documented and undocumented peaks across fit directories.
    PeakReport(ReportArgs),
    /// Summarize the sampled transmission rate of each fit directory.
    BetaReport(ReportArgs),
    /// Backtest the four models at several sparsity levels.
    Robustness(RobustnessArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Country name from the manifest.
    #[arg(long, conflicts_with = "synthetic")]
    country: Option<String>,
    /// Country manifest (TOML); the built-in table is used otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding the JHU CSSE global time-series files.
    #[arg(long)]
    jhu_dir: Option<PathBuf>,
    /// Synthetic dataset spec (TOML).
    #[arg(long)]
    synthetic: Option<PathBuf>,
    /// Fraction of the population the model acts on.
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    /// Iterations per chain, warmup included.
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 1000)]
    warmup: usize,
    #[arg(long, default_value_t = 0.9)]
    target_accept: f64,
    #[arg(long, default_value_t = 20)]
    leapfrog: usize,
    #[arg(long, value_enum, default_value_t = AdaptationArg::None)]
    adaptation: AdaptationArg,
    /// Bernstein degree of the transmission rate.
    #[arg(long, default_value_t = 8)]
    degree: usize,
    /// Prior override `name=value`, repeatable (e.g. `theta_max=1`).
    #[arg(long = "prior", value_name = "NAME=VALUE")]
    prior: Vec<String>,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum AdaptationArg {
    None,
    Diagonal,
    Dense,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Fit output directories.
    #[arg(required = true)]
    fits: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RobustnessArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
    /// Sparsity levels.
    #[arg(long, value_delimiter = ',')]
    sparsity: Option<Vec<f64>>,
    /// Mask seeds; synthetic data is regenerated with each.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic dataset spec (TOML); defaults are used for missing keys.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn read_synthetic(path: Option<&Path>) -> Result<SyntheticSpec> {
    match path {
        None => Ok(SyntheticSpec::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                path: p.to_path_buf(),
                source: e,
            })?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn prior_config(overrides: &[String]) -> Result<PriorConfig> {
    let mut text = String::new();
    for o in overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("prior override {o:?} is not NAME=VALUE")))?;
        text.push_str(&format!("{} = {}\n", k.trim(), v.trim()));
    }
    toml::from_str(&text).map_err(|e| Error::Config(format!("prior overrides: {e}")))
}

fn sampler_config(args: &SamplerArgs) -> SamplerConfig {
    SamplerConfig {
        chains: args.chains,
        iters: args.iters,
        warmup: args.warmup,
        target_accept: args.target_accept,
        seed: args.seed,
        n_leapfrog: args.leapfrog,
        adaptation: match args.adaptation {
            AdaptationArg::None => Adaptation::None,
            AdaptationArg::Diagonal => Adaptation::Diagonal,
            AdaptationArg::Dense => Adaptation::Dense,
        },
        ..SamplerConfig::default()
    }
}

/// Data source and effective alpha.
fn source(data: &DataArgs) -> Result<(Source, f64)> {
    match (&data.country, &data.synthetic) {
        (Some(country), _) => {
            let manifest = match &data.config {
                Some(p) => Manifest::load(p)?,
                None => Manifest::builtin(),
            };
            let alpha = data.alpha.unwrap_or_else(|| manifest.get(country).map_or(DEFAULT_ALPHA, |e| e.alpha()));
            Ok((commands::country_source(&manifest, country)?, alpha))
        }
        (None, Some(path)) => {
            let mut spec = read_synthetic(Some(path))?;
            if let Some(a) = data.alpha {
                spec.alpha = a;
            }
            let alpha = spec.alpha;
            Ok((Source::Synthetic(spec), alpha))
        }
        (None, None) => Err(Error::Config("give --country or --synthetic".into())),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit(args) => {
            let (source, alpha) = source(&args.data)?;
            let config = RunConfig {
                source,
                degree: args.sampler.degree,
                alpha,
                prior: prior_config(&args.sampler.prior)?,
                sampler: sampler_config(&args.sampler),
            };
            let fit = commands::cmd_fit(&config, args.data.jhu_dir.as_deref(), &args.out)?;
            eprintln!(
                "converged: max R-hat {:.3}, min ESS {:.0}",
                fit.summary.max_rhat().unwrap_or(f64::NAN),
                fit.summary.min_ess().unwrap_or(f64::NAN)
            );
        }
        Command::PeakReport(args) => {
            commands::cmd_peak_report(&args.fits, &args.out)?;
        }
        Command::BetaReport(args) => {
            commands::cmd_beta_report(&args.fits, &args.out)?;
        }
        Command::Robustness(args) => {
            let (source, alpha) = source(&args.data)?;
            let datasets = commands::robustness_datasets(&source, alpha, args.data.jhu_dir.as_deref(), &args.seeds)?;
            let options = RobustnessOptions {
                levels: args.sparsity.unwrap_or_else(|| SPARSITY_LEVELS.to_vec()),
                degree: args.sampler.degree,
                prior: prior_config(&args.sampler.prior)?.into(),
                sampler: sampler_config(&args.sampler),
                ..RobustnessOptions::default()
            };
            commands::cmd_robustness(&datasets, &options, &args.out)?;
        }
        Command::Synth(args) => {
            let mut spec = read_synthetic(args.spec.as_deref())?;
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            commands::cmd_synth(&spec, &args.out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let report = serde_json::json!({
                "error": "usage",
                "message": e.kind().to_string(),
                "detail": e.render().to_string(),
                "exit_code": 2,
            });
            eprintln!("{report}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({
                "error": e.kind(),
                "message": e.to_string(),
                "exit_code": e.exit_code(),
            });
            eprintln!("{report}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
