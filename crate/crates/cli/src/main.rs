//! Command-line front end: simulate data, fit the model, cross-validate,
//! benchmark against baselines and summarize fits.

mod benchmark;
mod cv;
mod evaluate;
mod fit;
mod manifest;
mod simulate;

use std::path::PathBuf;

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};
use tvfactor::data::{KappaMode, ModelConfig, PreprocessOptions};

#[derive(Parser)]
#[command(name = "tvfactor", version, about = "Bayesian factor regression with time-varying effects")]
struct Cli {
    /// Worker threads for replicates and folds (defaults to all cores).
    #[arg(long, global = true, env = "TVFACTOR_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate simulated replicates with known truth.
    Simulate(simulate::SimulateArgs),
    /// Fit the model to a data directory.
    Fit(fit::FitArgs),
    /// Grid search over (K, H) by k-fold cross-validation.
    Cv(cv::CvArgs),
    /// Compare the model with the oracle and baselines on simulated scenarios.
    Benchmark(benchmark::BenchmarkArgs),
    /// Rebuild loadings and effect-curve tables from a fit directory.
    Report(evaluate::ReportArgs),
    /// Score a fit on held-out data.
    Evaluate(evaluate::EvaluateArgs),
}

/// Model settings shared by `fit` and `cv`. Flags override the config file,
/// which overrides the defaults.
#[derive(Args, Clone, Debug, Default)]
pub struct ModelArgs {
    /// JSON model configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of latent factors.
    #[arg(short = 'K', long = "factors")]
    k: Option<usize>,
    /// Number of basis functions.
    #[arg(short = 'H', long = "basis")]
    h: Option<usize>,
    /// Fix the GP length scale.
    #[arg(long)]
    kappa: Option<f64>,
    /// Total MCMC iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Iterations discarded before storing draws.
    #[arg(long)]
    burn_in: Option<usize>,
    /// Keep every this-many post-burn-in iterations.
    #[arg(long)]
    thin: Option<usize>,
}

impl ModelArgs {
    /// Resolve against the config file and defaults; `seed` is the chain seed.
    pub fn resolve(&self, seed: Option<u64>) -> Result<ModelConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ModelConfig::from_json(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ModelConfig::default(),
        };
        if let Some(k) = self.k {
            config.k = k;
        }
        if let Some(h) = self.h {
            config.h = h;
        }
        if let Some(kappa) = self.kappa {
            config.kappa_mode = KappaMode::Fixed(kappa);
        }
        if let Some(seed) = seed {
            config.chain.seed = seed;
        }
        if let Some(it) = self.iterations {
            config.chain.iterations = it;
            if self.burn_in.is_none() && config.chain.burn_in >= it {
                config.chain.burn_in = it / 2;
            }
        }
        if let Some(b) = self.burn_in {
            config.chain.burn_in = b;
        }
        if let Some(t) = self.thin {
            config.chain.thin = t;
        }
        config.validate()?;
        Ok(config)
    }
}

/// Preprocessing flags shared by the data-reading subcommands.
#[derive(Args, Clone, Debug, Default)]
pub struct PreprocessArgs {
    /// Exposures are already on the log scale.
    #[arg(long)]
    no_log_exposures: bool,
    /// Center outcomes separately at each grid time.
    #[arg(long)]
    center_per_grid_time: bool,
    /// Drop subjects without any follow-up.
    #[arg(long)]
    drop_exposure_only: bool,
    /// Round ages to a multiple of this before building the grid.
    #[arg(long)]
    age_rounding: Option<f64>,
    /// Covariate interacting with the latent factors (repeatable).
    #[arg(long = "interaction")]
    interactions: Vec<String>,
}

impl PreprocessArgs {
    pub fn options(&self) -> PreprocessOptions {
        PreprocessOptions {
            log_exposures: !self.no_log_exposures,
            exposure_only_subjects: !self.drop_exposure_only,
            center_per_grid_time: self.center_per_grid_time,
            age_rounding: self.age_rounding,
            interactions: self.interactions.clone(),
            ..Default::default()
        }
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global().context("configuring worker threads")?;
    }
    let args: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::Simulate(a) => simulate::run(&a, &args),
        Command::Fit(a) => fit::run(&a, &args),
        Command::Cv(a) => cv::run(&a, &args),
        Command::Benchmark(a) => benchmark::run(&a, &args),
        Command::Report(a) => evaluate::report(&a, &args),
        Command::Evaluate(a) => evaluate::run(&a, &args),
    }
}
