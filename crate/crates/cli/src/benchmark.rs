use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use rayon::prelude::*;
use tvfactor::benchmark::{run_replicate, summary_table, BenchmarkSettings, MetricRow, ModelId, TableMetric};
use tvfactor::eval::TimeInteraction;
use tvfactor::simulate::Scenario;

use crate::manifest::Manifest;
use crate::ModelArgs;

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Comma-separated scenario ids.
    #[arg(long, default_value = "1,2,3")]
    scenarios: String,
    /// Replicates per scenario; replicate r uses seed + r.
    #[arg(long, default_value_t = 20)]
    reps: u64,
    /// Comma-separated subset of oracle, mean, pca-lmm, ours.
    #[arg(long, default_value = "oracle,mean,pca-lmm,ours")]
    models: String,
    /// Seed of the first replicate.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Training subjects per replicate.
    #[arg(long, default_value_t = 200)]
    n_train: usize,
    /// Test subjects per replicate.
    #[arg(long, default_value_t = 200)]
    n_test: usize,
    /// Add linear PC-by-time terms to the PCA-LMM baseline.
    #[arg(long)]
    pca_time_interaction: bool,
    /// Output directory for metrics.csv and the summary tables.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

fn parse_list<T>(spec: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    spec.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

pub fn run(a: &BenchmarkArgs, args: &[String]) -> Result<()> {
    if a.reps == 0 {
        bail!("--reps must be at least 1");
    }
    let scenarios = parse_list(&a.scenarios, |s| Ok(Scenario::from_id(s.parse()?)?))?;
    let mut models = parse_list(&a.models, |s| Ok(s.parse::<ModelId>()?))?;
    models.sort();
    models.dedup();
    if models.is_empty() || scenarios.is_empty() {
        bail!("need at least one scenario and one model");
    }
    let settings = BenchmarkSettings {
        n_train: a.n_train,
        n_test: a.n_test,
        config: a.model.resolve(None)?,
        pca_interaction: if a.pca_time_interaction { TimeInteraction::Linear } else { TimeInteraction::None },
        ..Default::default()
    };
    std::fs::create_dir_all(&a.out)?;
    let mut manifest = Manifest::new("benchmark", args);
    manifest.config(&settings.config)?;
    manifest.seeds((0..a.reps).map(|r| a.seed + r));
    manifest.phase("replicates");

    let tasks: Vec<(Scenario, u64)> =
        scenarios.iter().flat_map(|&s| (0..a.reps).map(move |r| (s, a.seed + r))).collect();
    let results: Vec<Result<Vec<MetricRow>>> = tasks
        .par_iter()
        .map(|&(s, seed)| {
            let r = run_replicate(s, seed, &models, &settings);
            log::info!("scenario {} seed {seed} done", s.id());
            r.map_err(Into::into)
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }

    manifest.phase("write");
    let mut csv = String::from("scenario,replicate,model,metric,value\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},mpse,{}", r.scenario, r.seed, r.model.key(), r.mpse);
        if let Some(v) = r.spearman {
            let _ = writeln!(csv, "{},{},{},spearman,{}", r.scenario, r.seed, r.model.key(), v);
        }
        if let Some(v) = r.coverage {
            let _ = writeln!(csv, "{},{},{},coverage95,{}", r.scenario, r.seed, r.model.key(), v);
        }
    }
    let files = [
        ("metrics.csv", csv),
        ("table1.md", format!("Average MPSE (SD) over {} replicates\n\n{}", a.reps, summary_table(&rows, TableMetric::Mpse))),
        (
            "table2.md",
            format!(
                "Average Spearman correlation of importance ranks (SD) over {} replicates\n\n{}",
                a.reps,
                summary_table(&rows, TableMetric::Spearman)
            ),
        ),
    ];
    for (name, text) in files {
        let path = a.out.join(name);
        std::fs::write(&path, text)?;
        manifest.output(&path)?;
    }
    manifest.write(&a.out)
}
