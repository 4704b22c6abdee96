use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::Args;
use tvfactor::data::{Panels, PreprocessOptions};
use tvfactor::draws::PosteriorDraws;
use tvfactor::eval::{
    baseline_mean, importance_rank, importance_scores, mpse, posterior_mean_effects, predict, spearman_ranks,
};
use tvfactor::simulate::oracle_predictions;

use crate::fit::{load_panels, write_summaries, DRAWS_FILE, OPTIONS_FILE, PANELS_FILE};
use crate::manifest::Manifest;
use crate::simulate::TruthFile;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Output directory of a previous `fit`.
    #[arg(long)]
    fit: PathBuf,
    /// Where to write the tables (defaults to the fit directory).
    /// Output directory for metrics.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    /// Output directory of a previous `fit`.
    #[arg(long)]
    fit: PathBuf,
    /// Held-out data directory.
    #[arg(long)]
    data: PathBuf,
    /// `truth.json` of a simulated replicate, for oracle and rank metrics.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn load_fit(dir: &Path) -> Result<(PosteriorDraws, Panels)> {
    let draws = PosteriorDraws::load(&dir.join(DRAWS_FILE)).with_context(|| format!("loading draws from {}", dir.display()))?;
    let text = std::fs::read_to_string(dir.join(PANELS_FILE)).with_context(|| format!("reading {PANELS_FILE}"))?;
    Ok((draws, Panels::from_json(&text)?))
}

pub fn report(a: &ReportArgs, args: &[String]) -> Result<()> {
    let out = a.out.clone().unwrap_or_else(|| a.fit.clone());
    std::fs::create_dir_all(&out)?;
    let mut manifest = Manifest::new("report", args);
    manifest.input(&a.fit.join(DRAWS_FILE))?;
    manifest.phase("report");
    let (draws, panels) = load_fit(&a.fit)?;
    write_summaries(&out, &draws, &panels, &mut manifest)?;
    manifest.write(&out)
}

pub fn run(a: &EvaluateArgs, args: &[String]) -> Result<()> {
    std::fs::create_dir_all(&a.out)?;
    let mut manifest = Manifest::new("evaluate", args);
    manifest.input(&a.fit.join(DRAWS_FILE))?;
    manifest.input(&a.data)?;
    manifest.phase("evaluate");
    let (draws, train) = load_fit(&a.fit)?;
    let options: PreprocessOptions = serde_json::from_str(&std::fs::read_to_string(a.fit.join(OPTIONS_FILE))?)?;
    let options = PreprocessOptions { grid: Some(train.outcomes.grid.clone()), ..options };
    let mut test = load_panels(&a.data, None, &options)?;
    test.rescale_like(&train)?;

    let mut rows: Vec<(&str, &str, f64)> = vec![
        ("ours", "mpse", mpse(&predict(&draws, &test)?, &test.outcomes)?),
        ("mean", "mpse", mpse(&baseline_mean(&train, &test.outcomes)?, &test.outcomes)?),
    ];
    if let Some(path) = &a.truth {
        manifest.input(path)?;
        let truth: TruthFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let table = if test.exposures.subject_ids.first().is_some_and(|id| truth.train.subject_ids.contains(id)) {
            &truth.train
        } else {
            &truth.test
        };
        rows.push(("oracle", "mpse", mpse(&oracle_predictions(table, &test)?, &test.outcomes)?));
        let rank = importance_rank(&importance_scores(&posterior_mean_effects(&draws)));
        rows.push(("ours", "spearman", spearman_ranks(&truth.truth.rank, &rank)?));
    }
    let mut s = String::from("replicate,model,metric,value\n");
    for (model, metric, value) in rows {
        log::info!("{model} {metric}: {value:.4}");
        let _ = writeln!(s, "1,{model},{metric},{value}");
    }
    let path = a.out.join("metrics.csv");
    std::fs::write(&path, s)?;
    manifest.output(&path)?;
    manifest.write(&a.out)
}
