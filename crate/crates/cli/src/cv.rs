use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::Args;
use tvfactor::eval::kfold_cv;

use crate::fit::load_panels;
use crate::manifest::Manifest;
use crate::{ModelArgs, PreprocessArgs};

#[derive(Args, Debug)]
pub struct CvArgs {
    /// Data directory, laid out as for `fit`.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for cv.csv and metrics.csv.
    #[arg(long)]
    out: PathBuf,
    /// Number of folds.
    #[arg(long, default_value_t = 6)]
    folds: usize,
    /// Candidate (K, H) pairs, e.g. `2:1,3:1,3:2`.
    #[arg(long, default_value = "2:1,2:2,3:1,3:2,4:1,4:2")]
    grid: String,
    /// Seed of the fold assignment.
    #[arg(long, default_value_t = 1)]
    fold_seed: u64,
    #[arg(long)]
    filter: Option<String>,
    /// Chain seed (fold f uses seed + f).
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    preprocess: PreprocessArgs,
}

/// Parse `K:H` pairs, rejecting any with H > K.
pub fn parse_grid(spec: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, h) = item.split_once(':').with_context(|| format!("grid entry '{item}' is not K:H"))?;
        let k: usize = k.trim().parse().with_context(|| format!("bad K in '{item}'"))?;
        let h: usize = h.trim().parse().with_context(|| format!("bad H in '{item}'"))?;
        if h > k {
            bail!("grid entry ({k},{h}) violates H <= K");
        }
        if h == 0 {
            bail!("grid entry ({k},{h}) needs K, H >= 1");
        }
        out.push((k, h));
    }
    if out.is_empty() {
        bail!("empty (K, H) grid");
    }
    Ok(out)
}

pub fn run(a: &CvArgs, args: &[String]) -> Result<()> {
    let grid = parse_grid(&a.grid)?;
    let base = a.model.resolve(a.seed)?;
    let options = a.preprocess.options();
    for &(k, _) in &grid {
        let mut c = base.clone();
        c.k = k;
        c.validate()?;
    }
    let panels = load_panels(&a.data, a.filter.as_deref(), &options)?;
    if let Some(&(k, _)) = grid.iter().find(|(k, _)| *k > panels.p()) {
        bail!("K = {k} exceeds the {} exposures", panels.p());
    }
    std::fs::create_dir_all(&a.out)?;
    let mut manifest = Manifest::new("cv", args);
    manifest.config(&base)?;
    manifest.seeds([a.fold_seed, base.chain.seed]);
    manifest.input(&a.data)?;

    let mut results = Vec::new();
    for &(k, h) in &grid {
        manifest.phase(&format!("K{k}H{h}"));
        let mut config = base.clone();
        config.k = k;
        config.h = h;
        let r = kfold_cv(&panels, &config, a.folds, a.fold_seed, &options)?;
        log::info!("K={k} H={h}: CV MPSE {:.4} (mean model {:.4})", r.mean_mpse, r.mean_baseline_mpse);
        results.push(((k, h), r));
    }
    let best = results
        .iter()
        .enumerate()
        .filter(|(_, (_, r))| r.mean_mpse.is_finite())
        .min_by(|a, b| a.1 .1.mean_mpse.total_cmp(&b.1 .1.mean_mpse))
        .map(|(i, _)| i);

    let mut table = String::from("K,H,mean_mpse,mean_baseline_mpse,best\n");
    let mut metrics = String::from("replicate,model,metric,value\n");
    for (i, ((k, h), r)) in results.iter().enumerate() {
        let _ = writeln!(table, "{k},{h},{},{},{}", r.mean_mpse, r.mean_baseline_mpse, best == Some(i));
        for (fold, (ours, base)) in r.fold_mpse.iter().zip(&r.baseline_mpse).enumerate() {
            if let (Some(o), Some(b)) = (ours, base) {
                let _ = writeln!(metrics, "{},ours-K{k}H{h},mpse,{o}", fold + 1);
                let _ = writeln!(metrics, "{},mean,mpse,{b}", fold + 1);
            }
        }
    }
    let table_path = a.out.join("cv.csv");
    std::fs::write(&table_path, table)?;
    let metrics_path = a.out.join("metrics.csv");
    std::fs::write(&metrics_path, metrics)?;
    manifest.output(&table_path)?;
    manifest.output(&metrics_path)?;
    manifest.write(&a.out)
}
