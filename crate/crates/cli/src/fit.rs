use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::Args;
use tvfactor::data::io::{read_dir, RawDataset};
use tvfactor::data::{validate_and_preprocess, Panels, PreprocessOptions};
use tvfactor::draws::PosteriorDraws;
use tvfactor::postprocess::{align, effect_curves};
use tvfactor::sampler::{ChainDiagnostics, Sampler};

use crate::manifest::Manifest;
use crate::{ModelArgs, PreprocessArgs};

pub const DRAWS_FILE: &str = "draws.bin";
pub const PANELS_FILE: &str = "panels.json";
pub const OPTIONS_FILE: &str = "preprocess.json";
pub const CONFIG_FILE: &str = "config.json";

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Directory with exposures.csv, outcomes.csv and optional lods.csv / covariates.csv.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for draws, diagnostics and summaries.
    #[arg(long)]
    out: PathBuf,
    /// Keep only subjects whose covariate equals a value, e.g. `sex=1`.
    #[arg(long)]
    filter: Option<String>,
    /// Chain seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    preprocess: PreprocessArgs,
}

/// Restrict a data set to subjects whose covariate `name` equals `value`.
pub fn apply_filter(data: &mut RawDataset, spec: &str) -> Result<()> {
    let (name, value) = spec.split_once('=').context("--filter expects covariate=value")?;
    let value: f64 = value.trim().parse().with_context(|| format!("filter value '{value}' is not a number"))?;
    let cov = data.covariates.as_ref().context("--filter needs covariates.csv")?;
    let col = cov
        .names
        .iter()
        .position(|n| n == name.trim())
        .with_context(|| format!("unknown covariate '{name}' in --filter"))?;
    let keep: std::collections::HashSet<String> =
        cov.rows.iter().filter(|r| r.values[col] == Some(value)).map(|r| r.subject_id.clone()).collect();
    if keep.is_empty() {
        bail!("no subject has {name} = {value}");
    }
    let e = &mut data.exposures;
    let rows: Vec<usize> = (0..e.subject_ids.len()).filter(|&i| keep.contains(&e.subject_ids[i])).collect();
    e.values = rows.iter().map(|&i| e.values[i].clone()).collect();
    e.subject_ids = rows.iter().map(|&i| e.subject_ids[i].clone()).collect();
    data.outcomes.records.retain(|r| keep.contains(&r.subject_id));
    if let Some(c) = data.covariates.as_mut() {
        c.rows.retain(|r| keep.contains(&r.subject_id));
    }
    Ok(())
}

fn write_diagnostics(path: &Path, diag: &ChainDiagnostics) -> Result<()> {
    let mut s = String::from("iteration,log_posterior,kappa,nu2,eta_acceptance\n");
    for i in 0..diag.log_posterior.len() {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            i,
            diag.log_posterior[i],
            diag.kappa_trace[i],
            diag.nu2_trace[i],
            diag.eta_acceptance_trace[i]
        );
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Write `loadings.csv` and `effects.csv` for a set of draws.
pub fn write_summaries(dir: &Path, draws: &PosteriorDraws, panels: &Panels, manifest: &mut Manifest) -> Result<()> {
    if draws.len() < 2 {
        log::warn!("fewer than two stored draws; skipping loadings and effect curves");
        return Ok(());
    }
    let aligned = align(draws)?;
    let theta = aligned.mean_loadings();
    let mut s = String::from("exposure");
    for c in 0..theta.ncols() {
        let _ = write!(s, ",factor{}", c + 1);
    }
    s.push('\n');
    for (j, name) in panels.exposures.column_names.iter().enumerate() {
        s.push_str(name);
        for c in 0..theta.ncols() {
            let _ = write!(s, ",{}", theta[(j, c)]);
        }
        s.push('\n');
    }
    let loadings = dir.join("loadings.csv");
    std::fs::write(&loadings, s)?;

    let curves = effect_curves(&aligned, 0.95)?;
    let mut s = String::from("kind,outcome,term,time,mean,lo95,hi95\n");
    let outcomes = &panels.outcomes.outcome_names;
    for p in &curves.factor {
        let _ = writeln!(s, "factor,{},factor{},{},{},{},{}", outcomes[p.outcome], p.index + 1, p.time, p.mean, p.lo, p.hi);
    }
    for p in &curves.exposure {
        let exposure = &panels.exposures.column_names[p.index];
        let _ = writeln!(s, "exposure,{},{},{},{},{},{}", outcomes[p.outcome], exposure, p.time, p.mean, p.lo, p.hi);
    }
    let effects = dir.join("effects.csv");
    std::fs::write(&effects, s)?;
    manifest.output(&loadings)?;
    manifest.output(&effects)
}

pub fn load_panels(data_dir: &Path, filter: Option<&str>, options: &PreprocessOptions) -> Result<Panels> {
    let mut raw = read_dir(data_dir)?;
    if let Some(f) = filter {
        apply_filter(&mut raw, f)?;
    }
    Ok(validate_and_preprocess(&raw.exposures, &raw.outcomes, raw.covariates.as_ref(), options)?)
}

pub fn run(a: &FitArgs, args: &[String]) -> Result<()> {
    let config = a.model.resolve(a.seed)?;
    let options = a.preprocess.options();
    let mut manifest = Manifest::new("fit", args);
    manifest.config(&config)?;
    manifest.seeds([config.chain.seed]);
    manifest.input(&a.data)?;
    if let Some(c) = &a.model.config {
        manifest.input(c)?;
    }
    manifest.phase("preprocess");
    let panels = load_panels(&a.data, a.filter.as_deref(), &options)?;
    // validates the configuration against the data before sampling
    let sampler = Sampler::new(&config, &panels)?;
    std::fs::create_dir_all(&a.out)?;

    manifest.phase("sample");
    log::info!(
        "fitting n={} p={} q={} T={} with K={} H={}, {} iterations",
        panels.n(),
        panels.p(),
        panels.q(),
        panels.grid_len(),
        config.k,
        config.h,
        config.chain.iterations
    );
    let (draws, diag) = sampler.run()?;

    manifest.phase("write");
    let draws_path = a.out.join(DRAWS_FILE);
    draws.save(&draws_path)?;
    manifest.output(&draws_path)?;
    let diag_path = a.out.join("diagnostics.csv");
    write_diagnostics(&diag_path, &diag)?;
    manifest.output(&diag_path)?;
    for (name, text) in [
        (PANELS_FILE, panels.to_json()?),
        (OPTIONS_FILE, serde_json::to_string_pretty(&options)?),
        (CONFIG_FILE, config.to_json()?),
    ] {
        std::fs::write(a.out.join(name), text)?;
    }
    for (block, secs) in &diag.block_seconds {
        log::info!("{block}: {secs:.2} s");
    }

    manifest.phase("report");
    write_summaries(&a.out, &draws, &panels, &mut manifest)?;
    manifest.write(&a.out)
}
