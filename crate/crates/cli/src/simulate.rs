use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use serde::{Deserialize, Serialize};
use tvfactor::data::io::write_dir;
use tvfactor::simulate::{generate_scenario, Scenario, ScenarioTruth, SyntheticDataset, TruthTable};

use crate::manifest::Manifest;

pub const TRUTH_FILE: &str = "truth.json";

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario id (1, 2 or 3).
    #[arg(long)]
    scenario: u32,
    /// Training subjects per replicate.
    #[arg(long, default_value_t = 200)]
    n_train: usize,
    /// Test subjects per replicate.
    #[arg(long, default_value_t = 200)]
    n_test: usize,
    /// Number of replicates; replicate r uses seed + r.
    #[arg(long, default_value_t = 1)]
    reps: u64,
    /// Seed of the first replicate.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory; one rep-NNN folder per replicate.
    #[arg(long)]
    out: PathBuf,
}

/// Contents of `truth.json`.
#[derive(Serialize, Deserialize)]
pub struct TruthFile {
    pub truth: ScenarioTruth,
    pub train: TruthTable,
    pub test: TruthTable,
}

pub fn replicate_dir(out: &Path, rep: u64) -> PathBuf {
    out.join(format!("rep-{:03}", rep + 1))
}

pub fn write_replicate(dir: &Path, ds: &SyntheticDataset, manifest: &mut Manifest) -> Result<()> {
    let (train_dir, test_dir) = (dir.join("train"), dir.join("test"));
    write_dir(&train_dir, &ds.train)?;
    write_dir(&test_dir, &ds.test)?;
    let truth = TruthFile { truth: ds.truth.clone(), train: ds.train_truth.clone(), test: ds.test_truth.clone() };
    let truth_path = dir.join(TRUTH_FILE);
    std::fs::write(&truth_path, serde_json::to_string(&truth)?)?;
    for sub in [&train_dir, &test_dir] {
        for name in ["exposures.csv", "outcomes.csv"] {
            manifest.output(&sub.join(name))?;
        }
    }
    manifest.output(&truth_path)
}

pub fn run(a: &SimulateArgs, args: &[String]) -> Result<()> {
    let scenario = Scenario::from_id(a.scenario)?;
    if a.reps == 0 {
        anyhow::bail!("--reps must be at least 1");
    }
    std::fs::create_dir_all(&a.out)?;
    let mut manifest = Manifest::new("simulate", args);
    manifest.config(&serde_json::json!({"scenario": a.scenario, "n_train": a.n_train, "n_test": a.n_test, "reps": a.reps}))?;
    manifest.seeds((0..a.reps).map(|r| a.seed + r));
    manifest.phase("simulate");
    for r in 0..a.reps {
        let ds = generate_scenario(scenario, a.n_train, a.n_test, a.seed + r)?;
        let dir = replicate_dir(&a.out, r);
        write_replicate(&dir, &ds, &mut manifest)?;
        log::info!("wrote {}", dir.display());
    }
    manifest.write(&a.out)
}
