use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{baseline_mean, mpse, predict};
use crate::data::{standardize, ModelConfig, Panels, PreprocessOptions};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::sampler::run_mcmc;

const FOLD_STREAM: u64 = 0xC0F0_1D00;

/// Fold label (0-based) per subject; a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n {
        return Err(Error::param(format!("cannot split {n} subjects into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut RngStream::new(seed, FOLD_STREAM).rng());
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    Ok(fold)
}

/// Training and held-out panels for one fold. The training part is
/// re-standardized on its own and the held-out part follows its scaling.
pub fn split_fold(panels: &Panels, fold: &[usize], which: usize, options: &PreprocessOptions) -> Result<(Panels, Panels)> {
    let train_idx: Vec<usize> = (0..fold.len()).filter(|&i| fold[i] != which).collect();
    let test_idx: Vec<usize> = (0..fold.len()).filter(|&i| fold[i] == which).collect();
    let mut train = panels.subset(&train_idx);
    standardize(&mut train, options);
    let mut test = panels.subset(&test_idx);
    test.rescale_like(&train)?;
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// `None` for folds without any held-out outcome.
    pub fold_mpse: Vec<Option<f64>>,
    pub baseline_mpse: Vec<Option<f64>>,
    pub mean_mpse: f64,
    pub mean_baseline_mpse: f64,
}

fn mean_of(xs: &[Option<f64>]) -> f64 {
    let v: Vec<f64> = xs.iter().flatten().copied().collect();
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// K-fold cross-validated MPSE, splitting by subject. Each fold's chain uses
/// the configured seed offset by the fold index; folds run in parallel.
pub fn kfold_cv(panels: &Panels, config: &ModelConfig, k: usize, seed: u64, options: &PreprocessOptions) -> Result<CvResult> {
    let fold = fold_assignment(panels.n(), k, seed)?;
    let results: Vec<Result<(Option<f64>, Option<f64>)>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let (train, test) = split_fold(panels, &fold, f, options)?;
            if test.outcomes.subjects.iter().all(|s| s.followups.is_empty()) {
                log::warn!("fold {f} has no held-out follow-ups; skipped");
                return Ok((None, None));
            }
            let mut cfg = config.clone();
            cfg.chain.seed = config.chain.seed.wrapping_add(f as u64);
            let (draws, _) = run_mcmc(&cfg, &train)?;
            let ours = mpse(&predict(&draws, &test)?, &test.outcomes)?;
            let base = mpse(&baseline_mean(&train, &test.outcomes)?, &test.outcomes)?;
            Ok((Some(ours), Some(base)))
        })
        .collect();
    let mut fold_mpse = Vec::with_capacity(k);
    let mut baseline_mpse = Vec::with_capacity(k);
    for r in results {
        let (a, b) = r?;
        fold_mpse.push(a);
        baseline_mpse.push(b);
    }
    Ok(CvResult {
        mean_mpse: mean_of(&fold_mpse),
        mean_baseline_mpse: mean_of(&baseline_mpse),
        fold_mpse,
        baseline_mpse,
    })
}
