//! Replicate-level comparison of the model against the oracle and the two
//! baselines on simulated scenarios, and the summary tables built from it.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{validate_and_preprocess, ModelConfig, Panels, PreprocessOptions};
use crate::error::{Error, Result};
use crate::eval::{
    baseline_mean, importance_rank, importance_scores, mpse, posterior_mean_effects, predict, spearman_ranks, PcaLmm,
    TimeInteraction,
};
use crate::postprocess::{align, band_coverage, effect_curves};
use crate::sampler::run_mcmc;
use crate::simulate::{generate_scenario, oracle_predictions, Scenario, SyntheticDataset};

/// Components used by the PCA-LMM baseline (two more than the true number of factors).
pub const PCA_COMPONENTS: usize = 4;
pub const BAND_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    Oracle,
    Mean,
    PcaLmm,
    Ours,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::Oracle, ModelId::Mean, ModelId::PcaLmm, ModelId::Ours];

    pub fn key(self) -> &'static str {
        match self {
            ModelId::Oracle => "oracle",
            ModelId::Mean => "mean",
            ModelId::PcaLmm => "pca-lmm",
            ModelId::Ours => "ours",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelId::Oracle => "Oracle",
            ModelId::Mean => "Mean predictor",
            ModelId::PcaLmm => "PCA-LMM",
            ModelId::Ours => "Our model",
        }
    }
}

impl FromStr for ModelId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelId::ALL
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| Error::param(format!("unknown model '{s}'; valid models are oracle, mean, pca-lmm, ours")))
    }
}

/// Metrics of one model on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub scenario: u32,
    pub seed: u64,
    pub model: ModelId,
    pub mpse: f64,
    pub spearman: Option<f64>,
    /// Pointwise 95% band coverage of the induced exposure-effect curves.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkSettings {
    pub n_train: usize,
    pub n_test: usize,
    pub config: ModelConfig,
    pub options: PreprocessOptions,
    pub pca_interaction: TimeInteraction,
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_test: 200,
            config: ModelConfig::default(),
            options: PreprocessOptions::default(),
            pca_interaction: TimeInteraction::None,
        }
    }
}

/// Training panels and held-out panels on the training scaling.
pub fn prepare_panels(ds: &SyntheticDataset, options: &PreprocessOptions) -> Result<(Panels, Panels)> {
    let train = validate_and_preprocess(&ds.train.exposures, &ds.train.outcomes, ds.train.covariates.as_ref(), options)?;
    let test_options = PreprocessOptions { grid: Some(train.outcomes.grid.clone()), ..options.clone() };
    let mut test = validate_and_preprocess(&ds.test.exposures, &ds.test.outcomes, ds.test.covariates.as_ref(), &test_options)?;
    test.rescale_like(&train)?;
    Ok((train, test))
}

/// Truth effects `B*(t) A*` per standardized exposure unit of `train`.
pub fn standardized_true_effects(ds: &SyntheticDataset, train: &Panels) -> Option<Vec<nalgebra::DMatrix<f64>>> {
    ds.truth.induced_effects.as_ref().map(|effects| {
        effects
            .iter()
            .map(|e| {
                let mut e = e.clone();
                for j in 0..e.ncols() {
                    e.column_mut(j).scale_mut(train.exposures.scale[j]);
                }
                e
            })
            .collect()
    })
}

/// Fit and score every requested model on one replicate. The chain seed is
/// the replicate seed.
pub fn run_replicate(scenario: Scenario, seed: u64, models: &[ModelId], settings: &BenchmarkSettings) -> Result<Vec<MetricRow>> {
    let ds = generate_scenario(scenario, settings.n_train, settings.n_test, seed)?;
    let (train, test) = prepare_panels(&ds, &settings.options)?;
    let truth_rank = &ds.truth.rank;
    let mut rows = Vec::new();
    let row = |model, mpse, spearman, coverage| MetricRow { scenario: scenario.id(), seed, model, mpse, spearman, coverage };
    for &model in models {
        rows.push(match model {
            ModelId::Oracle => {
                let pred = oracle_predictions(&ds.test_truth, &test)?;
                row(model, mpse(&pred, &test.outcomes)?, Some(1.0), None)
            }
            ModelId::Mean => row(model, mpse(&baseline_mean(&train, &test.outcomes)?, &test.outcomes)?, None, None),
            ModelId::PcaLmm => {
                let fit = PcaLmm::fit(&train, PCA_COMPONENTS, settings.pca_interaction)?;
                let rank = importance_rank(&importance_scores(&fit.induced_effects()));
                row(model, mpse(&fit.predict(&test)?, &test.outcomes)?, Some(spearman_ranks(truth_rank, &rank)?), None)
            }
            ModelId::Ours => {
                let mut config = settings.config.clone();
                config.chain.seed = seed;
                let (draws, _) = run_mcmc(&config, &train)?;
                let rank = importance_rank(&importance_scores(&posterior_mean_effects(&draws)));
                let coverage = match standardized_true_effects(&ds, &train) {
                    Some(truth) if draws.len() >= 2 => {
                        Some(band_coverage(&effect_curves(&align(&draws)?, BAND_LEVEL)?.exposure, &truth))
                    }
                    _ => None,
                };
                row(model, mpse(&predict(&draws, &test)?, &test.outcomes)?, Some(spearman_ranks(truth_rank, &rank)?), coverage)
            }
        });
    }
    Ok(rows)
}

/// Mean and sample SD (`None` for fewer than two values).
pub fn mean_sd(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, None);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, Some(v.sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMetric {
    Mpse,
    Spearman,
}

/// Markdown table of `mean (sd)` per model (rows, fixed order) and scenario (columns).
pub fn summary_table(rows: &[MetricRow], metric: TableMetric) -> String {
    let mut scenarios: Vec<u32> = rows.iter().map(|r| r.scenario).collect();
    scenarios.sort_unstable();
    scenarios.dedup();
    let mut out = String::new();
    let _ = write!(out, "| |");
    for s in &scenarios {
        let _ = write!(out, " scenario {s} |");
    }
    let _ = writeln!(out);
    let _ = writeln!(out, "|---|{}", "---|".repeat(scenarios.len()));
    for model in ModelId::ALL {
        let present = rows.iter().any(|r| r.model == model);
        if !present || (metric == TableMetric::Spearman && model == ModelId::Mean) {
            continue;
        }
        let _ = write!(out, "| {} |", model.label());
        for &s in &scenarios {
            let vals: Vec<f64> = rows
                .iter()
                .filter(|r| r.model == model && r.scenario == s)
                .filter_map(|r| match metric {
                    TableMetric::Mpse => Some(r.mpse),
                    TableMetric::Spearman => r.spearman,
                })
                .collect();
            if vals.is_empty() {
                let _ = write!(out, " n/a |");
                continue;
            }
            let (m, sd) = mean_sd(&vals);
            match sd {
                Some(sd) => {
                    let _ = write!(out, " {m:.2} ({sd:.2}) |");
                }
                None => {
                    let _ = write!(out, " {m:.2} (n/a) |");
                }
            }
        }
        let _ = writeln!(out);
    }
    out
}
