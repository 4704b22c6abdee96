use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::data::{OutcomePanel, Panels};
use crate::error::{Error, Result};

/// Predicted outcomes on the original outcome scale, one vector per
/// follow-up of the panel they were made for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model: String,
    /// `true` when the values average over posterior draws.
    pub draw_averaged: bool,
    pub values: Vec<Vec<DVector<f64>>>,
}

impl PredictionSet {
    /// The same value vector at every follow-up of `panel`.
    pub fn constant(model: &str, panel: &OutcomePanel, value: &DVector<f64>) -> Self {
        let values = panel.subjects.iter().map(|s| vec![value.clone(); s.followups.len()]).collect();
        Self { model: model.to_string(), draw_averaged: false, values }
    }
}

/// Mean squared error over every observed cell of `truth`, on the original scale.
pub fn mpse(pred: &PredictionSet, truth: &OutcomePanel) -> Result<f64> {
    if pred.values.len() != truth.subjects.len() {
        return Err(Error::dims(format!(
            "{} predicted subjects for {} panel subjects",
            pred.values.len(),
            truth.subjects.len()
        )));
    }
    let mut sse = 0.0;
    let mut cells = 0usize;
    for (p_s, s) in pred.values.iter().zip(&truth.subjects) {
        if p_s.len() != s.followups.len() {
            return Err(Error::dims("prediction follow-ups do not match the panel"));
        }
        for (p, f) in p_s.iter().zip(&s.followups) {
            for j in 0..f.y.len() {
                if f.missing[j] {
                    continue;
                }
                let r = p[j] - truth.uncenter(j, f.grid_index, f.y[j]);
                sse += r * r;
                cells += 1;
            }
        }
    }
    if cells == 0 {
        return Err(Error::data("no observed outcome cells to score"));
    }
    Ok(sse / cells as f64)
}

/// Importance scores from per-time effect matrices (q x p each):
/// `Σ_t Σ_outcomes |effect|` per exposure.
pub fn importance_scores(effects: &[nalgebra::DMatrix<f64>]) -> Vec<f64> {
    let p = effects.first().map_or(0, |e| e.ncols());
    (0..p).map(|j| effects.iter().map(|e| e.column(j).abs().sum()).sum()).collect()
}

/// Rank by descending score (1 = largest), ties broken by index.
pub fn importance_rank(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut rank = vec![0; scores.len()];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r + 1;
    }
    rank
}

/// Midranks of a sample (ties share the average rank).
pub fn midranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman correlation with midranks. A constant input has no defined
/// correlation; 0 is returned in that case.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims(format!("rank vectors of length {} and {}", a.len(), b.len())));
    }
    if a.len() < 2 {
        return Err(Error::data("need at least two items to correlate"));
    }
    let (ra, rb) = (midranks(a), midranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(0.0);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation between two integer rank vectors.
pub fn spearman_ranks(a: &[usize], b: &[usize]) -> Result<f64> {
    let fa: Vec<f64> = a.iter().map(|&r| r as f64).collect();
    let fb: Vec<f64> = b.iter().map(|&r| r as f64).collect();
    spearman(&fa, &fb)
}

/// Predicts the per-outcome mean of the observed training values.
pub fn baseline_mean(train: &Panels, target: &OutcomePanel) -> Result<PredictionSet> {
    let q = train.q();
    let mut sum = DVector::zeros(q);
    let mut count = vec![0usize; q];
    for f in train.outcomes.subjects.iter().flat_map(|s| &s.followups) {
        for j in 0..q {
            if !f.missing[j] {
                sum[j] += train.outcomes.uncenter(j, f.grid_index, f.y[j]);
                count[j] += 1;
            }
        }
    }
    for j in 0..q {
        if count[j] == 0 {
            return Err(Error::data(format!("outcome {} has no observed training values", train.outcomes.outcome_names[j])));
        }
        sum[j] /= count[j] as f64;
    }
    Ok(PredictionSet::constant("mean", target, &sum))
}
