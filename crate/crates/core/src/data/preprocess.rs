use std::collections::{BTreeMap, HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{CovariatePanel, ExposurePanel, FollowUp, OutcomePanel, Panels, SubjectOutcomes};
use crate::error::{Error, Result};

/// Columns whose detected-cell mean and SD are already within this distance
/// of 0 and 1 are left untouched, which makes standardization idempotent.
const STANDARDIZED_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RawExposures {
    pub subject_ids: Vec<String>,
    pub column_names: Vec<String>,
    /// `None` marks a below-LOD cell.
    pub values: Vec<Vec<Option<f64>>>,
    /// Per-column limits of detection on the raw scale.
    pub lods: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeRecord {
    pub subject_id: String,
    pub age: f64,
    pub outcome: String,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawOutcomes {
    pub records: Vec<OutcomeRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateRow {
    pub subject_id: String,
    /// `None` for baseline rows that apply to every follow-up.
    pub age: Option<f64>,
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawCovariates {
    pub names: Vec<String>,
    pub rows: Vec<CovariateRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessOptions {
    /// Take logs of exposures and LODs (raw concentrations on input).
    pub log_exposures: bool,
    /// Keep subjects that have exposures but no follow-up.
    pub exposure_only_subjects: bool,
    /// Center each outcome separately at every grid time instead of once.
    pub center_per_grid_time: bool,
    /// Explicit time grid; otherwise the unique (rounded) follow-up ages.
    pub grid: Option<Vec<f64>>,
    /// Round ages to a multiple of this before building the grid.
    pub age_rounding: Option<f64>,
    /// Covariates that interact with the latent factors.
    pub interactions: Vec<String>,
    pub standardize_covariates: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            log_exposures: true,
            exposure_only_subjects: true,
            center_per_grid_time: false,
            grid: None,
            age_rounding: None,
            interactions: Vec::new(),
            standardize_covariates: true,
        }
    }
}

/// Index of the grid point nearest to `age` (0-based); ties go to the lower
/// index.
pub fn grid_index_of(age: f64, grid: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, g) in grid.iter().enumerate() {
        let d = (age - g).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

fn round_age(age: f64, step: Option<f64>) -> f64 {
    match step {
        Some(s) if s > 0.0 => (age / s).round() * s,
        _ => age,
    }
}

pub fn validate_and_preprocess(
    exposures: &RawExposures,
    outcomes: &RawOutcomes,
    covariates: Option<&RawCovariates>,
    options: &PreprocessOptions,
) -> Result<Panels> {
    let p = exposures.column_names.len();
    let mut id_index: HashMap<&str, usize> = HashMap::new();
    for (i, id) in exposures.subject_ids.iter().enumerate() {
        if id_index.insert(id.as_str(), i).is_some() {
            return Err(Error::data(format!("duplicate exposure row for subject {id}")));
        }
    }
    if exposures.values.len() != exposures.subject_ids.len() {
        return Err(Error::dims("exposure rows do not match subject ids"));
    }

    // exposures on the log scale, censored cells at log(LOD / sqrt 2)
    let any_censored = exposures.values.iter().flatten().any(Option::is_none);
    let lods = match (&exposures.lods, any_censored) {
        (Some(l), _) if l.len() != p => {
            return Err(Error::dims(format!("{} LOD values for {p} exposure columns", l.len())))
        }
        (Some(l), _) => Some(l.clone()),
        (None, true) => {
            return Err(Error::data(
                "exposures contain below-LOD cells but no limits of detection were supplied",
            ))
        }
        (None, false) => None,
    };
    let to_log = |v: f64, what: &str| -> Result<f64> {
        if !options.log_exposures {
            return Ok(v);
        }
        if !(v > 0.0) {
            return Err(Error::data(format!("{what} {v} must be positive to take logs")));
        }
        Ok(v.ln())
    };
    let log_lod: Vec<Option<f64>> = match &lods {
        Some(l) => l.iter().map(|&v| to_log(v, "limit of detection").map(Some)).collect::<Result<_>>()?,
        None => vec![None; p],
    };

    let keep_subject = |i: usize, has_followups: &[bool]| options.exposure_only_subjects || has_followups[i];

    // outcomes
    let mut outcome_names: Vec<String> = Vec::new();
    for r in &outcomes.records {
        if !outcome_names.contains(&r.outcome) {
            outcome_names.push(r.outcome.clone());
        }
    }
    let q = outcome_names.len();
    for r in &outcomes.records {
        if !id_index.contains_key(r.subject_id.as_str()) {
            return Err(Error::data(format!("outcome record for subject {} without exposures", r.subject_id)));
        }
        if !r.age.is_finite() {
            return Err(Error::data(format!("subject {}: non-finite age", r.subject_id)));
        }
    }
    let grid: Vec<f64> = match &options.grid {
        Some(g) => {
            if g.is_empty() || g.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::data("explicit grid must be non-empty and strictly increasing"));
            }
            g.clone()
        }
        None => {
            let mut g: Vec<f64> = outcomes.records.iter().map(|r| round_age(r.age, options.age_rounding)).collect();
            g.sort_by(f64::total_cmp);
            g.dedup();
            if g.is_empty() {
                g.push(0.0);
            }
            g
        }
    };
    let t_len = grid.len();

    // (subject, grid index) -> per-outcome value
    let mut visits: BTreeMap<(usize, usize), Vec<Option<Option<f64>>>> = BTreeMap::new();
    for r in &outcomes.records {
        let i = id_index[r.subject_id.as_str()];
        let t = grid_index_of(round_age(r.age, options.age_rounding), &grid);
        let j = outcome_names.iter().position(|o| *o == r.outcome).expect("collected above");
        let cell = visits.entry((i, t)).or_insert_with(|| vec![None; q]);
        if cell[j].is_some() {
            return Err(Error::data(format!(
                "duplicate record for subject {} at time {} (outcome {})",
                r.subject_id, grid[t], r.outcome
            )));
        }
        if let Some(v) = r.value {
            if !v.is_finite() {
                return Err(Error::data(format!("subject {}: non-finite outcome value", r.subject_id)));
            }
        }
        cell[j] = Some(r.value);
    }

    let n_all = exposures.subject_ids.len();
    let mut followups: Vec<Vec<FollowUp>> = vec![Vec::new(); n_all];
    for ((i, t), cells) in visits {
        let observed = cells.iter().any(|c| matches!(c, Some(Some(_))));
        if !observed {
            continue;
        }
        let y = DVector::from_iterator(q, cells.iter().map(|c| c.flatten().unwrap_or(0.0)));
        let missing = cells.iter().map(|c| c.flatten().is_none()).collect();
        followups[i].push(FollowUp { grid_index: t, y, missing });
    }
    let has_followups: Vec<bool> = followups.iter().map(|f| !f.is_empty()).collect();
    let retained: Vec<usize> = (0..n_all).filter(|&i| keep_subject(i, &has_followups)).collect();

    // covariates
    let raw_cov = covariates.cloned().unwrap_or_default();
    let l = raw_cov.names.len();
    let mut baseline: HashMap<&str, &Vec<Option<f64>>> = HashMap::new();
    let mut timed: HashMap<(&str, usize), &Vec<Option<f64>>> = HashMap::new();
    for row in &raw_cov.rows {
        if row.values.len() != l {
            return Err(Error::dims(format!("covariate row for {} has {} of {l} values", row.subject_id, row.values.len())));
        }
        if !id_index.contains_key(row.subject_id.as_str()) {
            return Err(Error::data(format!("covariate row for subject {} without exposures", row.subject_id)));
        }
        match row.age {
            None => {
                if baseline.insert(row.subject_id.as_str(), &row.values).is_some() {
                    return Err(Error::data(format!("duplicate baseline covariates for subject {}", row.subject_id)));
                }
            }
            Some(a) => {
                let t = grid_index_of(round_age(a, options.age_rounding), &grid);
                if timed.insert((row.subject_id.as_str(), t), &row.values).is_some() {
                    return Err(Error::data(format!("duplicate covariates for subject {} at time {}", row.subject_id, grid[t])));
                }
            }
        }
    }
    let mut z_values: Vec<Vec<DVector<f64>>> = Vec::with_capacity(retained.len());
    for &i in &retained {
        let id = exposures.subject_ids[i].as_str();
        let mut per = Vec::with_capacity(followups[i].len());
        for f in &followups[i] {
            let z = (0..l)
                .map(|c| {
                    timed
                        .get(&(id, f.grid_index))
                        .and_then(|v| v[c])
                        .or_else(|| baseline.get(id).and_then(|v| v[c]))
                        .ok_or_else(|| {
                            Error::data(format!(
                                "subject {id}: covariate {} missing at time {}",
                                raw_cov.names[c], grid[f.grid_index]
                            ))
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            per.push(DVector::from_vec(z));
        }
        z_values.push(per);
    }
    let interaction_set = options
        .interactions
        .iter()
        .map(|name| {
            raw_cov
                .names
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::data(format!("interaction covariate {name} not found")))
        })
        .collect::<Result<Vec<usize>>>()?;

    let n = retained.len();
    let mut values = DMatrix::zeros(n, p);
    let mut mask = DMatrix::from_element(n, p, false);
    for (r, &i) in retained.iter().enumerate() {
        if exposures.values[i].len() != p {
            return Err(Error::dims(format!("subject {}: {} of {p} exposure values", exposures.subject_ids[i], exposures.values[i].len())));
        }
        for j in 0..p {
            match exposures.values[i][j] {
                Some(v) => {
                    if !v.is_finite() {
                        return Err(Error::data(format!("subject {}: non-finite exposure", exposures.subject_ids[i])));
                    }
                    values[(r, j)] = to_log(v, "exposure")?;
                }
                None => {
                    let lod = log_lod[j].expect("checked above");
                    values[(r, j)] = lod - 0.5 * std::f64::consts::LN_2;
                    mask[(r, j)] = true;
                }
            }
        }
    }

    let mut panels = Panels {
        exposures: ExposurePanel {
            subject_ids: retained.iter().map(|&i| exposures.subject_ids[i].clone()).collect(),
            column_names: exposures.column_names.clone(),
            values,
            lod_mask: mask,
            lod: log_lod,
            center: vec![0.0; p],
            scale: vec![1.0; p],
        },
        outcomes: OutcomePanel {
            subjects: retained
                .iter()
                .map(|&i| SubjectOutcomes { followups: std::mem::take(&mut followups[i]) })
                .collect(),
            grid,
            outcome_names,
            center: DMatrix::zeros(q, t_len),
        },
        covariates: CovariatePanel {
            names: raw_cov.names.clone(),
            values: z_values,
            interaction_set,
            center: vec![0.0; l],
            scale: vec![1.0; l],
        },
    };
    standardize(&mut panels, options);
    panels.validate()?;
    Ok(panels)
}

/// Center and scale exposures (on detected cells), center outcomes and
/// standardize continuous covariates, composing the stored statistics.
/// Applying it to already-standardized panels changes nothing.
pub fn standardize(panels: &mut Panels, options: &PreprocessOptions) {
    standardize_exposures(&mut panels.exposures);
    center_outcomes(&mut panels.outcomes, options.center_per_grid_time);
    if options.standardize_covariates {
        standardize_covariates(&mut panels.covariates);
    }
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = if xs.len() > 1 {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, v.sqrt())
}

fn standardize_exposures(e: &mut ExposurePanel) {
    let (n, p) = e.values.shape();
    for j in 0..p {
        let detected: Vec<f64> = (0..n).filter(|&i| !e.lod_mask[(i, j)]).map(|i| e.values[(i, j)]).collect();
        if detected.is_empty() {
            continue;
        }
        let (m, sd) = mean_sd(&detected);
        let s = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
        let m = if m.abs() <= STANDARDIZED_TOL { 0.0 } else { m };
        let s = if (s - 1.0).abs() <= STANDARDIZED_TOL { 1.0 } else { s };
        if m == 0.0 && s == 1.0 {
            continue;
        }
        for i in 0..n {
            e.values[(i, j)] = (e.values[(i, j)] - m) / s;
        }
        if let Some(l) = e.lod[j].as_mut() {
            *l = (*l - m) / s;
        }
        e.center[j] += e.scale[j] * m;
        e.scale[j] *= s;
    }
}

fn center_outcomes(o: &mut OutcomePanel, per_grid_time: bool) {
    let q = o.n_outcomes();
    let t_len = o.grid.len();
    for j in 0..q {
        let groups: Vec<Option<usize>> = if per_grid_time { (0..t_len).map(Some).collect() } else { vec![None] };
        for g in groups {
            let obs: Vec<f64> = o
                .subjects
                .iter()
                .flat_map(|s| &s.followups)
                .filter(|f| !f.missing[j] && g.is_none_or(|t| f.grid_index == t))
                .map(|f| f.y[j])
                .collect();
            if obs.is_empty() {
                continue;
            }
            let m = obs.iter().sum::<f64>() / obs.len() as f64;
            if m.abs() <= STANDARDIZED_TOL {
                continue;
            }
            for f in o.subjects.iter_mut().flat_map(|s| s.followups.iter_mut()) {
                if g.is_none_or(|t| f.grid_index == t) {
                    f.y[j] = if f.missing[j] { 0.0 } else { f.y[j] - m };
                }
            }
            match g {
                Some(t) => o.center[(j, t)] += m,
                None => o.center.row_mut(j).add_scalar_mut(m),
            }
        }
    }
}

fn standardize_covariates(c: &mut CovariatePanel) {
    let l = c.names.len();
    for k in 0..l {
        let col: Vec<f64> = c.values.iter().flatten().map(|z| z[k]).collect();
        if col.is_empty() {
            continue;
        }
        let binary: HashSet<u64> = col.iter().map(|v| v.to_bits()).collect();
        if col.iter().all(|v| *v == 0.0 || *v == 1.0) && binary.len() <= 2 {
            continue;
        }
        let (m, sd) = mean_sd(&col);
        let s = if sd > 0.0 { sd } else { 1.0 };
        let m = if m.abs() <= STANDARDIZED_TOL { 0.0 } else { m };
        let s = if (s - 1.0).abs() <= STANDARDIZED_TOL { 1.0 } else { s };
        if m == 0.0 && s == 1.0 {
            continue;
        }
        for z in c.values.iter_mut().flatten() {
            z[k] = (z[k] - m) / s;
        }
        c.center[k] += c.scale[k] * m;
        c.scale[k] *= s;
    }
}
