//! Domain types for exposures, longitudinal outcomes and covariates, plus the
//! preprocessing that turns raw tables into model-ready panels.

mod config;
pub mod io;
mod preprocess;

pub use config::{
    ChainConfig, KappaMode, LikelihoodMode, MgpHyper, ModelConfig, Nu2Prior, ScaleMatrix, ScaleName,
    ShrinkageHyper, ShrinkageRate, SigmaXPrior, SigmaYPrior,
};
pub use preprocess::{
    grid_index_of, standardize, validate_and_preprocess, CovariateRow, OutcomeRecord, PreprocessOptions,
    RawCovariates, RawExposures, RawOutcomes,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log-scale exposures, standardized column-wise on detected cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposurePanel {
    pub subject_ids: Vec<String>,
    pub column_names: Vec<String>,
    /// n x p; below-LOD cells hold their current imputed value.
    pub values: DMatrix<f64>,
    /// n x p; `true` marks a cell below its limit of detection.
    pub lod_mask: DMatrix<bool>,
    /// Per-column log-LOD on the standardized scale (`None` when the column
    /// has no censored cells and no LOD was supplied).
    pub lod: Vec<Option<f64>>,
    /// Standardization: `values = (log x - center) / scale`.
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

/// One follow-up visit of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowUp {
    /// Index into the time grid.
    pub grid_index: usize,
    /// Centered outcomes; missing cells hold their current imputed value.
    pub y: DVector<f64>,
    pub missing: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SubjectOutcomes {
    pub followups: Vec<FollowUp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomePanel {
    pub subjects: Vec<SubjectOutcomes>,
    /// Strictly increasing follow-up times.
    pub grid: Vec<f64>,
    pub outcome_names: Vec<String>,
    /// q x T centering offsets; identical columns when centering per outcome.
    pub center: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariatePanel {
    pub names: Vec<String>,
    /// Per subject, per follow-up: the L covariates.
    pub values: Vec<Vec<DVector<f64>>>,
    /// Covariate indices that interact with the latent factors.
    pub interaction_set: Vec<usize>,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

/// The three aligned panels a model is fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panels {
    pub exposures: ExposurePanel,
    pub outcomes: OutcomePanel,
    pub covariates: CovariatePanel,
}

impl OutcomePanel {
    pub fn n_outcomes(&self) -> usize {
        self.outcome_names.len()
    }

    pub fn n_followups(&self) -> usize {
        self.subjects.iter().map(|s| s.followups.len()).sum()
    }

    pub fn n_observed_cells(&self) -> usize {
        self.subjects
            .iter()
            .flat_map(|s| &s.followups)
            .map(|f| f.missing.iter().filter(|m| !**m).count())
            .sum()
    }

    /// Map a centered value back to the original outcome scale.
    pub fn uncenter(&self, outcome: usize, grid_index: usize, value: f64) -> f64 {
        value + self.center[(outcome, grid_index)]
    }
}

impl Panels {
    pub fn n(&self) -> usize {
        self.exposures.values.nrows()
    }
    pub fn p(&self) -> usize {
        self.exposures.values.ncols()
    }
    pub fn q(&self) -> usize {
        self.outcomes.n_outcomes()
    }
    pub fn n_covariates(&self) -> usize {
        self.covariates.names.len()
    }
    pub fn grid_len(&self) -> usize {
        self.outcomes.grid.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let p = self.p();
        let q = self.q();
        let l = self.n_covariates();
        let t = self.grid_len();
        if self.exposures.subject_ids.len() != n || self.exposures.lod_mask.shape() != (n, p) {
            return Err(Error::dims("exposure ids/mask do not match the value matrix"));
        }
        if self.exposures.lod.len() != p || self.exposures.column_names.len() != p {
            return Err(Error::dims("exposure LOD/name vectors do not match p"));
        }
        if self.outcomes.subjects.len() != n || self.covariates.values.len() != n {
            return Err(Error::dims(format!(
                "{n} exposure rows but {} outcome and {} covariate subjects",
                self.outcomes.subjects.len(),
                self.covariates.values.len()
            )));
        }
        if self.outcomes.grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::data("time grid must be strictly increasing"));
        }
        if self.outcomes.center.shape() != (q, t) {
            return Err(Error::dims("outcome centering offsets must be q x T"));
        }
        for (i, s) in self.outcomes.subjects.iter().enumerate() {
            if s.followups.len() != self.covariates.values[i].len() {
                return Err(Error::dims(format!("subject {i}: covariates do not align with follow-ups")));
            }
            let mut seen = vec![false; t];
            for (f, z) in s.followups.iter().zip(&self.covariates.values[i]) {
                if f.grid_index >= t || f.y.len() != q || f.missing.len() != q || z.len() != l {
                    return Err(Error::dims(format!("subject {i}: malformed follow-up")));
                }
                if seen[f.grid_index] {
                    return Err(Error::data(format!("subject {i}: duplicate follow-up at grid index {}", f.grid_index)));
                }
                seen[f.grid_index] = true;
            }
        }
        if self.covariates.interaction_set.iter().any(|&c| c >= l) {
            return Err(Error::dims("interaction covariate index out of range"));
        }
        for i in 0..n {
            for j in 0..p {
                if self.exposures.lod_mask[(i, j)] {
                    match self.exposures.lod[j] {
                        Some(lod) if self.exposures.values[(i, j)] <= lod => {}
                        Some(_) => {
                            return Err(Error::data(format!(
                                "censored exposure ({i}, {j}) lies above its limit of detection"
                            )))
                        }
                        None => return Err(Error::data(format!("column {j} has censored cells but no LOD"))),
                    }
                }
            }
        }
        Ok(())
    }

    /// Panels restricted to the given subjects, in the given order.
    pub fn subset(&self, subjects: &[usize]) -> Panels {
        let e = &self.exposures;
        let p = self.p();
        Panels {
            exposures: ExposurePanel {
                subject_ids: subjects.iter().map(|&i| e.subject_ids[i].clone()).collect(),
                column_names: e.column_names.clone(),
                values: DMatrix::from_fn(subjects.len(), p, |r, c| e.values[(subjects[r], c)]),
                lod_mask: DMatrix::from_fn(subjects.len(), p, |r, c| e.lod_mask[(subjects[r], c)]),
                lod: e.lod.clone(),
                center: e.center.clone(),
                scale: e.scale.clone(),
            },
            outcomes: OutcomePanel {
                subjects: subjects.iter().map(|&i| self.outcomes.subjects[i].clone()).collect(),
                grid: self.outcomes.grid.clone(),
                outcome_names: self.outcomes.outcome_names.clone(),
                center: self.outcomes.center.clone(),
            },
            covariates: CovariatePanel {
                names: self.covariates.names.clone(),
                values: subjects.iter().map(|&i| self.covariates.values[i].clone()).collect(),
                interaction_set: self.covariates.interaction_set.clone(),
                center: self.covariates.center.clone(),
                scale: self.covariates.scale.clone(),
            },
        }
    }

    /// Re-express these panels on the centering and scaling of `reference`,
    /// so a held-out set lines up with the panels a model was fitted on.
    pub fn rescale_like(&mut self, reference: &Panels) -> Result<()> {
        if self.p() != reference.p()
            || self.q() != reference.q()
            || self.n_covariates() != reference.n_covariates()
            || self.outcomes.grid != reference.outcomes.grid
        {
            return Err(Error::dims("panels do not share columns and grid with the reference"));
        }
        let e = &mut self.exposures;
        let r = &reference.exposures;
        for j in 0..e.column_names.len() {
            let (c0, s0, c1, s1) = (e.center[j], e.scale[j], r.center[j], r.scale[j]);
            let map = |v: f64| (v * s0 + c0 - c1) / s1;
            e.values.column_mut(j).apply(|v| *v = map(*v));
            if let Some(l) = e.lod[j].as_mut() {
                *l = map(*l);
            }
            e.center[j] = c1;
            e.scale[j] = s1;
        }
        let shift = &self.outcomes.center - &reference.outcomes.center;
        for f in self.outcomes.subjects.iter_mut().flat_map(|s| s.followups.iter_mut()) {
            for j in 0..f.y.len() {
                if !f.missing[j] {
                    f.y[j] += shift[(j, f.grid_index)];
                }
            }
        }
        self.outcomes.center = reference.outcomes.center.clone();
        let c = &mut self.covariates;
        let rc = &reference.covariates;
        for z in c.values.iter_mut().flatten() {
            for k in 0..z.len() {
                z[k] = (z[k] * c.scale[k] + c.center[k] - rc.center[k]) / rc.scale[k];
            }
        }
        c.center = rc.center.clone();
        c.scale = rc.scale.clone();
        Ok(())
    }

    /// Copy of these panels with every outcome hidden (exposures kept).
    pub fn without_outcomes(&self) -> Panels {
        let mut out = self.clone();
        for s in &mut out.outcomes.subjects {
            s.followups.clear();
        }
        for z in &mut out.covariates.values {
            z.clear();
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
