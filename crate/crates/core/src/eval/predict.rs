use nalgebra::{DMatrix, DVector};

use super::{posterior_factor_map, PredictionSet};
use crate::data::Panels;
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::sampler::{covariate_coefficients, fixed_mean, ModelData};

/// Posterior-mean predictions for every follow-up of `panels`, using
/// `E[η | X] = A X` for each subject's factors (outcomes are not consulted).
/// `panels` must share the scaling of the panels the draws were fitted on.
pub fn predict(draws: &PosteriorDraws, panels: &Panels) -> Result<PredictionSet> {
    if draws.is_empty() {
        return Err(Error::data("no posterior draws to predict from"));
    }
    let data = ModelData::from_panels(panels);
    let q = panels.q();
    let mut acc: Vec<Vec<DVector<f64>>> =
        data.obs.iter().map(|o| vec![DVector::zeros(q); o.len()]).collect();
    for s in &draws.states {
        if s.theta.nrows() != data.p() || s.lambda.nrows() != q {
            return Err(Error::dims("draws and panels disagree on exposures or outcomes"));
        }
        let a = posterior_factor_map(&s.theta, &s.sigma_x2);
        let eta_hat: DMatrix<f64> = &data.x * a.transpose();
        let b = s.b_all();
        let g = covariate_coefficients(s);
        for (i, obs) in data.obs.iter().enumerate() {
            let eta_i: Vec<f64> = eta_hat.row(i).iter().copied().collect();
            for (o, ob) in obs.iter().enumerate() {
                acc[i][o] += fixed_mean(&data, &b, &g, &eta_i, ob);
            }
        }
    }
    let nd = draws.len() as f64;
    for (i, subj) in acc.iter_mut().enumerate() {
        for (o, v) in subj.iter_mut().enumerate() {
            let t = data.obs[i][o].t;
            for j in 0..q {
                v[j] = panels.outcomes.uncenter(j, t, v[j] / nd);
            }
        }
    }
    Ok(PredictionSet { model: "ours".into(), draw_averaged: true, values: acc })
}

/// Posterior mean of the induced exposure effects (q x p per grid time).
pub fn posterior_mean_effects(draws: &PosteriorDraws) -> Vec<DMatrix<f64>> {
    let mut mean: Vec<DMatrix<f64>> = Vec::new();
    for d in 0..draws.len() {
        let e = draws.induced_effects(d);
        if mean.is_empty() {
            mean = e;
        } else {
            for (m, x) in mean.iter_mut().zip(&e) {
                *m += x;
            }
        }
    }
    let nd = draws.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= nd);
    mean
}
