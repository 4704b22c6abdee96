use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::PredictionSet;
use crate::data::Panels;
use crate::error::{Error, Result};

pub const EM_MAX_ITER: usize = 500;
pub const EM_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeInteraction {
    None,
    Linear,
}

/// Per-outcome random-intercept fit of one outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmmFit {
    /// `[intercept, PC slopes, (time, PC x time slopes)]`.
    pub beta: DVector<f64>,
    pub sigma2_b: f64,
    pub sigma2_e: f64,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Principal-component regression with a random intercept per subject,
/// fitted separately for each outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaLmm {
    /// p x K leading right singular vectors of the exposure matrix.
    pub rotation: DMatrix<f64>,
    pub interaction: TimeInteraction,
    pub time_center: f64,
    pub grid: Vec<f64>,
    pub fits: Vec<LmmFit>,
}

/// Leading `k` principal directions (p x k) of the rows of `x`.
pub fn principal_directions(x: &DMatrix<f64>, k: usize) -> Result<DMatrix<f64>> {
    let p = x.ncols();
    if k == 0 || k > p {
        return Err(Error::param(format!("{k} components requested for {p} exposures")));
    }
    let cov = x.transpose() * x;
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut v = DMatrix::zeros(p, k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut col = eig.eigenvectors.column(idx).into_owned();
        // deterministic sign: largest-magnitude entry positive
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col.neg_mut();
        }
        v.set_column(c, &col);
    }
    Ok(v)
}

impl PcaLmm {
    fn features(&self, scores: &[f64], t: f64) -> DVector<f64> {
        let k = scores.len();
        let s = t - self.time_center;
        let width = match self.interaction {
            TimeInteraction::None => 1 + k,
            TimeInteraction::Linear => 2 + 2 * k,
        };
        let mut f = DVector::zeros(width);
        f[0] = 1.0;
        f.rows_mut(1, k).copy_from_slice(scores);
        if self.interaction == TimeInteraction::Linear {
            f[1 + k] = s;
            for c in 0..k {
                f[2 + k + c] = s * scores[c];
            }
        }
        f
    }

    pub fn fit(train: &Panels, n_components: usize, interaction: TimeInteraction) -> Result<Self> {
        let rotation = principal_directions(&train.exposures.values, n_components)?;
        let grid = train.outcomes.grid.clone();
        let time_center = grid.iter().sum::<f64>() / grid.len() as f64;
        let mut model = PcaLmm { rotation, interaction, time_center, grid, fits: Vec::new() };
        let scores = &train.exposures.values * &model.rotation;
        for j in 0..train.q() {
            let mut groups: Vec<(Vec<DVector<f64>>, Vec<f64>)> = Vec::new();
            for (i, s) in train.outcomes.subjects.iter().enumerate() {
                let sc: Vec<f64> = scores.row(i).iter().copied().collect();
                let (mut fs, mut ys) = (Vec::new(), Vec::new());
                for f in s.followups.iter().filter(|f| !f.missing[j]) {
                    fs.push(model.features(&sc, model.grid[f.grid_index]));
                    ys.push(train.outcomes.uncenter(j, f.grid_index, f.y[j]));
                }
                if !ys.is_empty() {
                    groups.push((fs, ys));
                }
            }
            let fit = fit_random_intercept(&groups)?;
            if !fit.converged {
                log::warn!(
                    "random-intercept EM for outcome {} stopped after {} iterations without converging",
                    train.outcomes.outcome_names[j],
                    fit.iterations
                );
            }
            model.fits.push(fit);
        }
        Ok(model)
    }

    /// Population-level predictions (random intercept at zero).
    pub fn predict(&self, panels: &Panels) -> Result<PredictionSet> {
        if panels.p() != self.rotation.nrows() || panels.q() != self.fits.len() {
            return Err(Error::dims("panels do not match the fitted PCA-LMM"));
        }
        let scores = &panels.exposures.values * &self.rotation;
        let values = panels
            .outcomes
            .subjects
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let sc: Vec<f64> = scores.row(i).iter().copied().collect();
                s.followups
                    .iter()
                    .map(|f| {
                        let x = self.features(&sc, panels.outcomes.grid[f.grid_index]);
                        DVector::from_iterator(self.fits.len(), self.fits.iter().map(|fit| fit.beta.dot(&x)))
                    })
                    .collect()
            })
            .collect();
        Ok(PredictionSet { model: "pca-lmm".into(), draw_averaged: false, values })
    }

    /// Exposure-space effects `V β_PC(t)` at each grid time (q x p each).
    pub fn induced_effects(&self) -> Vec<DMatrix<f64>> {
        let k = self.rotation.ncols();
        self.grid
            .iter()
            .map(|&t| {
                let s = t - self.time_center;
                let mut pcs = DMatrix::zeros(self.fits.len(), k);
                for (j, fit) in self.fits.iter().enumerate() {
                    for c in 0..k {
                        pcs[(j, c)] = fit.beta[1 + c];
                        if self.interaction == TimeInteraction::Linear {
                            pcs[(j, c)] += s * fit.beta[2 + k + c];
                        }
                    }
                }
                pcs * self.rotation.transpose()
            })
            .collect()
    }
}

fn marginal_log_likelihood(groups: &[(Vec<DVector<f64>>, Vec<f64>)], beta: &DVector<f64>, s2b: f64, s2e: f64) -> f64 {
    let mut ll = 0.0;
    for (fs, ys) in groups {
        let m = ys.len() as f64;
        let (mut ss, mut sum) = (0.0, 0.0);
        for (f, y) in fs.iter().zip(ys) {
            let r = y - beta.dot(f);
            ss += r * r;
            sum += r;
        }
        let denom = s2e + m * s2b;
        let log_det = (m - 1.0) * s2e.ln() + denom.ln();
        let quad = (ss - s2b * sum * sum / denom) / s2e;
        ll -= 0.5 * (m * (2.0 * std::f64::consts::PI).ln() + log_det + quad);
    }
    ll
}

/// EM for `y = F β + b_i + e` with `b_i ~ N(0, σ²_b)`, `e ~ N(0, σ²_e)`.
pub fn fit_random_intercept(groups: &[(Vec<DVector<f64>>, Vec<f64>)]) -> Result<LmmFit> {
    let width = groups.iter().flat_map(|g| g.0.first()).map(|f| f.len()).next().ok_or_else(|| Error::data("no observations"))?;
    let n_obs: usize = groups.iter().map(|g| g.1.len()).sum();
    let mut ftf = DMatrix::zeros(width, width);
    for f in groups.iter().flat_map(|g| &g.0) {
        ftf.ger(1.0, f, f, 1.0);
    }
    // a whisker of ridge keeps collinear designs solvable
    for d in 0..width {
        ftf[(d, d)] += 1e-10;
    }
    let chol = ftf.cholesky().ok_or_else(|| Error::NotPositiveDefinite("PCA-LMM design".into()))?;
    let solve_beta = |offset: &dyn Fn(usize) -> f64| {
        let mut rhs = DVector::zeros(width);
        for (g, (fs, ys)) in groups.iter().enumerate() {
            for (f, y) in fs.iter().zip(ys) {
                rhs.axpy(y - offset(g), f, 1.0);
            }
        }
        chol.solve(&rhs)
    };
    let mut beta = solve_beta(&|_| 0.0);
    let rss: f64 = groups.iter().flat_map(|(fs, ys)| fs.iter().zip(ys).map(|(f, y)| (y - beta.dot(f)).powi(2))).sum();
    let v0 = (rss / n_obs as f64).max(1e-8);
    let (mut s2b, mut s2e) = (0.5 * v0, 0.5 * v0);
    let mut ll = marginal_log_likelihood(groups, &beta, s2b, s2e);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < EM_MAX_ITER {
        iterations += 1;
        // E-step: posterior of each random intercept
        let mut post = Vec::with_capacity(groups.len());
        for (fs, ys) in groups {
            let m = ys.len() as f64;
            let v = 1.0 / (m / s2e + 1.0 / s2b);
            let r: f64 = fs.iter().zip(ys).map(|(f, y)| y - beta.dot(f)).sum();
            post.push((v * r / s2e, v));
        }
        beta = solve_beta(&|g| post[g].0);
        s2b = (post.iter().map(|(m, v)| m * m + v).sum::<f64>() / groups.len() as f64).max(1e-12);
        let mut sse = 0.0;
        for ((fs, ys), (mb, vb)) in groups.iter().zip(&post) {
            for (f, y) in fs.iter().zip(ys) {
                sse += (y - beta.dot(f) - mb).powi(2) + vb;
            }
        }
        s2e = (sse / n_obs as f64).max(1e-12);
        let next = marginal_log_likelihood(groups, &beta, s2b, s2e);
        let done = (next - ll).abs() <= EM_REL_TOL * ll.abs().max(1.0);
        ll = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(LmmFit { beta, sigma2_b: s2b, sigma2_e: s2e, log_likelihood: ll, iterations, converged })
}
