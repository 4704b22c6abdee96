use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::data::{ModelConfig, Panels};
use crate::error::{Error, Result};
use crate::kernels::gp_kernel_matrix;
use crate::linalg::{cholesky_jittered, log_det};
use crate::state::ParameterState;

/// One follow-up as seen by the sampler.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub t: usize,
    /// Outcomes with missing cells holding their current imputed values.
    pub y: DVector<f64>,
    pub missing: Vec<bool>,
    pub z: DVector<f64>,
}

/// Mutable working copy of the data a chain is fitted to.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelData {
    /// n x p exposures with censored cells at their current imputed values.
    pub x: DMatrix<f64>,
    pub lod_mask: DMatrix<bool>,
    pub lod: Vec<Option<f64>>,
    pub obs: Vec<Vec<Observation>>,
    pub grid: Vec<f64>,
    /// Covariate indices that interact with the factors.
    pub interactions: Vec<usize>,
    pub n_outcomes: usize,
    pub n_covariates: usize,
}

impl ModelData {
    pub fn from_panels(panels: &Panels) -> Self {
        let obs = panels
            .outcomes
            .subjects
            .iter()
            .zip(&panels.covariates.values)
            .map(|(s, zs)| {
                s.followups
                    .iter()
                    .zip(zs)
                    .map(|(f, z)| Observation { t: f.grid_index, y: f.y.clone(), missing: f.missing.clone(), z: z.clone() })
                    .collect()
            })
            .collect();
        Self {
            x: panels.exposures.values.clone(),
            lod_mask: panels.exposures.lod_mask.clone(),
            lod: panels.exposures.lod.clone(),
            obs,
            grid: panels.outcomes.grid.clone(),
            interactions: panels.covariates.interaction_set.clone(),
            n_outcomes: panels.q(),
            n_covariates: panels.n_covariates(),
        }
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.n_outcomes
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    pub fn n_followups(&self) -> usize {
        self.obs.iter().map(Vec::len).sum()
    }

    /// Width of the stacked covariate design: main effects plus K columns
    /// per interaction covariate.
    pub fn design_width(&self, k: usize) -> usize {
        self.n_covariates + self.interactions.len() * k
    }

    /// Stacked design `[z; z_l η_i for each interaction l]`.
    pub fn design(&self, obs: &Observation, eta_i: &[f64]) -> DVector<f64> {
        let k = eta_i.len();
        let mut w = DVector::zeros(self.design_width(k));
        w.rows_mut(0, self.n_covariates).copy_from(&obs.z);
        for (m, &l) in self.interactions.iter().enumerate() {
            let zl = obs.z[l];
            for c in 0..k {
                w[self.n_covariates + m * k + c] = zl * eta_i[c];
            }
        }
        w
    }

    /// Censored cells in column-major order.
    pub fn censored_cells(&self) -> Vec<(usize, usize)> {
        let (n, p) = self.lod_mask.shape();
        (0..p).flat_map(|j| (0..n).map(move |i| (i, j))).filter(|&(i, j)| self.lod_mask[(i, j)]).collect()
    }

    pub fn n_missing_outcomes(&self) -> usize {
        self.obs.iter().flatten().map(|o| o.missing.iter().filter(|m| **m).count()).sum()
    }

    /// Copy the imputed cells into `state`.
    pub fn store_imputed(&self, state: &mut ParameterState) {
        state.x_imputed = self.censored_cells().into_iter().map(|c| self.x[c]).collect();
        state.y_imputed = self
            .obs
            .iter()
            .flatten()
            .flat_map(|o| o.missing.iter().zip(o.y.iter()).filter(|(m, _)| **m).map(|(_, v)| *v))
            .collect();
    }

    /// Overwrite the imputed cells with the values stored in `state`.
    pub fn load_imputed(&mut self, state: &ParameterState) -> Result<()> {
        let cells = self.censored_cells();
        if cells.len() != state.x_imputed.len() || self.n_missing_outcomes() != state.y_imputed.len() {
            return Err(Error::dims("stored imputations do not match the data masks"));
        }
        for (c, v) in cells.into_iter().zip(&state.x_imputed) {
            self.x[c] = *v;
        }
        let mut it = state.y_imputed.iter();
        for o in self.obs.iter_mut().flatten() {
            for j in 0..o.missing.len() {
                if o.missing[j] {
                    o.y[j] = *it.next().expect("length checked");
                }
            }
        }
        Ok(())
    }

    /// Pairwise-complete covariance of the observed outcome cells; falls
    /// back to its diagonal (or the identity) when that is not SPD.
    pub fn outcome_sample_covariance(&self) -> DMatrix<f64> {
        let q = self.q();
        let mut cov = DMatrix::zeros(q, q);
        for a in 0..q {
            for b in 0..=a {
                let pairs: Vec<(f64, f64)> = self
                    .obs
                    .iter()
                    .flatten()
                    .filter(|o| !o.missing[a] && !o.missing[b])
                    .map(|o| (o.y[a], o.y[b]))
                    .collect();
                let v = if pairs.len() >= 2 {
                    let m = pairs.len() as f64;
                    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / m;
                    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / m;
                    pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / (m - 1.0)
                } else if a == b {
                    1.0
                } else {
                    0.0
                };
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        if Cholesky::new(cov.clone()).is_some() {
            return cov;
        }
        let diag = DMatrix::from_diagonal(&cov.diagonal().map(|v| if v > 1e-8 { v } else { 1.0 }));
        diag
    }
}

/// Cached factorization of the GP correlation matrix at one length scale.
#[derive(Debug, Clone)]
pub struct GpFactor {
    pub kappa: f64,
    pub chol: Cholesky<f64, Dyn>,
    pub inverse: DMatrix<f64>,
    pub log_det: f64,
}

impl GpFactor {
    pub fn new(grid: &[f64], kappa: f64, jitter: f64) -> Result<Self> {
        let c = gp_kernel_matrix(grid, kappa, jitter)?;
        let chol = cholesky_jittered(&c, jitter.max(1e-8), 1e-6)
            .map_err(|_| Error::NotPositiveDefinite(format!("GP correlation matrix at kappa = {kappa}")))?;
        let inverse = chol.inverse();
        let log_det = log_det(&chol);
        Ok(Self { kappa, chol, inverse, log_det })
    }

    /// `-½ log|C| - ½ uᵀ C⁻¹ u`.
    pub fn log_density(&self, u: &DVector<f64>) -> f64 {
        -0.5 * self.log_det - 0.5 * u.dot(&(&self.inverse * u))
    }
}

/// Configuration resolved against a particular data set.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ModelConfig,
    /// Rate of the global shrinkage Gamma prior.
    pub shrink_rate: f64,
    pub sigma_y_df: f64,
    pub sigma_y_scale: DMatrix<f64>,
    pub gp: Vec<GpFactor>,
}

impl Context {
    pub fn new(config: &ModelConfig, data: &ModelData) -> Result<Self> {
        config.validate_for(data.p(), data.q())?;
        if data.grid.is_empty() {
            return Err(Error::data("empty time grid"));
        }
        let grid = config.kappa_grid(&data.grid);
        let gp = grid.iter().map(|&k| GpFactor::new(&data.grid, k, config.gp_jitter)).collect::<Result<Vec<_>>>()?;
        let sigma_y_scale = config.sigma_y_scale(&data.outcome_sample_covariance());
        if Cholesky::new(sigma_y_scale.clone()).is_none() {
            return Err(Error::Config("sigma_y_prior.S0 is not positive definite".into()));
        }
        Ok(Self {
            config: config.clone(),
            shrink_rate: config.shrinkage.resolved_rate(config.k, data.n()),
            sigma_y_df: config.sigma_y_df(data.q()),
            sigma_y_scale,
            gp,
        })
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn h(&self) -> usize {
        self.config.h
    }

    pub fn kappa_grid(&self) -> Vec<f64> {
        self.gp.iter().map(|g| g.kappa).collect()
    }

    pub fn gp_index(&self, kappa: f64) -> Result<usize> {
        self.gp
            .iter()
            .position(|g| g.kappa == kappa)
            .ok_or_else(|| Error::param(format!("kappa {kappa} is not on the length-scale grid")))
    }
}

/// Stacked covariate coefficients `[B_c, B_in_1, ...]` (q x (L + L_in K)).
pub fn covariate_coefficients(state: &ParameterState) -> DMatrix<f64> {
    let q = state.sigma_y.nrows();
    let width = state.b_c.ncols() + state.b_in.iter().map(|b| b.ncols()).sum::<usize>();
    let mut g = DMatrix::zeros(q, width);
    g.columns_mut(0, state.b_c.ncols()).copy_from(&state.b_c);
    let mut at = state.b_c.ncols();
    for b in &state.b_in {
        g.columns_mut(at, b.ncols()).copy_from(b);
        at += b.ncols();
    }
    g
}

pub fn set_covariate_coefficients(state: &mut ParameterState, g: &DMatrix<f64>) {
    let l = state.b_c.ncols();
    state.b_c.copy_from(&g.columns(0, l));
    let mut at = l;
    for b in &mut state.b_in {
        let k = b.ncols();
        b.copy_from(&g.columns(at, k));
        at += k;
    }
}

/// Per-column prior variances of the stacked covariate coefficients.
pub fn covariate_prior_variances(state: &ParameterState) -> DVector<f64> {
    let k = state.n_factors();
    let mut v: Vec<f64> = state.shrink_c.psi.iter().copied().collect();
    for psi in state.shrink_in.psi.iter() {
        v.extend(std::iter::repeat_n(*psi, k));
    }
    DVector::from_vec(v)
}

/// Mean of `Y_it` excluding the random intercept:
/// `B(t) η_i + G w_it` where `w_it` is the stacked design.
pub fn fixed_mean(
    data: &ModelData,
    b: &[DMatrix<f64>],
    g: &DMatrix<f64>,
    eta_i: &[f64],
    obs: &Observation,
) -> DVector<f64> {
    let eta = DVector::from_column_slice(eta_i);
    let mut m = &b[obs.t] * &eta;
    if g.ncols() > 0 {
        m += g * data.design(obs, eta_i);
    }
    m
}

/// Row `i` of a matrix as a contiguous vector.
pub(crate) fn row_vec(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}
