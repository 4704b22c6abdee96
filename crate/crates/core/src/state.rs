//! One full assignment of the model unknowns.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::is_spd;

/// Multiplicative gamma process hyperparameters for a loading matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgpState {
    /// Local precisions, same shape as the loadings.
    pub phi: DMatrix<f64>,
    pub delta: DVector<f64>,
    /// Column precisions, always the running product of `delta`.
    pub tau: DVector<f64>,
}

impl MgpState {
    pub fn ones(rows: usize, cols: usize) -> Self {
        Self {
            phi: DMatrix::from_element(rows, cols, 1.0),
            delta: DVector::from_element(cols, 1.0),
            tau: DVector::from_element(cols, 1.0),
        }
    }

    pub fn cumulative_tau(delta: &DVector<f64>) -> DVector<f64> {
        let mut tau = delta.clone();
        for k in 1..tau.len() {
            tau[k] = tau[k - 1] * delta[k];
        }
        tau
    }

    pub fn recompute_tau(&mut self) {
        self.tau = Self::cumulative_tau(&self.delta);
    }

    /// Prior precision of loading `(j, k)`.
    pub fn precision(&self, j: usize, k: usize) -> f64 {
        self.phi[(j, k)] * self.tau[k]
    }
}

/// Global-local shrinkage scales for covariate coefficient columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageState {
    pub psi: DVector<f64>,
    pub zeta: DVector<f64>,
}

impl ShrinkageState {
    pub fn ones(len: usize) -> Self {
        Self { psi: DVector::from_element(len, 1.0), zeta: DVector::from_element(len, 1.0) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterState {
    /// p x K exposure loadings.
    pub theta: DMatrix<f64>,
    pub sigma_x2: DVector<f64>,
    /// n x K latent factors.
    pub eta: DMatrix<f64>,
    /// n x q random intercepts.
    pub xi: DMatrix<f64>,
    pub nu2: f64,
    /// q x H basis loadings.
    pub lambda: DMatrix<f64>,
    /// Per grid time, the H x K basis values.
    pub u: Vec<DMatrix<f64>>,
    pub kappa: f64,
    /// q x L covariate main effects.
    pub b_c: DMatrix<f64>,
    /// Per interaction covariate, q x K factor interactions.
    pub b_in: Vec<DMatrix<f64>>,
    pub sigma_y: DMatrix<f64>,
    pub mgp_theta: MgpState,
    pub mgp_lambda: MgpState,
    pub shrink_c: ShrinkageState,
    pub shrink_in: ShrinkageState,
    /// Current values of the below-LOD exposure cells (column-major mask order).
    pub x_imputed: Vec<f64>,
    /// Current values of the missing outcome cells (subject, follow-up, outcome order).
    pub y_imputed: Vec<f64>,
    /// Random-walk proposal variances for η, one per subject.
    pub mh_scales: DVector<f64>,
    /// Random-walk proposal SD for log ν².
    pub nu2_scale: f64,
}

impl ParameterState {
    pub fn n_factors(&self) -> usize {
        self.theta.ncols()
    }

    pub fn n_basis(&self) -> usize {
        self.lambda.ncols()
    }

    pub fn grid_len(&self) -> usize {
        self.u.len()
    }

    /// Coefficient surface `B(t) = Λ U(t)` at grid index `t`.
    pub fn b_at(&self, t: usize) -> DMatrix<f64> {
        &self.lambda * &self.u[t]
    }

    pub fn b_all(&self) -> Vec<DMatrix<f64>> {
        (0..self.u.len()).map(|t| self.b_at(t)).collect()
    }

    /// Values of basis function `(h, k)` across the grid.
    pub fn basis_curve(&self, h: usize, k: usize) -> DVector<f64> {
        DVector::from_iterator(self.u.len(), self.u.iter().map(|u| u[(h, k)]))
    }

    pub fn check_invariants(&self) -> Result<()> {
        for (name, mgp) in [("theta", &self.mgp_theta), ("lambda", &self.mgp_lambda)] {
            if MgpState::cumulative_tau(&mgp.delta) != mgp.tau {
                return Err(Error::param(format!("{name} MGP: tau is not the running product of delta")));
            }
            if mgp.phi.iter().chain(mgp.delta.iter()).any(|v| !(*v > 0.0)) {
                return Err(Error::param(format!("{name} MGP: non-positive hyperparameter")));
            }
        }
        if self.sigma_x2.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::param("non-positive exposure noise variance"));
        }
        if !(self.nu2 > 0.0) || !(self.kappa > 0.0) {
            return Err(Error::param("nu2 and kappa must be positive"));
        }
        if !is_spd(&self.sigma_y) {
            return Err(Error::NotPositiveDefinite("Sigma_Y".into()));
        }
        for s in [&self.shrink_c, &self.shrink_in] {
            if s.psi.iter().chain(s.zeta.iter()).any(|v| !(*v > 0.0)) {
                return Err(Error::param("non-positive shrinkage parameter"));
            }
        }
        if self.mh_scales.iter().any(|v| !(*v > 0.0)) || !(self.nu2_scale > 0.0) {
            return Err(Error::param("non-positive proposal scale"));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        bincode::serialize(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        bincode::deserialize(bytes).map_err(|e| Error::Format(e.to_string()))
    }
}
