use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::model::{Context, ModelData, Observation};
use crate::data::LikelihoodMode;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::ParameterState;

/// Quadratic form of the η_i log target: `-½ ηᵀ Q η + bᵀ η`.
#[derive(Debug, Clone, PartialEq)]
pub struct EtaTarget {
    pub precision: DMatrix<f64>,
    pub linear: DVector<f64>,
}

impl EtaTarget {
    pub fn log_density(&self, eta: &DVector<f64>) -> f64 {
        -0.5 * eta.dot(&(&self.precision * eta)) + self.linear.dot(eta)
    }
}

/// Pieces of the η targets shared by all subjects in one sweep.
pub struct EtaShared {
    pub b: Vec<DMatrix<f64>>,
    pub g: DMatrix<f64>,
    pub sigma_y_inv: DMatrix<f64>,
    /// Θᵀ Σ_X⁻¹ Θ + I.
    pub base_precision: DMatrix<f64>,
    /// Θᵀ Σ_X⁻¹ (K x p).
    pub theta_weighted: DMatrix<f64>,
}

impl EtaShared {
    pub fn new(state: &ParameterState) -> Result<Self> {
        let k = state.n_factors();
        let sigma_y_inv = state
            .sigma_y
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("Sigma_Y".into()))?
            .inverse();
        let mut theta_weighted = state.theta.transpose();
        for j in 0..theta_weighted.ncols() {
            let w = 1.0 / state.sigma_x2[j];
            theta_weighted.column_mut(j).scale_mut(w);
        }
        let base_precision = &theta_weighted * &state.theta + DMatrix::identity(k, k);
        Ok(Self { b: state.b_all(), g: super::model::covariate_coefficients(state), sigma_y_inv, base_precision, theta_weighted })
    }
}

/// Split `Y_it - (B(t) + Σ_l z_l B_in_l) η - B_c z` into its loading `M_it`
/// and offset `y_it - B_c z_it`.
fn loading_and_offset(state: &ParameterState, data: &ModelData, shared: &EtaShared, obs: &Observation) -> (DMatrix<f64>, DVector<f64>) {
    let mut m = shared.b[obs.t].clone();
    for (b, &l) in state.b_in.iter().zip(&data.interactions) {
        m += b * obs.z[l];
    }
    let mut y = obs.y.clone();
    if state.b_c.ncols() > 0 {
        y -= &state.b_c * &obs.z;
    }
    (m, y)
}

/// Log target of η_i as a quadratic form, integrating out ξ_i either per
/// visit or exactly.
pub fn eta_target(state: &ParameterState, data: &ModelData, shared: &EtaShared, mode: LikelihoodMode, i: usize) -> EtaTarget {
    let mut precision = shared.base_precision.clone();
    let mut linear = &shared.theta_weighted * data.x.row(i).transpose();
    let obs = &data.obs[i];
    if obs.is_empty() {
        return EtaTarget { precision, linear };
    }
    let q = data.q();
    let k = state.n_factors();
    let nu2 = state.nu2;
    match mode {
        LikelihoodMode::PerVisit => {
            let c = 1.0 / (1.0 + nu2);
            for o in obs {
                let (m, y) = loading_and_offset(state, data, shared, o);
                let sm = &shared.sigma_y_inv * &m;
                precision += m.tr_mul(&sm) * c;
                linear += sm.tr_mul(&y) * c;
            }
        }
        LikelihoodMode::Exact => {
            let mut m_sum = DMatrix::zeros(q, k);
            let mut y_sum = DVector::zeros(q);
            for o in obs {
                let (m, y) = loading_and_offset(state, data, shared, o);
                let sm = &shared.sigma_y_inv * &m;
                precision += m.tr_mul(&sm);
                linear += sm.tr_mul(&y);
                m_sum += m;
                y_sum += y;
            }
            let c = nu2 / (1.0 + obs.len() as f64 * nu2);
            let sm = &shared.sigma_y_inv * &m_sum;
            precision -= m_sum.tr_mul(&sm) * c;
            linear -= sm.tr_mul(&y_sum) * c;
        }
    }
    EtaTarget { precision, linear }
}

/// One random-walk Metropolis step per subject, with proposal covariance
/// `s_i Q_i⁻¹` where `Q_i` is the precision of the subject's target and
/// `s_i` its adaptive scale. `Q_i` does not involve η_i, so the proposal
/// stays symmetric. Subject `i` draws from
/// substream `i` of `stream`, so the result does not depend on the order in
/// which subjects are visited. Returns per-subject acceptance indicators.
pub fn update_latent_factors(state: &mut ParameterState, data: &ModelData, ctx: &Context, stream: &RngStream) -> Result<Vec<bool>> {
    let shared = EtaShared::new(state)?;
    let k = state.n_factors();
    let mode = ctx.config.likelihood;
    let mut accepted = vec![false; data.n()];
    for (i, acc) in accepted.iter_mut().enumerate() {
        let target = eta_target(state, data, &shared, mode, i);
        let mut rng = stream.substream(i as u64).rng();
        let current = DVector::from_iterator(k, state.eta.row(i).iter().copied());
        let chol = target
            .precision
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite(format!("eta precision of subject {i}")))?;
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal)) * state.mh_scales[i].sqrt();
        let step = chol.l().transpose().solve_upper_triangular(&z).expect("triangular factor is nonsingular");
        let proposal = &current + step;
        let log_ratio = target.log_density(&proposal) - target.log_density(&current);
        let u: f64 = rng.random();
        if u.ln() < log_ratio {
            state.eta.set_row(i, &proposal.transpose());
            *acc = true;
        }
    }
    Ok(accepted)
}

/// Log-scale Robbins-Monro step toward the target acceptance rate, with
/// step size `1 / sqrt(batch)`.
pub fn adapt_log_scale(scale: f64, acceptance: f64, target: f64, batch: usize) -> f64 {
    let step = 1.0 / (batch.max(1) as f64).sqrt();
    (scale.ln() + step * (acceptance - target)).exp()
}

pub const TARGET_ACCEPTANCE: f64 = 0.234;
