use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::model::{covariate_coefficients, fixed_mean, row_vec, Context, ModelData};
use crate::error::{Error, Result};
use crate::linalg::standard_normal_vector;
use crate::state::ParameterState;

/// Random intercepts ξ_i from their Gaussian full conditionals.
pub fn update_xi<R: Rng + ?Sized>(state: &mut ParameterState, data: &ModelData, rng: &mut R) -> Result<()> {
    let q = data.q();
    let chol = state.sigma_y.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("Sigma_Y".into()))?;
    let l = chol.l();
    let b = state.b_all();
    let g = covariate_coefficients(state);
    for i in 0..data.n() {
        let eta_i = row_vec(&state.eta, i);
        let mut sum = DVector::zeros(q);
        for o in &data.obs[i] {
            sum += &o.y - fixed_mean(data, &b, &g, &eta_i, o);
        }
        let a = 1.0 / state.nu2 + data.obs[i].len() as f64;
        let draw = sum / a + &l * standard_normal_vector(q, rng) / a.sqrt();
        state.xi.set_row(i, &draw.transpose());
    }
    Ok(())
}

/// `Σ_i ξ_iᵀ Σ_Y⁻¹ ξ_i`.
pub fn xi_quadratic(state: &ParameterState) -> Result<f64> {
    let chol = state.sigma_y.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("Sigma_Y".into()))?;
    let z = chol.l().solve_lower_triangular(&state.xi.transpose()).expect("positive diagonal");
    Ok(z.norm_squared())
}

/// Log full conditional of ν² given ξ and Σ_Y, up to a constant.
pub fn nu2_log_conditional(nu2: f64, n: usize, q: usize, xi_quad: f64, ctx: &Context) -> f64 {
    ctx.config.nu2_prior.log_density(nu2) - 0.5 * (n * q) as f64 * nu2.ln() - 0.5 * xi_quad / nu2
}

/// Random-walk Metropolis on log ν². Returns whether the proposal was accepted.
pub fn update_nu2<R: Rng + ?Sized>(state: &mut ParameterState, data: &ModelData, ctx: &Context, rng: &mut R) -> Result<bool> {
    let quad = xi_quadratic(state)?;
    let (n, q) = (data.n(), data.q());
    let current = state.nu2;
    let proposal = (current.ln() + state.nu2_scale * rng.sample::<f64, _>(StandardNormal)).exp();
    // the log-scale walk contributes the Jacobian ν²
    let log_ratio = nu2_log_conditional(proposal, n, q, quad, ctx) + proposal.ln()
        - nu2_log_conditional(current, n, q, quad, ctx)
        - current.ln();
    let u: f64 = rng.random();
    if proposal > 0.0 && proposal.is_finite() && u.ln() < log_ratio {
        state.nu2 = proposal;
        return Ok(true);
    }
    Ok(false)
}
