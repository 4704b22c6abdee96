use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::exposure::sample_gamma;
use super::model::{covariate_prior_variances, row_vec, set_covariate_coefficients, Context, ModelData};
use crate::data::LikelihoodMode;
use crate::error::{Error, Result};
use crate::kernels::{sample_gig, GigParams};
use crate::state::ParameterState;

/// Covariate main effects and factor interactions drawn jointly from their
/// matrix-normal full conditional, followed by their shrinkage scales.
pub fn update_covariate_effects<R: Rng + ?Sized>(state: &mut ParameterState, data: &ModelData, ctx: &Context, rng: &mut R) -> Result<()> {
    let k = state.n_factors();
    let width = data.design_width(k);
    if width == 0 {
        return Ok(());
    }
    let q = data.q();
    let per_visit = ctx.config.likelihood == LikelihoodMode::PerVisit;
    // the per-visit update integrates ξ out approximately
    let c = if per_visit { 1.0 / (1.0 + state.nu2) } else { 1.0 };
    let b = state.b_all();
    let mut sww = DMatrix::zeros(width, width);
    let mut srw = DMatrix::zeros(q, width);
    for i in 0..data.n() {
        let eta_i = row_vec(&state.eta, i);
        let eta = DVector::from_column_slice(&eta_i);
        for o in &data.obs[i] {
            let w = data.design(o, &eta_i);
            let mut r = &o.y - &b[o.t] * &eta;
            if !per_visit {
                r -= state.xi.row(i).transpose();
            }
            sww.ger(c, &w, &w, 1.0);
            srw.ger(c, &r, &w, 1.0);
        }
    }
    let prior_var = covariate_prior_variances(state);
    for j in 0..width {
        sww[(j, j)] += 1.0 / prior_var[j];
    }
    let chol_a = sww.cholesky().ok_or_else(|| Error::NotPositiveDefinite("covariate coefficient precision".into()))?;
    let mean = chol_a.solve(&srw.transpose()).transpose();
    let sigma_l = state.sigma_y.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("Sigma_Y".into()))?.unpack();
    let z = DMatrix::from_fn(q, width, |_, _| rng.sample::<f64, _>(StandardNormal));
    // Z L_A^{-1} has column covariance A^{-1}
    let zt = chol_a.l().transpose().solve_upper_triangular(&z.transpose()).expect("positive diagonal");
    let g = mean + sigma_l * zt.transpose();
    set_covariate_coefficients(state, &g);
    update_shrinkage(state, ctx, rng)
}

/// GIG/Gamma updates of the column scales ψ and their rates ζ.
pub fn update_shrinkage<R: Rng + ?Sized>(state: &mut ParameterState, ctx: &Context, rng: &mut R) -> Result<()> {
    let q = state.sigma_y.nrows() as f64;
    let chol = state.sigma_y.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("Sigma_Y".into()))?;
    let hyper = ctx.config.shrinkage;
    let r = ctx.shrink_rate;
    let quad = |m: &DMatrix<f64>| -> f64 { chol.l().solve_lower_triangular(m).expect("positive diagonal").norm_squared() };
    for l in 0..state.b_c.ncols() {
        let b = quad(&state.b_c.columns(l, 1).into_owned()).max(1e-300);
        let psi = sample_gig(GigParams::new(hyper.u - 0.5 * q, 2.0 * state.shrink_c.zeta[l], b)?, rng)?;
        state.shrink_c.psi[l] = psi;
        state.shrink_c.zeta[l] = sample_gamma(hyper.u + hyper.v, r + psi, rng)?;
    }
    for m in 0..state.b_in.len() {
        let cols = state.b_in[m].ncols() as f64;
        let b = quad(&state.b_in[m]).max(1e-300);
        let psi = sample_gig(GigParams::new(hyper.u - 0.5 * q * cols, 2.0 * state.shrink_in.zeta[m], b)?, rng)?;
        state.shrink_in.psi[m] = psi;
        state.shrink_in.zeta[m] = sample_gamma(hyper.u + hyper.v, r + psi, rng)?;
    }
    Ok(())
}
