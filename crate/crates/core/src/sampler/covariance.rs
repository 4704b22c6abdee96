use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::model::{covariate_coefficients, covariate_prior_variances, fixed_mean, row_vec, Context, ModelData};
use crate::data::LikelihoodMode;
use crate::error::Result;
use crate::kernels::sample_inverse_wishart;
use crate::linalg::symmetrize;
use crate::state::ParameterState;

/// Degrees of freedom and scale of the inverse-Wishart full conditional of Σ_Y.
pub fn sigma_y_conditional(state: &ParameterState, data: &ModelData, ctx: &Context) -> (f64, DMatrix<f64>) {
    let q = data.q();
    let per_visit = ctx.config.likelihood == LikelihoodMode::PerVisit;
    let b = state.b_all();
    let g = covariate_coefficients(state);
    let mut scale = ctx.sigma_y_scale.clone();
    let resid_weight = if per_visit { 1.0 / (1.0 + state.nu2) } else { 1.0 };
    for i in 0..data.n() {
        let eta_i = row_vec(&state.eta, i);
        let xi: DVector<f64> = state.xi.row(i).transpose();
        for o in &data.obs[i] {
            let mut e = &o.y - fixed_mean(data, &b, &g, &eta_i, o);
            if !per_visit {
                e -= &xi;
            }
            scale.ger(resid_weight, &e, &e, 1.0);
        }
        scale.ger(1.0 / state.nu2, &xi, &xi, 1.0);
    }
    let prior_var = covariate_prior_variances(state);
    for (j, v) in prior_var.iter().enumerate() {
        let col = g.column(j);
        scale.ger(1.0 / v, &col, &col, 1.0);
    }
    symmetrize(&mut scale);
    let df = ctx.sigma_y_df + (data.n_followups() + data.n() + g.ncols()) as f64;
    debug_assert_eq!(scale.nrows(), q);
    (df, scale)
}

pub fn update_outcome_covariance<R: Rng + ?Sized>(state: &mut ParameterState, data: &ModelData, ctx: &Context, rng: &mut R) -> Result<()> {
    let (df, scale) = sigma_y_conditional(state, data, ctx);
    state.sigma_y = sample_inverse_wishart(df, &scale, rng)?;
    Ok(())
}
