use nalgebra::DVector;

use super::model::{covariate_coefficients, covariate_prior_variances, fixed_mean, row_vec, Context, ModelData};
use crate::linalg::{inv_quad, log_det};
use crate::state::{MgpState, ParameterState};

fn gamma_log(x: f64, shape: f64, rate: f64) -> f64 {
    (shape - 1.0) * x.ln() - rate * x
}

fn mgp_log_prior(loadings: &nalgebra::DMatrix<f64>, mgp: &MgpState, ctx: &Context) -> f64 {
    let h = ctx.config.mgp;
    let mut lp = 0.0;
    for c in 0..loadings.ncols() {
        for j in 0..loadings.nrows() {
            let prec = mgp.precision(j, c);
            lp += 0.5 * prec.ln() - 0.5 * prec * loadings[(j, c)].powi(2);
            lp += gamma_log(mgp.phi[(j, c)], 0.5 * h.v, 0.5 * h.v);
        }
        lp += gamma_log(mgp.delta[c], if c == 0 { h.a1 } else { h.a2 }, 1.0);
    }
    lp
}

/// Unnormalized log joint density of the state and the (imputed) data.
/// Returns `-inf` when Σ_Y is not positive definite.
pub fn log_posterior(state: &ParameterState, data: &ModelData, ctx: &Context) -> f64 {
    let Some(chol) = state.sigma_y.clone().cholesky() else {
        return f64::NEG_INFINITY;
    };
    let q = data.q() as f64;
    let ld = log_det(&chol);
    let mut lp = 0.0;

    // exposures and factors
    let fitted = &state.eta * state.theta.transpose();
    for j in 0..data.p() {
        let s2 = state.sigma_x2[j];
        let ssr: f64 = data.x.column(j).iter().zip(fitted.column(j).iter()).map(|(x, f)| (x - f) * (x - f)).sum();
        lp += -0.5 * data.n() as f64 * s2.ln() - 0.5 * ssr / s2;
        let prior = ctx.config.sigma_x_prior;
        lp += -(prior.shape + 1.0) * s2.ln() - prior.rate / s2;
    }
    lp += -0.5 * state.eta.norm_squared();
    lp += mgp_log_prior(&state.theta, &state.mgp_theta, ctx);

    // outcomes and random intercepts
    let b = state.b_all();
    let g = covariate_coefficients(state);
    for i in 0..data.n() {
        let eta_i = row_vec(&state.eta, i);
        let xi: DVector<f64> = state.xi.row(i).transpose();
        for o in &data.obs[i] {
            let e = &o.y - fixed_mean(data, &b, &g, &eta_i, o) - &xi;
            lp += -0.5 * ld - 0.5 * inv_quad(&chol, &e);
        }
        lp += -0.5 * q * state.nu2.ln() - 0.5 * ld - 0.5 * inv_quad(&chol, &xi) / state.nu2;
    }
    lp += ctx.config.nu2_prior.log_density(state.nu2);

    // coefficient surface
    lp += mgp_log_prior(&state.lambda, &state.mgp_lambda, ctx);
    if let Ok(idx) = ctx.gp_index(state.kappa) {
        let gp = &ctx.gp[idx];
        for h in 0..state.n_basis() {
            for k in 0..state.n_factors() {
                lp += gp.log_density(&state.basis_curve(h, k));
            }
        }
    } else {
        return f64::NEG_INFINITY;
    }

    // covariate effects and shrinkage
    let var = covariate_prior_variances(state);
    for (j, v) in var.iter().enumerate() {
        let col: DVector<f64> = g.column(j).into_owned();
        lp += -0.5 * q * v.ln() - 0.5 * ld - 0.5 * inv_quad(&chol, &col) / v;
    }
    let s = ctx.config.shrinkage;
    for sh in [&state.shrink_c, &state.shrink_in] {
        for (psi, zeta) in sh.psi.iter().zip(sh.zeta.iter()) {
            lp += s.u * zeta.ln() + gamma_log(*psi, s.u, *zeta) + gamma_log(*zeta, s.v, ctx.shrink_rate);
        }
    }

    // inverse-Wishart prior on Σ_Y
    let s0 = ctx.sigma_y_df;
    let trace = chol.solve(&ctx.sigma_y_scale).trace();
    lp += -0.5 * (s0 + q + 1.0) * ld - 0.5 * trace;
    lp
}
