//! Forward sampling from the prior and from the likelihood, for
//! joint-distribution checks of the sampler.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use super::exposure::sample_gamma;
use super::init::INITIAL_NU2_STEP;
use super::model::{covariate_coefficients, fixed_mean, row_vec, Context, ModelData};
use crate::error::{Error, Result};
use crate::kernels::sample_inverse_wishart;
use crate::linalg::standard_normal_vector;
use crate::state::{MgpState, ParameterState, ShrinkageState};

fn sample_mgp<R: Rng + ?Sized>(rows: usize, cols: usize, ctx: &Context, rng: &mut R) -> Result<(MgpState, DMatrix<f64>)> {
    let h = ctx.config.mgp;
    let mut mgp = MgpState::ones(rows, cols);
    for c in 0..cols {
        for j in 0..rows {
            mgp.phi[(j, c)] = sample_gamma(0.5 * h.v, 0.5 * h.v, rng)?;
        }
        mgp.delta[c] = sample_gamma(if c == 0 { h.a1 } else { h.a2 }, 1.0, rng)?;
    }
    mgp.recompute_tau();
    let loadings = DMatrix::from_fn(rows, cols, |j, c| rng.sample::<f64, _>(StandardNormal) / mgp.precision(j, c).sqrt());
    Ok((mgp, loadings))
}

/// A state drawn from the prior, sized for `data` (whose values are unused).
pub fn sample_prior<R: Rng + ?Sized>(data: &ModelData, ctx: &Context, rng: &mut R) -> Result<ParameterState> {
    let (n, p, q) = (data.n(), data.p(), data.q());
    let (k, h, t) = (ctx.k(), ctx.h(), data.grid_len());
    let (mgp_theta, theta) = sample_mgp(p, k, ctx, rng)?;
    let sx = ctx.config.sigma_x_prior;
    let sigma_x2 = (0..p).map(|_| sample_gamma(sx.shape, sx.rate, rng).map(|v| 1.0 / v)).collect::<Result<Vec<_>>>()?;
    let eta = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    let sigma_y = sample_inverse_wishart(ctx.sigma_y_df, &ctx.sigma_y_scale, rng)?;
    let nu2_prior = ctx.config.nu2_prior;
    let student = StudentT::new(nu2_prior.df).map_err(|e| Error::param(e.to_string()))?;
    let nu2 = nu2_prior.scale * student.sample(rng).abs();
    let l = sigma_y.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("Sigma_Y".into()))?.unpack();
    let mut xi = DMatrix::zeros(n, q);
    for i in 0..n {
        let row = &l * standard_normal_vector(q, rng) * nu2.sqrt();
        xi.set_row(i, &row.transpose());
    }
    let (mgp_lambda, lambda) = sample_mgp(q, h, ctx, rng)?;
    let gp = &ctx.gp[rng.random_range(0..ctx.gp.len())];
    let c_l = gp.chol.l();
    let mut u = vec![DMatrix::zeros(h, k); t];
    for hh in 0..h {
        for kk in 0..k {
            let curve = &c_l * standard_normal_vector(t, rng);
            for tt in 0..t {
                u[tt][(hh, kk)] = curve[tt];
            }
        }
    }
    let s = ctx.config.shrinkage;
    let mut shrink = |len: usize| -> Result<ShrinkageState> {
        let mut st = ShrinkageState::ones(len);
        for m in 0..len {
            st.zeta[m] = sample_gamma(s.v, ctx.shrink_rate, rng)?;
            st.psi[m] = sample_gamma(s.u, st.zeta[m], rng)?;
        }
        Ok(st)
    };
    let shrink_c = shrink(data.n_covariates)?;
    let shrink_in = shrink(data.interactions.len())?;
    let coef = |psi: f64, cols: usize, rng: &mut R| DMatrix::from_fn(q, cols, |_, _| rng.sample::<f64, _>(StandardNormal)) * psi.sqrt();
    let b_c = DMatrix::from_fn(q, data.n_covariates, |_, _| 0.0);
    let mut state = ParameterState {
        theta,
        sigma_x2: DVector::from_vec(sigma_x2),
        eta,
        xi,
        nu2,
        lambda,
        u,
        kappa: gp.kappa,
        b_c,
        b_in: Vec::new(),
        sigma_y,
        mgp_theta,
        mgp_lambda,
        shrink_c,
        shrink_in,
        x_imputed: Vec::new(),
        y_imputed: Vec::new(),
        mh_scales: DVector::from_element(n, 2.38f64.powi(2) / k as f64),
        nu2_scale: INITIAL_NU2_STEP,
    };
    for c in 0..data.n_covariates {
        let col = &l * coef(state.shrink_c.psi[c], 1, rng);
        state.b_c.set_column(c, &col.column(0));
    }
    for m in 0..data.interactions.len() {
        let b = &l * coef(state.shrink_in.psi[m], k, rng);
        state.b_in.push(b);
    }
    Ok(state)
}

/// Replace every exposure and outcome value in `data` with a draw from the
/// likelihood at `state`.
pub fn simulate_data<R: Rng + ?Sized>(state: &ParameterState, data: &mut ModelData, rng: &mut R) -> Result<()> {
    let fitted = &state.eta * state.theta.transpose();
    for j in 0..data.p() {
        let sd = state.sigma_x2[j].sqrt();
        for i in 0..data.n() {
            data.x[(i, j)] = fitted[(i, j)] + sd * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let l = state.sigma_y.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("Sigma_Y".into()))?.unpack();
    let b = state.b_all();
    let g = covariate_coefficients(state);
    for i in 0..data.n() {
        let eta_i = row_vec(&state.eta, i);
        let xi: DVector<f64> = state.xi.row(i).transpose();
        for idx in 0..data.obs[i].len() {
            let mean = fixed_mean(data, &b, &g, &eta_i, &data.obs[i][idx]) + &xi;
            let y = mean + &l * standard_normal_vector(data.q(), rng);
            data.obs[i][idx].y = y;
        }
    }
    Ok(())
}
