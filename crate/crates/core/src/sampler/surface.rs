use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::model::{covariate_coefficients, row_vec, Context, ModelData};
use crate::error::{Error, Result};
use crate::kernels::sample_categorical_index;
use crate::linalg::sample_gaussian_precision;
use crate::state::ParameterState;

/// `Y_it - ξ_i - G w_it`: the part of each outcome vector left for `B(t) η_i`.
fn surface_responses(state: &ParameterState, data: &ModelData) -> Vec<Vec<DVector<f64>>> {
    let g = covariate_coefficients(state);
    (0..data.n())
        .map(|i| {
            let eta_i = row_vec(&state.eta, i);
            let xi = state.xi.row(i).transpose();
            data.obs[i]
                .iter()
                .map(|o| {
                    let mut r = &o.y - &xi;
                    if g.ncols() > 0 {
                        r -= &g * data.design(o, &eta_i);
                    }
                    r
                })
                .collect()
        })
        .collect()
}

fn sigma_y_inverse(state: &ParameterState) -> Result<DMatrix<f64>> {
    Ok(state.sigma_y.clone().cholesky().ok_or_else(|| Error::NotPositiveDefinite("Sigma_Y".into()))?.inverse())
}

/// Λ drawn jointly (vec(Λ) is only qH long) given U, η and ξ.
pub fn update_lambda<R: Rng + ?Sized>(state: &mut ParameterState, data: &ModelData, rng: &mut R) -> Result<()> {
    let (q, h) = state.lambda.shape();
    let responses = surface_responses(state, data);
    let sinv = sigma_y_inverse(state)?;
    let mut sww = DMatrix::zeros(h, h);
    let mut srw = DMatrix::zeros(q, h);
    for i in 0..data.n() {
        let eta_i = state.eta.row(i).transpose();
        for (o, r) in data.obs[i].iter().zip(&responses[i]) {
            let w = &state.u[o.t] * &eta_i;
            sww += &w * w.transpose();
            srw += r * w.transpose();
        }
    }
    let dim = q * h;
    let mut precision = sww.kronecker(&sinv);
    for c in 0..h {
        for j in 0..q {
            precision[(c * q + j, c * q + j)] += state.mgp_lambda.precision(j, c);
        }
    }
    let lin_m = &sinv * srw;
    let linear = DVector::from_column_slice(lin_m.as_slice());
    let draw = sample_gaussian_precision(&precision, &linear, rng, "basis loadings")?;
    debug_assert_eq!(draw.len(), dim);
    state.lambda = DMatrix::from_column_slice(q, h, draw.as_slice());
    Ok(())
}

/// Each basis curve `u_(hk)` over the grid from its Gaussian full conditional.
pub fn update_basis<R: Rng + ?Sized>(state: &mut ParameterState, data: &ModelData, ctx: &Context, rng: &mut R) -> Result<()> {
    let t_len = data.grid_len();
    let (h_dim, k_dim) = (state.n_basis(), state.n_factors());
    let gp = &ctx.gp[ctx.gp_index(state.kappa)?];
    let sinv = sigma_y_inverse(state)?;
    // full residuals Y - ξ - G w - B(t) η
    let mut resid = surface_responses(state, data);
    let b = state.b_all();
    for i in 0..data.n() {
        let eta_i = state.eta.row(i).transpose();
        for (o, r) in data.obs[i].iter().zip(resid[i].iter_mut()) {
            *r -= &b[o.t] * &eta_i;
        }
    }
    for h in 0..h_dim {
        let lam = state.lambda.column(h).into_owned();
        let g = &sinv * &lam;
        let a = lam.dot(&g);
        for k in 0..k_dim {
            let mut d = DVector::<f64>::zeros(t_len);
            let mut m = DVector::<f64>::zeros(t_len);
            for i in 0..data.n() {
                let e = state.eta[(i, k)];
                for (o, r) in data.obs[i].iter().zip(resid[i].iter_mut()) {
                    let old = state.u[o.t][(h, k)];
                    r.axpy(e * old, &lam, 1.0);
                    d[o.t] += e * e * a;
                    m[o.t] += e * g.dot(r);
                }
            }
            let mut precision = gp.inverse.clone();
            for t in 0..t_len {
                precision[(t, t)] += d[t];
            }
            let curve = sample_gaussian_precision(&precision, &m, rng, "basis curve")?;
            for t in 0..t_len {
                state.u[t][(h, k)] = curve[t];
            }
            for i in 0..data.n() {
                let e = state.eta[(i, k)];
                for (o, r) in data.obs[i].iter().zip(resid[i].iter_mut()) {
                    r.axpy(-e * curve[o.t], &lam, 1.0);
                }
            }
        }
    }
    Ok(())
}

/// Log likelihood of all basis curves under each length scale on the grid.
pub fn kappa_log_likelihoods(state: &ParameterState, ctx: &Context) -> Vec<f64> {
    let curves: Vec<DVector<f64>> = (0..state.n_basis())
        .flat_map(|h| (0..state.n_factors()).map(move |k| (h, k)))
        .map(|(h, k)| state.basis_curve(h, k))
        .collect();
    ctx.gp.iter().map(|gp| curves.iter().map(|u| gp.log_density(u)).sum()).collect()
}

/// κ from its discrete full conditional; a single-point grid keeps it fixed.
pub fn update_kappa<R: Rng + ?Sized>(state: &mut ParameterState, ctx: &Context, rng: &mut R) -> Result<()> {
    if ctx.gp.len() == 1 {
        state.kappa = ctx.gp[0].kappa;
        return Ok(());
    }
    let ll = kappa_log_likelihoods(state, ctx);
    state.kappa = ctx.gp[sample_categorical_index(&ll, rng)?].kappa;
    Ok(())
}
