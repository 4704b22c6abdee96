use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::model::{Context, ModelData};
use crate::error::Result;
use crate::state::{MgpState, ParameterState, ShrinkageState};

pub const INITIAL_NU2_STEP: f64 = 0.3;
const INITIAL_LOADING_SD: f64 = 0.1;

/// Starting point of a chain: loadings and factors from the SVD of X,
/// Σ_Y at the outcome sample covariance, small random surface.
pub fn initial_state<R: Rng + ?Sized>(data: &ModelData, ctx: &Context, rng: &mut R) -> Result<ParameterState> {
    let (n, p, q) = (data.n(), data.p(), data.q());
    let (k, h, t) = (ctx.k(), ctx.h(), data.grid_len());
    let mut theta = DMatrix::zeros(p, k);
    let mut eta = DMatrix::zeros(n, k);
    if n > 0 {
        let svd = data.x.clone().svd(true, true);
        let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        let root_n = (n as f64).sqrt();
        for c in 0..k.min(svd.singular_values.len()) {
            let s = svd.singular_values[c];
            for j in 0..p {
                theta[(j, c)] = vt[(c, j)] * s / root_n;
            }
            for i in 0..n {
                eta[(i, c)] = u[(i, c)] * root_n;
            }
        }
    }
    let resid = &data.x - &eta * theta.transpose();
    let sigma_x2 = DVector::from_iterator(
        p,
        (0..p).map(|j| {
            let v = if n > 1 { resid.column(j).norm_squared() / (n - 1) as f64 } else { 1.0 };
            v.clamp(0.05, 1.0)
        }),
    );

    let mut small = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| INITIAL_LOADING_SD * rng.sample::<f64, _>(StandardNormal));
    let lambda = small(q, h);
    let u = (0..t).map(|_| small(h, k)).collect();

    let mut grid = ctx.kappa_grid();
    grid.sort_by(f64::total_cmp);
    let kappa = grid[grid.len() / 2];

    // proposals are preconditioned by the conditional precision
    let eta_scale = 2.38f64.powi(2) / k as f64;

    let n_in = data.interactions.len();
    let mut state = ParameterState {
        theta,
        sigma_x2,
        eta,
        xi: DMatrix::zeros(n, q),
        nu2: 1.0,
        lambda,
        u,
        kappa,
        b_c: DMatrix::zeros(q, data.n_covariates),
        b_in: vec![DMatrix::zeros(q, k); n_in],
        sigma_y: data.outcome_sample_covariance(),
        mgp_theta: MgpState::ones(p, k),
        mgp_lambda: MgpState::ones(q, h),
        shrink_c: ShrinkageState::ones(data.n_covariates),
        shrink_in: ShrinkageState::ones(n_in),
        x_imputed: Vec::new(),
        y_imputed: Vec::new(),
        mh_scales: DVector::from_element(n, eta_scale),
        nu2_scale: INITIAL_NU2_STEP,
    };
    data.store_imputed(&mut state);
    Ok(state)
}
