use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::model::{covariate_coefficients, fixed_mean, row_vec, ModelData};
use crate::error::Result;
use crate::linalg::{cholesky_jittered, standard_normal_vector, submatrix};
use crate::state::ParameterState;

/// Mean and covariance of the missing block of `N(mean, cov)` given the
/// observed block `y[!missing]`.
pub fn conditional_normal(mean: &DVector<f64>, cov: &DMatrix<f64>, y: &DVector<f64>, missing: &[bool]) -> (DVector<f64>, DMatrix<f64>) {
    let mis: Vec<usize> = (0..missing.len()).filter(|&j| missing[j]).collect();
    let obs: Vec<usize> = (0..missing.len()).filter(|&j| !missing[j]).collect();
    let mu_m = DVector::from_iterator(mis.len(), mis.iter().map(|&j| mean[j]));
    let s_mm = submatrix(cov, &mis, &mis);
    if obs.is_empty() {
        return (mu_m, s_mm);
    }
    let s_mo = submatrix(cov, &mis, &obs);
    let s_oo = submatrix(cov, &obs, &obs);
    let diff = DVector::from_iterator(obs.len(), obs.iter().map(|&j| y[j] - mean[j]));
    let chol = s_oo.cholesky().expect("covariance blocks of an SPD matrix are SPD");
    let m = mu_m + &s_mo * chol.solve(&diff);
    let v = s_mm - &s_mo * chol.solve(&s_mo.transpose());
    (m, v)
}

/// Redraw every missing outcome cell from its conditional normal given the
/// observed cells at the same follow-up. With `simple` the mean is
/// `B(t) η_i` alone; otherwise it includes interactions, covariates and ξ_i.
pub fn impute_missing_outcomes<R: Rng + ?Sized>(state: &ParameterState, data: &mut ModelData, simple: bool, rng: &mut R) -> Result<()> {
    let b = state.b_all();
    let g = covariate_coefficients(state);
    for i in 0..data.n() {
        if !data.obs[i].iter().any(|o| o.missing.iter().any(|m| *m)) {
            continue;
        }
        let eta_i = row_vec(&state.eta, i);
        let eta = DVector::from_column_slice(&eta_i);
        for idx in 0..data.obs[i].len() {
            let o = &data.obs[i][idx];
            if !o.missing.iter().any(|m| *m) {
                continue;
            }
            let mean = if simple {
                &b[o.t] * &eta
            } else {
                fixed_mean(data, &b, &g, &eta_i, o) + state.xi.row(i).transpose()
            };
            let (m, v) = conditional_normal(&mean, &state.sigma_y, &o.y, &o.missing);
            let l = cholesky_jittered(&v, 1e-12, 1e-8)?.unpack();
            let draw = m + l * standard_normal_vector(v.nrows(), rng);
            let o = &mut data.obs[i][idx];
            let mut it = draw.iter();
            for j in 0..o.missing.len() {
                if o.missing[j] {
                    o.y[j] = *it.next().expect("one draw per missing cell");
                }
            }
        }
    }
    Ok(())
}
