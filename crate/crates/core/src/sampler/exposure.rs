use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use super::model::{Context, ModelData};
use crate::data::MgpHyper;
use crate::error::{Error, Result};
use crate::kernels::sample_truncated_normal;
use crate::linalg::sample_gaussian_precision;
use crate::state::{MgpState, ParameterState};

/// Draw from a Gamma with the given shape and rate.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::param(format!("Gamma({shape}, {rate}): {e}")))?;
    Ok(g.sample(rng))
}

/// Exposure noise variances from their inverse-Gamma full conditionals.
pub fn update_sigma_x<R: Rng + ?Sized>(state: &mut ParameterState, data: &ModelData, ctx: &Context, rng: &mut R) -> Result<()> {
    let prior = ctx.config.sigma_x_prior;
    let n = data.n() as f64;
    let fitted = &state.eta * state.theta.transpose();
    for j in 0..data.p() {
        let ssr: f64 = data.x.column(j).iter().zip(fitted.column(j).iter()).map(|(x, f)| (x - f) * (x - f)).sum();
        let precision = sample_gamma(prior.shape + 0.5 * n, prior.rate + 0.5 * ssr, rng)?;
        state.sigma_x2[j] = 1.0 / precision;
    }
    Ok(())
}

/// Rows of Θ from their K-variate normal full conditionals.
pub fn update_theta<R: Rng + ?Sized>(state: &mut ParameterState, data: &ModelData, rng: &mut R) -> Result<()> {
    let k = state.n_factors();
    let ete = state.eta.tr_mul(&state.eta);
    let etx = state.eta.tr_mul(&data.x);
    for j in 0..data.p() {
        let s2 = state.sigma_x2[j];
        let mut precision = &ete / s2;
        for c in 0..k {
            precision[(c, c)] += state.mgp_theta.precision(j, c);
        }
        let linear: DVector<f64> = etx.column(j) / s2;
        let row = sample_gaussian_precision(&precision, &linear, rng, "exposure loading row")?;
        state.theta.set_row(j, &row.transpose());
    }
    Ok(())
}

/// MGP local and column precisions for a loading matrix.
pub fn update_mgp<R: Rng + ?Sized>(loadings: &DMatrix<f64>, mgp: &mut MgpState, hyper: &MgpHyper, rng: &mut R) -> Result<()> {
    let (rows, cols) = loadings.shape();
    for c in 0..cols {
        for j in 0..rows {
            let m = loadings[(j, c)];
            mgp.phi[(j, c)] = sample_gamma(0.5 * (hyper.v + 1.0), 0.5 * (hyper.v + mgp.tau[c] * m * m), rng)?;
        }
    }
    // weighted squared loadings per column
    let col_ss: Vec<f64> = (0..cols)
        .map(|c| (0..rows).map(|j| mgp.phi[(j, c)] * loadings[(j, c)] * loadings[(j, c)]).sum())
        .collect();
    for h in 0..cols {
        let mut ss = 0.0;
        for l in h..cols {
            ss += mgp.tau[l] / mgp.delta[h] * col_ss[l];
        }
        let a = if h == 0 { hyper.a1 } else { hyper.a2 };
        let shape = a + 0.5 * (rows * (cols - h)) as f64;
        mgp.delta[h] = sample_gamma(shape, 1.0 + 0.5 * ss, rng)?;
        mgp.recompute_tau();
    }
    Ok(())
}

/// Redraw every below-LOD exposure cell from its truncated normal.
pub fn impute_censored_exposures<R: Rng + ?Sized>(state: &ParameterState, data: &mut ModelData, rng: &mut R) -> Result<()> {
    for (i, j) in data.censored_cells() {
        let lod = data.lod[j].ok_or_else(|| Error::data(format!("column {j} has censored cells but no LOD")))?;
        let mean = state.theta.row(j).dot(&state.eta.row(i));
        data.x[(i, j)] = sample_truncated_normal(mean, state.sigma_x2[j], f64::NEG_INFINITY, lod, rng)?;
    }
    Ok(())
}
