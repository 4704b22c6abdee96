use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Diagonal jitter added to squared-exponential Gram matrices before factorization.
pub const DEFAULT_GP_JITTER: f64 = 1e-8;

/// Squared-exponential correlation `exp(-0.5 ((t - t') / length_scale)^2)`.
pub fn se_kernel(t: f64, s: f64, length_scale: f64) -> f64 {
    let d = (t - s) / length_scale;
    (-0.5 * d * d).exp()
}

/// Gram matrix of the squared-exponential kernel on `grid`, with `jitter`
/// added to the diagonal.
pub fn gp_kernel_matrix(grid: &[f64], length_scale: f64, jitter: f64) -> Result<DMatrix<f64>> {
    if !(length_scale > 0.0) || !length_scale.is_finite() {
        return Err(Error::param(format!("length scale must be positive, got {length_scale}")));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::data("GP grid contains duplicate time points"));
    }
    let t = grid.len();
    let mut c = DMatrix::from_fn(t, t, |r, s| se_kernel(grid[r], grid[s], length_scale));
    for r in 0..t {
        c[(r, r)] += jitter;
    }
    Ok(c)
}

/// Default length-scale grid: 8 log-spaced values spanning
/// `[range / 10, 2 * range]` of the time grid.
pub fn default_kappa_grid(grid: &[f64]) -> Vec<f64> {
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = if hi > lo { hi - lo } else { 1.0 };
    let (a, b) = ((range / 10.0).ln(), (2.0 * range).ln());
    (0..8).map(|i| (a + (b - a) * i as f64 / 7.0).exp()).collect()
}
