//! Small dense linear-algebra helpers shared by the samplers.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Cholesky factor of `m`, retrying with diagonal jitter `start, 10*start, ...`
/// up to `max` when the plain factorization fails.
pub fn cholesky_jittered(m: &DMatrix<f64>, start: f64, max: f64) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let mut jitter = start;
    while jitter <= max * (1.0 + 1e-12) {
        let mut a = m.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(a) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite(format!(
        "{}x{} matrix, jitter up to {max:e}",
        m.nrows(),
        m.ncols()
    )))
}

pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn is_spd(m: &DMatrix<f64>) -> bool {
    m.is_square() && Cholesky::new(m.clone()).is_some()
}

pub fn standard_normal_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Draw from `N(P^{-1} b, P^{-1})` given the precision `P` and linear term `b`.
pub fn sample_gaussian_precision<R: Rng + ?Sized>(
    precision: &DMatrix<f64>,
    linear: &DVector<f64>,
    rng: &mut R,
    what: &str,
) -> Result<DVector<f64>> {
    let chol = match Cholesky::new(precision.clone()) {
        Some(c) => c,
        None => cholesky_jittered(precision, 1e-10, 1e-10)
            .map_err(|_| Error::NotPositiveDefinite(what.to_string()))?,
    };
    Ok(gaussian_from_precision_factor(&chol, linear, rng))
}

pub fn gaussian_from_precision_factor<R: Rng + ?Sized>(
    chol: &Cholesky<f64, Dyn>,
    linear: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let mean = chol.solve(linear);
    let z = standard_normal_vector(linear.len(), rng);
    // L^T x = z  gives  Cov(x) = (L L^T)^{-1}
    let l = chol.l();
    let x = l
        .transpose()
        .solve_upper_triangular(&z)
        .expect("cholesky factor has a positive diagonal");
    mean + x
}

/// `log |A|` from a Cholesky factor.
pub fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// `x^T A^{-1} x` from a Cholesky factor of `A`.
pub fn inv_quad(chol: &Cholesky<f64, Dyn>, x: &DVector<f64>) -> f64 {
    let y = chol
        .l_dirty()
        .solve_lower_triangular(x)
        .expect("cholesky factor has a positive diagonal");
    y.norm_squared()
}

/// Rows `idx` and columns `jdx` of `m`.
pub fn submatrix(m: &DMatrix<f64>, idx: &[usize], jdx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), jdx.len(), |r, c| m[(idx[r], jdx[c])])
}
