use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;

/// Draw `Sigma ~ IW(df, scale)`, the law of `W^{-1}` for `W ~ Wishart(df, scale^{-1})`.
///
/// Uses the Bartlett decomposition with `M = L^{-T}` (`scale = L L^T`) as the
/// square root of `scale^{-1}`, so `Sigma = (L A^{-T}) (L A^{-T})^T` is SPD by
/// construction.
pub fn sample_inverse_wishart<R: Rng + ?Sized>(
    df: f64,
    scale: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let q = scale.nrows();
    if !scale.is_square() || q == 0 {
        return Err(Error::dims(format!(
            "inverse-Wishart scale must be square, got {}x{}",
            scale.nrows(),
            scale.ncols()
        )));
    }
    // df >= q keeps every Bartlett chi-square at one or more degrees of freedom
    if !(df >= q as f64) || !df.is_finite() {
        return Err(Error::param(format!(
            "inverse-Wishart degrees of freedom {df} must be at least the dimension {q}"
        )));
    }
    let l = nalgebra::Cholesky::new(scale.clone())
        .ok_or_else(|| Error::param("inverse-Wishart scale is not symmetric positive definite"))?
        .unpack();
    let mut bartlett = DMatrix::<f64>::zeros(q, q);
    for i in 0..q {
        let chi = ChiSquared::new(df - i as f64).map_err(|e| Error::param(e.to_string()))?;
        bartlett[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            bartlett[(i, j)] = rng.sample(StandardNormal);
        }
    }
    // A^{-T} is upper triangular; solve A^T X = I
    let a_inv_t = bartlett
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(q, q))
        .ok_or_else(|| Error::param("degenerate Bartlett factor"))?;
    let root = l * a_inv_t;
    let mut sigma = &root * root.transpose();
    symmetrize(&mut sigma);
    Ok(sigma)
}

/// Draw `M + R Z C^T` with `R R^T = row_cov`, `C C^T = col_cov`, `Z` iid N(0,1);
/// `vec` of the draw has covariance `col_cov ⊗ row_cov`.
pub fn sample_matrix_normal<R: Rng + ?Sized>(
    mean: &DMatrix<f64>,
    row_cov: &DMatrix<f64>,
    col_cov: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (q, l) = mean.shape();
    if row_cov.shape() != (q, q) || col_cov.shape() != (l, l) {
        return Err(Error::dims(format!(
            "matrix normal mean {q}x{l} with row covariance {:?} and column covariance {:?}",
            row_cov.shape(),
            col_cov.shape()
        )));
    }
    let r = nalgebra::Cholesky::new(row_cov.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("matrix normal row covariance".into()))?
        .unpack();
    let c = nalgebra::Cholesky::new(col_cov.clone())
        .ok_or_else(|| Error::NotPositiveDefinite("matrix normal column covariance".into()))?
        .unpack();
    Ok(matrix_normal_from_factors(mean, &r, &c, rng))
}

pub(crate) fn matrix_normal_from_factors<R: Rng + ?Sized>(
    mean: &DMatrix<f64>,
    row_factor: &DMatrix<f64>,
    col_factor: &DMatrix<f64>,
    rng: &mut R,
) -> DMatrix<f64> {
    let (q, l) = mean.shape();
    let z = DMatrix::from_fn(q, l, |_, _| rng.sample::<f64, _>(StandardNormal));
    mean + row_factor * z * col_factor.transpose()
}
