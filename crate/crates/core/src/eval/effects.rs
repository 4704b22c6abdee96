use nalgebra::{DMatrix, DVector};

/// The map `A = (Θᵀ Σ_X⁻¹ Θ + I)⁻¹ Θᵀ Σ_X⁻¹` with `E[η | X] = A X` (K x p).
pub fn posterior_factor_map(theta: &DMatrix<f64>, sigma_x2: &DVector<f64>) -> DMatrix<f64> {
    let k = theta.ncols();
    let mut tw = theta.transpose();
    for j in 0..tw.ncols() {
        tw.column_mut(j).scale_mut(1.0 / sigma_x2[j]);
    }
    let inner = &tw * theta + DMatrix::identity(k, k);
    let chol = inner.cholesky().expect("ΘᵀΣ⁻¹Θ + I is positive definite");
    chol.solve(&tw)
}

/// Exposure-space effects `B(t) A` at every grid time (q x p each).
pub fn induced_exposure_effects(theta: &DMatrix<f64>, sigma_x2: &DVector<f64>, b: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let a = posterior_factor_map(theta, sigma_x2);
    b.iter().map(|bt| bt * &a).collect()
}
