//! Moment checks of every random-variate generator against analytic or
//! quadrature oracles.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use tvfactor::kernels::*;
use tvfactor::RngStream;

use super::quadrature::{moments_on, positive_moments};
use super::{mean_var, Check};

const DRAWS: usize = 100_000;

pub fn truncated_normal_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = RngStream::new(101, 0).rng();

    let xs: Vec<f64> = (0..DRAWS)
        .map(|_| sample_truncated_normal(0.0, 1.0, f64::NEG_INFINITY, 0.0, &mut rng).unwrap())
        .collect();
    let (m, _) = mean_var(&xs);
    out.push(Check::within("truncnorm half-normal mean", m, -(2.0 / std::f64::consts::PI).sqrt(), 0.01));

    let xs: Vec<f64> = (0..DRAWS)
        .map(|_| sample_truncated_normal(5.0, 4.0, f64::NEG_INFINITY, f64::INFINITY, &mut rng).unwrap())
        .collect();
    let (m, v) = mean_var(&xs);
    out.push(Check::within("truncnorm untruncated mean", m, 5.0, 0.03));
    out.push(Check::relative("truncnorm untruncated variance", v, 4.0, 0.02));

    let xs: Vec<f64> = (0..DRAWS)
        .map(|_| sample_truncated_normal(0.0, 1.0, 7.0, 8.0, &mut rng).unwrap())
        .collect();
    let inside = xs.iter().all(|x| (7.0..=8.0).contains(x));
    out.push(Check::new("truncnorm [7,8] support", inside, format!("{} draws", xs.len())));
    let (m, _) = mean_var(&xs);
    let (qm, _) = moments_on(|x| -0.5 * x * x, 7.0, 8.0, 20_000);
    out.push(Check::within("truncnorm [7,8] mean vs quadrature", m, qm, 0.01));
    out
}

pub fn gig_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = RngStream::new(102, 0).rng();
    let draws = |p: f64, a: f64, b: f64, rng: &mut tvfactor::rng::StreamRng| -> Vec<f64> {
        let g = GigParams::new(p, a, b).unwrap();
        (0..DRAWS).map(|_| sample_gig(g, rng).unwrap()).collect()
    };

    let (m, _) = mean_var(&draws(3.0, 4.0, 0.0, &mut rng));
    out.push(Check::within("GIG(3,4,0) gamma-limit mean", m, 1.5, 0.02));

    let gig_log = |p: f64, a: f64, b: f64| move |y: f64| (p - 1.0) * y.ln() - 0.5 * (a * y + b / y);

    let (m, _) = mean_var(&draws(-0.5, 1.0, 1.0, &mut rng));
    let (qm, _) = positive_moments(gig_log(-0.5, 1.0, 1.0), -30.0, 8.0, 40_000);
    out.push(Check::relative("GIG(-0.5,1,1) mean vs quadrature", m, qm, 0.01));

    let (_, v) = mean_var(&draws(0.5, 2.0, 3.0, &mut rng));
    let (_, qv) = positive_moments(gig_log(0.5, 2.0, 3.0), -30.0, 8.0, 40_000);
    out.push(Check::relative("GIG(0.5,2,3) variance vs quadrature", v, qv, 0.02));
    out
}

pub fn inverse_wishart_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = RngStream::new(103, 0).rng();
    let mut sum = DMatrix::<f64>::zeros(3, 3);
    for _ in 0..DRAWS {
        sum += sample_inverse_wishart(10.0, &DMatrix::identity(3, 3), &mut rng).unwrap();
    }
    let mean = sum / DRAWS as f64;
    let target = DMatrix::<f64>::identity(3, 3) / 6.0;
    let worst = (&mean - &target).abs().max();
    out.push(Check::new(
        "IW(10, I3) mean = I/6",
        worst <= 0.02,
        format!("max elementwise deviation {worst:.5}"),
    ));

    // sample covariance of four correlated outcomes
    let mut data_rng = RngStream::new(103, 1).rng();
    let mix = DMatrix::from_row_slice(4, 4, &[1.0, 0.0, 0.0, 0.0, 0.8, 0.6, 0.0, 0.0, 0.7, 0.3, 0.5, 0.0, 0.2, 0.1, 0.1, 0.9]);
    let n = 300;
    let obs: Vec<DVector<f64>> = (0..n)
        .map(|_| &mix * DVector::from_fn(4, |_, _| data_rng.sample::<f64, _>(StandardNormal)))
        .collect();
    let mbar = obs.iter().fold(DVector::zeros(4), |a, x| a + x) / n as f64;
    let s0 = obs.iter().fold(DMatrix::zeros(4, 4), |a, x| a + (x - &mbar) * (x - &mbar).transpose()) / (n - 1) as f64;
    let all_spd = (0..10_000).all(|_| {
        let d = sample_inverse_wishart(6.0, &s0, &mut rng).unwrap();
        nalgebra::Cholesky::new(d).is_some()
    });
    out.push(Check::new("IW(6, sample cov) draws SPD", all_spd, "10000 draws"));

    let err = sample_inverse_wishart(3.5, &DMatrix::identity(4, 4), &mut rng).is_err();
    out.push(Check::new("IW(3.5, I4) rejected", err, ""));
    out
}

pub fn matrix_normal_checks() -> Vec<Check> {
    let mut out = Vec::new();
    let mut rng = RngStream::new(104, 0).rng();

    let zero = DMatrix::zeros(2, 3);
    let mut sq = DMatrix::<f64>::zeros(2, 3);
    for _ in 0..DRAWS {
        let d = sample_matrix_normal(&zero, &DMatrix::identity(2, 2), &DMatrix::identity(3, 3), &mut rng).unwrap();
        sq += d.component_mul(&d);
    }
    let worst = (sq / DRAWS as f64).add_scalar(-1.0).abs().max();
    out.push(Check::new("MN(0, I2, I3) unit variances", worst <= 0.02, format!("max deviation {worst:.5}")));

    let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 3.0]);
    let sigma = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
    let psi = DMatrix::from_row_slice(2, 2, &[1.5, -0.4, -0.4, 0.8]);
    let target = psi.kronecker(&sigma);
    let mut mean = DVector::<f64>::zeros(4);
    let mut second = DMatrix::<f64>::zeros(4, 4);
    for _ in 0..DRAWS {
        let d = sample_matrix_normal(&m, &sigma, &psi, &mut rng).unwrap();
        let v = DVector::from_column_slice(d.as_slice());
        mean += &v;
        second += &v * v.transpose();
    }
    mean /= DRAWS as f64;
    let cov = second / DRAWS as f64 - &mean * mean.transpose();
    let rel = (&cov - &target).norm() / target.norm();
    out.push(Check::new("MN(M, Σ, Ψ) covariance = Ψ⊗Σ", rel <= 0.02, format!("relative Frobenius error {rel:.5}")));
    let mean_err = (mean - DVector::from_column_slice(m.as_slice())).abs().max();
    out.push(Check::new("MN(M, Σ, Ψ) mean", mean_err <= 0.02, format!("max deviation {mean_err:.5}")));

    let zero = DMatrix::zeros(2, 1);
    let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
    let xs: Vec<DMatrix<f64>> = (0..DRAWS)
        .map(|_| sample_matrix_normal(&zero, &diag, &DMatrix::identity(1, 1), &mut rng).unwrap())
        .collect();
    let v0 = xs.iter().map(|d| d[(0, 0)] * d[(0, 0)]).sum::<f64>() / DRAWS as f64;
    let v1 = xs.iter().map(|d| d[(1, 0)] * d[(1, 0)]).sum::<f64>() / DRAWS as f64;
    out.push(Check::relative("MN diag(4,1) row 1 variance", v0, 4.0, 0.02));
    out.push(Check::relative("MN diag(4,1) row 2 variance", v1, 1.0, 0.02));
    out
}

pub fn gp_checks() -> Vec<Check> {
    let grid: Vec<f64> = (1..=10).map(f64::from).collect();
    let raw = gp_kernel_matrix(&grid, 6.0, 0.0).unwrap();
    let unit = (0..10).all(|r| raw[(r, r)] == 1.0);
    let lag = gp_kernel_matrix(&[2.0, 8.0], 6.0, 0.0).unwrap()[(0, 1)];
    let jittered = gp_kernel_matrix(&grid, 6.0, DEFAULT_GP_JITTER).unwrap();
    let min_eig = jittered.symmetric_eigen().eigenvalues.min();
    vec![
        Check::new("GP kernel unit diagonal", unit, ""),
        Check::within("GP kernel at lag = κ", lag, 0.60653, 1e-5),
        Check::new("GP kernel jittered min eigenvalue > 0", min_eig > 0.0, format!("{min_eig:e}")),
    ]
}

pub fn categorical_checks() -> Vec<Check> {
    let mut rng = RngStream::new(105, 0).rng();
    let c = 3.7;
    let first = (0..DRAWS)
        .filter(|_| sample_categorical_index(&[c, c], &mut rng).unwrap() == 0)
        .count() as f64
        / DRAWS as f64;
    let always = (0..10_000).all(|_| sample_categorical_index(&[0.0, f64::NEG_INFINITY], &mut rng).unwrap() == 0);
    let second = (0..DRAWS)
        .filter(|_| sample_categorical_index(&[1f64.ln(), 3f64.ln()], &mut rng).unwrap() == 1)
        .count() as f64
        / DRAWS as f64;
    vec![
        Check::within("categorical symmetric", first, 0.5, 0.01),
        Check::new("categorical degenerate", always, ""),
        Check::within("categorical (ln1, ln3)", second, 0.75, 0.01),
    ]
}

pub fn all() -> Vec<Check> {
    let mut out = truncated_normal_checks();
    out.extend(gig_checks());
    out.extend(inverse_wishart_checks());
    out.extend(matrix_normal_checks());
    out.extend(gp_checks());
    out.extend(categorical_checks());
    out
}
