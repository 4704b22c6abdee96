//! One-dimensional full conditionals checked against quadrature oracles
//! computed from the model densities written out independently.

use nalgebra::DVector;
use tvfactor::data::{validate_and_preprocess, KappaMode, ModelConfig, PreprocessOptions};
use tvfactor::kernels::gp_kernel_matrix;
use tvfactor::sampler::{Context, update_kappa, update_nu2, update_sigma_x, update_theta, xi_quadratic, Sampler};
use tvfactor::simulate::{generate_scenario, Scenario};
use tvfactor::RngStream;

use super::quadrature::{moments_on, positive_moments};
use super::{chain_summary, mean_var, Check};

const DRAWS: usize = 200_000;
const REL_TOL: f64 = 0.02;

/// A single-factor chain on simulated data, advanced past its start.
pub fn warmed_sampler() -> Sampler {
    let ds = generate_scenario(Scenario::Linear, 60, 1, 5).unwrap();
    let panels = validate_and_preprocess(&ds.train.exposures, &ds.train.outcomes, None, &PreprocessOptions::default()).unwrap();
    let mut config = ModelConfig { k: 1, h: 1, ..Default::default() };
    config.kappa_mode = KappaMode::Grid(vec![1.0, 2.0, 4.0, 8.0]);
    config.chain.seed = 19;
    let mut s = Sampler::new(&config, &panels).unwrap();
    for _ in 0..300 {
        s.step().unwrap();
    }
    s
}

fn pair(name: &str, got: (f64, f64), want: (f64, f64)) -> Vec<Check> {
    vec![
        Check::relative(format!("{name} mean"), got.0, want.0, REL_TOL),
        Check::relative(format!("{name} variance"), got.1, want.1, REL_TOL),
    ]
}

pub fn sigma_x_checks(s: &Sampler) -> Vec<Check> {
    let j = 1;
    let prior = s.ctx.config.sigma_x_prior;
    let x: Vec<f64> = s.data.x.column(j).iter().copied().collect();
    let fit: Vec<f64> = (0..x.len()).map(|i| s.state.theta[(j, 0)] * s.state.eta[(i, 0)]).collect();
    let ssr: f64 = x.iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum();
    let n = x.len() as f64;
    // inverse-gamma prior on the variance times the Gaussian likelihood
    let log_density = |v: f64| -(prior.shape + 1.0) * v.ln() - prior.rate / v - 0.5 * n * v.ln() - 0.5 * ssr / v;
    let want = positive_moments(log_density, -8.0, 4.0, 40_000);
    let mut state = s.state.clone();
    let mut rng = RngStream::new(201, 0).rng();
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| {
            update_sigma_x(&mut state, &s.data, &s.ctx, &mut rng).unwrap();
            state.sigma_x2[j]
        })
        .collect();
    pair("sigma_x2 conditional", mean_var(&draws), want)
}

pub fn theta_checks(s: &Sampler) -> Vec<Check> {
    let j = 2;
    let tau = s.state.mgp_theta.precision(j, 0);
    let s2 = s.state.sigma_x2[j];
    let x: Vec<f64> = s.data.x.column(j).iter().copied().collect();
    let eta: Vec<f64> = s.state.eta.column(0).iter().copied().collect();
    let log_density = |th: f64| -0.5 * tau * th * th - x.iter().zip(&eta).map(|(a, e)| (a - th * e).powi(2)).sum::<f64>() / (2.0 * s2);
    let want = moments_on(log_density, -10.0, 10.0, 40_000);
    let mut state = s.state.clone();
    let mut rng = RngStream::new(202, 0).rng();
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| {
            update_theta(&mut state, &s.data, &mut rng).unwrap();
            state.theta[(j, 0)]
        })
        .collect();
    // the mean can sit near zero, so compare it on the posterior SD scale
    let (m, v) = mean_var(&draws);
    vec![
        Check::within("theta conditional mean (in SDs)", (m - want.0) / want.1.sqrt(), 0.0, REL_TOL),
        Check::relative("theta conditional variance", v, want.1, REL_TOL),
    ]
}

pub fn nu2_checks(s: &Sampler) -> Vec<Check> {
    let quad = xi_quadratic(&s.state).unwrap();
    let (n, q) = (s.data.n() as f64, s.data.q() as f64);
    let prior = s.ctx.config.nu2_prior;
    // half-t prior on ν² times N(0, ν² Σ_Y) for every ξ_i
    let log_density = |v: f64| -(prior.df + 1.0) / 2.0 * (1.0 + (v / prior.scale).powi(2) / prior.df).ln() - 0.5 * n * q * v.ln() - 0.5 * quad / v;
    let want = positive_moments(log_density, -8.0, 6.0, 40_000);
    let mut state = s.state.clone();
    state.nu2_scale = 2.38 / (0.5 * n * q).sqrt();
    let mut rng = RngStream::new(203, 0).rng();
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| {
            update_nu2(&mut state, &s.data, &s.ctx, &mut rng).unwrap();
            state.nu2
        })
        .collect();
    let (m, v, _) = chain_summary(&draws, 50);
    pair("nu2 conditional", (m, v), want)
}

pub fn kappa_checks(s: &Sampler) -> Vec<Check> {
    // a rough curve keeps the conditional spread over the whole grid
    let mut config = s.ctx.config.clone();
    config.kappa_mode = KappaMode::Grid(vec![0.4, 0.5, 0.6, 0.8]);
    let ctx = Context::new(&config, &s.data).unwrap();
    let grid = ctx.kappa_grid();
    let u = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.2, 0.0, -0.3, 0.4, -0.1]);
    let mut state = s.state.clone();
    state.kappa = grid[0];
    for t in 0..u.len() {
        state.u[t][(0, 0)] = u[t];
    }
    let logp: Vec<f64> = grid
        .iter()
        .map(|&k| {
            let c = gp_kernel_matrix(&s.data.grid, k, config.gp_jitter).unwrap();
            let lu = c.clone().lu();
            let sol = lu.solve(&u).unwrap();
            -0.5 * c.determinant().ln() - 0.5 * u.dot(&sol)
        })
        .collect();
    let mx = logp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logp.iter().map(|l| (l - mx).exp()).collect();
    let z: f64 = w.iter().sum();
    let m: f64 = grid.iter().zip(&w).map(|(k, w)| k * w).sum::<f64>() / z;
    let v: f64 = grid.iter().zip(&w).map(|(k, w)| (k - m).powi(2) * w).sum::<f64>() / z;
    let mut rng = RngStream::new(204, 0).rng();
    let draws: Vec<f64> = (0..DRAWS)
        .map(|_| {
            update_kappa(&mut state, &ctx, &mut rng).unwrap();
            state.kappa
        })
        .collect();
    let mut out = pair("kappa conditional", mean_var(&draws), (m, v));
    out.push(Check::new("kappa conditional spread over the grid", w.iter().all(|x| x / z > 0.05), format!("oracle probabilities {:?}", w.iter().map(|x| x / z).collect::<Vec<_>>())));
    out
}
