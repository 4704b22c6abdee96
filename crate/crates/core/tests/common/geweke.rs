//! Joint-distribution ("getting it right") check: moments of the prior
//! against moments along a chain that alternates sampler sweeps with fresh
//! data drawn from the likelihood.

use tvfactor::sampler::{sample_prior, simulate_data, Context, ModelData, Sampler};
use tvfactor::state::ParameterState;
use tvfactor::RngStream;

use super::{chain_summary, mean_var};

/// Bounded or log-transformed summaries with finite variance under the prior.
pub fn statistics(s: &ParameterState, ctx: &Context) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    for j in 0..s.theta.nrows() {
        out.push((format!("atan theta[{j}]"), s.theta[(j, 0)].atan()));
        out.push((format!("atan theta[{j}]^2"), s.theta[(j, 0)].powi(2).atan()));
        out.push((format!("log sigma_x2[{j}]"), s.sigma_x2[j].ln()));
    }
    out.push(("log delta_theta".into(), s.mgp_theta.delta[0].ln()));
    out.push(("log nu2".into(), s.nu2.ln()));
    out.push(("log sigma_y[0,0]".into(), s.sigma_y[(0, 0)].ln()));
    out.push(("log sigma_y[1,1]".into(), s.sigma_y[(1, 1)].ln()));
    let corr = s.sigma_y[(0, 1)] / (s.sigma_y[(0, 0)] * s.sigma_y[(1, 1)]).sqrt();
    out.push(("sigma_y correlation".into(), corr));
    let grid = ctx.kappa_grid();
    out.push(("kappa index".into(), grid.iter().position(|k| *k == s.kappa).unwrap() as f64));
    for t in 0..s.u.len() {
        let b = s.b_at(t);
        for o in 0..b.nrows() {
            out.push((format!("atan B[{o}]({t})"), b[(o, 0)].atan()));
            out.push((format!("atan B[{o}]({t})^2"), b[(o, 0)].powi(2).atan()));
        }
    }
    for i in 0..2 {
        out.push((format!("eta[{i}]^2"), s.eta[(i, 0)].powi(2)));
        out.push((format!("atan xi[{i},0]"), s.xi[(i, 0)].atan()));
    }
    out.push(("eta[0]*theta[0] sign".into(), (s.eta[(0, 0)] * s.theta[(0, 0)]).signum()));
    for c in 0..s.b_c.ncols() {
        out.push((format!("atan b_c[0,{c}]"), s.b_c[(0, c)].atan()));
        out.push((format!("log psi_c[{c}]"), s.shrink_c.psi[c].ln()));
    }
    out
}

pub struct GewekeResult {
    pub names: Vec<String>,
    pub z: Vec<f64>,
    pub seconds: f64,
}

impl GewekeResult {
    pub fn fraction_within(&self, bound: f64) -> f64 {
        self.z.iter().filter(|z| z.abs() < bound).count() as f64 / self.z.len() as f64
    }
}

pub fn run_geweke(ctx: Context, data: ModelData, sweeps: usize, seed: u64) -> GewekeResult {
    let start = std::time::Instant::now();
    let stream = RngStream::new(seed, 77);

    // marginal-conditional: independent prior draws
    let mut rng = stream.substream(0).rng();
    let mut prior_stats: Vec<Vec<f64>> = Vec::new();
    for _ in 0..sweeps {
        let s = sample_prior(&data, &ctx, &mut rng).unwrap();
        push_stats(&mut prior_stats, &statistics(&s, &ctx));
    }

    // successive-conditional chain
    let mut rng = stream.substream(1).rng();
    let state = sample_prior(&data, &ctx, &mut rng).unwrap();
    let mut data = data;
    simulate_data(&state, &mut data, &mut rng).unwrap();
    let ctx_stats = ctx.clone();
    let mut sampler = Sampler::from_parts(ctx, data, state);
    sampler.adapt = false;
    sampler.state.nu2_scale = 1.0;
    let mut chain_stats: Vec<Vec<f64>> = Vec::new();
    let mut names = Vec::new();
    for _ in 0..sweeps {
        sampler.step().unwrap();
        simulate_data(&sampler.state, &mut sampler.data, &mut rng).unwrap();
        let st = statistics(&sampler.state, &ctx_stats);
        if names.is_empty() {
            names = st.iter().map(|(n, _)| n.clone()).collect();
        }
        push_stats(&mut chain_stats, &st);
    }

    let z = prior_stats
        .iter()
        .zip(&chain_stats)
        .map(|(a, b)| {
            let (ma, va) = mean_var(a);
            let (mb, _, seb) = chain_summary(b, 50);
            (ma - mb) / (va / a.len() as f64 + seb * seb).sqrt()
        })
        .collect();
    GewekeResult { names, z, seconds: start.elapsed().as_secs_f64() }
}

fn push_stats(store: &mut Vec<Vec<f64>>, stats: &[(String, f64)]) {
    if store.is_empty() {
        store.resize(stats.len(), Vec::new());
    }
    for (v, (_, x)) in store.iter_mut().zip(stats) {
        v.push(*x);
    }
}
