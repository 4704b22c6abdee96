//! The MCMC sampler: every full conditional and Metropolis step, and the
//! chain driver that strings them together.

mod covariance;
mod covariates;
mod exposure;
mod factors;
mod init;
mod logpost;
mod model;
mod outcomes;
mod prior;
mod random_effects;
mod surface;

pub use covariance::{sigma_y_conditional, update_outcome_covariance};
pub use covariates::{update_covariate_effects, update_shrinkage};
pub use exposure::{impute_censored_exposures, sample_gamma, update_mgp, update_sigma_x, update_theta};
pub use factors::{adapt_log_scale, eta_target, update_latent_factors, EtaShared, EtaTarget, TARGET_ACCEPTANCE};
pub use init::initial_state;
pub use logpost::log_posterior;
pub use model::{
    covariate_coefficients, covariate_prior_variances, fixed_mean, set_covariate_coefficients, Context, GpFactor,
    ModelData, Observation,
};
pub use outcomes::{conditional_normal, impute_missing_outcomes};
pub use prior::{sample_prior, simulate_data};
pub use random_effects::{nu2_log_conditional, update_nu2, update_xi, xi_quadratic};
pub use surface::{kappa_log_likelihoods, update_basis, update_kappa, update_lambda};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{ModelConfig, Panels};
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::state::ParameterState;

pub const BLOCK_NAMES: [&str; 7] =
    ["exposure_model", "latent_factors", "random_effects", "coefficient_surface", "covariate_effects", "outcome_covariance", "imputation"];

const CHAIN_STREAM: u64 = 0;
const INIT_STREAM: u64 = 1;

/// Run-time summaries of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Wall-clock seconds spent in each update block.
    pub block_seconds: Vec<(String, f64)>,
    /// Per-subject η acceptance rate over the whole run.
    pub eta_acceptance: Vec<f64>,
    pub nu2_acceptance: f64,
    /// Log posterior after every iteration.
    pub log_posterior: Vec<f64>,
    pub kappa_trace: Vec<f64>,
    pub nu2_trace: Vec<f64>,
    /// Mean η acceptance over subjects at every iteration.
    pub eta_acceptance_trace: Vec<f64>,
    /// Fraction of iterations spent at each κ on the grid.
    pub kappa_frequencies: Vec<(f64, f64)>,
    pub initial_state: ParameterState,
}

/// Which blocks a sweep runs; everything by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Blocks {
    pub exposure_model: bool,
    pub latent_factors: bool,
    pub random_effects: bool,
    pub coefficient_surface: bool,
    pub covariate_effects: bool,
    pub outcome_covariance: bool,
    pub imputation: bool,
}

impl Default for Blocks {
    fn default() -> Self {
        Self {
            exposure_model: true,
            latent_factors: true,
            random_effects: true,
            coefficient_surface: true,
            covariate_effects: true,
            outcome_covariance: true,
            imputation: true,
        }
    }
}

/// A single chain: context, working data, current state and the
/// adaptation bookkeeping.
pub struct Sampler {
    pub ctx: Context,
    pub data: ModelData,
    pub state: ParameterState,
    pub blocks: Blocks,
    /// Adapt proposal scales every `adapt_interval` iterations.
    pub adapt: bool,
    seed: u64,
    iteration: usize,
    eta_batch: Vec<u32>,
    eta_total: Vec<u64>,
    nu2_batch: u32,
    nu2_total: u64,
    batches: usize,
    block_seconds: [f64; 7],
    last_eta_acceptance: f64,
}

impl Sampler {
    /// Chain over `panels`, started from the default initial state.
    pub fn new(config: &ModelConfig, panels: &Panels) -> Result<Self> {
        panels.validate()?;
        let data = ModelData::from_panels(panels);
        let ctx = Context::new(config, &data)?;
        let mut rng = RngStream::new(config.chain.seed, INIT_STREAM).rng();
        let state = initial_state(&data, &ctx, &mut rng)?;
        Ok(Self::from_parts(ctx, data, state))
    }

    pub fn from_parts(ctx: Context, data: ModelData, state: ParameterState) -> Self {
        let n = data.n();
        Self {
            seed: ctx.config.chain.seed,
            ctx,
            data,
            state,
            blocks: Blocks::default(),
            adapt: true,
            iteration: 0,
            eta_batch: vec![0; n],
            eta_total: vec![0; n],
            nu2_batch: 0,
            nu2_total: 0,
            batches: 0,
            block_seconds: [0.0; 7],
            last_eta_acceptance: 0.0,
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// The current state with the imputed data cells attached.
    pub fn snapshot(&self) -> ParameterState {
        let mut s = self.state.clone();
        self.data.store_imputed(&mut s);
        s
    }

    fn timed<T>(&mut self, block: usize, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self);
        self.block_seconds[block] += start.elapsed().as_secs_f64();
        out
    }

    /// One full sweep over every enabled block.
    pub fn step(&mut self) -> Result<()> {
        let iteration = self.iteration;
        self.sweep().map_err(|e| Error::Iteration { iteration, source: Box::new(e) })?;
        self.iteration += 1;
        if self.adapt && self.iteration % self.ctx.config.chain.adapt_interval == 0 {
            self.adapt_scales();
        }
        Ok(())
    }

    fn sweep(&mut self) -> Result<()> {
        let stream = RngStream::new(self.seed, CHAIN_STREAM).substream(self.iteration as u64);
        let mut rng = stream.substream(u64::MAX).rng();
        let eta_stream = stream.substream(u64::MAX - 1);
        let b = self.blocks;
        if b.exposure_model {
            self.timed(0, |s| {
                update_sigma_x(&mut s.state, &s.data, &s.ctx, &mut rng)?;
                update_theta(&mut s.state, &s.data, &mut rng)?;
                let st = &mut s.state;
                update_mgp(&st.theta, &mut st.mgp_theta, &s.ctx.config.mgp, &mut rng)
            })?;
        }
        if b.latent_factors {
            let accepted = self.timed(1, |s| update_latent_factors(&mut s.state, &s.data, &s.ctx, &eta_stream))?;
            let mut count = 0;
            for (i, a) in accepted.iter().enumerate() {
                if *a {
                    self.eta_batch[i] += 1;
                    self.eta_total[i] += 1;
                    count += 1;
                }
            }
            self.last_eta_acceptance = if accepted.is_empty() { 0.0 } else { count as f64 / accepted.len() as f64 };
        }
        if b.random_effects {
            let acc = self.timed(2, |s| {
                update_xi(&mut s.state, &s.data, &mut rng)?;
                update_nu2(&mut s.state, &s.data, &s.ctx, &mut rng)
            })?;
            if acc {
                self.nu2_batch += 1;
                self.nu2_total += 1;
            }
        }
        if b.coefficient_surface {
            self.timed(3, |s| {
                update_lambda(&mut s.state, &s.data, &mut rng)?;
                let st = &mut s.state;
                update_mgp(&st.lambda, &mut st.mgp_lambda, &s.ctx.config.mgp, &mut rng)?;
                update_basis(&mut s.state, &s.data, &s.ctx, &mut rng)?;
                update_kappa(&mut s.state, &s.ctx, &mut rng)
            })?;
        }
        if b.covariate_effects {
            self.timed(4, |s| update_covariate_effects(&mut s.state, &s.data, &s.ctx, &mut rng))?;
        }
        if b.outcome_covariance {
            self.timed(5, |s| update_outcome_covariance(&mut s.state, &s.data, &s.ctx, &mut rng))?;
        }
        if b.imputation {
            self.timed(6, |s| {
                impute_censored_exposures(&s.state, &mut s.data, &mut rng)?;
                let exact = s.ctx.config.simple_imputation;
                impute_missing_outcomes(&s.state, &mut s.data, exact, &mut rng)
            })?;
        }
        Ok(())
    }

    fn adapt_scales(&mut self) {
        self.batches += 1;
        let interval = self.ctx.config.chain.adapt_interval as f64;
        for i in 0..self.eta_batch.len() {
            let rate = self.eta_batch[i] as f64 / interval;
            self.state.mh_scales[i] = adapt_log_scale(self.state.mh_scales[i], rate, TARGET_ACCEPTANCE, self.batches);
            self.eta_batch[i] = 0;
        }
        let rate = self.nu2_batch as f64 / interval;
        // ν² scale is a standard deviation, so half the log-variance step
        self.state.nu2_scale = adapt_log_scale(self.state.nu2_scale.powi(2), rate, TARGET_ACCEPTANCE, self.batches).sqrt();
        self.nu2_batch = 0;
    }

    /// Run the configured number of iterations, keeping thinned post-burn-in
    /// states.
    pub fn run(mut self) -> Result<(PosteriorDraws, ChainDiagnostics)> {
        let chain = self.ctx.config.chain;
        let initial_state = self.snapshot();
        let mut draws = PosteriorDraws::new(self.data.grid.clone());
        let mut lp_trace = Vec::with_capacity(chain.iterations);
        let mut kappa_trace = Vec::with_capacity(chain.iterations);
        let mut nu2_trace = Vec::with_capacity(chain.iterations);
        let mut eta_acceptance_trace = Vec::with_capacity(chain.iterations);
        for it in 0..chain.iterations {
            self.step()?;
            let lp = log_posterior(&self.state, &self.data, &self.ctx);
            if !lp.is_finite() {
                return Err(Error::Iteration { iteration: it, source: Box::new(Error::param("log posterior is not finite")) });
            }
            lp_trace.push(lp);
            kappa_trace.push(self.state.kappa);
            nu2_trace.push(self.state.nu2);
            eta_acceptance_trace.push(self.last_eta_acceptance);
            if chain.keeps(it) {
                draws.push(self.snapshot(), it, lp);
            }
        }
        let iters = chain.iterations.max(1) as f64;
        let kappa_frequencies = self
            .ctx
            .kappa_grid()
            .into_iter()
            .map(|k| (k, kappa_trace.iter().filter(|v| **v == k).count() as f64 / iters))
            .collect();
        let diagnostics = ChainDiagnostics {
            block_seconds: BLOCK_NAMES.iter().zip(self.block_seconds).map(|(n, s)| (n.to_string(), s)).collect(),
            eta_acceptance: self.eta_total.iter().map(|a| *a as f64 / iters).collect(),
            nu2_acceptance: self.nu2_total as f64 / iters,
            log_posterior: lp_trace,
            kappa_trace,
            nu2_trace,
            eta_acceptance_trace,
            kappa_frequencies,
            initial_state,
        };
        Ok((draws, diagnostics))
    }
}

/// Fit the model to `panels` with one chain.
pub fn run_mcmc(config: &ModelConfig, panels: &Panels) -> Result<(PosteriorDraws, ChainDiagnostics)> {
    Sampler::new(config, panels)?.run()
}
