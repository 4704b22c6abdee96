//! Synthetic data sets with known truth for the three benchmark scenarios.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::data::io::RawDataset;
use crate::data::{OutcomeRecord, Panels, RawExposures, RawOutcomes};
use crate::error::{Error, Result};
use crate::eval::{importance_rank, posterior_factor_map, PredictionSet};
use crate::linalg::standard_normal_vector;
use crate::rng::{RngStream, StreamRng};

pub const N_EXPOSURES: usize = 10;
pub const N_TRUE_FACTORS: usize = 2;
pub const N_OUTCOMES: usize = 5;
pub const N_TIMES: usize = 10;
const SIM_STREAM_BASE: u64 = 0x5C3E_0000;
const IMPORTANCE_MC_DRAWS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Linear in the factors with a linear time interaction.
    Linear = 1,
    /// Smooth non-linear time-varying factor effects, correlated outcomes.
    TimeVarying = 2,
    /// Quadratic in three exposures.
    Quadratic = 3,
}

impl Scenario {
    pub fn from_id(id: u32) -> Result<Self> {
        match id {
            1 => Ok(Scenario::Linear),
            2 => Ok(Scenario::TimeVarying),
            3 => Ok(Scenario::Quadratic),
            _ => Err(Error::param(format!("unknown scenario {id}; valid scenarios are 1, 2 and 3"))),
        }
    }

    pub fn id(self) -> u32 {
        self as u32
    }
}

/// Scenario-specific response-surface coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ResponseParams {
    /// `g_j = Σ_k (beta1_jk + beta2_jk (t - 1)) η_k`.
    Linear { beta1: DMatrix<f64>, beta2: DMatrix<f64> },
    /// `g_j = Σ_k beta_jk u_k(t) η_k`.
    TimeVarying { beta: DMatrix<f64> },
    /// Rows are the eight coefficients, columns the outcomes; exposures
    /// enter standardized by their population SD and time as `t - 1`.
    Quadratic { beta: DMatrix<f64> },
}

/// Ground truth shared by the training and test sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub scenario: Scenario,
    pub seed: u64,
    pub grid: Vec<f64>,
    /// p x K* loadings.
    pub theta: DMatrix<f64>,
    pub params: ResponseParams,
    /// Population SD of each exposure, `sqrt((ΘΘᵀ)_jj + 1)`.
    pub exposure_sd: Vec<f64>,
    /// Importance score per exposure (effects per population SD).
    pub importance: Vec<f64>,
    /// Importance rank per exposure, 1 = most important.
    pub rank: Vec<usize>,
    /// For the linear-in-X scenarios, `B*(t) A*` on the raw exposure scale.
    pub induced_effects: Option<Vec<DMatrix<f64>>>,
}

/// Noise-free response `g` of every subject at every grid time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub subject_ids: Vec<String>,
    /// Per subject, T x q.
    pub values: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub truth: ScenarioTruth,
    pub train: RawDataset,
    pub test: RawDataset,
    pub train_truth: TruthTable,
    pub test_truth: TruthTable,
}

/// Scenario-2 basis functions.
pub fn scenario2_basis(t: f64) -> [f64; 2] {
    let u1 = 3.5 / (1.0 + (-3.0 * t + 25.0).exp());
    let z = (t - 5.5) / 1.5;
    let u2 = 9.0 * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    [u1, u2]
}

fn compound_symmetry(q: usize, var: f64, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(q, q, |i, j| if i == j { var } else { var * rho })
}

fn signed_uniform(rng: &mut StreamRng) -> f64 {
    let mag = Uniform::new(0.25, 0.5).expect("valid range").sample(rng);
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}

impl ScenarioTruth {
    fn draw(scenario: Scenario, seed: u64, rng: &mut StreamRng) -> Self {
        let (p, k, q) = (N_EXPOSURES, N_TRUE_FACTORS, N_OUTCOMES);
        // every five exposures load on one factor
        let mut theta = DMatrix::<f64>::zeros(p, k);
        for j in 0..p {
            theta[(j, (j / 5).min(k - 1))] = rng.sample(StandardNormal);
        }
        let params = match scenario {
            Scenario::Linear => {
                let u1 = Uniform::new(-3.0, 3.0).expect("valid range");
                let u2 = Uniform::new(-0.5, 0.5).expect("valid range");
                let beta1 = DMatrix::from_fn(q, k, |_, _| u1.sample(rng));
                let beta2 = DMatrix::from_fn(q, k, |_, _| u2.sample(rng));
                ResponseParams::Linear { beta1, beta2 }
            }
            Scenario::TimeVarying => ResponseParams::TimeVarying { beta: DMatrix::from_fn(q, k, |_, _| rng.sample(StandardNormal)) },
            Scenario::Quadratic => ResponseParams::Quadratic { beta: DMatrix::from_fn(8, q, |_, _| signed_uniform(rng)) },
        };
        let exposure_sd = (0..p).map(|j| (theta.row(j).norm_squared() + 1.0).sqrt()).collect();
        let grid = (1..=N_TIMES).map(|t| t as f64).collect();
        let mut truth = ScenarioTruth {
            scenario,
            seed,
            grid,
            theta,
            params,
            exposure_sd,
            importance: Vec::new(),
            rank: Vec::new(),
            induced_effects: None,
        };
        truth.induced_effects = truth.latent_surface().map(|b| {
            let a = posterior_factor_map(&truth.theta, &DVector::from_element(p, 1.0));
            b.iter().map(|bt| bt * &a).collect()
        });
        truth
    }

    /// `B*(t)` (q x K*) at every grid time for the factor-driven scenarios.
    pub fn latent_surface(&self) -> Option<Vec<DMatrix<f64>>> {
        match &self.params {
            ResponseParams::Linear { beta1, beta2 } => {
                Some(self.grid.iter().map(|t| beta1 + beta2 * (t - 1.0)).collect())
            }
            ResponseParams::TimeVarying { beta } => Some(
                self.grid
                    .iter()
                    .map(|&t| {
                        let u = scenario2_basis(t);
                        let mut b = beta.clone();
                        for k in 0..b.ncols() {
                            b.column_mut(k).scale_mut(u[k]);
                        }
                        b
                    })
                    .collect(),
            ),
            ResponseParams::Quadratic { .. } => None,
        }
    }

    /// Noise-free outcomes at grid index `t` for one subject.
    pub fn response(&self, x: &DVector<f64>, eta: &DVector<f64>, t: usize) -> DVector<f64> {
        let time = self.grid[t];
        match &self.params {
            ResponseParams::Linear { .. } | ResponseParams::TimeVarying { .. } => {
                let b = &self.latent_surface().expect("factor-driven scenario")[t];
                b * eta
            }
            ResponseParams::Quadratic { beta } => {
                let xs: Vec<f64> = (0..x.len()).map(|j| x[j] / self.exposure_sd[j]).collect();
                let s = time - 1.0;
                DVector::from_fn(beta.ncols(), |o, _| {
                    let b = beta.column(o);
                    b[0] * xs[0].powi(2) - b[1] * xs[5].powi(2) + 0.5 * b[2] * xs[0] * xs[1] + b[3] * xs[6] + b[4] * xs[7]
                        + 0.3 * (b[5] * xs[0].powi(2) + b[6] * xs[6] + b[7] * xs[7]) * s
                })
            }
        }
    }

    /// `|∂g/∂x̃_j|` for the quadratic scenario, with `x̃` the SD-scaled exposures.
    fn quadratic_gradient_abs(&self, xs: &[f64], s: f64, out: &mut [f64]) {
        let ResponseParams::Quadratic { beta } = &self.params else { return };
        for o in 0..beta.ncols() {
            let b = beta.column(o);
            out[0] += (2.0 * b[0] * xs[0] + 0.5 * b[2] * xs[1] + 0.6 * b[5] * xs[0] * s).abs();
            out[1] += (0.5 * b[2] * xs[0]).abs();
            out[5] += (2.0 * b[1] * xs[5]).abs();
            out[6] += (b[3] + 0.3 * b[6] * s).abs();
            out[7] += (b[4] + 0.3 * b[7] * s).abs();
        }
    }

    fn compute_importance(&mut self, rng: &mut StreamRng) {
        let p = N_EXPOSURES;
        let scores: Vec<f64> = match &self.induced_effects {
            Some(effects) => (0..p)
                .map(|j| effects.iter().map(|e| e.column(j).abs().sum() * self.exposure_sd[j]).sum())
                .collect(),
            None => {
                let mut acc = vec![0.0; p];
                for _ in 0..IMPORTANCE_MC_DRAWS {
                    let (x, _) = draw_subject(&self.theta, rng);
                    let xs: Vec<f64> = (0..p).map(|j| x[j] / self.exposure_sd[j]).collect();
                    for &t in &self.grid {
                        self.quadratic_gradient_abs(&xs, t - 1.0, &mut acc);
                    }
                }
                let norm = (IMPORTANCE_MC_DRAWS * self.grid.len()) as f64;
                acc.into_iter().map(|a| a / norm * self.grid.len() as f64).collect()
            }
        };
        self.rank = importance_rank(&scores);
        self.importance = scores;
    }
}

fn draw_subject(theta: &DMatrix<f64>, rng: &mut StreamRng) -> (DVector<f64>, DVector<f64>) {
    let eta = standard_normal_vector(theta.ncols(), rng);
    let x = theta * &eta + standard_normal_vector(theta.nrows(), rng);
    (x, eta)
}

fn noise_covariances(scenario: Scenario) -> (DMatrix<f64>, DMatrix<f64>) {
    let q = N_OUTCOMES;
    match scenario {
        Scenario::TimeVarying => (compound_symmetry(q, 1.0, 0.7), compound_symmetry(q, 0.5, 0.7)),
        _ => (DMatrix::identity(q, q), DMatrix::identity(q, q) * 0.5),
    }
}

fn generate_split(truth: &ScenarioTruth, n: usize, prefix: &str, rng: &mut StreamRng) -> (RawDataset, TruthTable) {
    let (c_xi, c_eps) = noise_covariances(truth.scenario);
    let l_xi = c_xi.cholesky().expect("SPD").unpack();
    let l_eps = c_eps.cholesky().expect("SPD").unpack();
    let names: Vec<String> = (1..=N_OUTCOMES).map(|j| format!("y{j}")).collect();
    let mut ids = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut records = Vec::with_capacity(n * N_TIMES * N_OUTCOMES);
    let mut g_table = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("{prefix}{:04}", i + 1);
        let (x, eta) = draw_subject(&truth.theta, rng);
        let xi = &l_xi * standard_normal_vector(N_OUTCOMES, rng);
        let mut g = DMatrix::zeros(N_TIMES, N_OUTCOMES);
        for t in 0..N_TIMES {
            let gt = truth.response(&x, &eta, t);
            let y = &gt + &xi + &l_eps * standard_normal_vector(N_OUTCOMES, rng);
            g.set_row(t, &gt.transpose());
            for (o, name) in names.iter().enumerate() {
                records.push(OutcomeRecord { subject_id: id.clone(), age: truth.grid[t], outcome: name.clone(), value: Some(y[o]) });
            }
        }
        // exposures are stored as concentrations; the pipeline takes logs
        values.push(x.iter().map(|v| Some(v.exp())).collect());
        ids.push(id);
        g_table.push(g);
    }
    let exposures = RawExposures {
        subject_ids: ids.clone(),
        column_names: (1..=N_EXPOSURES).map(|j| format!("x{j}")).collect(),
        values,
        lods: None,
    };
    (
        RawDataset { exposures, outcomes: RawOutcomes { records }, covariates: None },
        TruthTable { subject_ids: ids, values: g_table },
    )
}

/// Generate one replicate of a scenario. Training and test subjects come
/// from separate random streams, so the test set does not depend on `n_train`.
pub fn generate_scenario(scenario: Scenario, n_train: usize, n_test: usize, seed: u64) -> Result<SyntheticDataset> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::param("n_train and n_test must be at least 1"));
    }
    let base = RngStream::new(seed, SIM_STREAM_BASE + scenario.id() as u64);
    let mut truth = ScenarioTruth::draw(scenario, seed, &mut base.substream(0).rng());
    truth.compute_importance(&mut base.substream(3).rng());
    let (train, train_truth) = generate_split(&truth, n_train, "s", &mut base.substream(1).rng());
    let (test, test_truth) = generate_split(&truth, n_test, "t", &mut base.substream(2).rng());
    Ok(SyntheticDataset { truth, train, test, train_truth, test_truth })
}

/// Mark the given fraction of exposure cells (the lowest values of each
/// column) as below a per-column LOD placed just above them.
pub fn censor_exposures(data: &mut RawExposures, fraction: f64) -> Result<()> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::param("censoring fraction must be in [0, 1)"));
    }
    let n = data.values.len();
    let p = data.column_names.len();
    let m = (fraction * n as f64).round() as usize;
    let mut lods = vec![0.0; p];
    for j in 0..p {
        let mut col: Vec<(f64, usize)> =
            data.values.iter().enumerate().map(|(i, r)| (r[j].ok_or_else(|| Error::data("cell already censored")), i)).map(|(v, i)| v.map(|v| (v, i))).collect::<Result<_>>()?;
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        lods[j] = if m == 0 {
            col[0].0 * 0.5
        } else if m < n {
            (col[m - 1].0 * col[m].0).sqrt()
        } else {
            col[n - 1].0 * 2.0
        };
        for &(_, i) in col.iter().take(m) {
            data.values[i][j] = None;
        }
    }
    data.lods = Some(lods);
    Ok(())
}

/// Noise-free truth at every follow-up of `panels`, matched by subject id.
pub fn oracle_predictions(table: &TruthTable, panels: &Panels) -> Result<PredictionSet> {
    let index: HashMap<&str, usize> = table.subject_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let values = panels
        .exposures
        .subject_ids
        .iter()
        .zip(&panels.outcomes.subjects)
        .map(|(id, s)| {
            let i = *index.get(id.as_str()).ok_or_else(|| Error::data(format!("subject {id} has no truth")))?;
            Ok(s.followups.iter().map(|f| table.values[i].row(f.grid_index).transpose()).collect())
        })
        .collect::<Result<_>>()?;
    Ok(PredictionSet { model: "oracle".into(), draw_averaged: false, values })
}
