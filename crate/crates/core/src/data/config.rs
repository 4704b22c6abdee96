use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::DEFAULT_GP_JITTER;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KappaMode {
    Fixed(f64),
    Grid(Vec<f64>),
    /// Log-spaced default grid derived from the time grid.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MgpHyper {
    pub a1: f64,
    pub a2: f64,
    pub v: f64,
}

impl Default for MgpHyper {
    fn default() -> Self {
        Self { a1: 2.1, a2: 3.1, v: 3.0 }
    }
}

/// Gamma prior on the exposure noise precisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaXPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for SigmaXPrior {
    fn default() -> Self {
        Self { shape: 1.25, rate: 1.25 * 0.084 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScaleName {
    #[serde(rename = "sample-covariance")]
    SampleCovariance,
    #[serde(rename = "identity")]
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleMatrix {
    Named(ScaleName),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaYPrior {
    /// Degrees of freedom; `None` means q + 2, which centers the prior mean
    /// at the scale matrix.
    pub s0: Option<f64>,
    #[serde(rename = "S0")]
    pub scale: ScaleMatrix,
}

impl Default for SigmaYPrior {
    fn default() -> Self {
        Self { s0: None, scale: ScaleMatrix::Named(ScaleName::SampleCovariance) }
    }
}

/// Half-t prior on the random-intercept scale ν² (df = 1 is half-Cauchy).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Nu2Prior {
    pub df: f64,
    pub scale: f64,
}

impl Default for Nu2Prior {
    fn default() -> Self {
        Self { df: 1.0, scale: 25.0 }
    }
}

impl Nu2Prior {
    /// Unnormalized log density at `nu2 > 0`.
    pub fn log_density(&self, nu2: f64) -> f64 {
        let z = nu2 / self.scale;
        -0.5 * (self.df + 1.0) * (1.0 + z * z / self.df).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShrinkageRate {
    Auto,
    #[serde(untagged)]
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShrinkageHyper {
    pub u: f64,
    pub v: f64,
    pub r: ShrinkageRate,
}

impl Default for ShrinkageHyper {
    fn default() -> Self {
        Self { u: 0.5, v: 0.5, r: ShrinkageRate::Auto }
    }
}

impl ShrinkageHyper {
    pub fn resolved_rate(&self, k: usize, n: usize) -> f64 {
        match self.r {
            ShrinkageRate::Value(r) => r,
            ShrinkageRate::Auto => {
                let n = (n.max(2)) as f64;
                1.0 / (k as f64 * (n * n.ln()).sqrt())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub adapt_interval: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self { iterations: 5000, burn_in: 2500, thin: 5, adapt_interval: 50, seed: 1 }
    }
}

impl ChainConfig {
    /// Number of stored draws.
    pub fn n_kept(&self) -> usize {
        if self.iterations <= self.burn_in {
            0
        } else {
            (self.iterations - self.burn_in) / self.thin
        }
    }

    /// Whether the state after iteration `iter` (0-based) is stored.
    pub fn keeps(&self, iter: usize) -> bool {
        iter >= self.burn_in && (iter + 1 - self.burn_in) % self.thin == 0
    }
}

/// How the η update treats the random intercepts it integrates over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LikelihoodMode {
    /// Per-follow-up terms with covariance (1 + ν²)Σ_Y. Cheaper, but the
    /// blocks are not exact conditionals of a single joint posterior.
    #[default]
    #[serde(rename = "per-visit")]
    PerVisit,
    /// Exact marginal with covariance Σ_Y ⊗ (I + ν² 11ᵀ); every block then
    /// targets the same joint posterior.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "H")]
    pub h: usize,
    pub kappa_mode: KappaMode,
    pub mgp: MgpHyper,
    pub sigma_x_prior: SigmaXPrior,
    pub sigma_y_prior: SigmaYPrior,
    pub nu2_prior: Nu2Prior,
    pub shrinkage: ShrinkageHyper,
    pub chain: ChainConfig,
    pub likelihood: LikelihoodMode,
    /// Impute missing outcomes from B(t)η and Σ_Y only, ignoring ξ and
    /// covariate terms.
    pub simple_imputation: bool,
    pub gp_jitter: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            k: 4,
            h: 2,
            kappa_mode: KappaMode::Auto,
            mgp: MgpHyper::default(),
            sigma_x_prior: SigmaXPrior::default(),
            sigma_y_prior: SigmaYPrior::default(),
            nu2_prior: Nu2Prior::default(),
            shrinkage: ShrinkageHyper::default(),
            chain: ChainConfig::default(),
            likelihood: LikelihoodMode::default(),
            simple_imputation: false,
            gp_jitter: DEFAULT_GP_JITTER,
        }
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive, got {x}")))
    }
}

impl ModelConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Check the settings that do not depend on the data.
    pub fn validate(&self) -> Result<()> {
        if self.h < 1 || self.h > self.k {
            return Err(Error::Config(format!("need 1 <= H <= K, got H = {}, K = {}", self.h, self.k)));
        }
        positive(self.mgp.a1, "mgp.a1")?;
        positive(self.mgp.a2, "mgp.a2")?;
        positive(self.mgp.v, "mgp.v")?;
        positive(self.sigma_x_prior.shape, "sigma_x_prior.shape")?;
        positive(self.sigma_x_prior.rate, "sigma_x_prior.rate")?;
        positive(self.nu2_prior.df, "nu2_prior.df")?;
        positive(self.nu2_prior.scale, "nu2_prior.scale")?;
        positive(self.shrinkage.u, "shrinkage.u")?;
        positive(self.shrinkage.v, "shrinkage.v")?;
        if let ShrinkageRate::Value(r) = self.shrinkage.r {
            positive(r, "shrinkage.r")?;
        }
        if self.gp_jitter < 0.0 {
            return Err(Error::Config("gp_jitter must be non-negative".into()));
        }
        match &self.kappa_mode {
            KappaMode::Fixed(k) => positive(*k, "kappa")?,
            KappaMode::Grid(g) => {
                if g.is_empty() {
                    return Err(Error::Config("kappa grid must not be empty".into()));
                }
                for k in g {
                    positive(*k, "kappa grid value")?;
                }
            }
            KappaMode::Auto => {}
        }
        let c = &self.chain;
        if c.thin == 0 || c.adapt_interval == 0 {
            return Err(Error::Config("chain.thin and chain.adapt_interval must be at least 1".into()));
        }
        if c.iterations > 0 && c.iterations <= c.burn_in {
            return Err(Error::Config(format!(
                "chain.iterations ({}) must exceed chain.burn_in ({})",
                c.iterations, c.burn_in
            )));
        }
        Ok(())
    }

    /// Checks that need the data dimensions.
    pub fn validate_for(&self, p: usize, q: usize) -> Result<()> {
        self.validate()?;
        if self.k > p {
            return Err(Error::Config(format!("K = {} exceeds the number of exposures p = {p}", self.k)));
        }
        let df = self.sigma_y_df(q);
        if !(df >= q as f64) {
            return Err(Error::Config(format!("sigma_y_prior.s0 = {df} must be at least q = {q}")));
        }
        if let ScaleMatrix::Matrix(rows) = &self.sigma_y_prior.scale {
            if rows.len() != q || rows.iter().any(|r| r.len() != q) {
                return Err(Error::Config(format!("sigma_y_prior.S0 must be {q} x {q}")));
            }
        }
        Ok(())
    }

    pub fn sigma_y_df(&self, q: usize) -> f64 {
        self.sigma_y_prior.s0.unwrap_or(q as f64 + 2.0)
    }

    /// Resolve the prior scale matrix; `sample_cov` is used for the
    /// sample-covariance option.
    pub fn sigma_y_scale(&self, sample_cov: &DMatrix<f64>) -> DMatrix<f64> {
        let q = sample_cov.nrows();
        match &self.sigma_y_prior.scale {
            ScaleMatrix::Named(ScaleName::SampleCovariance) => sample_cov.clone(),
            ScaleMatrix::Named(ScaleName::Identity) => DMatrix::identity(q, q),
            ScaleMatrix::Matrix(rows) => DMatrix::from_fn(q, q, |i, j| rows[i][j]),
        }
    }

    /// κ values the sampler may visit.
    pub fn kappa_grid(&self, time_grid: &[f64]) -> Vec<f64> {
        match &self.kappa_mode {
            KappaMode::Fixed(k) => vec![*k],
            KappaMode::Grid(g) => g.clone(),
            KappaMode::Auto => crate::kernels::default_kappa_grid(time_grid),
        }
    }
}
