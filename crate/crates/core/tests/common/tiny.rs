//! The tiny instance used for joint-distribution and conditional checks.

use tvfactor::data::{
    validate_and_preprocess, CovariateRow, KappaMode, LikelihoodMode, ModelConfig, OutcomeRecord, PreprocessOptions,
    RawCovariates, RawExposures, RawOutcomes, ScaleMatrix, ScaleName,
};
use tvfactor::data::Panels;
use tvfactor::sampler::{Context, ModelData};

pub const N: usize = 5;
pub const P: usize = 3;
pub const Q: usize = 2;
pub const T: usize = 3;

/// Five subjects, three exposures, two outcomes observed at three ages.
/// Values are placeholders; callers overwrite them by forward simulation.
pub fn tiny_panels(with_covariate: bool) -> Panels {
    let ids: Vec<String> = (0..N).map(|i| format!("s{i}")).collect();
    let exposures = RawExposures {
        subject_ids: ids.clone(),
        column_names: (0..P).map(|j| format!("x{j}")).collect(),
        values: (0..N).map(|i| (0..P).map(|j| Some(1.0 + ((i * 7 + j * 3) % 5) as f64)).collect()).collect(),
        lods: None,
    };
    let mut records = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        for t in 1..=T {
            for o in 0..Q {
                records.push(OutcomeRecord {
                    subject_id: id.clone(),
                    age: t as f64,
                    outcome: format!("y{o}"),
                    value: Some(((i + 2 * t + 3 * o) % 4) as f64),
                });
            }
        }
    }
    let covariates = with_covariate.then(|| RawCovariates {
        names: vec!["z".into()],
        rows: ids.iter().enumerate().map(|(i, id)| CovariateRow { subject_id: id.clone(), age: None, values: vec![Some((i % 2) as f64)] }).collect(),
    });
    let options = PreprocessOptions { log_exposures: false, ..Default::default() };
    validate_and_preprocess(&exposures, &RawOutcomes { records }, covariates.as_ref(), &options).expect("tiny panels")
}

/// K = H = 1, exact likelihood and data-independent priors.
pub fn tiny_config() -> ModelConfig {
    let mut c = ModelConfig { k: 1, h: 1, likelihood: LikelihoodMode::Exact, ..Default::default() };
    c.kappa_mode = KappaMode::Grid(vec![0.7, 1.5, 3.0]);
    c.sigma_y_prior.scale = ScaleMatrix::Named(ScaleName::Identity);
    c.nu2_prior.scale = 1.0;
    c.chain.seed = 11;
    c
}

pub fn tiny_parts(with_covariate: bool) -> (Context, ModelData) {
    let panels = tiny_panels(with_covariate);
    let data = ModelData::from_panels(&panels);
    let ctx = Context::new(&tiny_config(), &data).expect("tiny context");
    (ctx, data)
}
