//! Predictive metrics, importance ranks, cross-validation and baselines.

mod cv;
mod effects;
mod metrics;
mod pca_lmm;
mod predict;

pub use cv::{fold_assignment, kfold_cv, split_fold, CvResult};
pub use effects::{induced_exposure_effects, posterior_factor_map};
pub use metrics::{
    baseline_mean, importance_rank, importance_scores, midranks, mpse, spearman, spearman_ranks, PredictionSet,
};
pub use pca_lmm::{fit_random_intercept, principal_directions, LmmFit, PcaLmm, TimeInteraction, EM_MAX_ITER, EM_REL_TOL};
pub use predict::{posterior_mean_effects, predict};
