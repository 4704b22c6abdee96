//! Evaluation metrics, prediction, cross-validation splits and the PCA-LMM baseline.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use tvfactor::data::{
    validate_and_preprocess, KappaMode, ModelConfig, OutcomeRecord, Panels, PreprocessOptions, RawExposures, RawOutcomes,
};
use tvfactor::eval::{
    baseline_mean, fit_random_intercept, fold_assignment, importance_rank, importance_scores, induced_exposure_effects,
    kfold_cv, midranks, mpse, posterior_factor_map, predict, principal_directions, spearman, spearman_ranks, split_fold,
    PcaLmm, PredictionSet, TimeInteraction,
};
use tvfactor::sampler::run_mcmc;
use tvfactor::simulate::{generate_scenario, Scenario};
use tvfactor::RngStream;
use rand_distr::{Distribution, Normal};

/// Two subjects, one exposure, one outcome: `a` has 1 and 3 at ages 1 and 2,
/// `b` has 5 at age 1 and a missing value at age 2.
fn hand_panels() -> Panels {
    let exposures = RawExposures {
        subject_ids: vec!["a".into(), "b".into()],
        column_names: vec!["x".into()],
        values: vec![vec![Some(1.0)], vec![Some(2.0)]],
        lods: None,
    };
    let rec = |id: &str, age: f64, value: Option<f64>| OutcomeRecord { subject_id: id.into(), age, outcome: "y".into(), value };
    let outcomes = RawOutcomes {
        records: vec![rec("a", 1.0, Some(1.0)), rec("a", 2.0, Some(3.0)), rec("b", 1.0, Some(5.0)), rec("b", 2.0, None)],
    };
    let options = PreprocessOptions { log_exposures: false, ..Default::default() };
    validate_and_preprocess(&exposures, &outcomes, None, &options).unwrap()
}

fn sim_panels(n: usize, seed: u64) -> Panels {
    let ds = generate_scenario(Scenario::Linear, n, 1, seed).unwrap();
    validate_and_preprocess(&ds.train.exposures, &ds.train.outcomes, None, &PreprocessOptions::default()).unwrap()
}

#[test]
fn mpse_scores_observed_cells_on_the_original_scale() {
    let panels = hand_panels();
    let pred = PredictionSet::constant("two", &panels.outcomes, &DVector::from_element(1, 2.0));
    let got = mpse(&pred, &panels.outcomes).unwrap();
    assert!((got - 11.0 / 3.0).abs() < 1e-12, "{got}");
    let mean = baseline_mean(&panels, &panels.outcomes).unwrap();
    assert!((mean.values[0][0][0] - 3.0).abs() < 1e-12);
    assert!((mpse(&mean, &panels.outcomes).unwrap() - 8.0 / 3.0).abs() < 1e-12);
}

#[test]
fn mpse_rejects_mismatched_predictions() {
    let panels = hand_panels();
    let mut pred = PredictionSet::constant("x", &panels.outcomes, &DVector::zeros(1));
    pred.values.pop();
    assert!(mpse(&pred, &panels.outcomes).is_err());
}

#[test]
fn spearman_examples() {
    let rho = spearman_ranks(&[1, 2, 3, 4, 5], &[2, 1, 4, 3, 5]).unwrap();
    assert!((rho - 0.8).abs() < 1e-12);
    assert!((spearman(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap() + 1.0).abs() < 1e-12);
    assert_eq!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
}

#[test]
fn rank_examples() {
    assert_eq!(importance_rank(&[0.5, 2.0, 1.0]), vec![3, 1, 2]);
    assert_eq!(importance_rank(&[1.0, 1.0, 0.0]), vec![1, 2, 3]);
    assert_eq!(midranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    let e = vec![DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.0]), DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 0.5])];
    assert_eq!(importance_scores(&e), vec![2.5, 2.5]);
}

#[test]
fn induced_effects_closed_forms() {
    // one factor, one exposure: A = θ / (θ² + σ²)
    let a = posterior_factor_map(&DMatrix::from_element(1, 1, 2.0), &DVector::from_element(1, 1.0));
    assert!((a[(0, 0)] - 0.4).abs() < 1e-12);
    // orthogonal loadings with unit noise: A = diag(θ_k / (θ_k² + 1)) on the loaded exposures
    let theta = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 3.0, 0.0, 0.0]);
    let a = posterior_factor_map(&theta, &DVector::from_element(3, 1.0));
    let want = DMatrix::from_row_slice(2, 3, &[0.5, 0.0, 0.0, 0.0, 0.3, 0.0]);
    assert!((&a - &want).norm() < 1e-12);
    let b = vec![DMatrix::from_row_slice(1, 2, &[2.0, -1.0])];
    let e = induced_exposure_effects(&theta, &DVector::from_element(3, 1.0), &b);
    assert!((&e[0] - DMatrix::from_row_slice(1, 3, &[1.0, -0.3, 0.0])).norm() < 1e-12);
}

#[test]
fn prediction_without_effects_returns_the_centers() {
    let panels = sim_panels(20, 2);
    let mut config = ModelConfig { k: 2, h: 1, ..Default::default() };
    config.kappa_mode = KappaMode::Fixed(2.0);
    config.chain.iterations = 20;
    config.chain.burn_in = 10;
    config.chain.thin = 1;
    let (mut draws, _) = run_mcmc(&config, &panels).unwrap();
    for s in &mut draws.states {
        s.lambda.fill(0.0);
    }
    let pred = predict(&draws, &panels).unwrap();
    assert!(pred.draw_averaged);
    for (p_s, s) in pred.values.iter().zip(&panels.outcomes.subjects) {
        for (p, f) in p_s.iter().zip(&s.followups) {
            for j in 0..panels.q() {
                assert!((p[j] - panels.outcomes.center[(j, f.grid_index)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn fold_split_partitions_subjects() {
    let panels = sim_panels(23, 1);
    let fold = fold_assignment(23, 6, 3).unwrap();
    assert_eq!(fold, fold_assignment(23, 6, 3).unwrap());
    let mut ids: Vec<String> = Vec::new();
    for f in 0..6 {
        let (train, test) = split_fold(&panels, &fold, f, &PreprocessOptions::default()).unwrap();
        assert_eq!(train.n() + test.n(), 23);
        assert!(test.exposures.subject_ids.iter().all(|id| !train.exposures.subject_ids.contains(id)));
        // the held-out part shares the training scaling
        assert_eq!(test.exposures.center, train.exposures.center);
        assert_eq!(test.outcomes.center, train.outcomes.center);
        ids.extend(test.exposures.subject_ids);
    }
    ids.sort();
    let mut all = panels.exposures.subject_ids.clone();
    all.sort();
    assert_eq!(ids, all);
    assert!(fold_assignment(5, 1, 1).is_err());
    assert!(fold_assignment(5, 6, 1).is_err());
}

#[test]
fn kfold_cv_scores_every_fold() {
    let panels = sim_panels(30, 4);
    let mut config = ModelConfig { k: 2, h: 1, ..Default::default() };
    config.kappa_mode = KappaMode::Fixed(2.0);
    config.chain.iterations = 40;
    config.chain.burn_in = 20;
    config.chain.thin = 2;
    let r = kfold_cv(&panels, &config, 3, 1, &PreprocessOptions::default()).unwrap();
    assert_eq!(r.fold_mpse.len(), 3);
    assert!(r.fold_mpse.iter().all(|m| m.is_some_and(|v| v.is_finite() && v > 0.0)));
    assert!(r.mean_baseline_mpse.is_finite());
}

#[test]
fn principal_directions_recover_axes() {
    let x = DMatrix::from_row_slice(6, 3, &[3.0, 0.0, 0.0, -3.0, 0.0, 0.0, 0.0, -2.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, -1.0]);
    let v = principal_directions(&x, 2).unwrap();
    let want = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    assert!((&v - &want).norm() < 1e-12);
    assert!(principal_directions(&x, 4).is_err());
}

#[test]
fn random_intercept_em_matches_balanced_ml() {
    // y_ig = 2 + b_i + e_ig, balanced groups with an intercept-only design
    let (n, m) = (60, 4);
    let mut rng = RngStream::new(5, 0).rng();
    let (nb, ne) = (Normal::new(0.0, 1.5).unwrap(), Normal::new(0.0, 0.7).unwrap());
    let groups: Vec<(Vec<DVector<f64>>, Vec<f64>)> = (0..n)
        .map(|_| {
            let b = nb.sample(&mut rng);
            (vec![DVector::from_element(1, 1.0); m], (0..m).map(|_| 2.0 + b + ne.sample(&mut rng)).collect())
        })
        .collect();
    let fit = fit_random_intercept(&groups).unwrap();
    assert!(fit.converged);
    let means: Vec<f64> = groups.iter().map(|g| g.1.iter().sum::<f64>() / m as f64).collect();
    let grand = means.iter().sum::<f64>() / n as f64;
    let ssw: f64 = groups.iter().zip(&means).map(|(g, mu)| g.1.iter().map(|y| (y - mu).powi(2)).sum::<f64>()).sum();
    let ssb: f64 = means.iter().map(|mu| m as f64 * (mu - grand).powi(2)).sum();
    let s2e = ssw / (n * (m - 1)) as f64;
    let s2b = (ssb / n as f64 - s2e) / m as f64;
    assert!((fit.beta[0] - grand).abs() < 1e-4, "{} vs {grand}", fit.beta[0]);
    assert!((fit.sigma2_e - s2e).abs() / s2e < 1e-3, "{} vs {s2e}", fit.sigma2_e);
    assert!((fit.sigma2_b - s2b).abs() / s2b < 1e-3, "{} vs {s2b}", fit.sigma2_b);
}

#[test]
fn pca_lmm_predicts_every_followup() {
    let panels = sim_panels(40, 6);
    for interaction in [TimeInteraction::None, TimeInteraction::Linear] {
        let model = PcaLmm::fit(&panels, 4, interaction).unwrap();
        let pred = model.predict(&panels).unwrap();
        assert_eq!(pred.values.len(), panels.n());
        let mean = baseline_mean(&panels, &panels.outcomes).unwrap();
        // in-sample, the regression cannot do worse than the constant fit
        assert!(mpse(&pred, &panels.outcomes).unwrap() <= mpse(&mean, &panels.outcomes).unwrap() + 1e-9);
        let effects = model.induced_effects();
        assert_eq!(effects.len(), panels.grid_len());
        assert_eq!(effects[0].shape(), (panels.q(), panels.p()));
    }
}

proptest! {
    #[test]
    fn spearman_is_symmetric_and_bounded(a in prop::collection::vec(-10.0f64..10.0, 2..30), shift in -5.0f64..5.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * x + shift * i as f64).collect();
        let r = spearman(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert!((r - spearman(&b, &a).unwrap()).abs() < 1e-12);
        // invariant under strictly increasing transforms
        let c: Vec<f64> = a.iter().map(|x| x.exp()).collect();
        prop_assert!((spearman(&c, &b).unwrap() - r).abs() < 1e-12);
    }

    #[test]
    fn ranks_are_a_permutation(scores in prop::collection::vec(0.0f64..5.0, 1..20)) {
        let mut r = importance_rank(&scores);
        for w in 0..scores.len() {
            for v in 0..scores.len() {
                if scores[w] > scores[v] {
                    prop_assert!(r[w] < r[v]);
                }
            }
        }
        r.sort();
        prop_assert_eq!(r, (1..=scores.len()).collect::<Vec<_>>());
        let m = midranks(&scores);
        let n = scores.len() as f64;
        prop_assert!((m.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn folds_are_balanced(n in 2usize..200, k in 2usize..10, seed in 0u64..100) {
        prop_assume!(k <= n);
        let fold = fold_assignment(n, k, seed).unwrap();
        let counts: Vec<usize> = (0..k).map(|f| fold.iter().filter(|&&x| x == f).count()).collect();
        prop_assert!(counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1);
    }
}
