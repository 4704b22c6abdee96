//! Simulation scenarios: basis values, generative covariances and
//! reproducibility of the replicate streams.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use tvfactor::simulate::{censor_exposures, generate_scenario, scenario2_basis, Scenario, N_EXPOSURES, N_OUTCOMES, N_TIMES};

fn log_exposures(values: &[Vec<Option<f64>>]) -> DMatrix<f64> {
    DMatrix::from_fn(values.len(), N_EXPOSURES, |i, j| values[i][j].unwrap().ln())
}

#[test]
fn scenario2_basis_values() {
    let [u1, u2] = scenario2_basis(10.0);
    assert!((u1 - 3.4766).abs() < 1e-4, "u1(10) = {u1}");
    assert!((u2 - 0.03989).abs() < 1e-5, "u2(10) = {u2}");
    let [_, peak] = scenario2_basis(5.5);
    assert!((peak - 9.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
}

#[test]
fn exposure_covariance_matches_loadings() {
    let n = 100_000;
    let ds = generate_scenario(Scenario::Linear, n, 1, 7).unwrap();
    let x = log_exposures(&ds.train.exposures.values);
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, N_EXPOSURES, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let theta = &ds.truth.theta;
    let want = theta * theta.transpose() + DMatrix::identity(N_EXPOSURES, N_EXPOSURES);
    let rel = (&cov - &want).norm() / want.norm();
    assert!(rel < 0.02, "relative Frobenius error {rel}");
    for j in 0..N_EXPOSURES {
        assert!((ds.truth.exposure_sd[j] - want[(j, j)].sqrt()).abs() < 1e-12);
    }
}

#[test]
fn scenario2_noise_has_compound_symmetry() {
    let n = 20_000;
    let ds = generate_scenario(Scenario::TimeVarying, n, 1, 3).unwrap();
    // residuals y - g at the first follow-up, one vector per subject
    let mut resid = DMatrix::zeros(n, N_OUTCOMES);
    for r in &ds.train.outcomes.records {
        if r.age == 1.0 {
            let i: usize = r.subject_id[1..].parse::<usize>().unwrap() - 1;
            let o: usize = r.outcome[1..].parse::<usize>().unwrap() - 1;
            resid[(i, o)] = r.value.unwrap() - ds.train_truth.values[i][(0, o)];
        }
    }
    let cov = resid.transpose() * &resid / n as f64;
    for a in 0..N_OUTCOMES {
        assert!((cov[(a, a)] - 1.5).abs() < 0.05, "variance {}", cov[(a, a)]);
        for b in 0..a {
            let rho = cov[(a, b)] / (cov[(a, a)] * cov[(b, b)]).sqrt();
            assert!((rho - 0.7).abs() < 0.03, "correlation {rho}");
        }
    }
}

#[test]
fn test_set_does_not_depend_on_training_size() {
    let a = generate_scenario(Scenario::Quadratic, 20, 15, 4).unwrap();
    let b = generate_scenario(Scenario::Quadratic, 35, 15, 4).unwrap();
    assert_eq!(a.truth, b.truth);
    assert_eq!(a.test.exposures, b.test.exposures);
    assert_eq!(a.test.outcomes, b.test.outcomes);
    assert_eq!(a.test_truth, b.test_truth);
}

#[test]
fn replicates_are_reproducible_and_seed_dependent() {
    let a = generate_scenario(Scenario::TimeVarying, 10, 10, 2).unwrap();
    let b = generate_scenario(Scenario::TimeVarying, 10, 10, 2).unwrap();
    let c = generate_scenario(Scenario::TimeVarying, 10, 10, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.train.exposures, c.train.exposures);
}

#[test]
fn dataset_shapes() {
    let ds = generate_scenario(Scenario::Linear, 12, 8, 1).unwrap();
    assert_eq!(ds.train.exposures.values.len(), 12);
    assert_eq!(ds.test.exposures.values.len(), 8);
    assert_eq!(ds.train.outcomes.records.len(), 12 * N_TIMES * N_OUTCOMES);
    assert_eq!(ds.train.exposures.subject_ids[0], "s0001");
    assert_eq!(ds.test.exposures.subject_ids[0], "t0001");
    assert_eq!(ds.truth.grid, (1..=10).map(f64::from).collect::<Vec<_>>());
    assert!(ds.truth.induced_effects.is_some());
    let q = generate_scenario(Scenario::Quadratic, 3, 3, 1).unwrap();
    assert!(q.truth.induced_effects.is_none());
    assert_eq!(q.truth.rank.len(), N_EXPOSURES);
}

#[test]
fn invalid_scenario_and_sizes_are_rejected() {
    let err = Scenario::from_id(4).unwrap_err().to_string();
    assert!(err.contains("unknown scenario 4"));
    assert!(Scenario::from_id(0).is_err());
    assert!(generate_scenario(Scenario::Linear, 0, 5, 1).is_err());
    for id in 1..=3 {
        assert_eq!(Scenario::from_id(id).unwrap().id(), id);
    }
}

#[test]
fn induced_effects_follow_the_factor_map() {
    let ds = generate_scenario(Scenario::TimeVarying, 2, 2, 9).unwrap();
    let theta = &ds.truth.theta;
    let a = tvfactor::eval::posterior_factor_map(theta, &DVector::from_element(N_EXPOSURES, 1.0));
    let b = ds.truth.latent_surface().unwrap();
    for (bt, et) in b.iter().zip(ds.truth.induced_effects.as_ref().unwrap()) {
        assert!((bt * &a - et).norm() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn censoring_marks_the_lowest_cells(seed in 1u64..500, fraction in 0.0f64..0.6) {
        let ds = generate_scenario(Scenario::Linear, 40, 1, seed).unwrap();
        let mut ex = ds.train.exposures.clone();
        censor_exposures(&mut ex, fraction).unwrap();
        let lods = ex.lods.clone().unwrap();
        let m = (fraction * 40.0).round() as usize;
        for j in 0..N_EXPOSURES {
            let censored = ex.values.iter().filter(|r| r[j].is_none()).count();
            prop_assert_eq!(censored, m);
            for (row, orig) in ex.values.iter().zip(&ds.train.exposures.values) {
                match row[j] {
                    Some(v) => prop_assert!(v > lods[j]),
                    None => prop_assert!(orig[j].unwrap() < lods[j]),
                }
            }
        }
    }
}
