//! Factor alignment and effect-curve summaries.

use nalgebra::DMatrix;
use proptest::prelude::*;
use tvfactor::data::{validate_and_preprocess, KappaMode, ModelConfig, PreprocessOptions};
use tvfactor::draws::PosteriorDraws;
use tvfactor::postprocess::{
    align, band_coverage, effect_curves, match_columns, median_draw, quantile, transform_state, varimax, CurvePoint,
};
use tvfactor::sampler::run_mcmc;
use tvfactor::simulate::{generate_scenario, Scenario};

fn short_draws() -> PosteriorDraws {
    let ds = generate_scenario(Scenario::TimeVarying, 40, 1, 3).unwrap();
    let panels = validate_and_preprocess(&ds.train.exposures, &ds.train.outcomes, None, &PreprocessOptions::default()).unwrap();
    let mut config = ModelConfig { k: 3, h: 2, ..Default::default() };
    config.kappa_mode = KappaMode::Fixed(2.0);
    config.chain.iterations = 120;
    config.chain.burn_in = 60;
    config.chain.thin = 2;
    run_mcmc(&config, &panels).unwrap().0
}

fn signed_permutation(perm: &[usize], signs: &[f64]) -> DMatrix<f64> {
    let k = perm.len();
    let mut m = DMatrix::zeros(k, k);
    for c in 0..k {
        m[(perm[c], c)] = signs[c];
    }
    m
}

fn varimax_criterion(l: &DMatrix<f64>) -> f64 {
    let p = l.nrows() as f64;
    (0..l.ncols())
        .map(|c| {
            let sq: Vec<f64> = l.column(c).iter().map(|v| v * v).collect();
            let m = sq.iter().sum::<f64>() / p;
            sq.iter().map(|s| (s - m).powi(2)).sum::<f64>() / p
        })
        .sum()
}

#[test]
fn alignment_preserves_factor_products() {
    let draws = short_draws();
    let aligned = align(&draws).unwrap();
    assert_eq!(aligned.states.len(), draws.len());
    for (d, (raw, al)) in draws.states.iter().zip(&aligned.states).enumerate() {
        let t = aligned.transform(d);
        assert!((&t * t.transpose() - DMatrix::identity(3, 3)).norm() < 1e-10);
        assert!((&raw.theta * raw.eta.transpose() - &al.theta * al.eta.transpose()).norm() < 1e-9);
        for g in 0..raw.u.len() {
            assert!((raw.b_at(g) * raw.eta.transpose() - al.b_at(g) * al.eta.transpose()).norm() < 1e-9);
        }
    }
}

#[test]
fn alignment_undoes_relabelling_and_sign_flips() {
    let draws = short_draws();
    let mut scrambled = draws.clone();
    for (d, s) in scrambled.states.iter_mut().enumerate() {
        let perm = [vec![0, 1, 2], vec![2, 0, 1], vec![1, 2, 0]][d % 3].clone();
        let signs = [1.0, if d % 2 == 0 { -1.0 } else { 1.0 }, -1.0];
        *s = transform_state(s, &signed_permutation(&perm, &signs));
    }
    let a = align(&draws).unwrap();
    let b = align(&scrambled).unwrap();
    // the two alignments agree up to one global signed permutation
    let (ma, mb) = (a.mean_loadings(), b.mean_loadings());
    let (perm, signs) = match_columns(&ma, &mb);
    let mb = &mb * signed_permutation(&perm, &signs);
    assert!((&ma - &mb).norm() < 1e-8 * ma.norm().max(1.0), "{ma}\n{mb}");
    let (ca, cb) = (effect_curves(&a, 0.95).unwrap(), effect_curves(&b, 0.95).unwrap());
    for (x, y) in ca.exposure.iter().zip(&cb.exposure) {
        assert!((x.mean - y.mean).abs() < 1e-9 && (x.lo - y.lo).abs() < 1e-9 && (x.hi - y.hi).abs() < 1e-9);
    }
}

#[test]
fn bands_are_nested_and_contain_the_mean() {
    let aligned = align(&short_draws()).unwrap();
    let wide = effect_curves(&aligned, 0.95).unwrap();
    let narrow = effect_curves(&aligned, 0.5).unwrap();
    for (curves_w, curves_n) in [(&wide.factor, &narrow.factor), (&wide.exposure, &narrow.exposure)] {
        assert_eq!(curves_w.len(), curves_n.len());
        for (w, n) in curves_w.iter().zip(curves_n) {
            assert!(w.lo <= w.mean && w.mean <= w.hi);
            assert!(w.lo <= n.lo + 1e-12 && n.hi <= w.hi + 1e-12);
        }
    }
    assert!(effect_curves(&aligned, 1.0).is_err());
}

#[test]
fn alignment_needs_two_draws() {
    let mut draws = short_draws();
    draws.states.truncate(1);
    draws.log_posterior.truncate(1);
    draws.iterations.truncate(1);
    assert!(align(&draws).is_err());
}

#[test]
fn quantile_and_median_examples() {
    let v = [1.0, 2.0, 3.0, 4.0];
    assert_eq!(quantile(&v, 0.0), 1.0);
    assert_eq!(quantile(&v, 1.0), 4.0);
    assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-12);
    assert_eq!(median_draw(&[5.0, 1.0, 3.0]), 2);
    assert_eq!(median_draw(&[4.0, 1.0, 3.0, 2.0]), 3);
}

#[test]
fn band_coverage_counts_hits() {
    let pt = |index, lo, hi| CurvePoint { outcome: 0, index, grid_index: 0, time: 1.0, mean: 0.5 * (lo + hi), lo, hi };
    let truth = vec![DMatrix::from_row_slice(1, 2, &[0.0, 2.0])];
    assert_eq!(band_coverage(&[pt(0, -1.0, 1.0), pt(1, -1.0, 1.0)], &truth), 0.5);
    assert!(band_coverage(&[], &truth).is_nan());
}

proptest! {
    #[test]
    fn varimax_is_an_orthogonal_improvement(vals in prop::collection::vec(-2.0f64..2.0, 12)) {
        let l = DMatrix::from_vec(6, 2, vals);
        let (rotated, r) = varimax(&l);
        prop_assert!((&r * r.transpose() - DMatrix::identity(2, 2)).norm() < 1e-9);
        prop_assert!((&l * &r - &rotated).norm() < 1e-9);
        prop_assert!(varimax_criterion(&rotated) >= varimax_criterion(&l) - 1e-9);
    }

    #[test]
    fn match_columns_recovers_signed_permutations(
        vals in prop::collection::vec(-2.0f64..2.0, 24),
        perm in Just(vec![0usize, 1, 2]).prop_shuffle(),
        flips in prop::collection::vec(any::<bool>(), 3),
    ) {
        // columns with one dominant entry each, so the matching is unambiguous
        let mut pivot = DMatrix::from_vec(8, 3, vals) * 0.1;
        for c in 0..3 {
            pivot[(c, c)] = 5.0;
        }
        let signs: Vec<f64> = flips.iter().map(|&f| if f { -1.0 } else { 1.0 }).collect();
        let x = &pivot * signed_permutation(&perm, &signs).transpose();
        let (p, s) = match_columns(&pivot, &x);
        let back = &x * signed_permutation(&p, &s);
        prop_assert!((back - &pivot).norm() < 1e-9);
    }
}
