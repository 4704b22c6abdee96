//! Rotation and label alignment of factor draws, and effect curves with
//! pointwise credible bands.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::eval::induced_exposure_effects;
use crate::state::ParameterState;

const VARIMAX_MAX_ITER: usize = 200;
const VARIMAX_TOL: f64 = 1e-10;

/// Varimax rotation of a loading matrix. Returns `(L R, R)` with `R` orthogonal.
pub fn varimax(loadings: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (p, k) = loadings.shape();
    let mut r = DMatrix::identity(k, k);
    if k < 2 || p == 0 {
        return (loadings.clone(), r);
    }
    let mut crit = 0.0;
    for _ in 0..VARIMAX_MAX_ITER {
        let l = loadings * &r;
        let col_ss: Vec<f64> = (0..k).map(|c| l.column(c).norm_squared() / p as f64).collect();
        let target = DMatrix::from_fn(p, k, |i, c| l[(i, c)].powi(3) - l[(i, c)] * col_ss[c]);
        let svd = (loadings.transpose() * target).svd(true, true);
        let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        r = u * vt;
        let next = svd.singular_values.sum();
        if next < crit * (1.0 + VARIMAX_TOL) {
            break;
        }
        crit = next;
    }
    (loadings * &r, r)
}

/// Greedy column matching of `x` against `pivot` by absolute inner product.
/// Returns `perm` and `signs` such that column `c` of the aligned matrix is
/// `signs[c] * x[:, perm[c]]`.
pub fn match_columns(pivot: &DMatrix<f64>, x: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>) {
    let k = pivot.ncols();
    let c = pivot.transpose() * x;
    let mut perm = vec![usize::MAX; k];
    let mut signs = vec![1.0; k];
    let mut used_p = vec![false; k];
    let mut used_x = vec![false; k];
    for _ in 0..k {
        let mut best = (0, 0, -1.0);
        for a in (0..k).filter(|&a| !used_p[a]) {
            for b in (0..k).filter(|&b| !used_x[b]) {
                if c[(a, b)].abs() > best.2 {
                    best = (a, b, c[(a, b)].abs());
                }
            }
        }
        let (a, b, _) = best;
        used_p[a] = true;
        used_x[b] = true;
        perm[a] = b;
        signs[a] = if c[(a, b)] < 0.0 { -1.0 } else { 1.0 };
    }
    (perm, signs)
}

fn signed_permutation(perm: &[usize], signs: &[f64]) -> DMatrix<f64> {
    let k = perm.len();
    let mut m = DMatrix::zeros(k, k);
    for c in 0..k {
        m[(perm[c], c)] = signs[c];
    }
    m
}

/// Apply an orthogonal K x K transform to every factor-indexed quantity so
/// that `Θ η` and `B(t) η` are unchanged.
pub fn transform_state(state: &ParameterState, t: &DMatrix<f64>) -> ParameterState {
    let mut s = state.clone();
    s.theta = &state.theta * t;
    s.eta = &state.eta * t;
    for u in &mut s.u {
        *u = &*u * t;
    }
    for b in &mut s.b_in {
        *b = &*b * t;
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedDraws {
    pub grid: Vec<f64>,
    pub states: Vec<ParameterState>,
    /// Index of the pivot draw (median log-posterior).
    pub pivot: usize,
    /// Varimax rotation applied to each raw draw before matching.
    pub rotations: Vec<DMatrix<f64>>,
    pub permutations: Vec<Vec<usize>>,
    pub signs: Vec<Vec<f64>>,
}

impl AlignedDraws {
    /// The full transform taking raw draw `d` to its aligned version.
    pub fn transform(&self, d: usize) -> DMatrix<f64> {
        &self.rotations[d] * signed_permutation(&self.permutations[d], &self.signs[d])
    }

    /// Posterior mean of the aligned loadings.
    pub fn mean_loadings(&self) -> DMatrix<f64> {
        let mut m = self.states[0].theta.clone() * 0.0;
        for s in &self.states {
            m += &s.theta;
        }
        m / self.states.len() as f64
    }
}

/// Draw with the median log-posterior (lower median for even counts).
pub fn median_draw(log_posterior: &[f64]) -> usize {
    let mut order: Vec<usize> = (0..log_posterior.len()).collect();
    order.sort_by(|&a, &b| log_posterior[a].total_cmp(&log_posterior[b]));
    order[(order.len() - 1) / 2]
}

/// Varimax-rotate every draw, then match and sign-flip its columns against the pivot.
pub fn align(draws: &PosteriorDraws) -> Result<AlignedDraws> {
    if draws.len() < 2 {
        return Err(Error::data("alignment needs at least two draws"));
    }
    let pivot = median_draw(&draws.log_posterior);
    let (pivot_theta, _) = varimax(&draws.states[pivot].theta);
    let mut out = AlignedDraws {
        grid: draws.grid.clone(),
        states: Vec::with_capacity(draws.len()),
        pivot,
        rotations: Vec::with_capacity(draws.len()),
        permutations: Vec::with_capacity(draws.len()),
        signs: Vec::with_capacity(draws.len()),
    };
    for s in &draws.states {
        let (rotated, r) = varimax(&s.theta);
        let (perm, signs) = match_columns(&pivot_theta, &rotated);
        let t = &r * signed_permutation(&perm, &signs);
        out.states.push(transform_state(s, &t));
        out.rotations.push(r);
        out.permutations.push(perm);
        out.signs.push(signs);
    }
    Ok(out)
}

/// Equal-tailed quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub outcome: usize,
    /// Factor index for latent curves, exposure index for induced curves.
    pub index: usize,
    pub grid_index: usize,
    pub time: f64,
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCurves {
    pub level: f64,
    pub factor: Vec<CurvePoint>,
    pub exposure: Vec<CurvePoint>,
}

fn summarize(per_draw: &[Vec<DMatrix<f64>>], grid: &[f64], level: f64) -> Vec<CurvePoint> {
    let (q, m) = per_draw[0][0].shape();
    let tail = (1.0 - level) / 2.0;
    let mut out = Vec::with_capacity(q * m * grid.len());
    let mut vals = vec![0.0; per_draw.len()];
    for o in 0..q {
        for c in 0..m {
            for (t, &time) in grid.iter().enumerate() {
                for (d, e) in per_draw.iter().enumerate() {
                    vals[d] = e[t][(o, c)];
                }
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                vals.sort_by(f64::total_cmp);
                let (lo, hi) = (quantile(&vals, tail).min(mean), quantile(&vals, 1.0 - tail).max(mean));
                out.push(CurvePoint { outcome: o, index: c, grid_index: t, time, mean, lo, hi });
            }
        }
    }
    out
}

/// Pointwise posterior means and equal-tailed bands of `B(t)` (per outcome and
/// aligned factor) and of the induced exposure effects `B(t) A`.
pub fn effect_curves(aligned: &AlignedDraws, level: f64) -> Result<EffectCurves> {
    if aligned.states.is_empty() {
        return Err(Error::data("no draws to summarize"));
    }
    if !(0.0..1.0).contains(&level) {
        return Err(Error::param("band level must be in [0, 1)"));
    }
    let b: Vec<Vec<DMatrix<f64>>> = aligned.states.iter().map(|s| s.b_all()).collect();
    let bx: Vec<Vec<DMatrix<f64>>> = aligned
        .states
        .iter()
        .zip(&b)
        .map(|(s, bt)| induced_exposure_effects(&s.theta, &s.sigma_x2, bt))
        .collect();
    Ok(EffectCurves { level, factor: summarize(&b, &aligned.grid, level), exposure: summarize(&bx, &aligned.grid, level) })
}

/// Fraction of curve points whose band contains the truth (`truth[t]` is q x m).
pub fn band_coverage(points: &[CurvePoint], truth: &[DMatrix<f64>]) -> f64 {
    if points.is_empty() {
        return f64::NAN;
    }
    let hit = points
        .iter()
        .filter(|pt| {
            let v = truth[pt.grid_index][(pt.outcome, pt.index)];
            pt.lo <= v && v <= pt.hi
        })
        .count();
    hit as f64 / points.len() as f64
}
