use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Standardized bound beyond which tail rejection samplers take over from
/// inverse-CDF sampling.
const TAIL_START: f64 = 4.0;

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub(crate) fn std_normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

/// Draw from `N(mean, var)` restricted to `[lower, upper]`. Either bound may
/// be infinite.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mean: f64,
    var: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(var > 0.0) || !var.is_finite() || !mean.is_finite() {
        return Err(Error::param(format!(
            "truncated normal needs finite mean and positive variance, got mean {mean}, var {var}"
        )));
    }
    if !(lower < upper) {
        return Err(Error::InvalidInterval { lower, upper });
    }
    let sd = var.sqrt();
    let a = (lower - mean) / sd;
    let b = (upper - mean) / sd;
    let z = standard_truncated(a, b, rng);
    Ok((mean + sd * z).clamp(lower, upper))
}

fn standard_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return rng.sample(StandardNormal);
    }
    if a >= TAIL_START {
        return upper_tail(a, b, rng);
    }
    if b <= -TAIL_START {
        return -upper_tail(-b, -a, rng);
    }
    let z = if a >= 0.0 {
        // work with upper-tail probabilities, which keep full precision
        let pa = std_normal_cdf(-a);
        let pb = std_normal_cdf(-b);
        let u = pb + open_unit(rng) * (pa - pb);
        -std_normal_quantile(u)
    } else if b <= 0.0 {
        let pa = std_normal_cdf(a);
        let pb = std_normal_cdf(b);
        std_normal_quantile(pa + open_unit(rng) * (pb - pa))
    } else {
        let pa = std_normal_cdf(a);
        let pb = std_normal_cdf(b);
        std_normal_quantile(pa + open_unit(rng) * (pb - pa))
    };
    z.clamp(a, b)
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard normal restricted to `[a, b]` with `a >= TAIL_START`.
fn upper_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if (b - a) * a < 1.0 {
        // narrow window: uniform proposal, acceptance >= exp(-1 - 1/(2a^2))
        loop {
            let x = a + rng.random::<f64>() * (b - a);
            let log_accept = -0.5 * (x - a) * (x + a);
            if open_unit(rng).ln() <= log_accept {
                return x;
            }
        }
    }
    // translated exponential proposal with the optimal rate
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let x = a - open_unit(rng).ln() / alpha;
        if x > b {
            continue;
        }
        let d = x - alpha;
        if open_unit(rng).ln() <= -0.5 * d * d {
            return x;
        }
    }
}
