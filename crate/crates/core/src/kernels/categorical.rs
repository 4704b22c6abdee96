use rand::Rng;

use crate::error::{Error, Result};

/// Index drawn with probability proportional to `exp(logliks[i])`.
pub fn sample_categorical_index<R: Rng + ?Sized>(logliks: &[f64], rng: &mut R) -> Result<usize> {
    if logliks.is_empty() {
        return Err(Error::param("categorical draw over an empty option set"));
    }
    if logliks.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
        return Err(Error::param("categorical log-likelihoods must be finite or -inf"));
    }
    let max = logliks.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::param("all categorical log-likelihoods are -inf"));
    }
    let weights: Vec<f64> = logliks.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return Ok(i);
        }
        u -= w;
    }
    // round-off fallthrough: last option with positive weight
    Ok(weights.iter().rposition(|w| *w > 0.0).unwrap_or(0))
}

/// Option drawn with probability proportional to `exp(loglik)`.
pub fn sample_categorical_loglik<'a, T, R: Rng + ?Sized>(
    options: &'a [T],
    logliks: &[f64],
    rng: &mut R,
) -> Result<&'a T> {
    if options.len() != logliks.len() {
        return Err(Error::dims(format!(
            "{} options with {} log-likelihoods",
            options.len(),
            logliks.len()
        )));
    }
    let i = sample_categorical_index(logliks, rng)?;
    Ok(&options[i])
}
