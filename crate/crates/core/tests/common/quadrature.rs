//! One-dimensional numerical integration used as an independent oracle.

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// Mean and variance of the density proportional to `exp(log_density(x))` on
/// `[a, b]`. The log density is shifted by its grid maximum before
/// exponentiation.
pub fn moments_on<F: Fn(f64) -> f64>(log_density: F, a: f64, b: f64, n: usize) -> (f64, f64) {
    let grid_max = (0..=n)
        .map(|i| log_density(a + (b - a) * i as f64 / n as f64))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let w = |x: f64| {
        let l = log_density(x);
        if l.is_finite() {
            (l - grid_max).exp()
        } else {
            0.0
        }
    };
    let z = simpson(&w, a, b, n);
    let m1 = simpson(|x| x * w(x), a, b, n) / z;
    let m2 = simpson(|x| x * x * w(x), a, b, n) / z;
    (m1, m2 - m1 * m1)
}

/// Mean and variance of a positive variable whose log density (in `y`) is
/// given; integrates on the log scale over `[exp(lo), exp(hi)]`.
pub fn positive_moments<F: Fn(f64) -> f64>(log_density: F, lo: f64, hi: f64, n: usize) -> (f64, f64) {
    // y = e^s, dy = e^s ds
    let ls = |s: f64| log_density(s.exp()) + s;
    let grid_max = (0..=n)
        .map(|i| ls(lo + (hi - lo) * i as f64 / n as f64))
        .filter(|v| v.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    let w = |s: f64| {
        let l = ls(s);
        if l.is_finite() {
            (l - grid_max).exp()
        } else {
            0.0
        }
    };
    let z = simpson(&w, lo, hi, n);
    let m1 = simpson(|s| s.exp() * w(s), lo, hi, n) / z;
    let m2 = simpson(|s| (2.0 * s).exp() * w(s), lo, hi, n) / z;
    (m1, m2 - m1 * m1)
}
