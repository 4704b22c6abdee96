#![allow(dead_code)]

pub mod conditionals;
pub mod geweke;
pub mod kernel_checks;
pub mod tiny;
pub mod quadrature;

/// Outcome of one numeric check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn within(name: impl Into<String>, got: f64, want: f64, tol: f64) -> Self {
        let pass = (got - want).abs() <= tol;
        Self::new(name, pass, format!("got {got:.6}, want {want:.6} ± {tol}"))
    }

    pub fn relative(name: impl Into<String>, got: f64, want: f64, rel: f64) -> Self {
        let pass = ((got - want) / want).abs() <= rel;
        Self::new(
            name,
            pass,
            format!("got {got:.6}, want {want:.6} (rel tol {rel})"),
        )
    }
}

pub fn assert_all(checks: &[Check]) {
    let mut failed = Vec::new();
    for c in checks {
        println!("[{}] {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        if !c.pass {
            failed.push(c.name.clone());
        }
    }
    assert!(failed.is_empty(), "failed checks: {failed:?}");
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Mean and variance of an autocorrelated chain together with the batch-means
/// standard error of the mean.
pub fn chain_summary(xs: &[f64], batches: usize) -> (f64, f64, f64) {
    let (m, v) = mean_var(xs);
    let size = xs.len() / batches;
    let bm: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let (_, bv) = mean_var(&bm);
    (m, v, (bv / batches as f64).sqrt())
}
