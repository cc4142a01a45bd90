#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Ordinary least squares via an SVD solve, with classical standard errors.
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = rows.len();
    let p = rows[0].len();
    let x = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let yv = DVector::from_column_slice(y);
    let beta = x.clone().svd(true, true).solve(&yv, 1e-12).expect("full rank");
    let resid = &yv - &x * &beta;
    let sigma2 = resid.dot(&resid) / (n - p) as f64;
    let xtx_inv = (x.transpose() * &x).try_inverse().expect("invertible");
    let se = (0..p).map(|j| (sigma2 * xtx_inv[(j, j)]).sqrt()).collect();
    (beta.iter().copied().collect(), se)
}

/// Inverse Fisher information of a logistic model at `beta`.
pub fn logistic_se(rows: &[Vec<f64>], beta: &[f64]) -> Vec<f64> {
    let p = beta.len();
    let mut info = DMatrix::<f64>::zeros(p, p);
    for r in rows {
        let eta: f64 = r.iter().zip(beta).map(|(a, b)| a * b).sum();
        let mu = 1.0 / (1.0 + (-eta).exp());
        let v = DVector::from_column_slice(r);
        info += mu * (1.0 - mu) * &v * v.transpose();
    }
    let inv = info.try_inverse().expect("invertible information");
    (0..p).map(|j| inv[(j, j)].sqrt()).collect()
}

#[track_caller]
pub fn assert_within(label: &str, estimate: f64, target: f64, se: f64, k: f64) {
    let z = (estimate - target) / se;
    assert!(
        z.abs() < k,
        "{label}: estimate {estimate} vs {target}, se {se}, |z| = {:.2} >= {k}",
        z.abs()
    );
}
