//! Weighted logistic regression by iteratively reweighted least squares,
//! and the propensity scores and inverse probability weights built on it.

use serde::Serialize;

use crate::dgp::{bit, expit, WorldKind};
use crate::error::{Error, Result};
use crate::linalg::{weighted_gram, Cholesky, Design};

pub const MAX_ITERATIONS: usize = 100;
/// Converged when the score's max-norm falls below this.
pub const GRADIENT_TOL: f64 = 1e-8;
/// ... and the Newton step has vanished.
pub const STEP_TOL: f64 = 1e-6;
/// Coefficients beyond this magnitude with a live step signal separation.
pub const SEPARATION_COEF: f64 = 30.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogisticFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
    /// Max-norm of the weighted score at the solution.
    pub gradient_norm: f64,
}

impl LogisticFit {
    pub fn predict(&self, design: &Design) -> Vec<f64> {
        propensity_scores(self, design)
    }
}

/// Maximizes the weighted Bernoulli log-likelihood of `outcome` on `design`.
pub fn fit_logistic(design: &Design, outcome: &[u8], weights: Option<&[f64]>) -> Result<LogisticFit> {
    let n = design.rows();
    if outcome.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::Size("design, outcome and weights differ in length".into()));
    }
    if n <= design.cols() {
        return Err(Error::Size(format!("need more rows ({n}) than coefficients ({})", design.cols())));
    }
    check_inputs(outcome, weights)?;
    irls(design, outcome, weights)
}

fn check_inputs(outcome: &[u8], weights: Option<&[f64]>) -> Result<()> {
    if let Some(i) = outcome.iter().position(|&y| y > 1) {
        return Err(Error::Config(format!("outcome at row {i} is not binary")));
    }
    if let Some(w) = weights {
        if let Some(i) = w.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("weight at row {i} is not positive: {}", w[i])));
        }
    }
    Ok(())
}

#[inline]
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn deviance(design: &Design, outcome: &[u8], weight: &impl Fn(usize) -> f64, beta: &[f64]) -> f64 {
    let mut dev = 0.0;
    for (i, &y) in outcome.iter().enumerate() {
        let eta = design.dot(i, beta);
        // -log p = softplus(-eta), -log(1-p) = softplus(eta)
        let nll = if y == 1 { softplus(-eta) } else { softplus(eta) };
        dev += 2.0 * weight(i) * nll;
    }
    dev
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn irls(design: &Design, outcome: &[u8], weights: Option<&[f64]>) -> Result<LogisticFit> {
    let p = design.cols();
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let rank_error = |j: usize| Error::RankDeficient {
        column: j,
        name: design.names()[j].clone(),
    };
    Cholesky::new(&weighted_gram(design, weight), p).map_err(rank_error)?;

    let mut beta = vec![0.0; p];
    let mut dev = deviance(design, outcome, &weight, &beta);
    let mut mu = vec![0.0; design.rows()];
    for iteration in 1..=MAX_ITERATIONS {
        let mut grad = vec![0.0; p];
        for (i, (m, &y)) in mu.iter_mut().zip(outcome).enumerate() {
            *m = expit(design.dot(i, &beta));
            let s = weight(i) * (f64::from(y) - *m);
            for (g, x) in grad.iter_mut().zip(design.row(i)) {
                *g += s * x;
            }
        }
        let hessian = weighted_gram(design, |i| weight(i) * mu[i] * (1.0 - mu[i]));
        let chol = match Cholesky::new(&hessian, p) {
            Ok(c) => c,
            Err(_) if max_abs(&beta) > SEPARATION_COEF / 2.0 => {
                return Err(Error::Separation {
                    iterations: iteration,
                    max_coef: max_abs(&beta),
                })
            }
            Err(j) => return Err(rank_error(j)),
        };
        let delta = chol.solve(&grad);
        let gradient_norm = max_abs(&grad);
        if gradient_norm < GRADIENT_TOL && max_abs(&delta) < STEP_TOL {
            return Ok(LogisticFit {
                names: design.names().to_vec(),
                coefficients: beta,
                converged: true,
                iterations: iteration - 1,
                deviance: dev,
                gradient_norm,
            });
        }

        let mut step = 1.0;
        let mut candidate;
        let mut cand_dev;
        let mut halvings = 0;
        loop {
            candidate = beta.iter().zip(&delta).map(|(b, d)| b + step * d).collect::<Vec<_>>();
            cand_dev = deviance(design, outcome, &weight, &candidate);
            if cand_dev <= dev * (1.0 + 1e-12) + 1e-12 || halvings == 30 {
                break;
            }
            step *= 0.5;
            halvings += 1;
        }
        beta = candidate;
        dev = cand_dev;
        if max_abs(&beta) > SEPARATION_COEF && step * max_abs(&delta) > STEP_TOL {
            return Err(Error::Separation {
                iterations: iteration,
                max_coef: max_abs(&beta),
            });
        }
    }
    let grad_norm = {
        let mut grad = vec![0.0; p];
        for (i, &y) in outcome.iter().enumerate() {
            let s = weight(i) * (f64::from(y) - expit(design.dot(i, &beta)));
            for (g, x) in grad.iter_mut().zip(design.row(i)) {
                *g += s * x;
            }
        }
        max_abs(&grad)
    };
    Err(Error::NotConverged {
        iterations: MAX_ITERATIONS,
        gradient: grad_norm,
    })
}

/// `expit` of the linear predictor, row by row.
pub fn propensity_scores(fit: &LogisticFit, design: &Design) -> Vec<f64> {
    (0..design.rows()).map(|i| expit(design.dot(i, &fit.coefficients))).collect()
}

/// `w = a / e + (1 - a) / (1 - e)`.
pub fn ip_weights(ps: &[f64], a: &[u8]) -> Result<Vec<f64>> {
    if ps.len() != a.len() {
        return Err(Error::Size("scores and treatments differ in length".into()));
    }
    if let Some(i) = ps.iter().position(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::Positivity {
            location: format!("row {i}"),
            value: ps[i],
        });
    }
    Ok(ps
        .iter()
        .zip(a)
        .map(|(&e, &ai)| 1.0 / if ai == 1 { e } else { 1.0 - e })
        .collect())
}

/// Column names of the propensity model for each world: saturated in
/// binary `(z, x)` for the discrete world, logit-linear otherwise.
pub fn propensity_columns(kind: WorldKind) -> &'static [&'static str] {
    match kind {
        WorldKind::Discrete => &["intercept", "z", "x", "z:x"],
        WorldKind::Continuous => &["intercept", "z", "x"],
    }
}

fn push_row(kind: WorldKind, z: f64, x: f64, out: &mut Vec<f64>) {
    match kind {
        WorldKind::Discrete => out.extend([1.0, z, x, z * x]),
        WorldKind::Continuous => out.extend([1.0, z, x]),
    }
}

pub fn propensity_design(kind: WorldKind, z: &[f64], x: &[f64]) -> Design {
    Design::from_columns(propensity_columns(kind), z.len(), |i, out| push_row(kind, z[i], x[i], out))
}

fn is_binary(v: f64) -> bool {
    v == 0.0 || v == 1.0
}

/// Fits `A ~ (Z, X)` with the world's propensity model.
///
/// In the discrete world rows are first collapsed to the eight distinct
/// `(z, x, a)` patterns with summed weights, which leaves the likelihood
/// unchanged.
pub fn fit_propensity(
    kind: WorldKind,
    z: &[f64],
    x: &[f64],
    a: &[u8],
    weights: Option<&[f64]>,
) -> Result<LogisticFit> {
    let n = z.len();
    if x.len() != n || a.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::Size("propensity inputs differ in length".into()));
    }
    if kind == WorldKind::Continuous {
        return fit_logistic(&propensity_design(kind, z, x), a, weights);
    }
    let p = propensity_columns(kind).len();
    if n <= p {
        return Err(Error::Size(format!("need more rows ({n}) than coefficients ({p})")));
    }
    check_inputs(a, weights)?;
    let mut mass = [0.0f64; 8];
    for i in 0..n {
        if !is_binary(z[i]) || !is_binary(x[i]) {
            return Err(Error::Config(format!("row {i}: discrete covariates must be 0 or 1")));
        }
        let key = (bit(z[i]) as usize) << 2 | (bit(x[i]) as usize) << 1 | a[i] as usize;
        mass[key] += weights.map_or(1.0, |w| w[i]);
    }
    let mut data = Vec::new();
    let mut outcome = Vec::new();
    let mut w = Vec::new();
    for (key, &m) in mass.iter().enumerate() {
        if m > 0.0 {
            push_row(kind, (key >> 2) as f64, ((key >> 1) & 1) as f64, &mut data);
            outcome.push((key & 1) as u8);
            w.push(m);
        }
    }
    let names = propensity_columns(kind).iter().map(|s| s.to_string()).collect();
    irls(&Design::new(names, data)?, &outcome, Some(&w))
}

/// Propensity scores of a fitted world model at `(z, x)`; `x` may be
/// fractional.
pub fn predict_propensity(kind: WorldKind, fit: &LogisticFit, z: &[f64], x: &[f64]) -> Vec<f64> {
    let score = |zi: f64, xi: f64| {
        let mut row = Vec::with_capacity(4);
        push_row(kind, zi, xi, &mut row);
        expit(row.iter().zip(&fit.coefficients).map(|(r, b)| r * b).sum())
    };
    if kind == WorldKind::Discrete {
        // four distinct scores when the covariates are binary
        let table = [score(0.0, 0.0), score(0.0, 1.0), score(1.0, 0.0), score(1.0, 1.0)];
        z.iter()
            .zip(x)
            .map(|(&zi, &xi)| {
                if is_binary(zi) && is_binary(xi) {
                    table[(bit(zi) as usize) << 1 | bit(xi) as usize]
                } else {
                    score(zi, xi)
                }
            })
            .collect()
    } else {
        z.iter().zip(x).map(|(&zi, &xi)| score(zi, xi)).collect()
    }
}

/// Closed-form maximum likelihood of a saturated logistic model: the
/// (weighted) share of ones in each cell. `None` marks an empty cell.
pub fn saturated_frequencies(cells: &[usize], outcome: &[u8], n_cells: usize) -> Vec<Option<f64>> {
    let mut ones = vec![0usize; n_cells];
    let mut total = vec![0usize; n_cells];
    for (&c, &y) in cells.iter().zip(outcome) {
        total[c] += 1;
        ones[c] += y as usize;
    }
    ones.iter()
        .zip(&total)
        .map(|(&k, &t)| (t > 0).then(|| k as f64 / t as f64))
        .collect()
}
