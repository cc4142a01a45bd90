//! Single-dataset treatment-effect estimators.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dgp::{bit, WorldKind};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Design};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseEstimator {
    Ht,
    Hajek,
    Match,
    OutcomeRegression,
}

impl BaseEstimator {
    pub const ALL: [BaseEstimator; 4] = [Self::Ht, Self::Hajek, Self::Match, Self::OutcomeRegression];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ht => "ht",
            Self::Hajek => "hajek",
            Self::Match => "match",
            Self::OutcomeRegression => "outcome_regression",
        }
    }

    pub fn ipw_form(self) -> Option<IpwForm> {
        match self {
            Self::Ht => Some(IpwForm::Ht),
            Self::Hajek => Some(IpwForm::Hajek),
            _ => None,
        }
    }
}

impl fmt::Display for BaseEstimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaseEstimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown base estimator `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IpwForm {
    Ht,
    Hajek,
}

impl From<IpwForm> for BaseEstimator {
    fn from(form: IpwForm) -> Self {
        match form {
            IpwForm::Ht => BaseEstimator::Ht,
            IpwForm::Hajek => BaseEstimator::Hajek,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EffectEstimate {
    pub estimator: BaseEstimator,
    pub tau_hat: f64,
    pub theta1_hat: Option<f64>,
    pub theta0_hat: Option<f64>,
    pub n: usize,
}

impl EffectEstimate {
    fn from_groups(estimator: BaseEstimator, theta1: f64, theta0: f64, n: usize) -> Self {
        Self {
            estimator,
            tau_hat: theta1 - theta0,
            theta1_hat: Some(theta1),
            theta0_hat: Some(theta0),
            n,
        }
    }
}

fn check_lengths(y: &[f64], a: &[u8], other: usize) -> Result<usize> {
    let n = y.len();
    if a.len() != n || other != n {
        return Err(Error::Size("estimator inputs differ in length".into()));
    }
    if n == 0 {
        return Err(Error::Size("no units".into()));
    }
    if let Some(i) = a.iter().position(|&v| v > 1) {
        return Err(Error::Config(format!("treatment at row {i} is not binary")));
    }
    Ok(n)
}

fn check_weights(w: &[f64]) -> Result<()> {
    match w.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(i) => Err(Error::Config(format!("weight at row {i} is not positive: {}", w[i]))),
        None => Ok(()),
    }
}

/// Weighted group sums `[sum over a=0, sum over a=1]` of `w * y` and `w`.
fn group_sums(y: &[f64], a: &[u8], w: &[f64]) -> ([f64; 2], [f64; 2]) {
    let mut wy = [0.0; 2];
    let mut ws = [0.0; 2];
    for ((&yi, &ai), &wi) in y.iter().zip(a).zip(w) {
        wy[ai as usize] += wi * yi;
        ws[ai as usize] += wi;
    }
    (wy, ws)
}

/// Horvitz-Thompson: weighted group sums divided by the full sample size.
pub fn ht_ipw(y: &[f64], a: &[u8], weights: &[f64]) -> Result<EffectEstimate> {
    let n = check_lengths(y, a, weights.len())?;
    check_weights(weights)?;
    let (wy, _) = group_sums(y, a, weights);
    let nf = n as f64;
    Ok(EffectEstimate::from_groups(BaseEstimator::Ht, wy[1] / nf, wy[0] / nf, n))
}

/// Hajek: weighted outcome averages within each treatment group.
pub fn hajek_ipw(y: &[f64], a: &[u8], weights: &[f64]) -> Result<EffectEstimate> {
    let n = check_lengths(y, a, weights.len())?;
    check_weights(weights)?;
    let (wy, ws) = group_sums(y, a, weights);
    for group in [1u8, 0] {
        if ws[group as usize] <= 0.0 {
            return Err(Error::GroupEmpty { group });
        }
    }
    Ok(EffectEstimate::from_groups(
        BaseEstimator::Hajek,
        wy[1] / ws[1],
        wy[0] / ws[0],
        n,
    ))
}

pub fn ipw(form: IpwForm, y: &[f64], a: &[u8], weights: &[f64]) -> Result<EffectEstimate> {
    match form {
        IpwForm::Ht => ht_ipw(y, a, weights),
        IpwForm::Hajek => hajek_ipw(y, a, weights),
    }
}

/// Units sharing one score value within a treatment group.
struct Run {
    score: f64,
    count: f64,
    y_sum: f64,
}

/// Score runs of the control and treated groups.
fn runs(ps: &[f64], a: &[u8], y: &[f64]) -> [Vec<Run>; 2] {
    // few distinct scores (the discrete world has four): linear grouping
    const FEW: usize = 16;
    let mut few: [Vec<Run>; 2] = [Vec::new(), Vec::new()];
    let mut last = [0usize; 2];
    let mut overflow = false;
    for i in 0..ps.len() {
        let g = a[i] as usize;
        let (runs, last) = (&mut few[g], &mut last[g]);
        if !runs.get(*last).is_some_and(|r| r.score == ps[i]) {
            if let Some(j) = runs.iter().position(|r| r.score == ps[i]) {
                *last = j;
            } else if runs.len() < FEW {
                runs.push(Run { score: ps[i], count: 0.0, y_sum: 0.0 });
                *last = runs.len() - 1;
            } else {
                overflow = true;
                break;
            }
        }
        runs[*last].count += 1.0;
        runs[*last].y_sum += y[i];
    }
    if !overflow {
        for runs in &mut few {
            runs.sort_by(|p, q| p.score.total_cmp(&q.score));
        }
        return few;
    }
    [sorted_runs(ps, a, y, 0), sorted_runs(ps, a, y, 1)]
}

fn sorted_runs(ps: &[f64], a: &[u8], y: &[f64], group: u8) -> Vec<Run> {
    let mut members: Vec<(f64, f64)> = (0..ps.len())
        .filter(|&i| a[i] == group)
        .map(|i| (ps[i], y[i]))
        .collect();
    members.sort_unstable_by(|p, q| p.0.total_cmp(&q.0));
    let mut out: Vec<Run> = Vec::new();
    for (score, yi) in members {
        match out.last_mut() {
            Some(run) if run.score == score => {
                run.count += 1.0;
                run.y_sum += yi;
            }
            _ => out.push(Run {
                score,
                count: 1.0,
                y_sum: yi,
            }),
        }
    }
    out
}

/// Mean outcome over every unit of `runs` at minimal distance from `score`.
fn nearest_mean(runs: &[Run], score: f64) -> f64 {
    let upper = runs.partition_point(|r| r.score < score);
    let candidates = [upper.checked_sub(1), (upper < runs.len()).then_some(upper)];
    let best = candidates
        .iter()
        .flatten()
        .map(|&j| (runs[j].score - score).abs())
        .fold(f64::INFINITY, f64::min);
    let (mut count, mut total) = (0.0, 0.0);
    for &j in candidates.iter().flatten() {
        if (runs[j].score - score).abs() == best {
            count += runs[j].count;
            total += runs[j].y_sum;
        }
    }
    total / count
}

/// Nearest-neighbour matching on the score, with replacement, in ATE form.
///
/// Each unit's missing potential outcome is the mean outcome of the
/// opposite-group units nearest in score; equidistant neighbours are all
/// averaged.
pub fn match_ps(ps: &[f64], a: &[u8], y: &[f64]) -> Result<EffectEstimate> {
    let n = check_lengths(y, a, ps.len())?;
    if let Some(i) = ps.iter().position(|v| !v.is_finite()) {
        return Err(Error::Config(format!("score at row {i} is not finite")));
    }
    let by_group = runs(ps, a, y);
    for group in [1u8, 0] {
        if by_group[group as usize].is_empty() {
            return Err(Error::GroupEmpty { group });
        }
    }
    // units of one run share their score, hence their match
    let mut theta = [0.0; 2];
    for group in [0usize, 1] {
        let (own, other) = (&by_group[group], &by_group[1 - group]);
        for run in own {
            theta[group] += run.y_sum;
            theta[1 - group] += run.count * nearest_mean(other, run.score);
        }
    }
    let nf = n as f64;
    Ok(EffectEstimate::from_groups(BaseEstimator::Match, theta[1] / nf, theta[0] / nf, n))
}

/// g-formula with the world's outcome model: saturated cell means in the
/// discrete world, a linear model in `(a, z, x)` otherwise.
pub fn outcome_regression(z: &[f64], x: &[f64], a: &[u8], y: &[f64], kind: WorldKind) -> Result<EffectEstimate> {
    let n = check_lengths(y, a, z.len())?;
    if x.len() != n {
        return Err(Error::Size("estimator inputs differ in length".into()));
    }
    match kind {
        WorldKind::Discrete => saturated_g_formula(z, x, a, y),
        WorldKind::Continuous => {
            let design = Design::from_columns(&["intercept", "a", "z", "x"], n, |i, row| {
                row.extend([1.0, f64::from(a[i]), z[i], x[i]])
            });
            let fit = least_squares(&design, y)?;
            Ok(EffectEstimate {
                estimator: BaseEstimator::OutcomeRegression,
                tau_hat: fit.coefficients[1],
                theta1_hat: None,
                theta0_hat: None,
                n,
            })
        }
    }
}

fn saturated_g_formula(z: &[f64], x: &[f64], a: &[u8], y: &[f64]) -> Result<EffectEstimate> {
    let n = y.len();
    let mut count = [[0.0f64; 2]; 4];
    let mut sum = [[0.0f64; 2]; 4];
    for i in 0..n {
        if !matches!(z[i], 0.0 | 1.0) || !matches!(x[i], 0.0 | 1.0) {
            return Err(Error::Config(format!("row {i}: discrete covariates must be 0 or 1")));
        }
        let cell = (bit(z[i]) as usize) << 1 | bit(x[i]) as usize;
        count[cell][a[i] as usize] += 1.0;
        sum[cell][a[i] as usize] += y[i];
    }
    let (mut theta1, mut theta0) = (0.0, 0.0);
    for cell in 0..4 {
        let weight = (count[cell][0] + count[cell][1]) / n as f64;
        if weight == 0.0 {
            continue;
        }
        for arm in [0usize, 1] {
            if count[cell][arm] == 0.0 {
                return Err(Error::EmptyCell(format!(
                    "(z={}, x={}, a={arm}) has no units",
                    cell >> 1,
                    cell & 1
                )));
            }
        }
        theta1 += weight * sum[cell][1] / count[cell][1];
        theta0 += weight * sum[cell][0] / count[cell][0];
    }
    Ok(EffectEstimate::from_groups(BaseEstimator::OutcomeRegression, theta1, theta0, n))
}
