//! Multiple imputation of the partially observed covariate.
//!
//! Every strategy returns an [`ImputedStack`]: `m` completed copies of one
//! dataset that agree on every observed entry. Draws for row `i` and
//! imputation `k` come from a stream keyed by `(seed, i, k)`, so a stack does
//! not depend on evaluation order.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::dgp::{bit, ContinuousWorldParams, Dataset, DiscreteWorldParams, World, WorldKind};
use crate::error::{Error, Result};
use crate::exact::{build_joint, cond_x};
use crate::linalg::{least_squares, Design};
use crate::propensity::{fit_propensity, ip_weights, predict_propensity, saturated_frequencies, LogisticFit};
use crate::rng::{self, counter_uniform, derive_key, tag};

/// Attempts allowed per draw before the rejection sampler gives up.
pub const MAX_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Oracle,
    Fitted,
    Propensity,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImputedStack {
    pub m: usize,
    pub base: Dataset,
    /// `x_imputed[k][i]`: observed `x_i` when `r_i = 1`, else the k-th draw.
    pub x_imputed: Option<Vec<Vec<f64>>>,
    /// `u_imputed[k][i]`: fitted score when `r_i = 1`, else the k-th draw.
    pub u_imputed: Option<Vec<Vec<f64>>>,
    pub strategy: Strategy,
    /// Set when the imputation model is known to be misspecified.
    pub approximate: bool,
}

impl ImputedStack {
    fn check_m(m: usize) -> Result<()> {
        if m == 0 {
            Err(Error::Config("number of imputations must be at least 1".into()))
        } else {
            Ok(())
        }
    }

    fn with_x(base: &Dataset, m: usize, strategy: Strategy, mut draw: impl FnMut(usize, usize) -> Result<f64>) -> Result<Self> {
        let mut columns = Vec::with_capacity(m);
        for k in 0..m {
            let col = (0..base.n())
                .map(|i| match base.x[i] {
                    Some(v) => Ok(v),
                    None => draw(i, k),
                })
                .collect::<Result<Vec<_>>>()?;
            columns.push(col);
        }
        Ok(Self {
            m,
            base: base.clone(),
            x_imputed: Some(columns),
            u_imputed: None,
            strategy,
            approximate: false,
        })
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    /// Completed covariate column of imputation `k`.
    pub fn x(&self, k: usize) -> Option<&[f64]> {
        self.x_imputed.as_ref().map(|c| c[k].as_slice())
    }

    /// Imputed score column of imputation `k`.
    pub fn u(&self, k: usize) -> Option<&[f64]> {
        self.u_imputed.as_ref().map(|c| c[k].as_slice())
    }

    /// Per-unit mean of the completed covariate over the stack.
    pub fn x_bar(&self) -> Option<Vec<f64>> {
        let cols = self.x_imputed.as_ref()?;
        let mut mean = vec![0.0; self.n()];
        for col in cols {
            for (s, v) in mean.iter_mut().zip(col) {
                *s += v;
            }
        }
        let m = self.m as f64;
        Some(
            mean.into_iter()
                .zip(&self.base.x)
                .map(|(s, obs)| obs.unwrap_or(s / m))
                .collect(),
        )
    }

    /// Long format: `imputation_index,row,z,x,a,y,r`, plus `u` for score
    /// stacks. Unimputed `x` stays empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["imputation_index", "row", "z", "x", "a", "y", "r"];
        if self.u_imputed.is_some() {
            header.push("u");
        }
        out.write_record(&header)?;
        let ds = &self.base;
        for k in 0..self.m {
            for i in 0..self.n() {
                let x = match self.x(k) {
                    Some(col) => col[i].to_string(),
                    None => ds.x[i].map(|v| v.to_string()).unwrap_or_default(),
                };
                let mut record = vec![
                    k.to_string(),
                    i.to_string(),
                    ds.z[i].to_string(),
                    x,
                    ds.a[i].to_string(),
                    ds.y[i].to_string(),
                    ds.r[i].to_string(),
                ];
                if let Some(u) = self.u(k) {
                    record.push(u[i].to_string());
                }
                out.write_record(&record)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Index of the `(z, a, y)` cell in `0..8`.
fn zay_cell(z: f64, a: u8, y: f64) -> usize {
    (bit(z) as usize) << 2 | (a as usize) << 1 | bit(y) as usize
}

fn cell_label(cell: usize) -> String {
    format!("(z={}, a={}, y={})", cell >> 2, (cell >> 1) & 1, cell & 1)
}

fn discrete_cells(ds: &Dataset) -> Result<Vec<usize>> {
    ds.validate()?;
    (0..ds.n())
        .map(|i| {
            let binary = |v: f64| v == 0.0 || v == 1.0;
            if !binary(ds.z[i]) || !binary(ds.y[i]) || ds.x[i].is_some_and(|v| !binary(v)) {
                return Err(Error::Config(format!("row {i}: discrete values must be 0 or 1")));
            }
            Ok(zay_cell(ds.z[i], ds.a[i], ds.y[i]))
        })
        .collect()
}

fn check_kind(ds: &Dataset, kind: WorldKind) -> Result<()> {
    if ds.kind != kind {
        return Err(Error::Config(format!("dataset is {:?}, expected {:?}", ds.kind, kind)));
    }
    Ok(())
}

/// Bernoulli draws of `X*` from per-cell probabilities `q`.
fn impute_binary(ds: &Dataset, cells: &[usize], q: &[f64; 8], m: usize, seed: u64, strategy: Strategy) -> Result<ImputedStack> {
    let key = derive_key(seed, &[tag::IMPUTE]);
    ImputedStack::with_x(ds, m, strategy, |i, k| {
        Ok(f64::from(u8::from(counter_uniform(key, i as u64, k as u64) < q[cells[i]])))
    })
}

/// Draws `X*` from the true conditional distribution of `X` given `(Z, A, Y)`.
pub fn impute_oracle(ds: &Dataset, world: &World, m: usize, seed: u64) -> Result<ImputedStack> {
    ImputedStack::check_m(m)?;
    world.validate()?;
    check_kind(ds, world.kind())?;
    match world {
        World::Discrete(p) => {
            let cells = discrete_cells(ds)?;
            let q = oracle_cell_probs(p)?;
            impute_binary(ds, &cells, &q, m, seed, Strategy::Oracle)
        }
        World::Continuous(p) => {
            ds.validate()?;
            let sampler = PosteriorSampler::new(p);
            let mut draws = vec![Vec::new(); ds.n()];
            for i in (0..ds.n()).filter(|&i| ds.r[i] == 0) {
                let mut rng = rng::stream(seed, &[tag::IMPUTE, i as u64]);
                draws[i] = (0..m)
                    .map(|_| sampler.draw(ds.z[i], ds.a[i], ds.y[i], &mut rng).ok_or(Error::SamplerExhausted { row: i, attempts: MAX_ATTEMPTS }))
                    .collect::<Result<Vec<_>>>()?;
            }
            ImputedStack::with_x(ds, m, Strategy::Oracle, |i, k| Ok(draws[i][k]))
        }
    }
}

/// `P(X = 1 | z, a, y)` for the eight `(z, a, y)` cells.
pub fn oracle_cell_probs(params: &DiscreteWorldParams) -> Result<[f64; 8]> {
    let table = build_joint(params)?;
    let mut q = [0.0; 8];
    for (cell, slot) in q.iter_mut().enumerate() {
        *slot = cond_x(&table, (cell >> 2) as u8, ((cell >> 1) & 1) as u8, (cell & 1) as u8)?;
    }
    Ok(q)
}

/// Exact sampler for `f(x | z, a, y)` in the Gaussian world.
///
/// The covariate prior times the Gaussian outcome factor is a Gaussian
/// proposal; the logistic treatment factor, bounded by one, is the
/// acceptance probability.
#[derive(Clone, Debug)]
pub struct PosteriorSampler {
    params: ContinuousWorldParams,
}

impl PosteriorSampler {
    pub fn new(params: &ContinuousWorldParams) -> Self {
        Self { params: params.clone() }
    }

    /// Mean and standard deviation of the Gaussian proposal.
    pub fn proposal(&self, z: f64, a: u8, y: f64) -> (f64, f64) {
        let p = &self.params;
        let (sx, sy, b2) = (p.x_given_z.sd, p.outcome.sd, p.outcome.x_slope);
        let precision = 1.0 / (sx * sx) + b2 * b2 / (sy * sy);
        let residual = y - p.outcome_mean(z, 0.0, a);
        let mean = (p.x_mean(z) / (sx * sx) + b2 * residual / (sy * sy)) / precision;
        (mean, precision.recip().sqrt())
    }

    /// Probability of accepting a proposed `x`.
    pub fn acceptance(&self, z: f64, a: u8, x: f64) -> f64 {
        let e = self.params.propensity(z, x);
        if a == 1 {
            e
        } else {
            1.0 - e
        }
    }

    pub fn draw<R: Rng>(&self, z: f64, a: u8, y: f64, rng: &mut R) -> Option<f64> {
        let (mean, sd) = self.proposal(z, a, y);
        for _ in 0..MAX_ATTEMPTS {
            let e: f64 = rng.sample(StandardNormal);
            let x = mean + sd * e;
            if rng.random::<f64>() < self.acceptance(z, a, x) {
                return Some(x);
            }
        }
        None
    }
}

/// Draws from a conditional model of `X` given `(Z, A, Y)` fitted on
/// complete cases: saturated cell frequencies in the discrete world, a
/// normal linear model otherwise (flagged approximate).
pub fn impute_fitted(ds: &Dataset, kind: WorldKind, m: usize, seed: u64) -> Result<ImputedStack> {
    ImputedStack::check_m(m)?;
    check_kind(ds, kind)?;
    match kind {
        WorldKind::Discrete => {
            let cells = discrete_cells(ds)?;
            let q = fitted_cell_probs(ds, &cells)?;
            impute_binary(ds, &cells, &q, m, seed, Strategy::Fitted)
        }
        WorldKind::Continuous => {
            ds.validate()?;
            let mut stack = if ds.missing_count() == 0 {
                ImputedStack::with_x(ds, m, Strategy::Fitted, |_, _| unreachable!())?
            } else {
                let model = fit_linear_imputer(ds)?;
                let mut draws = vec![Vec::new(); ds.n()];
                for i in (0..ds.n()).filter(|&i| ds.r[i] == 0) {
                    let mut rng = rng::stream(seed, &[tag::IMPUTE, i as u64]);
                    let mean = model.mean(ds.z[i], ds.a[i], ds.y[i]);
                    draws[i] = (0..m)
                        .map(|_| mean + model.sd * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                }
                ImputedStack::with_x(ds, m, Strategy::Fitted, |i, k| Ok(draws[i][k]))?
            };
            stack.approximate = true;
            Ok(stack)
        }
    }
}

/// Complete-case frequency of `X = 1` in each `(z, a, y)` cell. Cells that
/// no missing row needs are left at zero.
pub fn fitted_cell_probs(ds: &Dataset, cells: &[usize]) -> Result<[f64; 8]> {
    let (cc_cells, cc_x): (Vec<usize>, Vec<u8>) = (0..ds.n())
        .filter_map(|i| ds.x[i].map(|v| (cells[i], bit(v))))
        .unzip();
    let freq = saturated_frequencies(&cc_cells, &cc_x, 8);
    let mut q = [0.0; 8];
    for i in (0..ds.n()).filter(|&i| ds.r[i] == 0) {
        q[cells[i]] = freq[cells[i]].ok_or_else(|| Error::EmptyCell(cell_label(cells[i])))?;
    }
    Ok(q)
}

/// Normal linear model of `X` on `(1, Z, A, Y)` with the maximum
/// likelihood residual scale.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinearImputer {
    pub coefficients: Vec<f64>,
    pub sd: f64,
}

impl LinearImputer {
    pub fn mean(&self, z: f64, a: u8, y: f64) -> f64 {
        let c = &self.coefficients;
        c[0] + c[1] * z + c[2] * f64::from(a) + c[3] * y
    }
}

pub fn fit_linear_imputer(ds: &Dataset) -> Result<LinearImputer> {
    let rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.r[i] == 1).collect();
    let design = Design::from_columns(&["intercept", "z", "a", "y"], rows.len(), |j, out| {
        let i = rows[j];
        out.extend([1.0, ds.z[i], f64::from(ds.a[i]), ds.y[i]])
    });
    let x: Vec<f64> = rows.iter().map(|&i| ds.x[i].unwrap_or_default()).collect();
    let fit = least_squares(&design, &x)?;
    Ok(LinearImputer {
        coefficients: fit.coefficients,
        sd: (fit.rss / rows.len() as f64).sqrt(),
    })
}

/// Whether complete cases are reweighted by the inverse response
/// probability before the propensity fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseWeighting {
    Weighted,
    Unweighted,
}

/// Propensity model fitted on complete cases, with the response model
/// used to weight them.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompleteCaseFit {
    /// `P(R = 1 | z, a, y)` per cell; `None` where the cell is empty.
    pub response_probs: Vec<Option<f64>>,
    pub propensity: LogisticFit,
    pub weighting: ResponseWeighting,
}

pub fn fit_complete_case_propensity(ds: &Dataset, weighting: ResponseWeighting) -> Result<CompleteCaseFit> {
    check_kind(ds, WorldKind::Discrete)?;
    let cells = discrete_cells(ds)?;
    complete_case_fit(ds, &cells, weighting)
}

fn complete_case_fit(ds: &Dataset, cells: &[usize], weighting: ResponseWeighting) -> Result<CompleteCaseFit> {
    let response_probs = saturated_frequencies(cells, &ds.r, 8);
    let rows: Vec<usize> = (0..ds.n()).filter(|&i| ds.r[i] == 1).collect();
    let z: Vec<f64> = rows.iter().map(|&i| ds.z[i]).collect();
    let x: Vec<f64> = rows.iter().map(|&i| ds.x[i].unwrap_or_default()).collect();
    let a: Vec<u8> = rows.iter().map(|&i| ds.a[i]).collect();
    let weights: Option<Vec<f64>> = match weighting {
        ResponseWeighting::Unweighted => None,
        // a row with r = 1 makes its cell's response frequency positive
        ResponseWeighting::Weighted => Some(
            rows.iter()
                .map(|&i| 1.0 / response_probs[cells[i]].unwrap_or(1.0))
                .collect(),
        ),
    };
    let propensity = fit_propensity(WorldKind::Discrete, &z, &x, &a, weights.as_deref())?;
    Ok(CompleteCaseFit {
        response_probs,
        propensity,
        weighting,
    })
}

/// Complete-case rows of each `(z, a, y)` cell, checked to be non-empty
/// wherever a missing row needs donors.
fn donor_pools(ds: &Dataset, cells: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut pools = vec![Vec::new(); 8];
    for i in (0..ds.n()).filter(|&i| ds.r[i] == 1) {
        pools[cells[i]].push(i);
    }
    for i in (0..ds.n()).filter(|&i| ds.r[i] == 0) {
        if pools[cells[i]].is_empty() {
            return Err(Error::ImputationSupport(cell_label(cells[i])));
        }
    }
    Ok(pools)
}

/// Fitted scores of complete cases; zero elsewhere.
fn complete_case_scores(ds: &Dataset, fit: &LogisticFit) -> Vec<f64> {
    let x: Vec<f64> = ds.x.iter().map(|v| v.unwrap_or_default()).collect();
    let mut u = predict_propensity(WorldKind::Discrete, fit, &ds.z, &x);
    for (ui, &r) in u.iter_mut().zip(&ds.r) {
        if r == 0 {
            *ui = 0.0;
        }
    }
    u
}

/// Imputes the propensity score instead of the covariate.
///
/// The score model is fitted on complete cases weighted by the inverse of
/// the estimated response probability; each missing row then receives the
/// score of a complete case drawn uniformly from its `(z, a, y)` cell.
pub fn impute_propensity(ds: &Dataset, m: usize, seed: u64, weighting: ResponseWeighting) -> Result<(ImputedStack, CompleteCaseFit)> {
    ImputedStack::check_m(m)?;
    check_kind(ds, WorldKind::Discrete)?;
    let cells = discrete_cells(ds)?;
    let pools = donor_pools(ds, &cells)?;
    let fit = complete_case_fit(ds, &cells, weighting)?;
    let u_hat = complete_case_scores(ds, &fit.propensity);
    let key = derive_key(seed, &[tag::IMPUTE_PS]);
    let columns = (0..m)
        .map(|k| {
            (0..ds.n())
                .map(|i| {
                    if ds.r[i] == 1 {
                        return u_hat[i];
                    }
                    let pool = &pools[cells[i]];
                    let pick = (counter_uniform(key, i as u64, k as u64) * pool.len() as f64) as usize;
                    u_hat[pool[pick.min(pool.len() - 1)]]
                })
                .collect()
        })
        .collect();
    let stack = ImputedStack {
        m,
        base: ds.clone(),
        x_imputed: None,
        u_imputed: Some(columns),
        strategy: Strategy::Propensity,
        approximate: false,
    };
    Ok((stack, fit))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    /// Estimated inverse probability weight at the observed covariate.
    Exact,
    /// Mean estimated weight of complete cases in the unit's cell.
    CellMean,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProxyWeights {
    pub weights: Vec<f64>,
    pub source: Vec<WeightSource>,
}

/// Single mean prediction of the weight for rows with a missing covariate.
pub fn proxy_weights_impw(ds: &Dataset) -> Result<ProxyWeights> {
    check_kind(ds, WorldKind::Discrete)?;
    let cells = discrete_cells(ds)?;
    let pools = donor_pools(ds, &cells)?;
    let fit = complete_case_fit(ds, &cells, ResponseWeighting::Weighted)?;
    let u_hat = complete_case_scores(ds, &fit.propensity);

    let mut sum = [0.0; 8];
    let mut weights = vec![0.0; ds.n()];
    for i in (0..ds.n()).filter(|&i| ds.r[i] == 1) {
        weights[i] = ip_weights(&[u_hat[i]], &[ds.a[i]]).map_err(|_| Error::Positivity {
            location: format!("row {i}"),
            value: u_hat[i],
        })?[0];
        sum[cells[i]] += weights[i];
    }
    let source = (0..ds.n())
        .map(|i| {
            if ds.r[i] == 1 {
                WeightSource::Exact
            } else {
                weights[i] = sum[cells[i]] / pools[cells[i]].len() as f64;
                WeightSource::CellMean
            }
        })
        .collect();
    Ok(ProxyWeights { weights, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::generate_discrete;
    use proptest::prelude::*;

    fn default_data(n: usize, seed: u64) -> Dataset {
        generate_discrete(&DiscreteWorldParams::default_preset(), n, seed).unwrap()
    }

    #[test]
    fn complete_data_gives_identical_copies() {
        let ds = generate_discrete(&DiscreteWorldParams::no_missing(), 200, 3).unwrap();
        let world = World::Discrete(DiscreteWorldParams::no_missing());
        for stack in [impute_oracle(&ds, &world, 3, 1).unwrap(), impute_fitted(&ds, WorldKind::Discrete, 3, 1).unwrap()] {
            let observed: Vec<f64> = ds.x.iter().map(|v| v.unwrap()).collect();
            for k in 0..3 {
                assert_eq!(stack.x(k).unwrap(), observed.as_slice());
            }
        }
        let (stack, _) = impute_propensity(&ds, 2, 1, ResponseWeighting::Weighted).unwrap();
        assert_eq!(stack.u(0), stack.u(1));
    }

    #[test]
    fn zero_imputations_rejected() {
        let ds = default_data(50, 1);
        let world = World::preset("default").unwrap();
        assert!(matches!(impute_oracle(&ds, &world, 0, 1), Err(Error::Config(_))));
    }

    #[test]
    fn kind_mismatch_rejected() {
        let ds = default_data(50, 1);
        assert!(impute_fitted(&ds, WorldKind::Continuous, 2, 1).is_err());
        assert!(impute_oracle(&ds, &World::preset("continuous").unwrap(), 2, 1).is_err());
    }

    #[test]
    fn empty_cell_is_reported() {
        let mut ds = default_data(400, 2);
        // mask every complete case in cell (z=1, a=1, y=1)
        for i in 0..ds.n() {
            if zay_cell(ds.z[i], ds.a[i], ds.y[i]) == 7 {
                ds.r[i] = 0;
                ds.x[i] = None;
            }
        }
        let err = impute_fitted(&ds, WorldKind::Discrete, 2, 1).unwrap_err();
        assert!(matches!(&err, Error::EmptyCell(c) if c.contains("z=1, a=1, y=1")));
        assert!(matches!(
            impute_propensity(&ds, 2, 1, ResponseWeighting::Weighted),
            Err(Error::ImputationSupport(_))
        ));
        assert!(proxy_weights_impw(&ds).is_err());
    }

    #[test]
    fn half_propensity_world_gives_weight_two() {
        let mut p = DiscreteWorldParams::default_preset();
        p.ps_coeffs = [0.0; 4];
        let ds = generate_discrete(&p, 4000, 5).unwrap();
        // the saturated fit recovers the empirical treated share per (z, x)
        let pw = proxy_weights_impw(&ds).unwrap();
        assert!(pw.weights.iter().all(|&w| (w - 2.0).abs() < 0.3));
        assert!(pw.weights.iter().all(|&w| w >= 1.0));
    }

    #[test]
    fn proposal_is_conjugate_product() {
        let mut p = ContinuousWorldParams::default_preset();
        p.x_given_z = crate::dgp::GaussianCovariate { intercept: 1.0, slope: 0.0, sd: 2.0 };
        p.outcome.x_slope = 1.0;
        p.outcome.sd = 2.0;
        let s = PosteriorSampler::new(&p);
        // prior N(1, 4), likelihood of x from y - t a - b0 - b1 z = 3 with variance 4
        let (mean, sd) = s.proposal(0.0, 0, 3.0);
        assert!((mean - 2.0).abs() < 1e-12);
        assert!((sd - 2.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stack_csv_is_long_format() {
        let ds = default_data(5, 1);
        let stack = impute_oracle(&ds, &World::preset("default").unwrap(), 2, 1).unwrap();
        let mut buf = Vec::new();
        stack.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("imputation_index,row,z,x,a,y,r\n"));
        assert_eq!(text.lines().count(), 1 + 2 * 5);
    }

    #[test]
    fn x_bar_averages_draws() {
        let ds = default_data(300, 4);
        let stack = impute_oracle(&ds, &World::preset("default").unwrap(), 4, 9).unwrap();
        let bar = stack.x_bar().unwrap();
        for i in 0..ds.n() {
            let mean = (0..4).map(|k| stack.x(k).unwrap()[i]).sum::<f64>() / 4.0;
            assert!((bar[i] - mean).abs() < 1e-15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn observed_entries_never_change(seed in any::<u64>(), m in 1usize..5) {
            let ds = default_data(300, seed);
            let world = World::preset("default").unwrap();
            let stacks = [
                impute_oracle(&ds, &world, m, seed ^ 1),
                impute_fitted(&ds, WorldKind::Discrete, m, seed ^ 2),
            ];
            for stack in stacks.into_iter().flatten() {
                for k in 0..m {
                    let col = stack.x(k).unwrap();
                    for i in 0..ds.n() {
                        match ds.x[i] {
                            Some(v) => prop_assert_eq!(col[i], v),
                            None => prop_assert!(col[i] == 0.0 || col[i] == 1.0),
                        }
                    }
                }
            }
            if let Ok((stack, _)) = impute_propensity(&ds, m, seed, ResponseWeighting::Weighted) {
                for k in 1..m {
                    for i in (0..ds.n()).filter(|&i| ds.r[i] == 1) {
                        prop_assert_eq!(stack.u(k).unwrap()[i], stack.u(0).unwrap()[i]);
                    }
                }
            }
        }

        #[test]
        fn proxy_weights_are_at_least_one(seed in any::<u64>()) {
            let ds = default_data(500, seed);
            if let Ok(pw) = proxy_weights_impw(&ds) {
                prop_assert!(pw.weights.iter().all(|&w| w >= 1.0));
            }
        }

        #[test]
        fn stacks_are_deterministic(seed in any::<u64>()) {
            let ds = default_data(100, seed);
            let world = World::preset("default").unwrap();
            prop_assert_eq!(impute_oracle(&ds, &world, 3, seed).unwrap(), impute_oracle(&ds, &world, 3, seed).unwrap());
        }
    }
}
