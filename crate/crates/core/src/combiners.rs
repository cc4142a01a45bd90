//! Combining multiple imputation with propensity-score estimation.
//!
//! `within` estimates the effect in every completed dataset and averages the
//! estimates. The across methods pool an intermediate quantity over the
//! stack first (scores, model coefficients or weights) and estimate once.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dgp::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{ipw, match_ps, outcome_regression, BaseEstimator, EffectEstimate, IpwForm};
use crate::imputation::{proxy_weights_impw, ImputedStack};
use crate::propensity::{fit_propensity, ip_weights, predict_propensity, LogisticFit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Within,
    Aps,
    Apm,
    Apw,
    WithinImps,
    Impw,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Self::Within,
        Self::Aps,
        Self::Apm,
        Self::Apw,
        Self::WithinImps,
        Self::Impw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Within => "within",
            Self::Aps => "aps",
            Self::Apm => "apm",
            Self::Apw => "apw",
            Self::WithinImps => "within_imps",
            Self::Impw => "impw",
        }
    }

    /// Base estimators the method can be combined with.
    pub fn bases(self) -> &'static [BaseEstimator] {
        use BaseEstimator::*;
        match self {
            Self::Within => &[Ht, Hajek, Match, OutcomeRegression],
            Self::Aps | Self::WithinImps => &[Ht, Hajek, Match],
            Self::Apm => &[Hajek],
            Self::Apw | Self::Impw => &[Ht, Hajek],
        }
    }

    pub fn check_base(self, base: BaseEstimator) -> Result<()> {
        if self.bases().contains(&base) {
            Ok(())
        } else {
            Err(Error::Config(format!("method `{self}` does not support base `{base}`")))
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Quantity an across method pooled before its single estimation.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooled {
    Scores(Vec<f64>),
    Coefficients { coefficients: Vec<f64>, x_bar: Vec<f64> },
    Weights(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: Method,
    pub base: BaseEstimator,
    pub tau_hat: f64,
    /// Estimates of the individual completed datasets (within methods).
    pub per_imputation: Vec<f64>,
    pub pooled: Option<Pooled>,
}

impl MethodResult {
    fn pooled(method: Method, base: BaseEstimator, tau_hat: f64, pooled: Pooled) -> Self {
        Self {
            method,
            base,
            tau_hat,
            per_imputation: Vec::new(),
            pooled: Some(pooled),
        }
    }
}

/// Propensity model refitted on every completed dataset of a stack.
#[derive(Clone, Debug, PartialEq)]
pub struct CompletedFits {
    pub fits: Vec<LogisticFit>,
    pub scores: Vec<Vec<f64>>,
}

impl CompletedFits {
    pub fn new(stack: &ImputedStack) -> Result<Self> {
        let ds = &stack.base;
        let mut fits = Vec::with_capacity(stack.m);
        let mut scores = Vec::with_capacity(stack.m);
        for k in 0..stack.m {
            let x = covariate(stack, k)?;
            let fit = fit_propensity(ds.kind, &ds.z, x, &ds.a, None).map_err(|e| e.at_imputation(k))?;
            scores.push(predict_propensity(ds.kind, &fit, &ds.z, x));
            fits.push(fit);
        }
        Ok(Self { fits, scores })
    }
}

fn covariate(stack: &ImputedStack, k: usize) -> Result<&[f64]> {
    stack
        .x(k)
        .ok_or_else(|| Error::Config("stack carries no imputed covariate".into()))
}

fn check_fits(stack: &ImputedStack, fits: &CompletedFits) -> Result<()> {
    if fits.scores.len() != stack.m || fits.scores.iter().any(|s| s.len() != stack.n()) {
        return Err(Error::Size("fits do not match the stack".into()));
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-unit average of `columns`.
fn column_mean(columns: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; columns.first().map_or(0, Vec::len)];
    for col in columns {
        for (o, v) in out.iter_mut().zip(col) {
            *o += v;
        }
    }
    let m = columns.len() as f64;
    out.iter_mut().for_each(|o| *o /= m);
    out
}

/// Base estimate from propensity scores.
fn from_scores(base: BaseEstimator, ds: &Dataset, ps: &[f64]) -> Result<EffectEstimate> {
    match base.ipw_form() {
        Some(form) => ipw(form, &ds.y, &ds.a, &ip_weights(ps, &ds.a)?),
        None if base == BaseEstimator::Match => match_ps(ps, &ds.a, &ds.y),
        None => Err(Error::Config(format!("base `{base}` needs covariates, not scores"))),
    }
}

fn within_average(method: Method, base: BaseEstimator, m: usize, estimate: impl Fn(usize) -> Result<EffectEstimate>) -> Result<MethodResult> {
    let per_imputation = (0..m)
        .map(|k| estimate(k).map(|e| e.tau_hat).map_err(|e| e.at_imputation(k)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MethodResult {
        method,
        base,
        tau_hat: mean(&per_imputation),
        per_imputation,
        pooled: None,
    })
}

/// Estimates the effect in each completed dataset and averages.
pub fn within(stack: &ImputedStack, base: BaseEstimator) -> Result<MethodResult> {
    if base == BaseEstimator::OutcomeRegression {
        return within_outcome_regression(stack);
    }
    within_with(stack, &CompletedFits::new(stack)?, base)
}

pub fn within_with(stack: &ImputedStack, fits: &CompletedFits, base: BaseEstimator) -> Result<MethodResult> {
    if base == BaseEstimator::OutcomeRegression {
        return within_outcome_regression(stack);
    }
    check_fits(stack, fits)?;
    within_average(Method::Within, base, stack.m, |k| from_scores(base, &stack.base, &fits.scores[k]))
}

fn within_outcome_regression(stack: &ImputedStack) -> Result<MethodResult> {
    let ds = &stack.base;
    covariate(stack, 0)?;
    within_average(Method::Within, BaseEstimator::OutcomeRegression, stack.m, |k| {
        outcome_regression(&ds.z, covariate(stack, k)?, &ds.a, &ds.y, ds.kind)
    })
}

/// Averages each unit's propensity score over the stack, then estimates once.
pub fn across_aps(stack: &ImputedStack, base: BaseEstimator) -> Result<MethodResult> {
    Method::Aps.check_base(base)?;
    across_aps_with(stack, &CompletedFits::new(stack)?, base)
}

pub fn across_aps_with(stack: &ImputedStack, fits: &CompletedFits, base: BaseEstimator) -> Result<MethodResult> {
    Method::Aps.check_base(base)?;
    check_fits(stack, fits)?;
    let scores = column_mean(&fits.scores);
    let est = from_scores(base, &stack.base, &scores)?;
    Ok(MethodResult::pooled(Method::Aps, base, est.tau_hat, Pooled::Scores(scores)))
}

/// Averages the propensity model's coefficients over the stack and scores
/// every unit at its observed covariate, or at the mean of its imputations.
pub fn across_apm(stack: &ImputedStack) -> Result<MethodResult> {
    across_apm_with(stack, &CompletedFits::new(stack)?)
}

pub fn across_apm_with(stack: &ImputedStack, fits: &CompletedFits) -> Result<MethodResult> {
    check_fits(stack, fits)?;
    let ds = &stack.base;
    let coefficients = column_mean(&fits.fits.iter().map(|f| f.coefficients.clone()).collect::<Vec<_>>());
    let pooled_fit = LogisticFit {
        coefficients: coefficients.clone(),
        ..fits.fits[0].clone()
    };
    let x_bar = stack
        .x_bar()
        .ok_or_else(|| Error::Config("stack carries no imputed covariate".into()))?;
    let scores = predict_propensity(ds.kind, &pooled_fit, &ds.z, &x_bar);
    let est = from_scores(BaseEstimator::Hajek, ds, &scores)?;
    Ok(MethodResult::pooled(
        Method::Apm,
        BaseEstimator::Hajek,
        est.tau_hat,
        Pooled::Coefficients { coefficients, x_bar },
    ))
}

/// Averages each unit's inverse probability weight over the stack, then
/// estimates once.
pub fn across_apw(stack: &ImputedStack, form: IpwForm) -> Result<MethodResult> {
    across_apw_with(stack, &CompletedFits::new(stack)?, form)
}

pub fn across_apw_with(stack: &ImputedStack, fits: &CompletedFits, form: IpwForm) -> Result<MethodResult> {
    check_fits(stack, fits)?;
    let ds = &stack.base;
    let weights = fits
        .scores
        .iter()
        .enumerate()
        .map(|(k, ps)| ip_weights(ps, &ds.a).map_err(|e| e.at_imputation(k)))
        .collect::<Result<Vec<_>>>()?;
    let w_bar = column_mean(&weights);
    let est = ipw(form, &ds.y, &ds.a, &w_bar)?;
    Ok(MethodResult::pooled(Method::Apw, form.into(), est.tau_hat, Pooled::Weights(w_bar)))
}

/// Within method on imputed propensity scores, used directly as scores.
pub fn within_imps(stack: &ImputedStack, base: BaseEstimator) -> Result<MethodResult> {
    Method::WithinImps.check_base(base)?;
    if stack.u_imputed.is_none() {
        return Err(Error::Config("stack carries no imputed propensity scores".into()));
    }
    within_average(Method::WithinImps, base, stack.m, |k| {
        from_scores(base, &stack.base, stack.u(k).unwrap_or_default())
    })
}

/// IPW with the mean-predicted weight for units missing the covariate.
pub fn impw_estimate(ds: &Dataset, form: IpwForm) -> Result<MethodResult> {
    let proxy = proxy_weights_impw(ds)?;
    let est = ipw(form, &ds.y, &ds.a, &proxy.weights)?;
    Ok(MethodResult::pooled(Method::Impw, form.into(), est.tau_hat, Pooled::Weights(proxy.weights)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dgp::{generate_discrete, DiscreteWorldParams, World, WorldKind};
    use crate::imputation::{impute_fitted, impute_oracle, impute_propensity, ResponseWeighting, Strategy};
    use proptest::prelude::*;

    fn oracle_stack(n: usize, m: usize, seed: u64) -> ImputedStack {
        let world = World::preset("default").unwrap();
        let ds = world.generate(n, seed).unwrap();
        impute_oracle(&ds, &world, m, seed.wrapping_add(1)).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("aipw".parse::<Method>().is_err());
        assert!(across_aps(&oracle_stack(200, 2, 1), BaseEstimator::OutcomeRegression).is_err());
    }

    #[test]
    fn within_is_mean_of_estimates() {
        let stack = oracle_stack(500, 4, 3);
        for base in BaseEstimator::ALL {
            let r = within(&stack, base).unwrap();
            assert_eq!(r.per_imputation.len(), 4);
            assert_eq!(r.tau_hat, r.per_imputation.iter().sum::<f64>() / 4.0);
        }
    }

    #[test]
    fn complete_data_reduces_to_single_estimate() {
        let p = DiscreteWorldParams::no_missing();
        let ds = generate_discrete(&p, 800, 7).unwrap();
        let x: Vec<f64> = ds.x.iter().map(|v| v.unwrap()).collect();
        let fit = fit_propensity(WorldKind::Discrete, &ds.z, &x, &ds.a, None).unwrap();
        let ps = predict_propensity(WorldKind::Discrete, &fit, &ds.z, &x);
        let stack = impute_fitted(&ds, WorldKind::Discrete, 3, 1).unwrap();
        for base in [BaseEstimator::Ht, BaseEstimator::Hajek, BaseEstimator::Match] {
            let single = from_scores(base, &ds, &ps).unwrap().tau_hat;
            assert!((within(&stack, base).unwrap().tau_hat - single).abs() < 1e-12);
            assert!((across_aps(&stack, base).unwrap().tau_hat - single).abs() < 1e-12);
        }
        let hajek = from_scores(BaseEstimator::Hajek, &ds, &ps).unwrap().tau_hat;
        assert!((across_apm(&stack).unwrap().tau_hat - hajek).abs() < 1e-12);
        let w = ip_weights(&ps, &ds.a).unwrap();
        let impw = impw_estimate(&ds, IpwForm::Ht).unwrap().tau_hat;
        assert!((impw - ipw(IpwForm::Ht, &ds.y, &ds.a, &w).unwrap().tau_hat).abs() < 1e-12);
    }

    #[test]
    fn single_imputation_collapses_across_to_within() {
        let stack = oracle_stack(600, 1, 11);
        for base in [BaseEstimator::Ht, BaseEstimator::Hajek, BaseEstimator::Match] {
            assert_eq!(across_aps(&stack, base).unwrap().tau_hat, within(&stack, base).unwrap().tau_hat);
        }
        for form in [IpwForm::Ht, IpwForm::Hajek] {
            let apw = across_apw(&stack, form).unwrap().tau_hat;
            assert!((apw - within(&stack, form.into()).unwrap().tau_hat).abs() < 1e-12);
        }
        let apm = across_apm(&stack).unwrap().tau_hat;
        assert!((apm - within(&stack, BaseEstimator::Hajek).unwrap().tau_hat).abs() < 1e-12);
    }

    #[test]
    fn identical_imputations_make_apm_equal_aps() {
        let mut p = DiscreteWorldParams::default_preset();
        // X determined by Z up to positivity: imputations barely vary
        p.p_x_given_z = [0.5, 0.5];
        let ds = generate_discrete(&p, 500, 2).unwrap();
        let stack = impute_fitted(&ds, WorldKind::Discrete, 1, 3).unwrap();
        let mut copies = stack.clone();
        copies.m = 3;
        copies.x_imputed = Some(vec![stack.x(0).unwrap().to_vec(); 3]);
        let aps = across_aps(&copies, BaseEstimator::Hajek).unwrap().tau_hat;
        let apm = across_apm(&copies).unwrap().tau_hat;
        assert!((aps - apm).abs() < 1e-12);
    }

    #[test]
    fn within_imps_on_complete_data_uses_fitted_scores() {
        let ds = generate_discrete(&DiscreteWorldParams::no_missing(), 600, 5).unwrap();
        let (stack, fit) = impute_propensity(&ds, 2, 1, ResponseWeighting::Weighted).unwrap();
        let x: Vec<f64> = ds.x.iter().map(|v| v.unwrap()).collect();
        let ps = predict_propensity(WorldKind::Discrete, &fit.propensity, &ds.z, &x);
        let expected = from_scores(BaseEstimator::Hajek, &ds, &ps).unwrap().tau_hat;
        assert_eq!(within_imps(&stack, BaseEstimator::Hajek).unwrap().tau_hat, expected);
        assert_eq!(stack.strategy, Strategy::Propensity);
    }

    #[test]
    fn half_propensity_impw_is_difference_in_means() {
        let mut p = DiscreteWorldParams::default_preset();
        p.ps_coeffs = [0.0; 4];
        p.p_x_given_z = [0.5, 0.5];
        let ds = generate_discrete(&p, 2000, 8).unwrap();
        let r = impw_estimate(&ds, IpwForm::Hajek).unwrap();
        let Some(Pooled::Weights(w)) = &r.pooled else { panic!() };
        assert!(w.iter().all(|&v| v >= 1.0));
        // with equal weights inside each arm, Hajek reduces to group means
        let group_mean = |g: u8| {
            let (s, c) = (0..ds.n())
                .filter(|&i| ds.a[i] == g)
                .fold((0.0, 0.0), |(s, c), i| (s + ds.y[i], c + 1.0));
            s / c
        };
        let weights_constant_per_arm = (0..2u8).all(|g| {
            let ws: Vec<f64> = (0..ds.n()).filter(|&i| ds.a[i] == g).map(|i| w[i]).collect();
            ws.iter().all(|&v| (v - ws[0]).abs() < 1e-12)
        });
        if weights_constant_per_arm {
            assert!((r.tau_hat - (group_mean(1) - group_mean(0))).abs() < 1e-12);
        }
    }

    #[test]
    fn errors_carry_imputation_index() {
        let mut stack = oracle_stack(300, 2, 4);
        stack.x_imputed.as_mut().unwrap()[1] = vec![0.0; 300];
        let err = within(&stack, BaseEstimator::Hajek).unwrap_err();
        assert!(matches!(err, Error::Imputation { index: 1, .. }), "{err}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn apw_ht_equals_within_ht(n in 40usize..400, m in prop::sample::select(vec![1usize, 2, 5]), seed in any::<u64>()) {
            let world = World::preset("default").unwrap();
            let ds = world.generate(n, seed).unwrap();
            if let Ok(stack) = impute_oracle(&ds, &world, m, seed ^ 0x5a) {
                if let (Ok(w), Ok(a)) = (within(&stack, BaseEstimator::Ht), across_apw(&stack, IpwForm::Ht)) {
                    prop_assert!((w.tau_hat - a.tau_hat).abs() < 1e-10);
                    // linear combination of outcomes with coefficients sum_k w_ik / (N M)
                    let fits = CompletedFits::new(&stack).unwrap();
                    let mut direct = 0.0;
                    for i in 0..n {
                        let c: f64 = (0..m).map(|k| ip_weights(&[fits.scores[k][i]], &[ds.a[i]]).unwrap()[0]).sum::<f64>();
                        let sign = if ds.a[i] == 1 { 1.0 } else { -1.0 };
                        direct += sign * c / (n * m) as f64 * ds.y[i];
                    }
                    prop_assert!((direct - w.tau_hat).abs() < 1e-10);
                }
            }
        }
    }
}
