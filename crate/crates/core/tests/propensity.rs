mod common;

use common::{assert_within, logistic_se};
use mipslab_core::dgp::*;
use mipslab_core::linalg::Design;
use mipslab_core::propensity::*;
use mipslab_core::rng::{counter_uniform, derive_key};
use proptest::prelude::*;

#[test]
fn recovers_known_coefficients() {
    let n: usize = 100_000;
    let key = derive_key(31, &[]);
    let z: Vec<f64> = (0..n).map(|i| f64::from(u8::from(counter_uniform(key, i as u64, 0) < 0.5))).collect();
    let y: Vec<u8> = (0..n)
        .map(|i| u8::from(counter_uniform(key, i as u64, 1) < expit(0.3 + 0.7 * z[i])))
        .collect();
    let design = Design::from_columns(&["intercept", "z"], n, |i, row| row.extend([1.0, z[i]]));
    let fit = fit_logistic(&design, &y, None).unwrap();
    assert!(fit.converged);
    let rows: Vec<Vec<f64>> = z.iter().map(|&v| vec![1.0, v]).collect();
    let se = logistic_se(&rows, &fit.coefficients);
    assert_within("intercept", fit.coefficients[0], 0.3, se[0], 4.0);
    assert_within("slope", fit.coefficients[1], 0.7, se[1], 4.0);
}

#[test]
fn saturated_fit_recovers_true_propensity_cells() {
    let params = DiscreteWorldParams::default_preset();
    let (ds, x) = generate_discrete_unmasked(&params, 100_000, 32).unwrap();
    let fit = fit_propensity(WorldKind::Discrete, &ds.z, &x, &ds.a, None).unwrap();
    for z in 0..2u8 {
        for xv in 0..2u8 {
            let count = (0..ds.n()).filter(|&i| ds.z[i] == f64::from(z) && x[i] == f64::from(xv)).count();
            let fitted = predict_propensity(WorldKind::Discrete, &fit, &[f64::from(z)], &[f64::from(xv)])[0];
            let truth = params.propensity(z, f64::from(xv));
            let se = (truth * (1.0 - truth) / count as f64).sqrt();
            assert_within("e(z,x)", fitted, truth, se, 4.0);
        }
    }
}

#[test]
fn continuous_fit_is_logit_linear() {
    let params = ContinuousWorldParams::default_preset();
    let (ds, x) = World::Continuous(params.clone()).generate_unmasked(50_000, 33).unwrap();
    let fit = fit_propensity(WorldKind::Continuous, &ds.z, &x, &ds.a, None).unwrap();
    assert_eq!(fit.names, ["intercept", "z", "x"]);
    let rows: Vec<Vec<f64>> = (0..ds.n()).map(|i| vec![1.0, ds.z[i], x[i]]).collect();
    let se = logistic_se(&rows, &fit.coefficients);
    for j in 0..3 {
        assert_within("g", fit.coefficients[j], params.ps_coeffs[j], se[j], 4.0);
    }
}

fn sample() -> impl Strategy<Value = (Vec<(f64, u8, f64)>, u64)> {
    (
        prop::collection::vec((-2.0f64..2.0, 0u8..2, 0.5f64..2.0), 30..200),
        any::<u64>(),
    )
        .prop_filter("both outcomes", |(v, _)| {
            let ones = v.iter().filter(|u| u.1 == 1).count();
            ones >= 3 && v.len() - ones >= 3
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn score_equations_and_row_order((units, seed) in sample()) {
        let design = |u: &[(f64, u8, f64)]| Design::from_columns(&["intercept", "t"], u.len(), |i, row| row.extend([1.0, u[i].0]));
        let y: Vec<u8> = units.iter().map(|u| u.1).collect();
        let w: Vec<f64> = units.iter().map(|u| u.2).collect();
        let Ok(fit) = fit_logistic(&design(&units), &y, Some(&w)) else { return Ok(()) };
        let ps = fit.predict(&design(&units));
        for j in 0..2 {
            let s: f64 = (0..units.len()).map(|i| w[i] * (f64::from(y[i]) - ps[i]) * [1.0, units[i].0][j]).sum();
            prop_assert!(s.abs() < 1e-8);
        }
        let mut order: Vec<usize> = (0..units.len()).collect();
        order.sort_by_key(|&i| mipslab_core::rng::mix64(seed ^ i as u64));
        let permuted: Vec<_> = order.iter().map(|&i| units[i]).collect();
        let y2: Vec<u8> = permuted.iter().map(|u| u.1).collect();
        let w2: Vec<f64> = permuted.iter().map(|u| u.2).collect();
        let fit2 = fit_logistic(&design(&permuted), &y2, Some(&w2)).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&fit2.coefficients) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn weights_follow_the_formula(rows in prop::collection::vec((0.001f64..0.999, 0u8..2), 1..100)) {
        let ps: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let a: Vec<u8> = rows.iter().map(|r| r.1).collect();
        let w = ip_weights(&ps, &a).unwrap();
        for i in 0..rows.len() {
            let (e, ai) = (ps[i], f64::from(a[i]));
            let direct = ai / e + (1.0 - ai) / (1.0 - e);
            prop_assert!((w[i] - direct).abs() <= 1e-12 * direct);
            prop_assert!(w[i] >= 1.0);
        }
    }
}

#[test]
fn positivity_error_names_the_row() {
    let err = ip_weights(&[0.2, 0.5, 1.0], &[1, 0, 0]).unwrap_err();
    assert!(err.to_string().contains("row 2"), "{err}");
}
