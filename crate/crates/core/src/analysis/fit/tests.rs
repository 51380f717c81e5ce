use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::*;

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn sample(kind: FitKind, p: &[f64], x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| kind.eval(v, p)).collect()
}

/// Absolute deviation allowed for a noiseless fit: `rel` of the value plus
/// `rel` of a natural scale, so parameters near zero are judged sensibly.
fn close(got: f64, want: f64, scale: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * (want.abs() + scale)
}

#[test]
fn exponential_lifetime_recovered() {
    let x = linspace(0.0, 10_000.0, 200);
    for tau in [2060.0, 1100.0] {
        let y = sample(FitKind::Exponential, &[5.0, 1000.0, tau, 0.0], &x);
        let fit = fit_model(FitKind::Exponential, &x, &y, None, None).unwrap();
        assert!(fit.converged);
        assert!((fit.param("tau") / tau - 1.0).abs() < 1e-3);
        assert!((fit.param("tau") / tau - 1.0).abs() < 1e-8);
        assert_eq!(fit.param("x0"), 0.0);
        assert_eq!(fit.std_error("x0"), 0.0);
    }
}

#[test]
fn sinusoid_period_recovered_under_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = linspace(0.0, 5000.0, 101);
    let truth = [0.5, 0.4, 890.0, 0.3];
    let noise = Normal::new(0.0, 0.05 * 0.9).unwrap();
    let y: Vec<f64> = sample(FitKind::Sinusoid, &truth, &x)
        .into_iter()
        .map(|v| v + noise.sample(&mut rng))
        .collect();
    let fit = fit_model(FitKind::Sinusoid, &x, &y, None, None).unwrap();
    assert!(fit.converged);
    assert!((fit.param("P") - 890.0).abs() < 10.0, "{}", fit.param("P"));
    // Unit weights: the reduced χ² estimates the noise variance.
    let var = 0.045f64.powi(2);
    assert!(fit.reduced_chi2 > 0.6 * var && fit.reduced_chi2 < 1.5 * var, "{}", fit.reduced_chi2);
}

#[test]
fn recapture_time_constants_recovered() {
    let x = linspace(-5000.0, 5000.0, 201);
    let truth = [20.0, 3000.0, 0.0, 1100.0, 546.0];
    let y = sample(FitKind::Recapture, &truth, &x);
    let fit = fit_model(FitKind::Recapture, &x, &y, None, None).unwrap();
    assert!((fit.param("t_c") / 546.0 - 1.0).abs() < 0.05);
    assert!((fit.param("t_d") / 1100.0 - 1.0).abs() < 0.05);
    assert!((fit.param("t_c") / 546.0 - 1.0).abs() < 1e-6);
}

#[test]
fn power_law_slopes_recovered() {
    let x: Vec<f64> = (0..21).map(|i| 10f64.powf(i as f64 / 10.0)).collect();
    for s in [0.78, 1.27] {
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(s)).collect();
        let fit = fit_model(FitKind::PowerLaw, &x, &y, None, None).unwrap();
        assert!((fit.param("s") / s - 1.0).abs() < 0.01);
        assert!((fit.param("s") / s - 1.0).abs() < 1e-10);
        assert!((fit.param("b") - 3f64.ln()).abs() < 1e-10);
    }
}

#[test]
fn power_law_slope_invariant_under_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise: Normal<f64> = Normal::new(0.0, 0.05).unwrap();
    let x: Vec<f64> = (1..40).map(|i| i as f64).collect();
    let y: Vec<f64> = x.iter().map(|v| v.powf(1.27) * noise.sample(&mut rng).exp()).collect();
    let base = fit_model(FitKind::PowerLaw, &x, &y, None, None).unwrap();
    for k in [1e-3, 7.0, 1e6] {
        let scaled: Vec<f64> = y.iter().map(|v| v * k).collect();
        let fit = fit_model(FitKind::PowerLaw, &x, &scaled, None, None).unwrap();
        assert!((fit.param("s") - base.param("s")).abs() < 1e-10);
        assert!((fit.param("b") - base.param("b") - f64::ln(k)).abs() < 1e-9);
    }
}

#[test]
fn lorentzian_width_recovered() {
    let x = linspace(-5000.0, 5000.0, 101);
    let truth = [3.0, 500.0, 120.0, 1500.0];
    let y = sample(FitKind::Lorentzian, &truth, &x);
    let fit = fit_model(FitKind::Lorentzian, &x, &y, Some(&poisson_weights(&y)), None).unwrap();
    assert!(fit.converged);
    assert!((fit.param("gamma") - 1500.0).abs() < 1e-6 * 1500.0);
}

#[test]
fn invalid_inputs_rejected() {
    let x = [1.0, 1.0, 1.0, 1.0, 1.0];
    let y = [1.0, 2.0, 3.0, 4.0, 5.0];
    assert!(matches!(
        fit_model(FitKind::Exponential, &x, &y, None, None),
        Err(Error::Validation(_))
    ));
    let x2 = [0.0, 1.0, 2.0];
    assert!(fit_model(FitKind::Sinusoid, &x2, &y[..3], None, None).is_err());
    assert!(fit_model(FitKind::Exponential, &x2, &y[..2], None, None).is_err());
    let xs = linspace(0.0, 10.0, 10);
    let ys = vec![1.0; 10];
    let mut init = BTreeMap::new();
    init.insert("nope".to_string(), 1.0);
    assert!(fit_model(FitKind::Lorentzian, &xs, &ys, None, Some(&init)).is_err());
    assert!(fit_model(FitKind::Lorentzian, &xs, &ys, Some(&[1.0; 9]), None).is_err());
    assert!(fit_model(FitKind::PowerLaw, &xs, &ys, None, None).is_err());
}

#[test]
fn iteration_cap_reports_non_convergence() {
    let x = linspace(-5000.0, 5000.0, 201);
    let y = sample(FitKind::Recapture, &[20.0, 3000.0, 35.0, 1100.0, 546.0], &x);
    let mut init = BTreeMap::new();
    init.insert("t_c".to_string(), 2000.0);
    init.insert("t_d".to_string(), 300.0);
    let opts = LmOptions { max_iter: 1, ..Default::default() };
    let fit = fit_model_with(FitKind::Recapture, &x, &y, None, Some(&init), &opts).unwrap();
    assert!(!fit.converged);
    assert!(fit.params.values().all(|v| v.is_finite()));
}

#[test]
fn explicit_initial_values_are_used() {
    let x = linspace(0.0, 4000.0, 81);
    let y = sample(FitKind::Sinusoid, &[0.0, 1.0, 900.0, 0.0], &x);
    let mut init = BTreeMap::new();
    init.insert("P".to_string(), 905.0);
    init.insert("A".to_string(), 1.0);
    let fit = fit_model(FitKind::Sinusoid, &x, &y, None, Some(&init)).unwrap();
    assert!((fit.param("P") - 900.0).abs() < 1e-6);
}

#[test]
fn json_shape() {
    let x = linspace(0.0, 5000.0, 50);
    let y = sample(FitKind::Exponential, &[1.0, 100.0, 800.0, 0.0], &x);
    let fit = fit_model(FitKind::Exponential, &x, &y, None, None).unwrap();
    let v: serde_json::Value = serde_json::to_value(&fit).unwrap();
    assert_eq!(v["model"], "exponential");
    for key in ["A", "B", "tau", "x0"] {
        assert!(v["params"][key].is_number());
        assert!(v["std_errors"][key].is_number());
    }
    assert!(v["reduced_chi2"].is_number());
    assert_eq!(v["converged"], true);
    let back: FitResult = serde_json::from_value(v).unwrap();
    assert_eq!(back, fit);
    assert_eq!("power".parse::<FitKind>().unwrap(), FitKind::PowerLaw);
}

#[test]
fn sinusoid_canonical_form() {
    let x = linspace(0.0, 3000.0, 120);
    let y = sample(FitKind::Sinusoid, &[0.0, -1.0, 700.0, 0.5], &x);
    let fit = fit_model(FitKind::Sinusoid, &x, &y, None, None).unwrap();
    assert!(fit.param("A") > 0.0);
    assert!((fit.param("phi0") - wrap_phase(0.5 + PI)).abs() < 1e-8);
}

fn draw(kind: FitKind, u: [f64; 5]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let lerp = |t: f64, a: f64, b: f64| a + t * (b - a);
    match kind {
        FitKind::Exponential => {
            let tau = lerp(u[0], 200.0, 5000.0);
            let a = lerp(u[1], 100.0, 1e4);
            let p = vec![lerp(u[2], 0.0, 0.2) * a, a, tau, 0.0];
            let x = linspace(0.0, 5.0 * tau, 200);
            (p, vec![a, a, tau, 1.0], x)
        }
        FitKind::Sinusoid => {
            let p = vec![lerp(u[0], 0.0, 1.0), lerp(u[1], 0.2, 1.0), lerp(u[2], 300.0, 2000.0), lerp(u[3], -3.0, 3.0)];
            (p, vec![1.0, 1.0, 1.0, 1.0], linspace(0.0, 6000.0, 300))
        }
        FitKind::Recapture => {
            let a = lerp(u[0], 1e3, 1e4);
            let p = vec![lerp(u[1], 0.0, 0.05) * a, a, lerp(u[2], -100.0, 100.0), lerp(u[3], 700.0, 2000.0), lerp(u[4], 200.0, 650.0)];
            (p, vec![a, a, 1000.0, 1.0, 1.0], linspace(-6000.0, 6000.0, 301))
        }
        FitKind::PowerLaw => {
            let p = vec![lerp(u[0], 0.5, 2.0), lerp(u[1], -2.0, 5.0)];
            let x = (0..30).map(|i| lerp(u[2], 0.1, 10.0) * 10f64.powf(2.0 * i as f64 / 29.0)).collect();
            (p, vec![1.0, 1.0], x)
        }
        FitKind::Lorentzian => {
            let a = lerp(u[0], 100.0, 1e4);
            let p = vec![lerp(u[1], 0.0, 0.1) * a, a, lerp(u[2], -300.0, 300.0), lerp(u[3], 500.0, 3000.0)];
            (p, vec![a, a, 1000.0, 1.0], linspace(-5000.0, 5000.0, 201))
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn noiseless_recovery(u in prop::array::uniform5(0.0f64..1.0)) {
        for kind in FitKind::ALL {
            let (truth, scale, x) = draw(kind, u);
            let y = sample(kind, &truth, &x);
            let fit = fit_model(kind, &x, &y, None, None).unwrap();
            prop_assert!(fit.converged, "{kind} did not converge for {truth:?}");
            for (i, (got, want)) in fit.values().iter().zip(&truth).enumerate() {
                let want = if kind == FitKind::Sinusoid && i == 3 { wrap_phase(*want) } else { *want };
                prop_assert!(
                    close(*got, want, scale[i], 1e-6),
                    "{kind} param {} = {got} vs {want}", kind.param_names()[i]
                );
            }
        }
    }
}
