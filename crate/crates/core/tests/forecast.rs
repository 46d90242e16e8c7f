use lse_rates::forecast::{
    cv_curve, daily_totals, group_load, CurveKind, GroupEvaluator, GroupForecaster, DEFAULT_AR_ORDER,
};
use lse_rates::ingest::{synth_population, SynthSpec};
use lse_rates::Window;

fn population(n: usize, days: usize, noise_cv: f64, seed: u64) -> lse_rates::Dataset {
    let mut spec = SynthSpec::new(n, days, 0.5, seed);
    spec.noise_cv = noise_cv;
    synth_population(&spec).unwrap().dataset
}

#[test]
fn one_step_forecasts_are_unbiased() {
    let ds = population(50, 400, 0.3, 4);
    let members: Vec<usize> = (0..ds.len()).collect();
    let load = group_load(&ds, &members);
    let model = GroupForecaster::fit_load(&ds, &load, DEFAULT_AR_ORDER).unwrap();
    let days = ds.window(Window::Validate);
    let predicted = model.backtest(&ds, &load, days.clone()).unwrap();
    let actual = daily_totals(&load[days]);
    let errors: Vec<f64> = daily_totals(&predicted).iter().zip(&actual).map(|(p, a)| p - a).collect();
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let sd = (errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!(mean.abs() < 3.0 * sd / n.sqrt(), "mean {mean} sd {sd}");
}

#[test]
fn noiseless_data_is_forecast_exactly() {
    let ds = population(30, 60, 0.0, 2);
    let eval = GroupEvaluator::new(&ds).unwrap();
    for members in [vec![0], vec![1, 2, 3], (0..30).collect()] {
        assert!(eval.cv(&members).unwrap() < 1e-9);
    }
}

#[test]
fn full_population_curves_coincide() {
    let ds = population(60, 60, 0.3, 3);
    let curve = cv_curve(&ds, &[5, 60], 10, 1e-6, 0).unwrap();
    let at = |kind| curve.of_kind(kind).find(|p| p.m == 60).unwrap().cv;
    let (random, optimal) = (at(CurveKind::Random), at(CurveKind::Optimal));
    // the random value is a mean of identical trials
    assert!((random - optimal).abs() <= 1e-12 * optimal, "{random} vs {optimal}");
}

#[test]
fn cv_curve_is_deterministic() {
    let ds = population(60, 60, 0.3, 3);
    let a = cv_curve(&ds, &[1, 4, 16], 12, 1e-6, 42).unwrap();
    let b = cv_curve(&ds, &[1, 4, 16], 12, 1e-6, 42).unwrap();
    assert_eq!(a, b);
    let c = cv_curve(&ds, &[1, 4, 16], 12, 1e-6, 43).unwrap();
    assert_ne!(a, c);
}

#[test]
fn random_groups_get_more_predictable() {
    let ds = population(200, 90, 0.3, 5);
    let curve = cv_curve(&ds, &[1, 4, 16, 64], 30, 1e-6, 1).unwrap();
    let cvs: Vec<f64> = curve.of_kind(CurveKind::Random).map(|p| p.cv).collect();
    assert!(cvs.windows(2).all(|w| w[1] < w[0]), "{cvs:?}");
    for p in curve.of_kind(CurveKind::Random) {
        let (lo, hi) = p.ci.unwrap();
        assert!(lo <= p.cv && p.cv <= hi);
    }
}
