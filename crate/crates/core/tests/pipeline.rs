use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use penreg_core::backtest::{run_backtest, run_backtest_detailed, BacktestConfig};
use penreg_core::features::{build_design, DayRange};
use penreg_core::penalties::penalty_value;
use penreg_core::selection::{select_cv, LambdaGrid, SelectionPlan, ShapeMode};
use penreg_core::solver::{fit_flash, fit_penalized};
use penreg_core::synth::{generate, SynthConfig};
use penreg_core::transform::{fit_ecdf, norm_cdf, norm_quantile, npit_forward};
use penreg_core::{DesignMatrix, Family, Market, ModelKind, PenaltySpec};

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

#[test]
fn normal_quantile_reference_values() {
    // the library CDF is good to about 1e-12 here, which bounds the quantile
    let z = norm_quantile(0.975);
    assert!((z - 1.959_963_984_540_054).abs() < 1e-10, "{z:e}");
    assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 2e-12);
    assert!((norm_quantile(0.001) + 3.090_232_306_167_813_5).abs() < 1e-9);
    assert_eq!(norm_quantile(0.5), 0.0);
}

#[test]
fn forward_transform_is_standard_normal_on_its_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sample: Vec<f64> = (0..1000).map(|_| (2.0 * gaussian(&mut rng)).exp()).collect();
    let m = fit_ecdf(&sample).unwrap();
    let z: Vec<f64> = sample.iter().map(|x| npit_forward(&m, *x)).collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let var = z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / z.len() as f64;
    assert!(mean.abs() <= 0.05, "{mean}");
    assert!((var - 1.0).abs() <= 0.1, "{var}");
}

#[test]
fn penalty_limits() {
    let lasso = PenaltySpec::new(Family::Lasso, 0.7, None).unwrap();
    let cpf = PenaltySpec::new(Family::Cpf, 0.7, Some(1e9)).unwrap();
    let en1 = PenaltySpec::new(Family::En, 0.7, Some(1.0)).unwrap();
    let en0 = PenaltySpec::new(Family::En, 0.7, Some(0.0)).unwrap();
    let ridge = PenaltySpec::new(Family::Ridge, 0.7, None).unwrap();
    let lq = PenaltySpec::new(Family::Lq, 0.7, Some(1.0 + 1e-9)).unwrap();
    for i in 0..=200 {
        let b = -10.0 + 0.1 * i as f64;
        let l = penalty_value(&lasso, b, 0);
        let c = penalty_value(&cpf, b, 0);
        assert!((c - l).abs() <= 1e-6 * l.max(1e-300), "{b}: {c} vs {l}");
        assert_eq!(penalty_value(&en1, b, 0), l);
        assert_eq!(penalty_value(&en0, b, 0), penalty_value(&ridge, b, 0));
        assert!((penalty_value(&lq, b, 0) - l).abs() < 1e-7);
    }
}

#[test]
fn pure_noise_lasso_cv_selects_the_empty_model() {
    let (n, p) = (140, 10);
    let mut empty = 0;
    for rep in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(9000 + rep);
        let x = DMatrix::from_fn(n, p, |_, _| gaussian(&mut rng));
        let y = DVector::from_fn(n, |_, _| gaussian(&mut rng));
        let sel = select_cv(&DesignMatrix::from_parts(x, y), Family::Lasso, &SelectionPlan::cv(ShapeMode::Fixed(f64::NAN))).unwrap();
        if sel.fit.nnz == 0 {
            empty += 1;
        }
    }
    assert!(empty >= 90, "empty model chosen in {empty}/100 replications");
}

#[test]
fn singleton_grid_is_selected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = DMatrix::from_fn(70, 4, |_, _| gaussian(&mut rng));
    let y = DVector::from_fn(70, |i, _| x[(i, 0)] + gaussian(&mut rng));
    let dm = DesignMatrix::from_parts(x, y);
    let plan = SelectionPlan::cv(ShapeMode::Fixed(f64::NAN)).with_grid(LambdaGrid::Explicit(vec![3.25]));
    let sel = select_cv(&dm, Family::Lasso, &plan).unwrap();
    assert_eq!(sel.spec.lambda(), 3.25);
    assert_eq!(sel.trace.len(), 1);
}

#[test]
fn column_permutation_permutes_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, p) = (60, 5);
    let x = DMatrix::from_fn(n, p, |_, _| gaussian(&mut rng));
    let y = DVector::from_fn(n, |i, _| 2.0 * x[(i, 1)] - x[(i, 3)] + 0.5 * gaussian(&mut rng));
    let perm = [3, 0, 4, 1, 2];
    let xp = DMatrix::from_fn(n, p, |i, j| x[(i, perm[j])]);
    for (family, shape) in [(Family::Lasso, None), (Family::En, Some(0.5)), (Family::Scad, Some(20.0)), (Family::Lq, Some(1.5))] {
        let spec = PenaltySpec::new(family, 1.5, shape).unwrap();
        let a = fit_penalized(&DesignMatrix::from_parts(x.clone(), y.clone()), &spec, None).unwrap();
        let b = fit_penalized(&DesignMatrix::from_parts(xp.clone(), y.clone()), &spec, None).unwrap();
        for j in 0..p {
            assert!((b.beta[j] - a.beta[perm[j]]).abs() < 1e-7, "{family}: {:?} vs {:?}", a.beta, b.beta);
        }
    }
}

#[test]
fn flash_without_shrinkage_adaptation_matches_lasso_on_orthogonal_design() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (n, p) = (64, 6);
    let raw = DMatrix::from_fn(n, p, |_, _| gaussian(&mut rng));
    let q = raw.qr().q();
    let y = DVector::from_fn(n, |i, _| 3.0 * q[(i, 0)] - 2.0 * q[(i, 2)] + q[(i, 5)] + 0.3 * gaussian(&mut rng));
    let dm = DesignMatrix::from_parts(q, y);
    let grid: Vec<f64> = (0..15).map(|i| 8.0 * 0.8f64.powi(i)).collect();
    let path = fit_flash(&dm, 0.0, &grid).unwrap();
    for (fit, &lam) in path.fits.iter().zip(&grid) {
        let lasso = fit_penalized(&dm, &PenaltySpec::new(Family::Lasso, lam, None).unwrap(), None).unwrap();
        for (a, b) in fit.beta.iter().zip(&lasso.beta) {
            assert!((a - b).abs() < 1e-7, "lambda {lam}: {:?} vs {:?}", fit.beta, lasso.beta);
        }
    }
}

#[test]
fn farx_regressors_do_not_depend_on_the_hour() {
    let panel = generate(&SynthConfig::new(Market::Omie, date(2020, 1, 1), 60, 2)).unwrap();
    let window = DayRange::new(date(2020, 1, 1), date(2020, 2, 20));
    let a = build_design(&panel, ModelKind::Farx, 1, window).unwrap();
    for h in [2, 13, 24] {
        let b = build_design(&panel, ModelKind::Farx, h, window).unwrap();
        assert_eq!(a.x, b.x);
        assert_ne!(a.y, b.y);
    }
}

fn desk_panel() -> penreg_core::TimeSeriesPanel {
    generate(&SynthConfig::new(Market::Epex, date(2019, 1, 1), 230, 4)).unwrap()
}

#[test]
fn desk_scale_ols_gives_one_record_per_hour() {
    let panel = desk_panel();
    let cfg = BacktestConfig::new(
        Market::Epex,
        ModelKind::Farx,
        Family::Ols,
        SelectionPlan::bic(None),
        date(2019, 7, 20),
        date(2019, 8, 18),
    )
    .with_window(200);
    let records = run_backtest(&panel, &cfg).unwrap();
    assert_eq!(records.len(), 720);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.hour, i % 24 + 1);
        assert_eq!(r.day, date(2019, 7, 20) + chrono::Days::new((i / 24) as u64));
        assert!(r.forecast_price.is_finite());
    }
}

#[test]
fn reruns_are_bit_identical_for_any_thread_count() {
    let panel = desk_panel();
    let mut cfg = BacktestConfig::new(
        Market::Epex,
        ModelKind::Arx,
        Family::Scad,
        SelectionPlan::cv(ShapeMode::JointCv),
        date(2019, 7, 20),
        date(2019, 7, 22),
    )
    .with_window(200);
    cfg.jobs = Some(1);
    let serial = run_backtest_detailed(&panel, &cfg).unwrap();
    cfg.jobs = Some(4);
    let parallel = run_backtest_detailed(&panel, &cfg).unwrap();
    let again = run_backtest_detailed(&panel, &cfg).unwrap();
    assert_eq!(serial, parallel);
    assert_eq!(parallel, again);
    assert!(!serial.traces.is_empty());
}
