use penreg_wasm_demo::{curve, path, prox, PATH_TRUTH};

#[test]
fn curve_layout_and_values() {
    let c = curve("lasso", 2.0, 0.0, 3.0, 7).unwrap();
    assert_eq!(c.len(), 14);
    assert_eq!((c[0], c[1]), (-3.0, 6.0));
    assert_eq!((c[6], c[7]), (0.0, 0.0));
    let scad = curve("scad", 1.0, 10.0, 30.0, 3).unwrap();
    // flat beyond alpha * lambda at (alpha + 1) lambda^2 / 2
    assert!((scad[5] - 5.5).abs() < 1e-12);
}

#[test]
fn prox_soft_thresholds_for_lasso() {
    let m = prox("lasso", 1.0, 0.0, 0.5, 2.0, 5).unwrap();
    let outs: Vec<f64> = m.chunks(2).map(|p| p[1]).collect();
    assert_eq!(outs, vec![-1.0, 0.0, 0.0, 0.0, 1.0]);
    assert!(prox("lasso", 1.0, 0.0, 0.0, 2.0, 5).is_err());
}

#[test]
fn bad_inputs_are_reported() {
    assert!(curve("nope", 1.0, 0.0, 1.0, 5).is_err());
    assert!(curve("lq", 3.0, 1.5, 1.0, 5).is_err());
    assert!(curve("en", 1.0, 2.0, 1.0, 5).is_err());
}

#[test]
fn lasso_path_starts_empty_and_ends_near_truth() {
    let width = PATH_TRUTH.len() + 1;
    let p = path("lasso", 0.0, 7, 200, 0.5, 30).unwrap();
    assert_eq!(p.len(), 30 * width);
    assert!(p[1..width].iter().all(|b| *b == 0.0));
    let last = &p[29 * width + 1..];
    for (b, t) in last.iter().zip(PATH_TRUTH) {
        assert!((b - t).abs() < 0.15, "{last:?}");
    }
}

#[test]
fn every_family_yields_a_path() {
    for (family, shape) in [
        ("alasso", 1.0),
        ("classo", 1.0),
        ("cpf", 15.0),
        ("en", 0.5),
        ("flash", 0.5),
        ("lq", 1.5),
        ("mcplus", 3.0),
        ("ridge", 0.0),
        ("scad", 20.0),
    ] {
        let p = path(family, shape, 1, 80, 1.0, 10).unwrap();
        assert_eq!(p.len(), 10 * (PATH_TRUTH.len() + 1), "{family}");
        assert!(p.iter().all(|v| v.is_finite()), "{family}");
    }
}
