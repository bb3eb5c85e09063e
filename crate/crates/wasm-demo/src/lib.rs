//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export returns a flat `Float64Array`; the page knows the layout.
//! The plain-Rust functions behind them are public so they can be tested
//! natively.

use nalgebra::{DMatrix, DVector};
use penreg_core::penalties::{penalty_curve, scalar_prox};
use penreg_core::solver::{default_lambda_grid, fit_flash, fit_path, QuadProblem};
use penreg_core::{DesignMatrix, Family, PenaltySpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wasm_bindgen::prelude::*;

/// Coefficients of the simulated regression behind [`path`].
pub const PATH_TRUTH: [f64; 8] = [1.5, -1.0, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0];

fn spec(family: &str, lambda: f64, shape: f64) -> Result<PenaltySpec, String> {
    let family: Family = family.parse().map_err(|e| format!("{e}"))?;
    let shape = family.has_shape().then_some(shape);
    match family {
        Family::ALasso => PenaltySpec::adaptive(lambda, shape.unwrap_or(1.0), &[1.0]),
        _ => PenaltySpec::new(family, lambda, shape),
    }
    .map_err(|e| e.to_string())
}

/// `[beta_0, g_0, beta_1, g_1, ...]` on `[-beta_max, beta_max]`.
pub fn curve(family: &str, lambda: f64, shape: f64, beta_max: f64, points: usize) -> Result<Vec<f64>, String> {
    let spec = spec(family, lambda, shape)?;
    Ok(penalty_curve(&spec, beta_max, points)
        .into_iter()
        .flat_map(|(b, g)| [b, g])
        .collect())
}

/// `[z_0, prox_0, z_1, prox_1, ...]`: the minimiser of `a (b - z)^2 + g(b)`
/// for `z` on `[-z_max, z_max]`.
pub fn prox(family: &str, lambda: f64, shape: f64, a: f64, z_max: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(a > 0.0) {
        return Err("curvature a must be positive".into());
    }
    let spec = spec(family, lambda, shape)?;
    let points = points.max(2);
    Ok((0..points)
        .flat_map(|i| {
            let z = -z_max + 2.0 * z_max * i as f64 / (points - 1) as f64;
            [z, scalar_prox(&spec, z, a, 0)]
        })
        .collect())
}

/// Simulated regression with [`PATH_TRUTH`] as coefficients.
pub fn simulate(seed: u64, n: usize, noise: f64) -> DesignMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = PATH_TRUTH.len();
    let x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let y = DVector::from_fn(n, |i, _| {
        let signal: f64 = (0..p).map(|j| x[(i, j)] * PATH_TRUTH[j]).sum();
        signal + noise * rng.sample::<f64, _>(StandardNormal)
    });
    DesignMatrix::from_parts(x, y)
}

/// Warm-started path on simulated data. Each row is `[lambda, b_1..b_8]`,
/// from the largest lambda down.
pub fn path(family: &str, shape: f64, seed: u64, n: usize, noise: f64, points: usize) -> Result<Vec<f64>, String> {
    if n < 2 {
        return Err("need at least two observations".into());
    }
    let dm = simulate(seed, n, noise);
    let template = spec(family, 1.0, shape)?;
    let template = match template.family() {
        Family::ALasso => {
            let ols = penreg_core::solver::fit_ols(&dm).map_err(|e| e.to_string())?;
            PenaltySpec::adaptive(1.0, shape, &ols.beta).map_err(|e| e.to_string())?
        }
        _ => template,
    };
    let grid = default_lambda_grid(&QuadProblem::from_design(&dm), &template, points.max(2), 1e-3);
    let result = if template.family() == Family::Flash {
        fit_flash(&dm, shape, &grid)
    } else {
        fit_path(&dm, &template, &grid)
    }
    .map_err(|e| e.to_string())?;
    Ok(result
        .lambdas
        .iter()
        .zip(&result.fits)
        .flat_map(|(l, f)| std::iter::once(*l).chain(f.beta.iter().copied()))
        .collect())
}

#[wasm_bindgen(js_name = penaltyCurve)]
pub fn penalty_curve_js(family: &str, lambda: f64, shape: f64, beta_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    curve(family, lambda, shape, beta_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = proxMap)]
pub fn prox_map_js(family: &str, lambda: f64, shape: f64, a: f64, z_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    prox(family, lambda, shape, a, z_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = regularizationPath)]
pub fn regularization_path_js(family: &str, shape: f64, seed: u32, n: usize, noise: f64, points: usize) -> Result<Vec<f64>, JsError> {
    path(family, shape, u64::from(seed), n, noise, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = pathWidth)]
pub fn path_width() -> usize {
    PATH_TRUTH.len() + 1
}
