//! Penalty families and their one-dimensional proximal maps.
//!
//! Every family is separable: the penalty of a coefficient vector is the sum
//! of a scalar penalty `g(b)` over its coordinates. The solver minimises
//! `a * (b - z)^2 + g(b)` one coordinate at a time, which is what
//! [`scalar_prox`] computes. Convex families use closed forms; nonconvex ones
//! enumerate the stationary points of each smooth piece and keep the best.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor applied to adaptive-LASSO weights `|b*|` so zero OLS coefficients
/// stay (effectively) excluded without dividing by zero.
pub const ADAPTIVE_WEIGHT_FLOOR: f64 = 1e-8;

/// Largest admissible `lambda` for LQ.
pub const LQ_LAMBDA_CAP: f64 = 2.0;
/// Largest admissible `lambda` for ridge.
pub const RIDGE_LAMBDA_CAP: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ols,
    ALasso,
    CLasso,
    Cpf,
    En,
    Flash,
    Lasso,
    Lq,
    McPlus,
    Ridge,
    Scad,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Ols,
        Family::ALasso,
        Family::CLasso,
        Family::Cpf,
        Family::En,
        Family::Flash,
        Family::Lasso,
        Family::Lq,
        Family::McPlus,
        Family::Ridge,
        Family::Scad,
    ];

    /// The ten regularised families (everything except OLS).
    pub const PENALIZED: [Family; 10] = [
        Family::ALasso,
        Family::CLasso,
        Family::Cpf,
        Family::En,
        Family::Flash,
        Family::Lasso,
        Family::Lq,
        Family::McPlus,
        Family::Ridge,
        Family::Scad,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ols => "ols",
            Family::ALasso => "alasso",
            Family::CLasso => "classo",
            Family::Cpf => "cpf",
            Family::En => "en",
            Family::Flash => "flash",
            Family::Lasso => "lasso",
            Family::Lq => "lq",
            Family::McPlus => "mcplus",
            Family::Ridge => "ridge",
            Family::Scad => "scad",
        }
    }

    /// Name of the shape parameter, if the family has one.
    pub fn shape_name(self) -> Option<&'static str> {
        match self {
            Family::ALasso | Family::Lq => Some("q"),
            Family::CLasso | Family::En | Family::Scad => Some("alpha"),
            Family::Cpf => Some("k"),
            Family::Flash | Family::McPlus => Some("gamma"),
            Family::Ols | Family::Lasso | Family::Ridge => None,
        }
    }

    pub fn has_shape(self) -> bool {
        self.shape_name().is_some()
    }

    /// Candidate shape values used for fixed-shape runs and joint CV.
    pub fn shape_grid(self) -> &'static [f64] {
        match self {
            Family::ALasso => &[1.0, 1.5, 2.0],
            Family::CLasso => &[0.5, 1.0, 1.5],
            Family::Cpf => &[5.0, 15.0, 25.0],
            Family::En => &[0.25, 0.5, 0.75],
            Family::Flash => &[0.25, 0.5, 0.75],
            Family::Lq => &[1.25, 1.5, 1.75],
            Family::McPlus => &[1.0, 3.0, 5.0],
            Family::Scad => &[10.0, 20.0, 30.0],
            Family::Ols | Family::Lasso | Family::Ridge => &[],
        }
    }

    pub fn lambda_cap(self) -> Option<f64> {
        match self {
            Family::Lq => Some(LQ_LAMBDA_CAP),
            Family::Ridge => Some(RIDGE_LAMBDA_CAP),
            _ => None,
        }
    }

    /// Whether the penalised objective is convex for every admissible shape.
    pub fn is_convex(self) -> bool {
        !matches!(
            self,
            Family::CLasso | Family::Cpf | Family::McPlus | Family::Scad
        )
    }

    fn check_shape(self, shape: Option<f64>) -> Result<()> {
        let bad = |msg: &str| {
            Err(Error::InvalidSpec(format!(
                "{}: {msg}, got {shape:?}",
                self.as_str()
            )))
        };
        let Some(s) = shape else {
            return if self.has_shape() {
                bad("shape parameter required")
            } else {
                Ok(())
            };
        };
        if !self.has_shape() {
            return bad("family takes no shape parameter");
        }
        if !s.is_finite() {
            return bad("shape must be finite");
        }
        let ok = match self {
            Family::ALasso => s >= 1.0,
            Family::Lq => (1.0..=2.0).contains(&s),
            Family::CLasso | Family::Cpf => s > 0.0,
            Family::En | Family::Flash => (0.0..=1.0).contains(&s),
            Family::McPlus => s >= 1.0,
            Family::Scad => s >= 2.0,
            Family::Ols | Family::Lasso | Family::Ridge => unreachable!(),
        };
        if ok {
            Ok(())
        } else {
            bad(match self {
                Family::ALasso => "q must be >= 1",
                Family::Lq => "q must lie in [1, 2]",
                Family::CLasso | Family::Cpf => "shape must be positive",
                Family::En | Family::Flash => "shape must lie in [0, 1]",
                Family::McPlus => "gamma must be >= 1",
                _ => "alpha must be >= 2",
            })
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == lower || (lower == "mc+" && *f == Family::McPlus))
            .ok_or_else(|| Error::Config(format!("unknown penalty `{s}`")))
    }
}

/// A fully specified penalty: family, `lambda`, optional shape and, for the
/// adaptive LASSO, per-coordinate weights `|b*_i|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    family: Family,
    lambda: f64,
    shape: Option<f64>,
    adaptive_weights: Option<Vec<f64>>,
}

impl PenaltySpec {
    /// Validated spec for any family except the adaptive LASSO, which needs
    /// weights (see [`PenaltySpec::adaptive`]).
    pub fn new(family: Family, lambda: f64, shape: Option<f64>) -> Result<Self> {
        if family == Family::ALasso {
            return Err(Error::InvalidSpec(
                "alasso requires adaptive weights".into(),
            ));
        }
        Self::build(family, lambda, shape, None)
    }

    /// Adaptive LASSO with weights taken from `reference` coefficients
    /// (typically OLS), floored at [`ADAPTIVE_WEIGHT_FLOOR`].
    pub fn adaptive(lambda: f64, q: f64, reference: &[f64]) -> Result<Self> {
        if reference.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidSpec("adaptive weights must be finite".into()));
        }
        let weights = reference
            .iter()
            .map(|b| b.abs().max(ADAPTIVE_WEIGHT_FLOOR))
            .collect();
        Self::build(Family::ALasso, lambda, Some(q), Some(weights))
    }

    pub fn ols() -> Self {
        Self {
            family: Family::Ols,
            lambda: 0.0,
            shape: None,
            adaptive_weights: None,
        }
    }

    fn build(
        family: Family,
        lambda: f64,
        shape: Option<f64>,
        adaptive_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        if let Some(cap) = family.lambda_cap() {
            if lambda > cap {
                return Err(Error::InvalidSpec(format!(
                    "{family}: lambda {lambda} exceeds cap {cap}"
                )));
            }
        }
        family.check_shape(shape)?;
        Ok(Self {
            family,
            lambda: if family == Family::Ols { 0.0 } else { lambda },
            shape,
            adaptive_weights,
        })
    }

    /// Same family, shape and weights with a different `lambda`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::build(self.family, lambda, self.shape, self.adaptive_weights.clone())
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn shape(&self) -> Option<f64> {
        self.shape
    }

    pub fn adaptive_weights(&self) -> Option<&[f64]> {
        self.adaptive_weights.as_deref()
    }

    /// The scalar penalty acting on coordinate `coord`.
    pub fn coordinate(&self, coord: usize) -> ScalarPenalty {
        let lam = self.lambda;
        let shape = self.shape.unwrap_or(0.0);
        match self.family {
            Family::Ols => ScalarPenalty::Zero,
            Family::Lasso => ScalarPenalty::L1 { lam },
            Family::Ridge => ScalarPenalty::L2 { lam },
            Family::Flash => ScalarPenalty::L1 {
                lam: lam * (1.0 - shape),
            },
            Family::En => ScalarPenalty::ElasticNet {
                l1: lam * shape,
                l2: lam * (1.0 - shape),
            },
            Family::Lq => ScalarPenalty::power(lam, shape),
            Family::ALasso => {
                let w = self
                    .adaptive_weights
                    .as_ref()
                    .and_then(|w| w.get(coord))
                    .copied()
                    .unwrap_or_else(|| panic!("no adaptive weight for coordinate {coord}"));
                ScalarPenalty::power(lam / w.powf(shape), shape)
            }
            Family::CLasso => ScalarPenalty::Clipped { lam, alpha: shape },
            Family::Cpf => ScalarPenalty::Cpf { lam, k: shape },
            Family::McPlus => ScalarPenalty::Mcp { lam, gamma: shape },
            Family::Scad => ScalarPenalty::Scad { lam, alpha: shape },
        }
    }

    /// Total penalty of a coefficient vector.
    pub fn total(&self, beta: &[f64]) -> f64 {
        beta.iter()
            .enumerate()
            .map(|(j, b)| self.coordinate(j).value(*b))
            .sum()
    }
}

/// Penalty acting on a single coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarPenalty {
    Zero,
    /// `lam * |b|`
    L1 { lam: f64 },
    /// `lam * b^2`
    L2 { lam: f64 },
    /// `l1 * |b| + l2 * b^2`
    ElasticNet { l1: f64, l2: f64 },
    /// `lam * |b|^q`, `q >= 1`
    Power { lam: f64, q: f64 },
    /// `lam * min(|b|, alpha)`
    Clipped { lam: f64, alpha: f64 },
    /// `lam * k|b| / (k + |b|)`
    Cpf { lam: f64, k: f64 },
    /// minimax concave penalty
    Mcp { lam: f64, gamma: f64 },
    /// smoothly clipped absolute deviation
    Scad { lam: f64, alpha: f64 },
}

impl ScalarPenalty {
    fn power(lam: f64, q: f64) -> Self {
        if q == 1.0 {
            ScalarPenalty::L1 { lam }
        } else if q == 2.0 {
            ScalarPenalty::L2 { lam }
        } else {
            ScalarPenalty::Power { lam, q }
        }
    }

    pub fn value(&self, b: f64) -> f64 {
        let t = b.abs();
        match *self {
            ScalarPenalty::Zero => 0.0,
            ScalarPenalty::L1 { lam } => lam * t,
            ScalarPenalty::L2 { lam } => lam * t * t,
            ScalarPenalty::ElasticNet { l1, l2 } => l1 * t + l2 * t * t,
            ScalarPenalty::Power { lam, q } => lam * t.powf(q),
            ScalarPenalty::Clipped { lam, alpha } => lam * t.min(alpha),
            ScalarPenalty::Cpf { lam, k } => lam * k * t / (k + t),
            ScalarPenalty::Mcp { lam, gamma } => {
                if t <= gamma * lam {
                    lam * t - t * t / (2.0 * gamma)
                } else {
                    lam * lam * gamma / 2.0
                }
            }
            ScalarPenalty::Scad { lam, alpha } => {
                if t <= lam {
                    lam * t
                } else if t <= alpha * lam {
                    (-t * t + 2.0 * alpha * lam * t - lam * lam) / (2.0 * (alpha - 1.0))
                } else {
                    lam * lam * (1.0 + alpha) / 2.0
                }
            }
        }
    }

    /// Derivative of `g` at `b != 0` (one-sided where `g` has a kink).
    pub fn derivative(&self, b: f64) -> f64 {
        let t = b.abs();
        let s = b.signum();
        let dt = match *self {
            ScalarPenalty::Zero => 0.0,
            ScalarPenalty::L1 { lam } => lam,
            ScalarPenalty::L2 { lam } => 2.0 * lam * t,
            ScalarPenalty::ElasticNet { l1, l2 } => l1 + 2.0 * l2 * t,
            ScalarPenalty::Power { lam, q } => lam * q * t.powf(q - 1.0),
            ScalarPenalty::Clipped { lam, alpha } => {
                if t < alpha {
                    lam
                } else {
                    0.0
                }
            }
            ScalarPenalty::Cpf { lam, k } => lam * k * k / ((k + t) * (k + t)),
            ScalarPenalty::Mcp { lam, gamma } => (lam - t / gamma).max(0.0),
            ScalarPenalty::Scad { lam, alpha } => {
                if t <= lam {
                    lam
                } else {
                    ((alpha * lam - t) / (alpha - 1.0)).max(0.0)
                }
            }
        };
        s * dt
    }

    /// Half-width of the subdifferential at zero, i.e. the slope of `g` at
    /// `0+`. A zero coefficient is stationary iff `|2 x'r| <= zero_slope()`.
    pub fn zero_slope(&self) -> f64 {
        match *self {
            ScalarPenalty::Zero | ScalarPenalty::L2 { .. } => 0.0,
            ScalarPenalty::L1 { lam } => lam,
            ScalarPenalty::ElasticNet { l1, .. } => l1,
            ScalarPenalty::Power { .. } => 0.0,
            ScalarPenalty::Clipped { lam, .. }
            | ScalarPenalty::Cpf { lam, .. }
            | ScalarPenalty::Mcp { lam, .. }
            | ScalarPenalty::Scad { lam, .. } => lam,
        }
    }

    /// Global minimiser of `a (b - z)^2 + g(b)` for `a > 0`.
    pub fn prox(&self, z: f64, a: f64) -> f64 {
        debug_assert!(a > 0.0);
        let t = z.abs();
        if t == 0.0 {
            return 0.0;
        }
        let s = z.signum();
        let mag = match *self {
            ScalarPenalty::Zero => t,
            ScalarPenalty::L1 { lam } => soft(t, lam / (2.0 * a)),
            ScalarPenalty::L2 { lam } => a * t / (a + lam),
            ScalarPenalty::ElasticNet { l1, l2 } => a * soft(t, l1 / (2.0 * a)) / (a + l2),
            ScalarPenalty::Power { lam, q } => power_prox(t, a, lam, q),
            _ => self.enumerate_prox(t, a),
        };
        s * mag
    }

    /// Nonconvex families: compare the objective on every candidate
    /// minimiser of each smooth piece (all restricted to `[0, t]`).
    fn enumerate_prox(&self, t: f64, a: f64) -> f64 {
        let mut candidates: Vec<f64> = vec![0.0, t];
        let clip = |x: f64, lo: f64, hi: f64| x.max(lo).min(hi);
        match *self {
            ScalarPenalty::Clipped { lam, alpha } => {
                candidates.push(alpha);
                candidates.push(clip(t - lam / (2.0 * a), 0.0, alpha));
            }
            ScalarPenalty::Cpf { lam, k } => {
                if let Some(r) = cpf_local_min(t, a, lam, k) {
                    candidates.push(r);
                }
            }
            ScalarPenalty::Mcp { lam, gamma } => {
                let knot = gamma * lam;
                candidates.push(knot);
                let curv = a - 1.0 / (2.0 * gamma);
                if curv > 0.0 {
                    candidates.push(clip((2.0 * a * t - lam) / (2.0 * curv), 0.0, knot));
                }
            }
            ScalarPenalty::Scad { lam, alpha } => {
                let (k1, k2) = (lam, alpha * lam);
                candidates.push(k1);
                candidates.push(k2);
                candidates.push(clip(t - lam / (2.0 * a), 0.0, k1));
                let curv = a - 1.0 / (2.0 * (alpha - 1.0));
                if curv > 0.0 {
                    let stat = (2.0 * a * t - alpha * lam / (alpha - 1.0)) / (2.0 * curv);
                    candidates.push(clip(stat, k1, k2));
                }
            }
            _ => unreachable!("closed-form family"),
        }
        let objective = |u: f64| a * (u - t) * (u - t) + self.value(u);
        candidates
            .into_iter()
            .map(|u| clip(u, 0.0, t))
            .fold((f64::INFINITY, f64::INFINITY), |best, u| {
                let f = objective(u);
                // strict improvement, or equal value at smaller magnitude
                if f < best.0 || (f == best.0 && u < best.1) {
                    (f, u)
                } else {
                    best
                }
            })
            .1
    }
}

const ROOT_TOL: f64 = 1e-13;
const ROOT_MAX_ITER: usize = 200;

/// Safeguarded Newton on an increasing function bracketed by `[lo, hi]`
/// with `f(lo) <= 0 <= f(hi)`.
fn bracketed_root(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    start: f64,
) -> f64 {
    let mut x = start;
    let scale = 1.0 + hi.abs();
    for _ in 0..ROOT_MAX_ITER {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= ROOT_TOL * scale {
            return 0.5 * (lo + hi);
        }
        let d = df(x);
        let newton = x - fx / d;
        if d.is_finite() && d > 0.0 && newton > lo && newton < hi {
            if (newton - x).abs() <= ROOT_TOL * scale {
                return newton;
            }
            x = newton;
        } else {
            x = 0.5 * (lo + hi);
        }
    }
    x
}

/// Minimiser over `u >= 0` of `a (u - t)^2 + lam u^q`, `q > 1`.
fn power_prox(t: f64, a: f64, lam: f64, q: f64) -> f64 {
    if lam == 0.0 {
        return t;
    }
    // h is increasing on (0, t]: h(0+) = -2at < 0, h(t) > 0
    let h = |u: f64| 2.0 * a * (u - t) + lam * q * u.powf(q - 1.0);
    let dh = |u: f64| 2.0 * a + lam * q * (q - 1.0) * u.powf(q - 2.0);
    bracketed_root(h, dh, 0.0, t, t)
}

/// Local minimiser of `a (u - t)^2 + lam k u / (k + u)` on `(0, t]`, if any.
fn cpf_local_min(t: f64, a: f64, lam: f64, k: f64) -> Option<f64> {
    // derivative is convex in u with its minimum at u_star
    let d = |u: f64| 2.0 * a * (u - t) + lam * k * k / ((k + u) * (k + u));
    let dd = |u: f64| 2.0 * a - 2.0 * lam * k * k / ((k + u) * (k + u) * (k + u));
    let u_star = ((lam * k * k / a).cbrt() - k).max(0.0);
    if u_star >= t {
        // d decreasing up to t where d(t) > 0: no interior minimum
        return None;
    }
    if d(u_star) >= 0.0 {
        return None;
    }
    Some(bracketed_root(d, dd, u_star, t, t))
}

/// Soft threshold of a magnitude. Inputs within rounding of the threshold
/// map to exactly zero, so `lambda = lambda_max` zeroes a coefficient however
/// `x'y` was summed.
fn soft(t: f64, thr: f64) -> f64 {
    if t <= thr * (1.0 + SOFT_SLACK) {
        0.0
    } else {
        t - thr
    }
}

const SOFT_SLACK: f64 = 1e-12;

/// Value of `g(beta)` for coordinate `coord` of `spec`.
pub fn penalty_value(spec: &PenaltySpec, beta: f64, coord: usize) -> f64 {
    spec.coordinate(coord).value(beta)
}

/// Minimiser of `a (b - z)^2 + g(b)` for coordinate `coord` of `spec`.
pub fn scalar_prox(spec: &PenaltySpec, z: f64, a: f64, coord: usize) -> f64 {
    spec.coordinate(coord).prox(z, a)
}

/// `(beta, g(beta))` samples for plotting a family's shape.
pub fn penalty_curve(spec: &PenaltySpec, beta_max: f64, points: usize) -> Vec<(f64, f64)> {
    let points = points.max(2);
    (0..points)
        .map(|i| {
            let b = -beta_max + 2.0 * beta_max * i as f64 / (points - 1) as f64;
            (b, penalty_value(spec, b, 0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spec(f: Family, lam: f64, shape: Option<f64>) -> PenaltySpec {
        PenaltySpec::new(f, lam, shape).unwrap()
    }

    #[test]
    fn values_from_definitions() {
        assert_eq!(penalty_value(&spec(Family::Lasso, 1.0, None), -2.0, 0), 2.0);
        assert_eq!(
            penalty_value(&spec(Family::Scad, 1.0, Some(10.0)), 100.0, 0),
            5.5
        );
        assert_abs_diff_eq!(
            penalty_value(&spec(Family::McPlus, 1.0, Some(3.0)), 0.5, 0),
            0.5 - 0.25 / 6.0,
            epsilon = 1e-15
        );
        assert_eq!(penalty_value(&spec(Family::Cpf, 1.0, Some(5.0)), 5.0, 0), 2.5);
        assert_eq!(
            penalty_value(&spec(Family::CLasso, 2.0, Some(0.5)), 3.0, 0),
            1.0
        );
        assert_eq!(
            penalty_value(&spec(Family::Flash, 2.0, Some(0.25)), -1.0, 0),
            1.5
        );
        let a = PenaltySpec::adaptive(1.0, 2.0, &[0.5]).unwrap();
        assert_eq!(penalty_value(&a, 1.0, 0), 4.0);
    }

    #[test]
    fn prox_closed_forms() {
        let lasso = spec(Family::Lasso, 1.0, None);
        assert_eq!(scalar_prox(&lasso, 3.0, 0.5, 0), 2.0);
        assert_eq!(scalar_prox(&lasso, -0.9, 0.5, 0), 0.0);
        let ridge = spec(Family::Ridge, 1.0, None);
        assert_eq!(scalar_prox(&ridge, 3.0, 0.5, 0), 1.0);
        let scad = spec(Family::Scad, 1.0, Some(10.0));
        assert_eq!(scalar_prox(&scad, 0.4, 0.5, 0), 0.0);
        let ols = PenaltySpec::ols();
        assert_eq!(scalar_prox(&ols, -1.25, 3.0, 0), -1.25);
    }

    #[test]
    fn origin_is_fixed_point() {
        for f in Family::PENALIZED {
            let s = if f == Family::ALasso {
                PenaltySpec::adaptive(0.7, 1.5, &[0.3]).unwrap()
            } else {
                spec(f, 0.7, f.shape_grid().first().copied())
            };
            assert_eq!(scalar_prox(&s, 0.0, 1.3, 0), 0.0, "{f}");
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(PenaltySpec::new(Family::Lq, 3.0, Some(1.5)).is_err());
        assert!(PenaltySpec::new(Family::Ridge, 5.5, None).is_err());
        assert!(PenaltySpec::new(Family::Ridge, 5.0, None).is_ok());
        assert!(PenaltySpec::new(Family::McPlus, 1.0, Some(0.5)).is_err());
        assert!(PenaltySpec::new(Family::Scad, 1.0, Some(1.5)).is_err());
        assert!(PenaltySpec::new(Family::En, 1.0, None).is_err());
        assert!(PenaltySpec::new(Family::Lasso, 1.0, Some(0.5)).is_err());
        assert!(PenaltySpec::new(Family::Lasso, -1.0, None).is_err());
        assert!(PenaltySpec::new(Family::ALasso, 1.0, Some(1.0)).is_err());
    }

    #[test]
    fn adaptive_weights_are_floored() {
        let a = PenaltySpec::adaptive(1.0, 1.0, &[0.0, -2.0]).unwrap();
        assert_eq!(a.adaptive_weights().unwrap(), &[ADAPTIVE_WEIGHT_FLOOR, 2.0]);
        // an exactly-zero OLS coefficient is all but excluded
        assert_eq!(scalar_prox(&a, 5.0, 1.0, 0), 0.0);
        assert_eq!(scalar_prox(&a, 5.0, 1.0, 1), 4.75);
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("lasso2".parse::<Family>().is_err());
    }
}
