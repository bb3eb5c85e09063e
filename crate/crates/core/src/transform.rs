//! Normal probability integral transform (N-PIT).
//!
//! Each series is pushed through its empirical CDF and then through the
//! standard normal quantile function, giving approximately Gaussian
//! marginals. Forecasts made in that space are mapped back through the
//! inverse: normal CDF followed by the empirical quantile function.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::ingest::{DayRow, TimeSeriesPanel, Variable, HOURS};

fn std_normal() -> Normal {
    Normal::standard()
}

/// Standard normal CDF.
pub fn norm_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

/// Standard normal quantile function, polished with one Newton step on the
/// CDF so that `norm_cdf(norm_quantile(p))` returns `p` to near machine
/// precision.
pub fn norm_quantile(p: f64) -> f64 {
    let n = std_normal();
    let z = n.inverse_cdf(p);
    if !z.is_finite() {
        return z;
    }
    let density = n.pdf(z);
    if density > 0.0 {
        z - (n.cdf(z) - p) / density
    } else {
        z
    }
}

/// Empirical CDF of a calibration sample.
///
/// A value is mapped to the plotting position `rank / (n + 1)`, with tied
/// values sharing their mid-rank and linear interpolation between distinct
/// sample values. Positions are clamped to `[1/(n+1), n/(n+1)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcdfModel {
    sorted: Vec<f64>,
    // distinct values and their (1-based) mid-ranks
    distinct: Vec<f64>,
    midranks: Vec<f64>,
}

impl EcdfModel {
    pub fn fit(sample: &[f64]) -> Result<Self> {
        if sample.len() < 2 {
            return Err(Error::DegenerateSample(format!(
                "need at least 2 values, got {}",
                sample.len()
            )));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateSample("sample contains non-finite values".into()));
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted[0] == sorted[sorted.len() - 1] {
            return Err(Error::DegenerateSample(format!(
                "constant sample (all values {})",
                sorted[0]
            )));
        }
        let mut distinct = Vec::new();
        let mut midranks = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            distinct.push(sorted[i]);
            midranks.push((i + j) as f64 / 2.0 + 1.0);
            i = j + 1;
        }
        Ok(Self {
            sorted,
            distinct,
            midranks,
        })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_sample(&self) -> &[f64] {
        &self.sorted
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }

    /// Plotting position of `x`, strictly inside `(0, 1)`.
    pub fn position(&self, x: f64) -> f64 {
        let n1 = self.n() as f64 + 1.0;
        let lo = 1.0 / n1;
        let hi = self.n() as f64 / n1;
        let rank = match self.distinct.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(k) => self.midranks[k],
            Err(0) => return lo,
            Err(k) if k == self.distinct.len() => return hi,
            Err(k) => {
                let (x0, x1) = (self.distinct[k - 1], self.distinct[k]);
                let (r0, r1) = (self.midranks[k - 1], self.midranks[k]);
                r0 + (r1 - r0) * (x - x0) / (x1 - x0)
            }
        };
        (rank / n1).clamp(lo, hi)
    }

    /// Empirical quantile at probability `u`, interpolating between order
    /// statistics and clamped to the sample range.
    pub fn quantile(&self, u: f64) -> f64 {
        let n = self.n();
        let mut r = u * (n as f64 + 1.0);
        // absorb the rounding of N(N^-1(p)) so order statistics come back exactly
        if (r - r.round()).abs() < 1e-9 {
            r = r.round();
        }
        if !(r > 1.0) {
            return self.min();
        }
        if r >= n as f64 {
            return self.max();
        }
        let i = r.floor() as usize;
        let frac = r - i as f64;
        let (a, b) = (self.sorted[i - 1], self.sorted[i]);
        if frac == 0.0 || a == b {
            a
        } else {
            a + frac * (b - a)
        }
    }

    /// `N^-1(F(x))`.
    pub fn forward(&self, x: f64) -> f64 {
        norm_quantile(self.position(x))
    }

    /// `F^-1(N(z))`.
    pub fn inverse(&self, z: f64) -> f64 {
        self.quantile(norm_cdf(z))
    }
}

pub fn fit_ecdf(sample: &[f64]) -> Result<EcdfModel> {
    EcdfModel::fit(sample)
}

pub fn npit_forward(model: &EcdfModel, x: f64) -> f64 {
    model.forward(x)
}

pub fn npit_inverse(model: &EcdfModel, z: f64) -> f64 {
    model.inverse(z)
}

/// How the calibration sample of each variable is pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EcdfMode {
    /// One ECDF per variable over all 24 hours of the window.
    #[default]
    Pooled,
    /// One ECDF per variable and hour.
    PerHour,
}

#[derive(Debug, Clone)]
enum VariableEcdf {
    Pooled(EcdfModel),
    PerHour(Box<[EcdfModel; HOURS]>),
}

impl VariableEcdf {
    fn model(&self, hour: usize) -> &EcdfModel {
        match self {
            VariableEcdf::Pooled(m) => m,
            VariableEcdf::PerHour(ms) => &ms[hour - 1],
        }
    }
}

/// N-PIT fitted on a calibration window of a panel, one ECDF per variable.
#[derive(Debug, Clone)]
pub struct PanelTransform {
    models: Vec<(Variable, VariableEcdf)>,
}

impl PanelTransform {
    /// Fits the ECDFs on days `start..=end` (day indices) of `panel`.
    pub fn fit(panel: &TimeSeriesPanel, start: usize, end: usize, mode: EcdfMode) -> Result<Self> {
        let mut models = Vec::new();
        for var in panel.variables() {
            let rows: &[DayRow] = &panel.series(var)[start..=end];
            let ecdf = match mode {
                EcdfMode::Pooled => {
                    let sample: Vec<f64> = rows.iter().flatten().copied().collect();
                    VariableEcdf::Pooled(EcdfModel::fit(&sample).map_err(|e| annotate(e, var))?)
                }
                EcdfMode::PerHour => {
                    let mut ms = Vec::with_capacity(HOURS);
                    for h in 0..HOURS {
                        let sample: Vec<f64> = rows.iter().map(|r| r[h]).collect();
                        ms.push(EcdfModel::fit(&sample).map_err(|e| annotate(e, var))?);
                    }
                    VariableEcdf::PerHour(Box::new(ms.try_into().expect("24 models")))
                }
            };
            models.push((var, ecdf));
        }
        Ok(Self { models })
    }

    pub fn model(&self, var: Variable, hour: usize) -> &EcdfModel {
        self.models
            .iter()
            .find(|(v, _)| *v == var)
            .map(|(_, m)| m.model(hour))
            .unwrap_or_else(|| panic!("no ECDF fitted for {var}"))
    }

    /// Transforms every cell of `panel`.
    pub fn apply(&self, panel: &TimeSeriesPanel) -> TimeSeriesPanel {
        let mut out = panel.clone();
        for (var, ecdf) in &self.models {
            out = out.map_variable(*var, |_, h, x| {
                if x.is_finite() {
                    ecdf.model(h).forward(x)
                } else {
                    x
                }
            });
        }
        out
    }

    /// Maps a transformed price forecast back to price space.
    pub fn inverse_price(&self, hour: usize, z: f64) -> f64 {
        self.model(Variable::Price, hour).inverse(z)
    }
}

fn annotate(err: Error, var: Variable) -> Error {
    match err {
        Error::DegenerateSample(msg) => Error::DegenerateSample(format!("{var}: {msg}")),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn positions_on_small_sample() {
        let m = fit_ecdf(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(m.position(2.0), 0.5);
        assert_eq!(m.position(1.0), 0.25);
        assert_eq!(m.position(-5.0), 0.25);
        assert_eq!(m.position(9.0), 0.75);
        assert_eq!(m.position(1.5), 0.375);
    }

    #[test]
    fn median_maps_to_zero_and_back() {
        let m = fit_ecdf(&[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(npit_forward(&m, 2.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(npit_inverse(&m, 0.0), 2.0, epsilon = 1e-12);
        assert_eq!(npit_inverse(&m, 10.0), 3.0);
        assert_eq!(npit_inverse(&m, -10.0), 1.0);
    }

    #[test]
    fn clamp_below_minimum() {
        let sample: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin()).collect();
        let m = fit_ecdf(&sample).unwrap();
        assert_eq!(m.position(-2.0), 1.0 / 101.0);
        assert!(npit_forward(&m, -1e300).is_finite());
    }

    #[test]
    fn symmetric_sample_negates() {
        let sample: Vec<f64> = (-5..=5).map(|i| i as f64 * 1.5).collect();
        let m = fit_ecdf(&sample).unwrap();
        for x in [0.3, 1.5, 2.2, 7.0, 100.0] {
            assert_abs_diff_eq!(m.forward(x), -m.forward(-x), epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_samples_rejected() {
        assert!(matches!(fit_ecdf(&[]), Err(Error::DegenerateSample(_))));
        assert!(matches!(fit_ecdf(&[1.0]), Err(Error::DegenerateSample(_))));
        assert!(matches!(
            fit_ecdf(&[4.0, 4.0, 4.0]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(matches!(
            fit_ecdf(&[1.0, f64::NAN]),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn ties_round_trip() {
        let sample = [1.0, 2.0, 2.0, 2.0, 5.0, 5.0, 7.0];
        let m = fit_ecdf(&sample).unwrap();
        for x in sample {
            assert_eq!(m.inverse(m.forward(x)), x);
        }
    }
}
