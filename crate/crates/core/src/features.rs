//! Per-hour regression problems for the ARX and fARX model structures.
//!
//! Column order is fixed and does not depend on how the panel was built.
//!
//! ARX (17 columns for EPEX, 16 for OMIE):
//! `price_lag1, price_lag2, price_lag7, price_max_lag1, price_min_lag1,
//! price_lag1_h24, load, solar, wind_on, [wind_off], dow_1..dow_7`
//!
//! fARX (277 columns for EPEX, 229 for OMIE):
//! `price_lag{1,2,7}_h{1..24}` (72), `price_max_lag{1,2,3}`,
//! `price_min_lag{1,2,3}` (6), then for each exogenous variable
//! `{var}_lag{0,1}_h{1..24}` (48 per variable), then `dow_1..dow_7`.
//!
//! Weekday dummies are numbered Monday = 1 through Sunday = 7.

use std::io::Write;

use chrono::{Datelike, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Market, TimeSeriesPanel, Variable, HOURS};

/// Days of history consumed by the longest lag.
pub const BURN_IN: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Arx,
    Farx,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Arx => "arx",
            ModelKind::Farx => "farx",
        }
    }

    /// Whether the regressor matrix is the same for all 24 hours.
    pub fn hour_agnostic(self) -> bool {
        matches!(self, ModelKind::Farx)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arx" => Ok(ModelKind::Arx),
            "farx" => Ok(ModelKind::Farx),
            other => Err(Error::Config(format!(
                "unknown model `{other}` (expected arx or farx)"
            ))),
        }
    }
}

/// Inclusive range of calendar days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayRange {
    pub first: NaiveDate,
    pub last: NaiveDate,
}

impl DayRange {
    pub fn new(first: NaiveDate, last: NaiveDate) -> Self {
        Self { first, last }
    }

    pub fn len(&self) -> usize {
        ((self.last - self.first).num_days() + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One hourly regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub hour: usize,
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub labels: Vec<String>,
    pub day_index: Vec<NaiveDate>,
}

impl DesignMatrix {
    /// A plain problem without calendar metadata, mostly for tests and demos.
    pub fn from_parts(x: DMatrix<f64>, y: DVector<f64>) -> Self {
        let labels = (0..x.ncols()).map(|j| format!("x{}", j + 1)).collect();
        Self {
            hour: 1,
            day_index: Vec::new(),
            y,
            x,
            labels,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.ncols()
    }

    /// Indices of the weekday dummy columns.
    pub fn dummy_columns(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| is_dummy_label(l))
            .map(|(j, _)| j)
            .collect()
    }

    /// Rows selected by `rows`, keeping column metadata.
    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        let x = self.x.select_rows(rows);
        let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.y[i]));
        let day_index = if self.day_index.is_empty() {
            Vec::new()
        } else {
            rows.iter().map(|&i| self.day_index[i]).collect()
        };
        DesignMatrix {
            hour: self.hour,
            y,
            x,
            labels: self.labels.clone(),
            day_index,
        }
    }

    /// Writes `date,y,<labels...>` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["date".to_string(), "y".to_string()];
        header.extend(self.labels.iter().cloned());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![
                self.day_index
                    .get(i)
                    .map(|d| d.to_string())
                    .unwrap_or_default(),
                self.y[i].to_string(),
            ];
            rec.extend(self.x.row(i).iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn is_dummy_label(label: &str) -> bool {
    label.starts_with("dow_")
}

pub fn column_labels(market: Market, model: ModelKind) -> Vec<String> {
    let mut labels = Vec::new();
    match model {
        ModelKind::Arx => {
            labels.extend(
                [
                    "price_lag1",
                    "price_lag2",
                    "price_lag7",
                    "price_max_lag1",
                    "price_min_lag1",
                    "price_lag1_h24",
                ]
                .map(String::from),
            );
            labels.extend(market.exogenous().iter().map(|v| v.as_str().to_string()));
        }
        ModelKind::Farx => {
            for lag in [1, 2, 7] {
                for h in 1..=HOURS {
                    labels.push(format!("price_lag{lag}_h{h}"));
                }
            }
            for stat in ["max", "min"] {
                for lag in 1..=3 {
                    labels.push(format!("price_{stat}_lag{lag}"));
                }
            }
            for var in market.exogenous() {
                for lag in 0..=1 {
                    for h in 1..=HOURS {
                        labels.push(format!("{var}_lag{lag}_h{h}"));
                    }
                }
            }
        }
    }
    labels.extend((1..=7).map(|i| format!("dow_{i}")));
    labels
}

pub fn num_regressors(market: Market, model: ModelKind) -> usize {
    column_labels(market, model).len()
}

fn day_max(row: &[f64; HOURS]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn day_min(row: &[f64; HOURS]) -> f64 {
    row.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Regressors for target day index `d` and `hour`. Reads prices of days
/// `d-1` and earlier only; exogenous values of day `d` itself are allowed.
pub fn regressor_row(panel: &TimeSeriesPanel, model: ModelKind, hour: usize, d: usize) -> Vec<f64> {
    assert!(d >= BURN_IN, "day index {d} lacks lag history");
    let market = panel.market();
    let price = panel.series(Variable::Price);
    let mut row = Vec::with_capacity(num_regressors(market, model));
    match model {
        ModelKind::Arx => {
            let h = hour - 1;
            row.push(price[d - 1][h]);
            row.push(price[d - 2][h]);
            row.push(price[d - 7][h]);
            row.push(day_max(&price[d - 1]));
            row.push(day_min(&price[d - 1]));
            row.push(price[d - 1][HOURS - 1]);
            for var in market.exogenous() {
                row.push(panel.series(*var)[d][h]);
            }
        }
        ModelKind::Farx => {
            for lag in [1, 2, 7] {
                row.extend_from_slice(&price[d - lag]);
            }
            for lag in 1..=3 {
                row.push(day_max(&price[d - lag]));
            }
            for lag in 1..=3 {
                row.push(day_min(&price[d - lag]));
            }
            for var in market.exogenous() {
                let series = panel.series(*var);
                for lag in 0..=1 {
                    row.extend_from_slice(&series[d - lag]);
                }
            }
        }
    }
    let weekday = panel.days()[d].weekday().number_from_monday() as usize;
    row.extend((1..=7).map(|i| if i == weekday { 1.0 } else { 0.0 }));
    row
}

fn window_indices(panel: &TimeSeriesPanel, hour: usize, window: DayRange) -> Result<(usize, usize)> {
    if !(1..=HOURS).contains(&hour) {
        return Err(Error::Config(format!("hour {hour} outside 1..=24")));
    }
    if window.len() < BURN_IN + 1 {
        return Err(Error::Config(format!(
            "window of {} days is too short (need at least {})",
            window.len(),
            BURN_IN + 1
        )));
    }
    let start = panel.day_index(window.first);
    let end = panel.day_index(window.last);
    match (start, end) {
        (Some(s), Some(e)) => Ok((s, e)),
        _ => Err(Error::Data(format!(
            "window {}..{} not inside panel {}..{}",
            window.first,
            window.last,
            panel.days()[0],
            panel.days()[panel.num_days() - 1]
        ))),
    }
}

/// Regression problem for `hour` over `window`; rows start at the 8th day of
/// the window so every lag exists.
pub fn build_design(
    panel: &TimeSeriesPanel,
    model: ModelKind,
    hour: usize,
    window: DayRange,
) -> Result<DesignMatrix> {
    let (start, end) = window_indices(panel, hour, window)?;
    let labels = column_labels(panel.market(), model);
    let rows: Vec<usize> = (start + BURN_IN..=end).collect();
    let p = labels.len();
    let mut x = DMatrix::zeros(rows.len(), p);
    for (i, &d) in rows.iter().enumerate() {
        let r = regressor_row(panel, model, hour, d);
        debug_assert_eq!(r.len(), p);
        for (j, v) in r.into_iter().enumerate() {
            x[(i, j)] = v;
        }
    }
    let y = DVector::from_iterator(
        rows.len(),
        rows.iter().map(|&d| panel.value(Variable::Price, d, hour)),
    );
    Ok(DesignMatrix {
        hour,
        y,
        x,
        labels,
        day_index: rows.iter().map(|&d| panel.days()[d]).collect(),
    })
}

/// Response vector of [`build_design`] alone: transformed prices of `hour`
/// on the regression days of `window`.
pub fn build_response(panel: &TimeSeriesPanel, hour: usize, window: DayRange) -> Result<DVector<f64>> {
    let (start, end) = window_indices(panel, hour, window)?;
    let rows = start + BURN_IN..=end;
    Ok(DVector::from_iterator(
        rows.clone().count(),
        rows.map(|d| panel.value(Variable::Price, d, hour)),
    ))
}

pub fn build_arx(panel: &TimeSeriesPanel, hour: usize, window: DayRange) -> Result<DesignMatrix> {
    build_design(panel, ModelKind::Arx, hour, window)
}

pub fn build_farx(panel: &TimeSeriesPanel, hour: usize, window: DayRange) -> Result<DesignMatrix> {
    build_design(panel, ModelKind::Farx, hour, window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn panel(market: Market, days: usize, f: impl Fn(Variable, usize, usize) -> f64) -> TimeSeriesPanel {
        let start = NaiveDate::from_ymd_opt(2021, 1, 4).unwrap();
        let dates: Vec<_> = start.iter_days().take(days).collect();
        TimeSeriesPanel::new(
            market,
            dates,
            market.variables().iter().map(|&v| {
                let rows = (0..days)
                    .map(|d| std::array::from_fn(|h| f(v, d, h + 1)))
                    .collect();
                (v, rows)
            }),
        )
        .unwrap()
    }

    fn full_window(p: &TimeSeriesPanel) -> DayRange {
        DayRange::new(p.days()[0], *p.days().last().unwrap())
    }

    #[test]
    fn widths() {
        let e = panel(Market::Epex, 10, |_, d, h| (d * 24 + h) as f64);
        let o = panel(Market::Omie, 10, |_, d, h| (d * 24 + h) as f64);
        assert_eq!(build_arx(&e, 5, full_window(&e)).unwrap().n_cols(), 17);
        assert_eq!(build_arx(&o, 5, full_window(&o)).unwrap().n_cols(), 16);
        assert_eq!(build_farx(&e, 5, full_window(&e)).unwrap().n_cols(), 277);
        assert_eq!(build_farx(&o, 5, full_window(&o)).unwrap().n_cols(), 229);
        let labels = column_labels(Market::Omie, ModelKind::Arx);
        assert!(!labels.iter().any(|l| l.contains("wind_off")));
    }

    #[test]
    fn rows_start_after_burn_in() {
        let e = panel(Market::Epex, 10, |_, d, h| (d * 24 + h) as f64);
        let dm = build_arx(&e, 1, full_window(&e)).unwrap();
        assert_eq!(dm.n_rows(), 3);
        assert_eq!(dm.day_index[0], e.days()[7]);
        // y is price(d=7, h=1) = 7*24+1
        assert_eq!(dm.y[0], 169.0);
        // price_lag1, lag2, lag7
        assert_eq!(dm.x[(0, 0)], 145.0);
        assert_eq!(dm.x[(0, 1)], 121.0);
        assert_eq!(dm.x[(0, 2)], 1.0);
        // max/min of day 6, last hour of day 6
        assert_eq!(dm.x[(0, 3)], 168.0);
        assert_eq!(dm.x[(0, 4)], 145.0);
        assert_eq!(dm.x[(0, 5)], 168.0);
    }

    #[test]
    fn constant_panel_propagates() {
        let c = 0.7;
        let e = panel(Market::Epex, 12, |v, _, _| if v == Variable::Price { c } else { 1.0 });
        let dm = build_arx(&e, 9, full_window(&e)).unwrap();
        for i in 0..dm.n_rows() {
            for j in 0..6 {
                assert_eq!(dm.x[(i, j)], c);
            }
        }
    }

    #[test]
    fn farx_lag_block_is_previous_day() {
        let e = panel(Market::Epex, 12, |v, d, h| {
            (d * 100 + h) as f64 + if v == Variable::Price { 0.0 } else { 0.5 }
        });
        let dm = build_farx(&e, 3, full_window(&e)).unwrap();
        for (i, day) in dm.day_index.iter().enumerate() {
            let d = e.day_index(*day).unwrap();
            for h in 0..24 {
                assert_eq!(dm.x[(i, h)], e.series(Variable::Price)[d - 1][h]);
                assert_eq!(dm.x[(i, 48 + h)], e.series(Variable::Price)[d - 7][h]);
            }
        }
    }

    #[test]
    fn window_and_hour_errors() {
        let e = panel(Market::Epex, 10, |_, d, h| (d * 24 + h) as f64);
        let short = DayRange::new(e.days()[0], e.days()[6]);
        assert!(matches!(build_arx(&e, 1, short), Err(Error::Config(_))));
        assert!(matches!(
            build_arx(&e, 0, full_window(&e)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_arx(&e, 25, full_window(&e)),
            Err(Error::Config(_))
        ));
        let outside = DayRange::new(e.days()[0], e.days()[0] + chrono::Days::new(30));
        assert!(matches!(build_arx(&e, 1, outside), Err(Error::Data(_))));
    }
}
