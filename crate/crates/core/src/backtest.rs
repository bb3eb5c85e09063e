//! Rolling-window out-of-sample forecasting.
//!
//! For every forecast day the trailing `window_days` days supply the ECDFs
//! and the regression rows; the 24 hourly models are selected, fitted and
//! evaluated on the forecast day's regressors, and the forecasts are mapped
//! back to price space.

use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{build_design, build_response, regressor_row, DayRange, ModelKind, BURN_IN};
use crate::ingest::{Market, TimeSeriesPanel, Variable, HOURS};
use crate::penalties::{Family, PenaltySpec};
use crate::selection::{select_prepared, PreparedProblem, SelectionPlan, ShapeMode, TraceEntry};
use crate::transform::{EcdfMode, PanelTransform};

pub const DEFAULT_WINDOW_DAYS: usize = 728;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub market: Market,
    pub model: ModelKind,
    pub family: Family,
    pub selection: SelectionPlan,
    /// Calibration days preceding each forecast day.
    pub window_days: usize,
    pub first_forecast_day: NaiveDate,
    pub last_forecast_day: NaiveDate,
    #[serde(default)]
    pub ecdf_mode: EcdfMode,
    /// Re-run the selection every `k` forecast days and only refit at the
    /// previously chosen penalty in between. 1 selects daily.
    #[serde(default = "one")]
    pub reselect_every: usize,
    /// Worker threads for the hourly fits; `None` uses the global pool.
    #[serde(default)]
    pub jobs: Option<usize>,
}

fn one() -> usize {
    1
}

impl BacktestConfig {
    pub fn new(
        market: Market,
        model: ModelKind,
        family: Family,
        selection: SelectionPlan,
        first_forecast_day: NaiveDate,
        last_forecast_day: NaiveDate,
    ) -> Self {
        Self {
            market,
            model,
            family,
            selection,
            window_days: DEFAULT_WINDOW_DAYS,
            first_forecast_day,
            last_forecast_day,
            ecdf_mode: EcdfMode::default(),
            reselect_every: 1,
            jobs: None,
        }
    }

    pub fn with_window(mut self, days: usize) -> Self {
        self.window_days = days;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_days < BURN_IN + 1 {
            return Err(Error::Config(format!(
                "window of {} days is shorter than the {} needed for lags",
                self.window_days,
                BURN_IN + 1
            )));
        }
        if self.last_forecast_day < self.first_forecast_day {
            return Err(Error::Config(format!(
                "forecast range {}..{} is empty",
                self.first_forecast_day, self.last_forecast_day
            )));
        }
        if self.reselect_every == 0 {
            return Err(Error::Config("reselect_every must be at least 1".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.family == Family::Ols && self.selection.shape_mode == ShapeMode::JointCv {
            return Err(Error::Config("OLS has no shape to select".into()));
        }
        self.selection.validate(self.family)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub day: NaiveDate,
    pub hour: usize,
    pub actual_price: f64,
    pub forecast_price: f64,
    /// `None` for OLS.
    pub chosen_lambda: Option<f64>,
    pub chosen_shape: Option<f64>,
    pub nnz: usize,
}

/// Day indices `(first, last)` of the forecast range inside `panel`.
fn forecast_span(panel: &TimeSeriesPanel, config: &BacktestConfig) -> Result<(usize, usize)> {
    if panel.market() != config.market {
        return Err(Error::Config(format!(
            "panel is {} but the run is configured for {}",
            panel.market(),
            config.market
        )));
    }
    let locate = |day: NaiveDate| {
        panel.day_index(day).ok_or_else(|| {
            Error::Data(format!(
                "forecast day {day} outside panel {}..{}",
                panel.days()[0],
                panel.days()[panel.num_days() - 1]
            ))
        })
    };
    let first = locate(config.first_forecast_day)?;
    let last = locate(config.last_forecast_day)?;
    if first < config.window_days {
        return Err(Error::Data(format!(
            "insufficient history: {} needs {} prior days, panel has {}",
            config.first_forecast_day, config.window_days, first
        )));
    }
    Ok((first, last))
}

/// Hourly choices carried between re-selection days.
type Carried = Vec<Option<PenaltySpec>>;

/// Selection trace of one `(day, hour)` model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourTrace {
    pub day: NaiveDate,
    pub hour: usize,
    pub trace: Vec<TraceEntry>,
}

/// Records plus the selection traces of every re-selection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BacktestOutput {
    pub records: Vec<ForecastRecord>,
    pub traces: Vec<HourTrace>,
}

struct DayOutput {
    records: Vec<ForecastRecord>,
    specs: Carried,
    traces: Vec<HourTrace>,
}

struct HourOutput {
    record: ForecastRecord,
    spec: Option<PenaltySpec>,
    trace: Option<Vec<TraceEntry>>,
}

fn forecast_day(
    panel: &TimeSeriesPanel,
    config: &BacktestConfig,
    pool: &Pool,
    d: usize,
    carried: Option<&Carried>,
) -> Result<DayOutput> {
    let day = panel.days()[d];
    let start = d - config.window_days;
    // Local panel: calibration window plus the forecast day, whose prices are
    // hidden so nothing downstream can read them.
    let local = panel
        .slice(start, d)
        .map_variable(Variable::Price, |i, _, x| if i == config.window_days { f64::NAN } else { x });
    let transform = PanelTransform::fit(&local, 0, config.window_days - 1, config.ecdf_mode)
        .map_err(|e| e.at(day, 0))?;
    let z = transform.apply(&local);
    let window = DayRange::new(z.days()[0], z.days()[config.window_days - 1]);
    let target = config.window_days;

    let shared = if config.model.hour_agnostic() {
        let dm = build_design(&z, config.model, 1, window).map_err(|e| e.at(day, 1))?;
        Some(
            PreparedProblem::new(&dm, config.selection.folds, config.selection.standardize)
                .map_err(|e| e.at(day, 1))?,
        )
    } else {
        None
    };

    let fit_hour = |h: usize| -> Result<HourOutput> {
        let own = match &shared {
            Some(p) => p.with_response(&build_response(&z, h, window)?),
            None => {
                let dm = build_design(&z, config.model, h, window)?;
                PreparedProblem::new(&dm, config.selection.folds, config.selection.standardize)?
            }
        };
        let prep = &own;
        let (spec, fit, trace) = match carried.and_then(|c| c[h - 1].clone()) {
            Some(spec) => {
                let fit = prep.fit(&spec)?;
                (spec, fit, None)
            }
            None => {
                let sel = select_prepared(prep, config.family, &config.selection)?;
                (sel.spec, sel.fit, Some(sel.trace))
            }
        };
        let row = regressor_row(&z, config.model, h, target);
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::Data("forecast-day regressors are not finite".into()));
        }
        let zhat = fit.predict(&row);
        if !zhat.is_finite() {
            return Err(Error::Numeric("transformed forecast is not finite".into()));
        }
        let forecast_price = transform.inverse_price(h, zhat);
        let penalized = config.family != Family::Ols;
        let record = ForecastRecord {
            day,
            hour: h,
            actual_price: panel.value(Variable::Price, d, h),
            forecast_price,
            chosen_lambda: penalized.then(|| spec.lambda()),
            chosen_shape: if penalized { spec.shape() } else { None },
            nnz: fit.nnz,
        };
        Ok(HourOutput {
            record,
            spec: penalized.then_some(spec),
            trace,
        })
    };

    let results = pool.map_hours(|h| fit_hour(h).map_err(|e| e.at(day, h)));
    let mut out = DayOutput {
        records: Vec::with_capacity(HOURS),
        specs: Vec::with_capacity(HOURS),
        traces: Vec::new(),
    };
    for r in results {
        let r = r?;
        if let Some(trace) = r.trace {
            out.traces.push(HourTrace {
                day,
                hour: r.record.hour,
                trace,
            });
        }
        out.records.push(r.record);
        out.specs.push(r.spec);
    }
    Ok(out)
}

/// Where the 24 hourly fits of a day run. Results are always collected in
/// hour order, so output does not depend on the number of threads.
enum Pool {
    Sequential,
    #[cfg(feature = "parallel")]
    Global,
    #[cfg(feature = "parallel")]
    Own(rayon::ThreadPool),
}

impl Pool {
    #[cfg(feature = "parallel")]
    fn new(jobs: Option<usize>) -> Result<Self> {
        match jobs {
            Some(1) => Ok(Pool::Sequential),
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map(Pool::Own)
                .map_err(|e| Error::Config(format!("cannot start {n} worker threads: {e}"))),
            None => Ok(Pool::Global),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn new(_jobs: Option<usize>) -> Result<Self> {
        Ok(Pool::Sequential)
    }

    #[cfg(feature = "parallel")]
    fn map_hours<T: Send>(&self, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
        use rayon::prelude::*;
        let par = || (1..=HOURS).into_par_iter().map(&f).collect::<Vec<_>>();
        match self {
            Pool::Sequential => (1..=HOURS).map(&f).collect(),
            Pool::Global => par(),
            Pool::Own(pool) => pool.install(par),
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn map_hours<T>(&self, f: impl Fn(usize) -> T) -> Vec<T> {
        (1..=HOURS).map(f).collect()
    }
}

/// Runs the rolling backtest; records come back in (day, hour) order.
pub fn run_backtest(panel: &TimeSeriesPanel, config: &BacktestConfig) -> Result<Vec<ForecastRecord>> {
    Ok(run_backtest_detailed(panel, config)?.records)
}

/// Like [`run_backtest`], also returning the selection traces.
pub fn run_backtest_detailed(panel: &TimeSeriesPanel, config: &BacktestConfig) -> Result<BacktestOutput> {
    config.validate()?;
    let (first, last) = forecast_span(panel, config)?;
    let pool = Pool::new(config.jobs)?;
    let mut out = BacktestOutput {
        records: Vec::with_capacity((last - first + 1) * HOURS),
        traces: Vec::new(),
    };
    let mut carried: Option<Carried> = None;
    for (k, d) in (first..=last).enumerate() {
        let reuse = if k % config.reselect_every == 0 {
            None
        } else {
            carried.as_ref()
        };
        let day = forecast_day(panel, config, &pool, d, reuse)?;
        if reuse.is_none() {
            carried = Some(day.specs);
        }
        out.records.extend(day.records);
        out.traces.extend(day.traces);
    }
    Ok(out)
}

/// Writes `date,hour,lambda,shape,score` rows for every traced selection.
pub fn write_traces_csv<W: Write>(traces: &[HourTrace], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "hour", "lambda", "shape", "score"])?;
    for t in traces {
        for e in &t.trace {
            w.write_record([
                t.day.to_string(),
                t.hour.to_string(),
                e.lambda.to_string(),
                e.shape.map(|s| s.to_string()).unwrap_or_default(),
                e.score.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `date,hour,actual,forecast,lambda,shape,nnz`.
pub fn write_records_csv<W: Write>(records: &[ForecastRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["date", "hour", "actual", "forecast", "lambda", "shape", "nnz"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.day.to_string(),
            r.hour.to_string(),
            r.actual_price.to_string(),
            r.forecast_price.to_string(),
            opt(r.chosen_lambda),
            opt(r.chosen_shape),
            r.nnz.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads records written by [`write_records_csv`].
pub fn read_records_csv<R: std::io::Read>(reader: R) -> Result<Vec<ForecastRecord>> {
    let mut rd = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let line = i as u64 + 2;
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("bad {what}"),
        };
        let field = |k: usize| row.get(k).unwrap_or("");
        let num = |k: usize, what: &str| field(k).parse::<f64>().map_err(|_| bad(what));
        let opt = |k: usize, what: &str| {
            let s = field(k);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| bad(what))
            }
        };
        out.push(ForecastRecord {
            day: field(0).parse().map_err(|_| bad("date"))?,
            hour: field(1).parse().map_err(|_| bad("hour"))?,
            actual_price: num(2, "actual")?,
            forecast_price: num(3, "forecast")?,
            chosen_lambda: opt(4, "lambda")?,
            chosen_shape: opt(5, "shape")?,
            nnz: field(6).parse().map_err(|_| bad("nnz"))?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::DayRow;
    use std::collections::BTreeMap;

    fn persistent_panel(days: usize) -> TimeSeriesPanel {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates: Vec<_> = start.iter_days().take(days).collect();
        let mut series = BTreeMap::new();
        let price: Vec<DayRow> = (0..days)
            .map(|_| std::array::from_fn(|h| 30.0 + 2.0 * h as f64))
            .collect();
        series.insert(Variable::Price, price);
        for (k, v) in Market::Omie.exogenous().iter().enumerate() {
            let rows: Vec<DayRow> = (0..days)
                .map(|d| std::array::from_fn(|h| ((d * 31 + h * 7 + k * 13) % 17) as f64))
                .collect();
            series.insert(*v, rows);
        }
        TimeSeriesPanel::new(Market::Omie, dates, series).unwrap()
    }

    #[test]
    fn persistence_is_reproduced() {
        let panel = persistent_panel(40);
        let mut cfg = BacktestConfig::new(
            Market::Omie,
            ModelKind::Arx,
            Family::Ols,
            SelectionPlan::bic(None),
            panel.days()[30],
            panel.days()[32],
        );
        cfg.window_days = 30;
        let recs = run_backtest(&panel, &cfg).unwrap();
        assert_eq!(recs.len(), 72);
        for r in &recs {
            assert!((r.forecast_price - r.actual_price).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn insufficient_history() {
        let panel = persistent_panel(40);
        let mut cfg = BacktestConfig::new(
            Market::Omie,
            ModelKind::Arx,
            Family::Ols,
            SelectionPlan::bic(None),
            panel.days()[20],
            panel.days()[22],
        );
        cfg.window_days = 30;
        assert!(matches!(run_backtest(&panel, &cfg), Err(Error::Data(_))));
        cfg.window_days = 5;
        assert!(matches!(run_backtest(&panel, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn records_csv_round_trip() {
        let recs = vec![ForecastRecord {
            day: NaiveDate::from_ymd_opt(2021, 1, 2).unwrap(),
            hour: 3,
            actual_price: 41.25,
            forecast_price: 40.0 + 1.0 / 3.0,
            chosen_lambda: Some(0.125),
            chosen_shape: None,
            nnz: 4,
        }];
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        assert_eq!(read_records_csv(&buf[..]).unwrap(), recs);
    }
}
