//! Forecast scoring in price space: RMSE and RMSE relative to an OLS run.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::backtest::ForecastRecord;
use crate::error::{Error, Result};
use crate::ingest::HOURS;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// Euro/MWh.
    pub rmse: f64,
    /// Percent change against the baseline RMSE, when one was supplied.
    pub rrmse_vs_baseline: Option<f64>,
    pub n_days: usize,
    pub n_hours: usize,
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
}

/// Days covered by `records`, checking each has all 24 hours exactly once.
fn coverage(records: &[ForecastRecord]) -> Result<Vec<NaiveDate>> {
    if records.is_empty() {
        return Err(Error::Coverage("no forecast records".into()));
    }
    let mut days: BTreeMap<NaiveDate, [u8; HOURS]> = BTreeMap::new();
    for r in records {
        if !(1..=HOURS).contains(&r.hour) {
            return Err(Error::Coverage(format!("{} has hour {}", r.day, r.hour)));
        }
        days.entry(r.day).or_insert([0; HOURS])[r.hour - 1] += 1;
    }
    for (day, hours) in &days {
        if hours.iter().any(|c| *c != 1) {
            return Err(Error::Coverage(format!(
                "{day} does not have exactly one record per hour"
            )));
        }
    }
    Ok(days.into_keys().collect())
}

/// `sqrt(1/(24 D) * sum (P - P_hat)^2)` over complete days.
pub fn rmse(records: &[ForecastRecord]) -> Result<f64> {
    coverage(records)?;
    // summed in (day, hour) order so the result does not depend on how the
    // records are arranged
    let mut sq: Vec<(NaiveDate, usize, f64)> = records
        .iter()
        .map(|r| (r.day, r.hour, (r.actual_price - r.forecast_price).powi(2)))
        .collect();
    sq.sort_by_key(|&(d, h, _)| (d, h));
    let sse: f64 = sq.iter().map(|t| t.2).sum();
    Ok((sse / records.len() as f64).sqrt())
}

pub fn score(records: &[ForecastRecord]) -> Result<ScoreReport> {
    let days = coverage(records)?;
    Ok(ScoreReport {
        rmse: rmse(records)?,
        rrmse_vs_baseline: None,
        n_days: days.len(),
        n_hours: HOURS,
        first_day: days[0],
        last_day: days[days.len() - 1],
    })
}

/// `(RMSE_reg - RMSE_ols) / RMSE_ols * 100`.
pub fn rrmse(report: &ScoreReport, baseline: &ScoreReport) -> Result<f64> {
    if (report.first_day, report.last_day, report.n_days)
        != (baseline.first_day, baseline.last_day, baseline.n_days)
    {
        return Err(Error::Coverage(format!(
            "reports cover {}..{} ({} days) and {}..{} ({} days)",
            report.first_day,
            report.last_day,
            report.n_days,
            baseline.first_day,
            baseline.last_day,
            baseline.n_days
        )));
    }
    if baseline.rmse == 0.0 {
        return Err(Error::Numeric("baseline RMSE is zero".into()));
    }
    Ok((report.rmse - baseline.rmse) / baseline.rmse * 100.0)
}

/// Scores `records` and fills in the relative error against `baseline`.
pub fn score_against(records: &[ForecastRecord], baseline: &[ForecastRecord]) -> Result<ScoreReport> {
    let mut report = score(records)?;
    let base = score(baseline)?;
    report.rrmse_vs_baseline = Some(rrmse(&report, &base)?);
    Ok(report)
}

/// One line of a cross-family comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub market: String,
    pub model: String,
    pub family: String,
    pub selection: String,
    pub shape: String,
    pub rmse: f64,
    pub rrmse: Option<f64>,
}

/// Orders rows by rRMSE (baseline rows, which have none, go first).
pub fn sort_comparison(rows: &mut [ComparisonRow]) {
    rows.sort_by(|a, b| match (a.rrmse, b.rrmse) {
        (None, None) => a.family.cmp(&b.family),
        (None, Some(_)) => std::cmp::Ordering::Less,
        (Some(_), None) => std::cmp::Ordering::Greater,
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.family.cmp(&b.family)),
    });
}

pub fn write_comparison_csv<W: Write>(rows: &[ComparisonRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["market", "model", "family", "selection", "shape", "rmse", "rrmse_pct"])?;
    for r in rows {
        w.write_record([
            r.market.clone(),
            r.model.clone(),
            r.family.clone(),
            r.selection.clone(),
            r.shape.clone(),
            format!("{:.4}", r.rmse),
            r.rrmse.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into()),
        ])?;
    }
    w.flush()?;
    Ok(())
}
