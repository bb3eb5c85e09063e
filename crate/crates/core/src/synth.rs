//! Seeded synthetic market panels with a known sparse price model.
//!
//! A latent Gaussian process drives every variable. The latent price of
//! hour `h` on day `d` is a linear function of five fARX regressors plus
//! Gaussian noise:
//!
//! `z(d,h) = 0.45 z(d-1,h) + 0.15 z(d-7,h) + 0.10 max_h' z(d-1,h')
//!           + 0.35 load(d,h) - 0.30 wind_on(d,h) + e`
//!
//! Observed values are monotone maps of the latent ones, so an N-PIT on a
//! long enough window approximately recovers the latent scale.

use std::io::Write;

use chrono::{Datelike, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{DayRow, Market, TimeSeriesPanel, Variable, HOURS};

/// fARX label stems of the active regressors with their latent coefficients.
/// `{h}` stands for the target hour.
pub const ACTIVE_REGRESSORS: [(&str, f64); 5] = [
    ("price_lag1_h{h}", 0.45),
    ("price_lag7_h{h}", 0.15),
    ("price_max_lag1", 0.10),
    ("load_lag0_h{h}", 0.35),
    ("wind_on_lag0_h{h}", -0.30),
];

const WARM_UP: usize = 60;
const EXOGENOUS_PERSISTENCE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub market: Market,
    pub start: NaiveDate,
    pub days: usize,
    pub seed: u64,
    /// Standard deviation of the latent price innovation.
    pub noise_sd: f64,
}

impl SynthConfig {
    pub fn new(market: Market, start: NaiveDate, days: usize, seed: u64) -> Self {
        Self {
            market,
            start,
            days,
            seed,
            noise_sd: 0.5,
        }
    }
}

/// Active fARX labels for target hour `h`.
pub fn active_labels(hour: usize) -> Vec<String> {
    ACTIVE_REGRESSORS
        .iter()
        .map(|(l, _)| l.replace("{h}", &hour.to_string()))
        .collect()
}

fn price_map(z: f64) -> f64 {
    40.0 + 9.0 * z + 2.5 * (1.1 * z).sinh()
}

fn solar_profile(h: usize) -> f64 {
    // daylight between 06:00 and 20:00, peaking at 13:00
    let x = (h as f64 - 13.0) / 7.0;
    (1.0 - x * x).max(0.0)
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn observed(var: Variable, market: Market, h: usize, z: f64) -> f64 {
    let x = match (var, market) {
        (Variable::Price, _) => price_map(z),
        (Variable::Load, Market::Epex) => 52_000.0 + 7_000.0 * z,
        (Variable::Load, Market::Omie) => 28_000.0 + 3_500.0 * z,
        (Variable::Solar, Market::Epex) => 9_000.0 * solar_profile(h) * (0.4 * z).exp(),
        (Variable::Solar, Market::Omie) => 4_000.0 * solar_profile(h) * (0.4 * z).exp(),
        (Variable::WindOn, Market::Epex) => 14_000.0 * (0.5 * z).exp(),
        (Variable::WindOn, Market::Omie) => 6_000.0 * (0.5 * z).exp(),
        (Variable::WindOff, _) => 2_500.0 * (0.6 * z).exp(),
    };
    round2(x)
}

/// Generates a panel of `config.days` consecutive days.
pub fn generate(config: &SynthConfig) -> Result<TimeSeriesPanel> {
    if config.days == 0 {
        return Err(Error::Config("synthetic panel needs at least one day".into()));
    }
    if !(config.noise_sd >= 0.0 && config.noise_sd.is_finite()) {
        return Err(Error::Config(format!("bad noise level {}", config.noise_sd)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let total = config.days + WARM_UP;
    let vars = config.market.variables();
    let mut latent: Vec<Vec<DayRow>> = vec![vec![[0.0; HOURS]; total]; vars.len()];
    let idx = |v: Variable| vars.iter().position(|x| *x == v).expect("market variable");
    let (ip, il, iw) = (idx(Variable::Price), idx(Variable::Load), idx(Variable::WindOn));
    let innovation = (1.0 - EXOGENOUS_PERSISTENCE * EXOGENOUS_PERSISTENCE).sqrt();

    for d in 0..total {
        for (k, &var) in vars.iter().enumerate() {
            if var == Variable::Price {
                continue;
            }
            for h in 0..HOURS {
                let e: f64 = rng.sample(StandardNormal);
                let prev = if d > 0 { latent[k][d - 1][h] } else { 0.0 };
                latent[k][d][h] = EXOGENOUS_PERSISTENCE * prev + innovation * e;
            }
        }
        let lag = |l: usize, h: usize| if d >= l { latent[ip][d - l][h] } else { 0.0 };
        let max_prev = if d >= 1 {
            latent[ip][d - 1].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            0.0
        };
        let mut row = [0.0; HOURS];
        for (h, z) in row.iter_mut().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            *z = 0.45 * lag(1, h) + 0.15 * lag(7, h) + 0.10 * (max_prev - 1.5)
                + 0.35 * latent[il][d][h]
                - 0.30 * latent[iw][d][h]
                + config.noise_sd * e;
        }
        latent[ip][d] = row;
    }

    let days: Vec<NaiveDate> = config.start.iter_days().take(config.days).collect();
    let series = vars.iter().enumerate().map(|(k, &var)| {
        let rows: Vec<DayRow> = latent[k][WARM_UP..]
            .iter()
            .map(|r| std::array::from_fn(|h| observed(var, config.market, h + 1, r[h])))
            .collect();
        (var, rows)
    });
    TimeSeriesPanel::new(config.market, days, series)
}

fn last_sunday(year: i32, month: u32) -> NaiveDate {
    let next = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid month");
    let mut d = next.pred_opt().expect("not the first date");
    while d.weekday() != Weekday::Sun {
        d = d.pred_opt().expect("not the first date");
    }
    d
}

/// Writes `panel` as a market CSV. With `dst_artifacts`, hour 3 is dropped
/// on the last Sunday of March and reported twice (bracketing the true
/// value) on the last Sunday of October, as in raw exchange exports.
pub fn write_market_csv<W: Write>(panel: &TimeSeriesPanel, writer: W, dst_artifacts: bool) -> Result<()> {
    let vars = panel.market().variables();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["date".to_string(), "hour".to_string()];
    header.extend(vars.iter().map(|v| v.as_str().to_string()));
    w.write_record(&header)?;
    for (d, day) in panel.days().iter().enumerate() {
        let spring = dst_artifacts && *day == last_sunday(day.year(), 3);
        let autumn = dst_artifacts && *day == last_sunday(day.year(), 10);
        for h in 1..=HOURS {
            if spring && h == 3 {
                continue;
            }
            let values: Vec<f64> = vars.iter().map(|v| panel.value(*v, d, h)).collect();
            let mut emit = |vals: &[f64]| -> Result<()> {
                let mut rec = vec![day.to_string(), h.to_string()];
                rec.extend(vals.iter().map(|x| x.to_string()));
                w.write_record(&rec)?;
                Ok(())
            };
            if autumn && h == 3 {
                let lo: Vec<f64> = values.iter().map(|x| round2(x - 0.5)).collect();
                let hi: Vec<f64> = values.iter().map(|x| round2(x + 0.5)).collect();
                emit(&lo)?;
                emit(&hi)?;
            } else {
                emit(&values)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(seed: u64) -> SynthConfig {
        SynthConfig::new(Market::Epex, NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(), 320, seed)
    }

    #[test]
    fn seeded_and_complete() {
        let a = generate(&cfg(3)).unwrap();
        assert_eq!(a, generate(&cfg(3)).unwrap());
        assert_ne!(a, generate(&cfg(4)).unwrap());
        assert!(a.is_finite());
        assert_eq!(a.num_days(), 320);
        // solar is zero at night
        assert_eq!(a.value(Variable::Solar, 10, 2), 0.0);
        assert!(a.value(Variable::WindOff, 10, 2) > 0.0);
    }

    #[test]
    fn dst_artifacts_are_repaired() {
        let panel = generate(&cfg(1)).unwrap();
        let mut buf = Vec::new();
        write_market_csv(&panel, &mut buf, true).unwrap();
        let (back, log) = crate::ingest::read_panel(&buf[..], Market::Epex).unwrap();
        let spring = back.day_index(NaiveDate::from_ymd_opt(2019, 3, 31).unwrap()).unwrap();
        let autumn = back.day_index(NaiveDate::from_ymd_opt(2019, 10, 27).unwrap()).unwrap();
        assert_eq!(log.len(), 2 * Market::Epex.variables().len());
        let mean = 0.5 * (panel.value(Variable::Price, spring, 2) + panel.value(Variable::Price, spring, 4));
        assert_eq!(back.value(Variable::Price, spring, 3), mean);
        let p = back.value(Variable::Price, autumn, 3);
        assert!((p - panel.value(Variable::Price, autumn, 3)).abs() < 1e-9);
    }

    #[test]
    fn last_sundays() {
        assert_eq!(last_sunday(2020, 3), NaiveDate::from_ymd_opt(2020, 3, 29).unwrap());
        assert_eq!(last_sunday(2020, 10), NaiveDate::from_ymd_opt(2020, 10, 25).unwrap());
        assert_eq!(last_sunday(2021, 12), NaiveDate::from_ymd_opt(2021, 12, 26).unwrap());
    }
}
