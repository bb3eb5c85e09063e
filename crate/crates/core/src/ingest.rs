//! Hourly market panels: loading from CSV, calendar validation and repair of
//! clock-change artefacts.
//!
//! The input file has one row per `(date, hour)` with an ISO date, an hour in
//! `1..=24` and one column per variable. A clock change shows up as either a
//! missing `(date, hour)` row (spring) or two rows sharing the same key
//! (autumn). Missing cells are replaced by the mean of the preceding and
//! following hour, doubled cells by the mean of both readings.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HOURS: usize = 24;

/// One day of hourly values, index 0 is hour 1.
pub type DayRow = [f64; HOURS];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Market {
    Epex,
    Omie,
}

impl Market {
    pub fn variables(self) -> &'static [Variable] {
        match self {
            Market::Epex => &[
                Variable::Price,
                Variable::Load,
                Variable::Solar,
                Variable::WindOn,
                Variable::WindOff,
            ],
            Market::Omie => &[
                Variable::Price,
                Variable::Load,
                Variable::Solar,
                Variable::WindOn,
            ],
        }
    }

    /// Exogenous (non-price) variables in their fixed column order.
    pub fn exogenous(self) -> &'static [Variable] {
        &self.variables()[1..]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Market::Epex => "epex",
            Market::Omie => "omie",
        }
    }
}

impl fmt::Display for Market {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Market {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "epex" => Ok(Market::Epex),
            "omie" => Ok(Market::Omie),
            other => Err(Error::Config(format!(
                "unknown market `{other}` (expected epex or omie)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Price,
    Load,
    Solar,
    WindOn,
    WindOff,
}

impl Variable {
    pub const ALL: [Variable; 5] = [
        Variable::Price,
        Variable::Load,
        Variable::Solar,
        Variable::WindOn,
        Variable::WindOff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variable::Price => "price",
            Variable::Load => "load",
            Variable::Solar => "solar",
            Variable::WindOn => "wind_on",
            Variable::WindOff => "wind_off",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown variable column `{s}`")))
    }
}

/// Hourly market data indexed by `(day, hour)`.
///
/// All variable matrices share the same `days.len() x 24` shape and the day
/// calendar has no gaps. Panels are immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    market: Market,
    days: Vec<NaiveDate>,
    series: BTreeMap<Variable, Vec<DayRow>>,
}

impl TimeSeriesPanel {
    /// Builds a panel from per-variable matrices. The variable set must match
    /// the market and the calendar must be consecutive.
    pub fn new(
        market: Market,
        days: Vec<NaiveDate>,
        series: impl IntoIterator<Item = (Variable, Vec<DayRow>)>,
    ) -> Result<Self> {
        let series: BTreeMap<_, _> = series.into_iter().collect();
        let expected = market.variables();
        if series.len() != expected.len() || expected.iter().any(|v| !series.contains_key(v)) {
            let got: Vec<_> = series.keys().map(|v| v.as_str()).collect();
            return Err(Error::Schema(format!(
                "{market} panel needs variables {:?}, got {:?}",
                expected.iter().map(|v| v.as_str()).collect::<Vec<_>>(),
                got
            )));
        }
        for (var, rows) in &series {
            if rows.len() != days.len() {
                return Err(Error::Schema(format!(
                    "variable {var} has {} days, calendar has {}",
                    rows.len(),
                    days.len()
                )));
            }
        }
        check_calendar(&days)?;
        Ok(Self {
            market,
            days,
            series,
        })
    }

    pub fn market(&self) -> Market {
        self.market
    }

    pub fn days(&self) -> &[NaiveDate] {
        &self.days
    }

    pub fn num_days(&self) -> usize {
        self.days.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = Variable> + '_ {
        self.series.keys().copied()
    }

    /// The `days x 24` matrix of one variable.
    ///
    /// Panics if the variable is not part of this market.
    pub fn series(&self, var: Variable) -> &[DayRow] {
        self.series
            .get(&var)
            .unwrap_or_else(|| panic!("variable {var} not in {} panel", self.market))
    }

    pub fn get(&self, var: Variable) -> Option<&[DayRow]> {
        self.series.get(&var).map(Vec::as_slice)
    }

    /// Value at `(day index, hour)` with `hour` in `1..=24`.
    pub fn value(&self, var: Variable, day: usize, hour: usize) -> f64 {
        self.series(var)[day][hour - 1]
    }

    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        let first = *self.days.first()?;
        let offset = (date - first).num_days();
        (offset >= 0 && (offset as usize) < self.days.len()).then_some(offset as usize)
    }

    /// Panel restricted to the inclusive day-index range `start..=end`.
    pub fn slice(&self, start: usize, end: usize) -> TimeSeriesPanel {
        TimeSeriesPanel {
            market: self.market,
            days: self.days[start..=end].to_vec(),
            series: self
                .series
                .iter()
                .map(|(v, rows)| (*v, rows[start..=end].to_vec()))
                .collect(),
        }
    }

    /// Copy with every value of `var` replaced by `f(value)`.
    pub fn map_variable(&self, var: Variable, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let mut out = self.clone();
        if let Some(rows) = out.series.get_mut(&var) {
            for (d, row) in rows.iter_mut().enumerate() {
                for (h, x) in row.iter_mut().enumerate() {
                    *x = f(d, h + 1, *x);
                }
            }
        }
        out
    }

    /// True when every cell is finite.
    pub fn is_finite(&self) -> bool {
        self.series
            .values()
            .all(|rows| rows.iter().all(|r| r.iter().all(|x| x.is_finite())))
    }

    /// Writes the panel in the CSV layout accepted by [`load_panel`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let vars = self.market.variables();
        let mut header = vec!["date".to_string(), "hour".to_string()];
        header.extend(vars.iter().map(|v| v.as_str().to_string()));
        w.write_record(&header)?;
        for (d, day) in self.days.iter().enumerate() {
            for h in 1..=HOURS {
                let mut rec = vec![day.to_string(), h.to_string()];
                rec.extend(vars.iter().map(|v| self.value(*v, d, h).to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_calendar(days: &[NaiveDate]) -> Result<()> {
    if days.is_empty() {
        return Err(Error::Data("panel has no days".into()));
    }
    for pair in days.windows(2) {
        if pair[0].checked_add_days(Days::new(1)) != Some(pair[1]) {
            return Err(Error::Data(format!(
                "calendar gap between {} and {}",
                pair[0], pair[1]
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairMethod {
    /// Mean of the preceding and following hour.
    NeighborMean,
    /// Only one neighbour exists (first or last hour of the panel).
    BoundaryNeighbor,
    /// Mean of the two readings of a doubled hour.
    DoubledMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairEntry {
    pub date: NaiveDate,
    pub hour: usize,
    pub variable: Variable,
    pub method: RepairMethod,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairLog {
    pub entries: Vec<RepairEntry>,
}

impl RepairLog {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// One JSON object per line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Readings before repair: each `(day, hour)` cell holds every observation
/// found for it (zero, one, or two).
#[derive(Debug, Clone, PartialEq)]
pub struct RawPanel {
    pub market: Market,
    pub days: Vec<NaiveDate>,
    pub cells: BTreeMap<Variable, Vec<[Vec<f64>; HOURS]>>,
}

impl RawPanel {
    pub fn from_panel(panel: &TimeSeriesPanel) -> Self {
        let cells = panel
            .series
            .iter()
            .map(|(v, rows)| {
                let raw = rows
                    .iter()
                    .map(|row| std::array::from_fn(|h| vec![row[h]]))
                    .collect();
                (*v, raw)
            })
            .collect();
        RawPanel {
            market: panel.market,
            days: panel.days.clone(),
            cells,
        }
    }

    /// Resolves missing and doubled cells into a gap-free panel.
    pub fn repair(&self) -> Result<(TimeSeriesPanel, RepairLog)> {
        check_calendar(&self.days)?;
        let mut log = RepairLog::default();
        let mut series = Vec::new();
        for &var in self.market.variables() {
            let raw = self
                .cells
                .get(&var)
                .ok_or_else(|| Error::Schema(format!("missing variable column `{var}`")))?;
            // Flatten to a single hourly line so neighbours cross midnight.
            let mut line: Vec<Option<f64>> = Vec::with_capacity(raw.len() * HOURS);
            for (d, day) in raw.iter().enumerate() {
                for (h, readings) in day.iter().enumerate() {
                    let value = match readings.as_slice() {
                        [] => None,
                        [x] => Some(*x),
                        [a, b] => {
                            log.entries.push(RepairEntry {
                                date: self.days[d],
                                hour: h + 1,
                                variable: var,
                                method: RepairMethod::DoubledMean,
                            });
                            Some(0.5 * (a + b))
                        }
                        more => {
                            return Err(Error::Data(format!(
                                "{} hour {} has {} readings of {var}",
                                self.days[d],
                                h + 1,
                                more.len()
                            )))
                        }
                    };
                    line.push(value);
                }
            }
            let mut filled = Vec::with_capacity(line.len());
            for (i, cell) in line.iter().enumerate() {
                let value = match cell {
                    Some(x) => *x,
                    None => {
                        let prev = i.checked_sub(1).map(|j| line[j]);
                        let next = line.get(i + 1).copied();
                        let (d, h) = (i / HOURS, i % HOURS + 1);
                        let (value, method) = match (prev, next) {
                            (Some(Some(a)), Some(Some(b))) => {
                                (0.5 * (a + b), RepairMethod::NeighborMean)
                            }
                            (None, Some(Some(b))) => (b, RepairMethod::BoundaryNeighbor),
                            (Some(Some(a)), None) => (a, RepairMethod::BoundaryNeighbor),
                            _ => {
                                return Err(Error::Data(format!(
                                    "unrepairable gap in {var} around {} hour {h}: \
                                     consecutive hours missing",
                                    self.days[d]
                                )))
                            }
                        };
                        log.entries.push(RepairEntry {
                            date: self.days[d],
                            hour: h,
                            variable: var,
                            method,
                        });
                        value
                    }
                };
                if !value.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite {var} at {} hour {}",
                        self.days[i / HOURS],
                        i % HOURS + 1
                    )));
                }
                filled.push(value);
            }
            let rows = filled
                .chunks_exact(HOURS)
                .map(|c| c.try_into().expect("chunk of 24"))
                .collect();
            series.push((var, rows));
        }
        log.entries
            .sort_by_key(|e| (e.date, e.hour, e.variable));
        let panel = TimeSeriesPanel::new(self.market, self.days.clone(), series)?;
        Ok((panel, log))
    }
}

/// Reads a market CSV into raw, unrepaired cells.
pub fn read_raw<R: Read>(reader: R, market: Market) -> Result<RawPanel> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut date_col = None;
    let mut hour_col = None;
    let mut var_cols = Vec::new();
    for (i, name) in headers.iter().enumerate() {
        match name {
            "date" => date_col = Some(i),
            "hour" => hour_col = Some(i),
            other => {
                let var: Variable = other.parse()?;
                if !market.variables().contains(&var) {
                    return Err(Error::Schema(format!(
                        "variable column `{var}` is not part of the {market} variable set"
                    )));
                }
                var_cols.push((i, var));
            }
        }
    }
    let date_col = date_col.ok_or_else(|| Error::Schema("missing `date` column".into()))?;
    let hour_col = hour_col.ok_or_else(|| Error::Schema("missing `hour` column".into()))?;
    for var in market.variables() {
        if !var_cols.iter().any(|(_, v)| v == var) {
            return Err(Error::Schema(format!("missing variable column `{var}`")));
        }
    }

    let mut readings: BTreeMap<(NaiveDate, usize), Vec<Vec<Option<f64>>>> = BTreeMap::new();
    for (n, rec) in rdr.records().enumerate() {
        // header is line 1
        let line = n as u64 + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let parse_err = |message: String| Error::Parse { line, message };
        let date = NaiveDate::parse_from_str(&rec[date_col], "%Y-%m-%d")
            .map_err(|e| parse_err(format!("bad date `{}`: {e}", &rec[date_col])))?;
        let hour: usize = rec[hour_col]
            .parse()
            .map_err(|_| parse_err(format!("bad hour `{}`", &rec[hour_col])))?;
        if !(1..=HOURS).contains(&hour) {
            return Err(parse_err(format!("hour {hour} outside 1..=24")));
        }
        let mut values = Vec::with_capacity(var_cols.len());
        for &(i, var) in &var_cols {
            let field = &rec[i];
            if field.is_empty() || field.eq_ignore_ascii_case("nan") {
                values.push(None);
            } else {
                let x: f64 = field
                    .parse()
                    .map_err(|_| parse_err(format!("bad {var} value `{field}`")))?;
                if !x.is_finite() {
                    return Err(parse_err(format!("non-finite {var} value `{field}`")));
                }
                values.push(Some(x));
            }
        }
        readings.entry((date, hour)).or_default().push(values);
    }

    let (first, last) = match (readings.keys().next(), readings.keys().next_back()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(Error::Data("no data rows".into())),
    };
    let days: Vec<NaiveDate> = first.iter_days().take_while(|d| *d <= last).collect();
    let mut cells: BTreeMap<Variable, Vec<[Vec<f64>; HOURS]>> = market
        .variables()
        .iter()
        .map(|v| (*v, vec![Default::default(); days.len()]))
        .collect();
    let mut seen_day = vec![false; days.len()];
    for ((date, hour), rows) in readings {
        let d = (date - first).num_days() as usize;
        seen_day[d] = true;
        for row in rows {
            for (&(_, var), value) in var_cols.iter().zip(row) {
                if let Some(x) = value {
                    cells.get_mut(&var).expect("market variable")[d][hour - 1].push(x);
                }
            }
        }
    }
    if let Some(d) = seen_day.iter().position(|s| !s) {
        return Err(Error::Data(format!("calendar gap: no rows for {}", days[d])));
    }
    Ok(RawPanel {
        market,
        days,
        cells,
    })
}

/// Loads, validates and repairs a market CSV.
pub fn load_panel(path: impl AsRef<Path>, market: Market) -> Result<(TimeSeriesPanel, RepairLog)> {
    let file = std::fs::File::open(path.as_ref())?;
    read_panel(std::io::BufReader::new(file), market)
}

pub fn read_panel<R: Read>(reader: R, market: Market) -> Result<(TimeSeriesPanel, RepairLog)> {
    read_raw(reader, market)?.repair()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_for(days: &[&str], skip: &[(usize, usize)], double: &[(usize, usize, f64)]) -> String {
        let mut s = String::from("date,hour,price,load,solar,wind_on\n");
        for (d, day) in days.iter().enumerate() {
            for h in 1..=24 {
                if skip.contains(&(d, h)) {
                    continue;
                }
                let base = (d * 24 + h) as f64;
                s += &format!("{day},{h},{base},{},{},{}\n", base * 10.0, 0.0, 1.0);
                for (dd, hh, alt) in double {
                    if *dd == d && *hh == h {
                        s += &format!("{day},{h},{alt},{},{},{}\n", base * 10.0, 0.0, 1.0);
                    }
                }
            }
        }
        s
    }

    #[test]
    fn spring_gap_is_neighbor_mean() {
        let csv = csv_for(&["2020-03-28", "2020-03-29"], &[(1, 3)], &[]);
        let (panel, log) = read_panel(csv.as_bytes(), Market::Omie).unwrap();
        // neighbours are hour 2 (value 26) and hour 4 (value 28)
        assert_eq!(panel.value(Variable::Price, 1, 3), 27.0);
        assert_eq!(panel.value(Variable::Load, 1, 3), 270.0);
        assert_eq!(log.len(), 4);
        assert!(log
            .entries
            .iter()
            .all(|e| e.method == RepairMethod::NeighborMean && e.hour == 3));
    }

    #[test]
    fn autumn_double_is_mean_of_readings() {
        let csv = csv_for(&["2020-10-24", "2020-10-25"], &[], &[(1, 3, 100.0)]);
        let (panel, log) = read_panel(csv.as_bytes(), Market::Omie).unwrap();
        assert_eq!(panel.value(Variable::Price, 1, 3), 0.5 * (27.0 + 100.0));
        assert_eq!(panel.value(Variable::Load, 1, 3), 270.0);
        assert!(log
            .entries
            .iter()
            .all(|e| e.method == RepairMethod::DoubledMean));
    }

    #[test]
    fn complete_file_is_identity() {
        let csv = csv_for(&["2020-01-01", "2020-01-02"], &[], &[]);
        let (panel, log) = read_panel(csv.as_bytes(), Market::Omie).unwrap();
        assert!(log.is_empty());
        let mut out = Vec::new();
        panel.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), csv);
    }

    #[test]
    fn boundary_gap_uses_single_neighbor() {
        let csv = csv_for(&["2020-01-01"], &[(0, 1)], &[]);
        let (panel, log) = read_panel(csv.as_bytes(), Market::Omie).unwrap();
        assert_eq!(panel.value(Variable::Price, 0, 1), 2.0);
        assert_eq!(log.entries[0].method, RepairMethod::BoundaryNeighbor);
    }

    #[test]
    fn consecutive_gap_fails() {
        let csv = csv_for(&["2020-01-01"], &[(0, 5), (0, 6)], &[]);
        let err = read_panel(csv.as_bytes(), Market::Omie).unwrap_err();
        assert!(matches!(err, Error::Data(_)), "{err}");
    }

    #[test]
    fn tripled_hour_fails() {
        let csv = csv_for(
            &["2020-01-01"],
            &[],
            &[(0, 5, 1.0), (0, 5, 2.0)],
        );
        assert!(matches!(
            read_panel(csv.as_bytes(), Market::Omie),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let mut csv = csv_for(&["2020-01-01"], &[], &[]);
        csv = csv.replacen("2020-01-01,3,3", "2020-01-01,3,abc", 1);
        match read_panel(csv.as_bytes(), Market::Omie) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn hour_out_of_range_is_parse_error() {
        let csv = "date,hour,price,load,solar,wind_on\n2020-01-01,25,1,1,1,1\n";
        assert!(matches!(
            read_panel(csv.as_bytes(), Market::Omie),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn unknown_or_foreign_column_is_schema_error() {
        let csv = "date,hour,price,load,solar,wind_on,hydro\n";
        assert!(matches!(
            read_panel(csv.as_bytes(), Market::Omie),
            Err(Error::Schema(_))
        ));
        let csv = "date,hour,price,load,solar,wind_on,wind_off\n";
        assert!(matches!(
            read_panel(csv.as_bytes(), Market::Omie),
            Err(Error::Schema(_))
        ));
        let csv = "date,hour,price,load,solar,wind_on\n";
        assert!(matches!(
            read_panel(csv.as_bytes(), Market::Epex),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn missing_day_is_data_error() {
        let csv = csv_for(&["2020-01-01", "2020-01-03"], &[], &[]);
        assert!(matches!(
            read_panel(csv.as_bytes(), Market::Omie),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn repair_is_idempotent() {
        let csv = csv_for(
            &["2020-10-24", "2020-10-25", "2020-10-26"],
            &[(0, 7)],
            &[(1, 3, 50.0)],
        );
        let (panel, log) = read_panel(csv.as_bytes(), Market::Omie).unwrap();
        assert!(!log.is_empty());
        let (again, log2) = RawPanel::from_panel(&panel).repair().unwrap();
        assert_eq!(again, panel);
        assert!(log2.is_empty());
    }

    #[test]
    fn panel_rejects_wrong_variable_set() {
        let days = vec![NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()];
        let rows = vec![[0.0; 24]];
        let err = TimeSeriesPanel::new(
            Market::Epex,
            days,
            Market::Omie.variables().iter().map(|v| (*v, rows.clone())),
        );
        assert!(matches!(err, Err(Error::Schema(_))));
    }
}
