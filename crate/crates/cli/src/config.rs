//! Run configuration: flags, flat `key = value` files, and their merge.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use penreg_core::backtest::{BacktestConfig, DEFAULT_WINDOW_DAYS};
use penreg_core::selection::{LambdaGrid, SelectionMethod, SelectionPlan, ShapeMode, DEFAULT_FOLDS, DEFAULT_GRID_POINTS};
use penreg_core::transform::EcdfMode;
use penreg_core::{Error, Family, Market, ModelKind, Result, TimeSeriesPanel};
use serde::{Deserialize, Serialize};

/// How the shape parameter of a two-parameter family is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ShapeSetting {
    None,
    Fixed(f64),
    #[serde(rename = "JointCV")]
    JointCv,
}

impl FromStr for ShapeSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cv" | "jointcv" => Ok(ShapeSetting::JointCv),
            "" | "none" => Ok(ShapeSetting::None),
            v => v
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(ShapeSetting::Fixed)
                .ok_or_else(|| Error::Config(format!("shape must be a number or `cv`, got `{s}`"))),
        }
    }
}

impl fmt::Display for ShapeSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeSetting::None => f.write_str("none"),
            ShapeSetting::Fixed(v) => write!(f, "{v}"),
            ShapeSetting::JointCv => f.write_str("cv"),
        }
    }
}

fn parse_ecdf(s: &str) -> Result<EcdfMode> {
    match s.trim().to_ascii_lowercase().as_str() {
        "pooled" => Ok(EcdfMode::Pooled),
        "per-hour" | "per_hour" | "hourly" => Ok(EcdfMode::PerHour),
        other => Err(Error::Config(format!("ecdf must be `pooled` or `per-hour`, got `{other}`"))),
    }
}

fn ecdf_name(mode: EcdfMode) -> &'static str {
    match mode {
        EcdfMode::Pooled => "pooled",
        EcdfMode::PerHour => "per-hour",
    }
}

/// Fully resolved configuration of a `run`; serialised into the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub market: Market,
    pub model: ModelKind,
    pub penalty: Family,
    pub select: SelectionMethod,
    pub shape_mode: ShapeSetting,
    pub window: usize,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub out: PathBuf,
    pub jobs: usize,
    pub seed: u64,
    pub lambda_max: Option<f64>,
    pub reselect_every: usize,
    pub ecdf: EcdfMode,
    pub folds: usize,
}

/// Keys accepted in config files; each matches a `run` flag.
pub const KEYS: [&str; 16] = [
    "data",
    "market",
    "model",
    "penalty",
    "select",
    "shape",
    "window",
    "from",
    "to",
    "out",
    "jobs",
    "seed",
    "lambda-max",
    "reselect-every",
    "ecdf",
    "folds",
];

/// Reads a flat `key = value` file. `#` starts a comment; underscores in
/// keys are accepted for dashes.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("config line {}: unknown key `{}`", i + 1, k.trim())));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(out)
}

/// Flag values as given on the command line (all optional).
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub values: BTreeMap<String, String>,
}

impl Overrides {
    pub fn set(&mut self, key: &str, value: Option<String>) {
        if let Some(v) = value {
            self.values.insert(key.to_string(), v);
        }
    }
}

fn parse<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
}

fn default_jobs() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(24)
}

impl RunConfig {
    /// Flags win over the config file, which wins over defaults.
    pub fn resolve(file: &BTreeMap<String, String>, flags: &Overrides) -> Result<Self> {
        let get = |k: &str| flags.values.get(k).or_else(|| file.get(k)).map(String::as_str);
        let data = get("data")
            .map(PathBuf::from)
            .ok_or_else(|| Error::Config("no input data: pass --data or set `data` in the config file".into()))?;
        let penalty: Family = get("penalty").map(|v| v.parse()).transpose()?.unwrap_or(Family::Lasso);
        let select: SelectionMethod = get("select").map(|v| v.parse()).transpose()?.unwrap_or(SelectionMethod::Cv);
        let shape_mode = match get("shape").map(ShapeSetting::from_str).transpose()? {
            Some(s) if !penalty.has_shape() && s != ShapeSetting::None => {
                return Err(Error::Config(format!("{penalty} takes no shape parameter")))
            }
            _ if !penalty.has_shape() => ShapeSetting::None,
            Some(s) => s,
            None if select == SelectionMethod::Cv => ShapeSetting::JointCv,
            None => {
                return Err(Error::Config(format!(
                    "{penalty} needs --shape <value> with BIC selection (one of {:?})",
                    penalty.shape_grid()
                )))
            }
        };
        if penalty.has_shape() && shape_mode == ShapeSetting::None {
            return Err(Error::Config(format!("{penalty} needs a shape value or `cv`")));
        }
        let cfg = RunConfig {
            data,
            market: get("market").map(|v| v.parse()).transpose()?.unwrap_or(Market::Epex),
            model: get("model").map(|v| v.parse()).transpose()?.unwrap_or(ModelKind::Farx),
            penalty,
            select,
            shape_mode,
            window: get("window").map(|v| parse("window", v)).transpose()?.unwrap_or(DEFAULT_WINDOW_DAYS),
            from: get("from").map(|v| parse("from", v)).transpose()?,
            to: get("to").map(|v| parse("to", v)).transpose()?,
            out: get("out").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("penreg-out")),
            jobs: get("jobs").map(|v| parse("jobs", v)).transpose()?.unwrap_or_else(default_jobs),
            seed: get("seed").map(|v| parse("seed", v)).transpose()?.unwrap_or(0),
            lambda_max: get("lambda-max").map(|v| parse("lambda-max", v)).transpose()?,
            reselect_every: get("reselect-every").map(|v| parse("reselect-every", v)).transpose()?.unwrap_or(1),
            ecdf: get("ecdf").map(parse_ecdf).transpose()?.unwrap_or_default(),
            folds: get("folds").map(|v| parse("folds", v)).transpose()?.unwrap_or(DEFAULT_FOLDS),
        };
        cfg.selection_plan()?.validate(cfg.penalty)?;
        if cfg.jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn selection_plan(&self) -> Result<SelectionPlan> {
        let shape_mode = match self.shape_mode {
            ShapeSetting::JointCv => ShapeMode::JointCv,
            ShapeSetting::Fixed(v) => ShapeMode::Fixed(v),
            ShapeSetting::None => ShapeMode::Fixed(f64::NAN),
        };
        if let ShapeSetting::Fixed(v) = self.shape_mode {
            if !self.penalty.shape_grid().contains(&v) {
                return Err(Error::Config(format!(
                    "{} shape must be one of {:?}, got {v}",
                    self.penalty,
                    self.penalty.shape_grid()
                )));
            }
        }
        Ok(SelectionPlan {
            method: self.select,
            folds: self.folds,
            shape_mode,
            lambda_grid: LambdaGrid::Auto {
                points: DEFAULT_GRID_POINTS,
                ratio: None,
                top: self.lambda_max,
            },
            standardize: true,
        })
    }

    /// Backtest settings; an open forecast range starts at the first day with
    /// a full window of history and ends at the last day of the panel.
    pub fn backtest(&self, panel: &TimeSeriesPanel) -> Result<BacktestConfig> {
        let days = panel.days();
        let from = match self.from {
            Some(d) => d,
            None => *days.get(self.window).ok_or_else(|| {
                Error::Data(format!(
                    "panel has {} days, not enough for a {}-day window",
                    days.len(),
                    self.window
                ))
            })?,
        };
        let to = self.to.unwrap_or(days[days.len() - 1]);
        let mut cfg = BacktestConfig::new(self.market, self.model, self.penalty, self.selection_plan()?, from, to)
            .with_window(self.window);
        cfg.ecdf_mode = self.ecdf;
        cfg.reselect_every = self.reselect_every;
        cfg.jobs = Some(self.jobs);
        Ok(cfg)
    }

    /// The configuration as a config file that reproduces this run.
    pub fn to_config_text(&self) -> String {
        let mut lines = vec![
            format!("data = {}", self.data.display()),
            format!("market = {}", self.market),
            format!("model = {}", self.model),
            format!("penalty = {}", self.penalty),
            format!("select = {}", self.select),
        ];
        if self.shape_mode != ShapeSetting::None {
            lines.push(format!("shape = {}", self.shape_mode));
        }
        lines.push(format!("window = {}", self.window));
        if let Some(d) = self.from {
            lines.push(format!("from = {d}"));
        }
        if let Some(d) = self.to {
            lines.push(format!("to = {d}"));
        }
        lines.push(format!("out = {}", self.out.display()));
        lines.push(format!("jobs = {}", self.jobs));
        lines.push(format!("seed = {}", self.seed));
        if let Some(l) = self.lambda_max {
            lines.push(format!("lambda-max = {l}"));
        }
        lines.push(format!("reselect-every = {}", self.reselect_every));
        lines.push(format!("ecdf = {}", ecdf_name(self.ecdf)));
        lines.push(format!("folds = {}", self.folds));
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> Overrides {
        let mut o = Overrides::default();
        for (k, v) in pairs {
            o.set(k, Some(v.to_string()));
        }
        o
    }

    #[test]
    fn flags_override_file() {
        let file = parse_config("data = a.csv\npenalty = ridge # comment\nwindow=100\n").unwrap();
        let cfg = RunConfig::resolve(&file, &flags(&[("window", "300")])).unwrap();
        assert_eq!(cfg.penalty, Family::Ridge);
        assert_eq!(cfg.window, 300);
        assert_eq!(cfg.data, PathBuf::from("a.csv"));
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(parse_config("data = x\nwindoww = 3\n").is_err());
        assert!(parse_config("just text\n").is_err());
    }

    #[test]
    fn shape_defaults() {
        let file = parse_config("data = a.csv\npenalty = en\n").unwrap();
        let cfg = RunConfig::resolve(&file, &Overrides::default()).unwrap();
        assert_eq!(cfg.shape_mode, ShapeSetting::JointCv);
        let err = RunConfig::resolve(&file, &flags(&[("select", "bic")])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let err = RunConfig::resolve(&file, &flags(&[("shape", "0.3")])).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        let cfg = RunConfig::resolve(&file, &flags(&[("select", "bic"), ("shape", "0.25")])).unwrap();
        assert_eq!(cfg.shape_mode, ShapeSetting::Fixed(0.25));
        let lasso = parse_config("data = a.csv\npenalty = lasso\nshape = 0.5\n").unwrap();
        assert!(RunConfig::resolve(&lasso, &Overrides::default()).is_err());
    }

    #[test]
    fn config_text_round_trips() {
        let file = parse_config("data = a.csv\npenalty = scad\nshape = 20\nlambda-max = 1.5\nfrom = 2020-01-03\n").unwrap();
        let cfg = RunConfig::resolve(&file, &Overrides::default()).unwrap();
        let again = RunConfig::resolve(&parse_config(&cfg.to_config_text()).unwrap(), &Overrides::default()).unwrap();
        assert_eq!(cfg, again);
    }
}
