use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use penreg_core::backtest::{self, ForecastRecord};
use penreg_core::ingest::read_panel;
use penreg_core::metrics::{self, ComparisonRow};
use penreg_core::penalties::penalty_curve;
use penreg_core::synth::{self, SynthConfig};
use penreg_core::{Error, Family, Market, PenaltySpec, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{read_config_file, Overrides, RunConfig, ShapeSetting};
use crate::{CompareArgs, CurveArgs, RunArgs, SynthArgs};

pub const MANIFEST: &str = "manifest.json";
pub const FORECASTS: &str = "forecasts.csv";
pub const SCORE: &str = "score.json";
pub const TRACE: &str = "selection_trace.csv";
pub const REPAIRS: &str = "repairs.jsonl";
pub const RUN_CONF: &str = "run.conf";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub data_sha256: String,
    pub panel_days: (NaiveDate, NaiveDate),
    pub forecast_days: (NaiveDate, NaiveDate),
    pub repairs: usize,
    pub records: usize,
    /// sha256 of every other artifact in the run directory.
    pub outputs: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn overrides(args: &RunArgs) -> Overrides {
    let mut o = Overrides::default();
    o.set("data", args.data.clone());
    o.set("market", args.market.clone());
    o.set("model", args.model.clone());
    o.set("penalty", args.penalty.clone());
    o.set("select", args.select.clone());
    o.set("shape", args.shape.clone());
    o.set("window", args.window.clone());
    o.set("from", args.from.clone());
    o.set("to", args.to.clone());
    o.set("out", args.out.clone());
    o.set("jobs", args.jobs.clone());
    o.set("seed", args.seed.clone());
    o.set("lambda-max", args.lambda_max.clone());
    o.set("reselect-every", args.reselect_every.clone());
    o.set("ecdf", args.ecdf.clone());
    o.set("folds", args.folds.clone());
    o
}

pub fn run(args: &RunArgs) -> Result<()> {
    let file = match &args.config {
        Some(p) => read_config_file(p)?,
        None => BTreeMap::new(),
    };
    let cfg = RunConfig::resolve(&file, &overrides(args))?;
    let bytes = fs::read(&cfg.data)
        .map_err(|e| Error::Data(format!("cannot read {}: {e}", cfg.data.display())))?;
    let (panel, repairs) = read_panel(&bytes[..], cfg.market)?;
    let bt = cfg.backtest(&panel)?;
    let out = backtest::run_backtest_detailed(&panel, &bt)?;
    let score = metrics::score(&out.records)?;

    // Everything is rendered in memory first so a failed run leaves no
    // partial artifacts behind.
    let mut files: Vec<(&str, Vec<u8>)> = Vec::new();
    let mut buf = Vec::new();
    backtest::write_records_csv(&out.records, &mut buf)?;
    files.push((FORECASTS, buf));
    files.push((SCORE, serde_json::to_vec_pretty(&score)?));
    let mut buf = Vec::new();
    backtest::write_traces_csv(&out.traces, &mut buf)?;
    files.push((TRACE, buf));
    let mut buf = Vec::new();
    repairs.write_jsonl(&mut buf)?;
    files.push((REPAIRS, buf));
    files.push((RUN_CONF, cfg.to_config_text().into_bytes()));

    let manifest = Manifest {
        tool: "penreg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        data_sha256: sha256_hex(&bytes),
        panel_days: (panel.days()[0], panel.days()[panel.num_days() - 1]),
        forecast_days: (bt.first_forecast_day, bt.last_forecast_day),
        repairs: repairs.len(),
        records: out.records.len(),
        outputs: files.iter().map(|(n, b)| (n.to_string(), sha256_hex(b))).collect(),
    };
    files.push((MANIFEST, serde_json::to_vec_pretty(&manifest)?));

    fs::create_dir_all(&cfg.out)?;
    for (name, bytes) in &files {
        fs::write(cfg.out.join(name), bytes)?;
    }
    eprintln!(
        "{} {} {}: {} days, RMSE {:.4} -> {}",
        cfg.market,
        cfg.model,
        cfg.penalty,
        score.n_days,
        score.rmse,
        cfg.out.display()
    );
    Ok(())
}

struct FinishedRun {
    dir: PathBuf,
    manifest: Manifest,
    records: Vec<ForecastRecord>,
}

fn load_run(dir: &Path) -> Result<FinishedRun> {
    let text = fs::read(dir.join(MANIFEST))
        .map_err(|e| Error::Data(format!("{}: cannot read {MANIFEST}: {e}", dir.display())))?;
    let manifest: Manifest = serde_json::from_slice(&text)?;
    let file = fs::File::open(dir.join(FORECASTS))
        .map_err(|e| Error::Data(format!("{}: cannot read {FORECASTS}: {e}", dir.display())))?;
    let records = backtest::read_records_csv(file)?;
    Ok(FinishedRun {
        dir: dir.to_path_buf(),
        manifest,
        records,
    })
}

/// A path is a run directory if it holds a manifest; otherwise its
/// immediate subdirectories are searched.
fn collect_runs(paths: &[PathBuf]) -> Result<Vec<FinishedRun>> {
    let mut runs = Vec::new();
    for p in paths {
        if p.join(MANIFEST).is_file() {
            runs.push(load_run(p)?);
            continue;
        }
        let entries = fs::read_dir(p)
            .map_err(|e| Error::Data(format!("{}: {e}", p.display())))?;
        let mut dirs: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| d.join(MANIFEST).is_file())
            .collect();
        if dirs.is_empty() {
            return Err(Error::Data(format!("{} holds no runs", p.display())));
        }
        dirs.sort();
        for d in dirs {
            runs.push(load_run(&d)?);
        }
    }
    Ok(runs)
}

fn shape_label(s: ShapeSetting) -> String {
    match s {
        ShapeSetting::None => "-".into(),
        ShapeSetting::Fixed(v) => v.to_string(),
        ShapeSetting::JointCv => "JointCV".into(),
    }
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let runs = collect_runs(&args.runs)?;
    if runs.len() < 2 {
        return Err(Error::Data("compare needs at least two runs".into()));
    }
    let mut rows = Vec::with_capacity(runs.len());
    for run in &runs {
        let cfg = &run.manifest.config;
        let baseline = runs
            .iter()
            .find(|b| {
                b.manifest.config.penalty == Family::Ols
                    && b.manifest.config.market == cfg.market
                    && b.manifest.config.model == cfg.model
            })
            .ok_or_else(|| {
                Error::Data(format!("no OLS run for {} {} among the inputs", cfg.market, cfg.model))
            })?;
        let report = if cfg.penalty == Family::Ols {
            metrics::score(&run.records)?
        } else {
            metrics::score_against(&run.records, &baseline.records).map_err(|e| {
                Error::Data(format!(
                    "{} vs baseline {}: {e}",
                    run.dir.display(),
                    baseline.dir.display()
                ))
            })?
        };
        rows.push(ComparisonRow {
            market: cfg.market.to_string(),
            model: cfg.model.to_string(),
            family: cfg.penalty.to_string(),
            selection: if cfg.penalty == Family::Ols { "-".into() } else { cfg.select.to_string() },
            shape: shape_label(cfg.shape_mode),
            rmse: report.rmse,
            rrmse: report.rrmse_vs_baseline,
        });
    }
    metrics::sort_comparison(&mut rows);
    let mut buf = Vec::new();
    if args.format == "json" {
        serde_json::to_writer_pretty(&mut buf, &rows)?;
        buf.push(b'\n');
    } else {
        metrics::write_comparison_csv(&rows, &mut buf)?;
    }
    emit(args.out.as_deref(), &buf)
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().lock().write_all(bytes)?,
    }
    Ok(())
}

pub fn penalty_curves(args: &CurveArgs) -> Result<()> {
    if !(args.beta_max > 0.0 && args.beta_max.is_finite()) {
        return Err(Error::Config("--beta-max must be positive".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["family", "lambda", "shape", "beta", "penalty"])?;
    for family in Family::PENALIZED {
        let shapes: Vec<Option<f64>> = if family.has_shape() {
            family.shape_grid().iter().map(|s| Some(*s)).collect()
        } else {
            vec![None]
        };
        for shape in shapes {
            let spec = match (family, shape) {
                (Family::ALasso, Some(q)) => PenaltySpec::adaptive(args.lambda, q, &[1.0])?,
                _ => PenaltySpec::new(family, args.lambda, shape)?,
            };
            for (b, g) in penalty_curve(&spec, args.beta_max, args.points) {
                w.write_record([
                    family.to_string(),
                    args.lambda.to_string(),
                    shape.map(|s| s.to_string()).unwrap_or_default(),
                    b.to_string(),
                    g.to_string(),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    emit(args.out.as_deref(), &bytes)
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let market: Market = args.market.parse()?;
    let start: NaiveDate = args
        .start
        .parse()
        .map_err(|_| Error::Config(format!("bad --start date `{}`", args.start)))?;
    let mut cfg = SynthConfig::new(market, start, args.days, args.seed);
    cfg.noise_sd = args.noise;
    let panel = synth::generate(&cfg)?;
    let mut buf = Vec::new();
    synth::write_market_csv(&panel, &mut buf, !args.no_dst)?;
    emit(args.out.as_deref(), &buf)
}
