//! Choice of `lambda` (and optionally the shape parameter) by k-fold
//! cross-validation or BIC.
//!
//! Folds are contiguous blocks of rows (days). Cross-validation scores a
//! candidate by the mean over folds of the held-out mean squared error;
//! BIC is `T ln(RSS/T) + df ln T` on the full sample. Ties go to the larger
//! `lambda`, then to the smaller shape value.

use std::ops::Range;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::DesignMatrix;
use crate::penalties::{Family, PenaltySpec};
use crate::solver::{
    default_lambda_grid, fit_penalized_gram, geometric_grid, path_gram, FitResult, QuadProblem, SolverOptions,
    Standardizer,
};

pub const DEFAULT_FOLDS: usize = 7;
pub const DEFAULT_GRID_POINTS: usize = 50;
/// Smallest-to-largest `lambda` ratio of the automatic grid when `n >= p`.
pub const DEFAULT_GRID_RATIO: f64 = 1e-4;
/// Same when `n < p`; the path stops short of the interpolating regime.
pub const WIDE_GRID_RATIO: f64 = 1e-2;
/// Minimum rows per fold.
pub const MIN_ROWS_PER_FOLD: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMethod {
    Cv,
    Bic,
}

impl std::str::FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cv" => Ok(SelectionMethod::Cv),
            "bic" => Ok(SelectionMethod::Bic),
            other => Err(Error::Config(format!(
                "unknown selection method `{other}` (expected cv or bic)"
            ))),
        }
    }
}

impl std::fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SelectionMethod::Cv => "cv",
            SelectionMethod::Bic => "bic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeMode {
    Fixed(f64),
    /// Shape chosen by CV together with `lambda` from the family grid.
    JointCv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaGrid {
    /// Geometric grid from `top` (default: the data's `lambda_max`, capped
    /// for LQ and ridge) down to `ratio` times it; without a ratio,
    /// [`DEFAULT_GRID_RATIO`] or [`WIDE_GRID_RATIO`] depending on the shape
    /// of the design.
    Auto {
        points: usize,
        ratio: Option<f64>,
        top: Option<f64>,
    },
    Explicit(Vec<f64>),
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid::Auto {
            points: DEFAULT_GRID_POINTS,
            ratio: None,
            top: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPlan {
    pub method: SelectionMethod,
    pub folds: usize,
    /// Ignored for families without a shape parameter.
    pub shape_mode: ShapeMode,
    pub lambda_grid: LambdaGrid,
    /// Scale non-dummy columns to unit RMS before fitting.
    pub standardize: bool,
}

impl SelectionPlan {
    pub fn cv(shape_mode: ShapeMode) -> Self {
        Self {
            method: SelectionMethod::Cv,
            folds: DEFAULT_FOLDS,
            shape_mode,
            lambda_grid: LambdaGrid::default(),
            standardize: true,
        }
    }

    pub fn bic(shape: Option<f64>) -> Self {
        Self {
            method: SelectionMethod::Bic,
            folds: DEFAULT_FOLDS,
            shape_mode: ShapeMode::Fixed(shape.unwrap_or(f64::NAN)),
            lambda_grid: LambdaGrid::default(),
            standardize: true,
        }
    }

    pub fn with_grid(mut self, grid: LambdaGrid) -> Self {
        self.lambda_grid = grid;
        self
    }

    pub fn validate(&self, family: Family) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.method == SelectionMethod::Bic
            && family.has_shape()
            && self.shape_mode == ShapeMode::JointCv
        {
            return Err(Error::Config(
                "joint shape selection is only available with cross-validation".into(),
            ));
        }
        if let ShapeMode::Fixed(s) = self.shape_mode {
            if family.has_shape() && !s.is_finite() {
                return Err(Error::Config(format!("{family} needs a shape value")));
            }
        }
        match &self.lambda_grid {
            LambdaGrid::Auto { points, ratio, top } => {
                if *points == 0 || ratio.is_some_and(|r| !(r > 0.0 && r < 1.0)) {
                    return Err(Error::Config("bad automatic lambda grid".into()));
                }
                if let Some(top) = top {
                    if !(top.is_finite() && *top > 0.0) {
                        return Err(Error::Config(format!("largest lambda must be positive, got {top}")));
                    }
                    if let Some(cap) = family.lambda_cap() {
                        if *top > cap {
                            return Err(Error::Config(format!(
                                "largest lambda {top} exceeds the {family} cap of {cap}"
                            )));
                        }
                    }
                }
            }
            LambdaGrid::Explicit(g) => {
                if g.is_empty() || g.windows(2).any(|w| !(w[0] > w[1])) {
                    return Err(Error::Config(
                        "explicit lambda grid must be nonempty and strictly decreasing".into(),
                    ));
                }
                if let (Some(cap), Some(top)) = (family.lambda_cap(), g.first()) {
                    if *top > cap {
                        return Err(Error::Config(format!(
                            "largest lambda {top} exceeds the {family} cap of {cap}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn shapes(&self, family: Family) -> Vec<Option<f64>> {
        if !family.has_shape() {
            return vec![None];
        }
        match self.shape_mode {
            ShapeMode::Fixed(s) => vec![Some(s)],
            ShapeMode::JointCv => family.shape_grid().iter().map(|s| Some(*s)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub lambda: f64,
    pub shape: Option<f64>,
    pub score: f64,
}

/// Outcome of a selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Chosen penalty; `lambda` refers to the (possibly standardized) design.
    pub spec: PenaltySpec,
    /// Fit on all rows, coefficients in original column units.
    pub fit: FitResult,
    /// CV score or BIC of the chosen candidate.
    pub score: f64,
    pub trace: Vec<TraceEntry>,
}

impl Selection {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.fit.predict(row)
    }
}

struct Fold {
    test: Range<usize>,
    train: QuadProblem,
}

/// A design prepared for repeated fitting: scaled regressors, Gram
/// matrices of the full sample and of every training fold, and a cached
/// pseudo-inverse for OLS. [`PreparedProblem::with_response`] swaps the
/// response while sharing everything that depends on `X` only.
pub struct PreparedProblem {
    scaler: Standardizer,
    x: Arc<DMatrix<f64>>,
    y: DVector<f64>,
    full: QuadProblem,
    folds: Vec<Fold>,
    fold_error: Option<String>,
    pinv: Arc<OnceLock<std::result::Result<DMatrix<f64>, String>>>,
}

impl PreparedProblem {
    pub fn new(dm: &DesignMatrix, folds: usize, standardize: bool) -> Result<Self> {
        let scaler = if standardize {
            Standardizer::fit(dm)
        } else {
            Standardizer::identity(dm.n_cols())
        };
        let scaled = scaler.apply(dm);
        if scaled.x.iter().chain(scaled.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("design matrix contains non-finite values".into()));
        }
        if dm.n_rows() == 0 || dm.n_cols() == 0 {
            return Err(Error::Numeric("empty design matrix".into()));
        }
        let x = Arc::new(scaled.x);
        let y = scaled.y;
        let full = QuadProblem::new(&x, &y);
        let (folds, fold_error) = match make_folds(dm, folds) {
            Ok(ranges) => {
                let folds = ranges
                    .into_iter()
                    .map(|test| {
                        let xt = x.rows(test.start, test.len());
                        let yt = y.rows(test.start, test.len());
                        let xtx = full.xtx() - xt.tr_mul(&xt);
                        let xty = full.xty() - xt.tr_mul(&yt);
                        let yty = y.dot(&y) - yt.dot(&yt);
                        let train = QuadProblem::from_gram(xtx, xty, yty, x.nrows() - test.len());
                        Fold { test, train }
                    })
                    .collect();
                (folds, None)
            }
            Err(e) => (Vec::new(), Some(e.to_string())),
        };
        Ok(Self {
            scaler,
            x,
            y,
            full,
            folds,
            fold_error,
            pinv: Arc::new(OnceLock::new()),
        })
    }

    /// Same regressors with a new (unscaled) response.
    pub fn with_response(&self, y: &DVector<f64>) -> Self {
        let full = self.full.with_response(&self.x, y);
        let folds = self
            .folds
            .iter()
            .map(|f| {
                let xt = self.x.rows(f.test.start, f.test.len());
                let yt = y.rows(f.test.start, f.test.len());
                let xty = full.xty() - xt.tr_mul(&yt);
                let yty = y.dot(y) - yt.dot(&yt);
                let train = QuadProblem::from_gram(
                    f.train.xtx().clone(),
                    xty,
                    yty,
                    f.train.n_rows(),
                );
                Fold {
                    test: f.test.clone(),
                    train,
                }
            })
            .collect();
        Self {
            scaler: self.scaler.clone(),
            x: Arc::clone(&self.x),
            y: y.clone(),
            full,
            folds,
            fold_error: self.fold_error.clone(),
            pinv: Arc::clone(&self.pinv),
        }
    }

    pub fn scaler(&self) -> &Standardizer {
        &self.scaler
    }

    pub fn full(&self) -> &QuadProblem {
        &self.full
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    /// Minimum-norm OLS coefficients on the scaled design.
    pub fn ols_scaled(&self) -> Result<Vec<f64>> {
        let pinv = self.pinv.get_or_init(|| {
            let x = (*self.x).clone();
            let svd = x.svd(true, true);
            let smax = svd.singular_values.max();
            let eps = smax * 1e-12 * self.x.nrows().max(self.x.ncols()) as f64;
            svd.pseudo_inverse(eps).map_err(|e| e.to_string())
        });
        let pinv = pinv
            .as_ref()
            .map_err(|e| Error::Numeric(format!("pseudo-inverse failed: {e}")))?;
        Ok((pinv * &self.y).iter().copied().collect())
    }

    fn rss_scaled(&self, beta: &[f64]) -> f64 {
        let b = DVector::from_column_slice(beta);
        (&self.y - &*self.x * b).norm_squared()
    }

    fn test_sse(&self, fold: &Fold, beta: &[f64]) -> f64 {
        let b = DVector::from_column_slice(beta);
        let xt = self.x.rows(fold.test.start, fold.test.len());
        let yt = self.y.rows(fold.test.start, fold.test.len());
        (yt - xt * b).norm_squared()
    }

    /// Penalty template for `family` and `shape`; the adaptive LASSO takes
    /// its weights from OLS on the full sample.
    pub fn template(&self, family: Family, shape: Option<f64>) -> Result<PenaltySpec> {
        match family {
            Family::ALasso => {
                let q = shape.ok_or_else(|| Error::Config("alasso needs q".into()))?;
                PenaltySpec::adaptive(0.0, q, &self.ols_scaled()?)
            }
            _ => PenaltySpec::new(family, 0.0, shape),
        }
    }

    fn grid(&self, template: &PenaltySpec, grid: &LambdaGrid) -> Vec<f64> {
        match grid {
            LambdaGrid::Auto { points, ratio, top } => {
                let ratio = ratio.unwrap_or(if self.full.n_rows() >= self.full.n_cols() {
                    DEFAULT_GRID_RATIO
                } else {
                    WIDE_GRID_RATIO
                });
                match top {
                    Some(top) => geometric_grid(*top, top * ratio, *points),
                    None => default_lambda_grid(&self.full, template, *points, ratio),
                }
            }
            LambdaGrid::Explicit(g) => g.clone(),
        }
    }

    /// Converts a fit on the scaled design to original units.
    fn unscale(&self, mut fit: FitResult) -> FitResult {
        fit.beta = self.scaler.unscale_beta(&fit.beta);
        fit
    }

    /// OLS fit in original units.
    pub fn fit_ols(&self) -> Result<FitResult> {
        let beta = self.ols_scaled()?;
        let rss = self.rss_scaled(&beta);
        let nnz = beta.iter().filter(|b| **b != 0.0).count();
        Ok(self.unscale(FitResult {
            objective: rss,
            rss,
            nnz,
            df: nnz as f64,
            iterations: 0,
            converged: true,
            trace: Vec::new(),
            beta,
        }))
    }

    /// Penalised fit at a given spec on all rows, in original units.
    pub fn fit(&self, spec: &PenaltySpec) -> Result<FitResult> {
        if spec.family() == Family::Ols {
            return self.fit_ols();
        }
        let mut fit = fit_penalized_gram(&self.full, spec, None, &SolverOptions::default())?;
        fit.rss = self.rss_scaled(&fit.beta);
        fit.objective = fit.rss + spec.total(&fit.beta);
        Ok(self.unscale(fit))
    }

    /// Fits down the grid to position `idx` (warm starts) and keeps that fit.
    fn refit(&self, template: &PenaltySpec, grid: &[f64], idx: usize) -> Result<(PenaltySpec, FitResult)> {
        let path = path_gram(&self.full, template, &grid[..=idx], &SolverOptions::default())?;
        let spec = template.with_lambda(grid[idx])?;
        let mut fit = path.fits.into_iter().next_back().expect("nonempty path");
        fit.rss = self.rss_scaled(&fit.beta);
        fit.objective = fit.rss + spec.total(&fit.beta);
        Ok((spec, self.unscale(fit)))
    }
}

/// Contiguous blocks of near-equal size covering `0..n`.
pub fn fold_ranges(n: usize, folds: usize) -> Vec<Range<usize>> {
    let base = n / folds;
    let extra = n % folds;
    let mut start = 0;
    (0..folds)
        .map(|k| {
            let len = base + usize::from(k < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

fn make_folds(dm: &DesignMatrix, folds: usize) -> Result<Vec<Range<usize>>> {
    let n = dm.n_rows();
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds * MIN_ROWS_PER_FOLD {
        return Err(Error::Data(format!(
            "{n} rows are too few for {folds} folds (need {})",
            folds * MIN_ROWS_PER_FOLD
        )));
    }
    let ranges = fold_ranges(n, folds);
    for j in dm.dummy_columns() {
        let col = dm.x.column(j);
        for (k, r) in ranges.iter().enumerate() {
            let present = (0..n).filter(|i| !r.contains(i)).any(|i| col[i] != 0.0);
            if !present {
                return Err(Error::Data(format!(
                    "fold {}: training rows never activate dummy `{}`",
                    k + 1,
                    dm.labels[j]
                )));
            }
        }
    }
    Ok(ranges)
}

/// Candidate ordering: lower score, then larger `lambda`, then smaller shape.
fn better(score: f64, lam: f64, shape: Option<f64>, best: &(f64, f64, Option<f64>)) -> bool {
    let (bs, bl, bsh) = *best;
    if score != bs {
        return score < bs;
    }
    if lam != bl {
        return lam > bl;
    }
    shape.unwrap_or(0.0) < bsh.unwrap_or(0.0)
}

/// Cross-validated selection on a prepared problem.
pub fn cv_prepared(prep: &PreparedProblem, family: Family, plan: &SelectionPlan) -> Result<Selection> {
    plan.validate(family)?;
    if let Some(e) = &prep.fold_error {
        return Err(Error::Data(format!("fold construction failed: {e}")));
    }
    if prep.folds.len() != plan.folds {
        return Err(Error::Config(format!(
            "problem prepared with {} folds, plan asks for {}",
            prep.folds.len(),
            plan.folds
        )));
    }
    if family == Family::Ols {
        let fit = prep.fit_ols()?;
        return Ok(Selection {
            spec: PenaltySpec::ols(),
            fit,
            score: f64::NAN,
            trace: Vec::new(),
        });
    }
    let opts = SolverOptions::default();
    let mut trace = Vec::new();
    let mut best: Option<((f64, f64, Option<f64>), PenaltySpec, Vec<f64>, usize)> = None;
    for shape in plan.shapes(family) {
        let template = prep.template(family, shape)?;
        let grid = prep.grid(&template, &plan.lambda_grid);
        let mut mse = vec![0.0; grid.len()];
        for fold in &prep.folds {
            let path = path_gram(&fold.train, &template, &grid, &opts)?;
            for (m, fit) in mse.iter_mut().zip(&path.fits) {
                *m += prep.test_sse(fold, &fit.beta) / fold.test.len() as f64;
            }
        }
        for (i, (&lam, m)) in grid.iter().zip(&mse).enumerate() {
            let score = m / prep.folds.len() as f64;
            trace.push(TraceEntry {
                lambda: lam,
                shape,
                score,
            });
            let take = match &best {
                None => true,
                Some((key, ..)) => better(score, lam, shape, key),
            };
            if take {
                best = Some(((score, lam, shape), template.clone(), grid.clone(), i));
            }
        }
    }
    let ((score, _, _), template, grid, idx) = best.expect("nonempty grid");
    let (spec, fit) = prep.refit(&template, &grid, idx)?;
    Ok(Selection {
        spec,
        fit,
        score,
        trace,
    })
}

/// `T ln(RSS/T) + df ln T`; undefined when `RSS = 0`.
pub fn bic_score(rss: f64, df: f64, n: usize) -> Result<f64> {
    if !(rss > 0.0) {
        return Err(Error::Numeric(format!("BIC undefined for RSS = {rss}")));
    }
    let t = n as f64;
    Ok(t * (rss / t).ln() + df * t.ln())
}

/// BIC selection on a prepared problem. If some candidate fits the data
/// exactly (RSS = 0) the smallest `lambda` of the grid is returned.
pub fn bic_prepared(prep: &PreparedProblem, family: Family, plan: &SelectionPlan) -> Result<Selection> {
    plan.validate(family)?;
    if family == Family::Ols {
        let fit = prep.fit_ols()?;
        let score = bic_score(fit.rss, fit.df, prep.n_rows()).unwrap_or(f64::NEG_INFINITY);
        return Ok(Selection {
            spec: PenaltySpec::ols(),
            fit,
            score,
            trace: Vec::new(),
        });
    }
    let shape = plan.shapes(family)[0];
    let template = prep.template(family, shape)?;
    let grid = prep.grid(&template, &plan.lambda_grid);
    let path = path_gram(&prep.full, &template, &grid, &SolverOptions::default())?;
    let n = prep.n_rows();
    let mut trace = Vec::with_capacity(grid.len());
    let mut best: Option<((f64, f64, Option<f64>), usize)> = None;
    let mut degenerate = false;
    for (i, (&lam, fit)) in grid.iter().zip(&path.fits).enumerate() {
        let rss = prep.rss_scaled(&fit.beta);
        let score = match bic_score(rss, fit.df, n) {
            Ok(s) => s,
            Err(_) => {
                degenerate = true;
                f64::NEG_INFINITY
            }
        };
        trace.push(TraceEntry {
            lambda: lam,
            shape,
            score,
        });
        let take = match &best {
            None => true,
            Some((key, _)) => better(score, lam, shape, key),
        };
        if take {
            best = Some(((score, lam, shape), i));
        }
    }
    let ((score, _, _), idx) = best.expect("nonempty grid");
    let idx = if degenerate { grid.len() - 1 } else { idx };
    let spec = template.with_lambda(grid[idx])?;
    let mut fit = path.fits[idx].clone();
    fit.rss = prep.rss_scaled(&fit.beta);
    fit.objective = fit.rss + spec.total(&fit.beta);
    Ok(Selection {
        spec,
        fit: prep.unscale(fit),
        score,
        trace,
    })
}

pub fn select_prepared(prep: &PreparedProblem, family: Family, plan: &SelectionPlan) -> Result<Selection> {
    match plan.method {
        SelectionMethod::Cv => cv_prepared(prep, family, plan),
        SelectionMethod::Bic => bic_prepared(prep, family, plan),
    }
}

pub fn select_cv(dm: &DesignMatrix, family: Family, plan: &SelectionPlan) -> Result<Selection> {
    let prep = PreparedProblem::new(dm, plan.folds, plan.standardize)?;
    cv_prepared(&prep, family, plan)
}

pub fn select_bic(dm: &DesignMatrix, family: Family, plan: &SelectionPlan) -> Result<Selection> {
    let prep = PreparedProblem::new(dm, plan.folds, plan.standardize)?;
    bic_prepared(&prep, family, plan)
}

/// Writes `lambda,shape,score` rows.
pub fn write_trace_csv<W: std::io::Write>(trace: &[TraceEntry], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lambda", "shape", "score"])?;
    for t in trace {
        w.write_record([
            t.lambda.to_string(),
            t.shape.map(|s| s.to_string()).unwrap_or_default(),
            t.score.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
