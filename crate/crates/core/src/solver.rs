//! Penalised least squares by cyclic coordinate descent.
//!
//! The objective is the unhalved residual sum of squares plus a separable
//! penalty, `||y - X b||^2 + sum_j g(b_j)`. Each coordinate update is the
//! exact scalar proximal map from [`crate::penalties`], so the objective
//! never increases from one sweep to the next. Updates work on the Gram
//! matrix (`X'X`, `X'y`), which lets the 24 hourly problems of a
//! hour-agnostic design share one factorisation.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{is_dummy_label, DesignMatrix};
use crate::penalties::{Family, PenaltySpec, ScalarPenalty};

/// Stopping rule and iteration cap for coordinate descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop when `max_j ||x_j|| * |delta b_j|` over a full sweep falls below
    /// this value.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Keep the objective value after every sweep in [`FitResult::trace`].
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_sweeps: 10_000,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub beta: Vec<f64>,
    /// RSS plus penalty at `beta`.
    pub objective: f64,
    pub rss: f64,
    pub nnz: usize,
    /// Effective degrees of freedom used by BIC.
    pub df: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub trace: Vec<f64>,
}

impl FitResult {
    pub fn predict(&self, row: &[f64]) -> f64 {
        row.iter().zip(&self.beta).map(|(x, b)| x * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathResult {
    pub lambdas: Vec<f64>,
    pub fits: Vec<FitResult>,
}

/// Sufficient statistics of a least-squares problem.
#[derive(Debug, Clone)]
pub struct QuadProblem {
    xtx: Arc<DMatrix<f64>>,
    xty: DVector<f64>,
    yty: f64,
    n: usize,
    eigen: Arc<OnceLock<Vec<f64>>>,
}

impl QuadProblem {
    pub fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        Self {
            xtx: Arc::new(x.tr_mul(x)),
            xty: x.tr_mul(y),
            yty: y.dot(y),
            n: x.nrows(),
            eigen: Arc::new(OnceLock::new()),
        }
    }

    pub fn from_design(dm: &DesignMatrix) -> Self {
        Self::new(&dm.x, &dm.y)
    }

    pub fn from_gram(xtx: DMatrix<f64>, xty: DVector<f64>, yty: f64, n: usize) -> Self {
        Self {
            xtx: Arc::new(xtx),
            xty,
            yty,
            n,
            eigen: Arc::new(OnceLock::new()),
        }
    }

    /// Same regressors, new response. `X'X` is shared, not copied.
    pub fn with_response(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        debug_assert_eq!(x.ncols(), self.xtx.ncols());
        Self {
            xtx: Arc::clone(&self.xtx),
            xty: x.tr_mul(y),
            yty: y.dot(y),
            n: x.nrows(),
            eigen: Arc::clone(&self.eigen),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn n_cols(&self) -> usize {
        self.xtx.ncols()
    }

    pub fn xtx(&self) -> &DMatrix<f64> {
        &self.xtx
    }

    pub fn xty(&self) -> &DVector<f64> {
        &self.xty
    }

    /// `X'(y - X b)`.
    pub fn correlations(&self, beta: &[f64]) -> DVector<f64> {
        let b = DVector::from_column_slice(beta);
        &self.xty - &*self.xtx * b
    }

    /// RSS evaluated from the Gram form (clamped at zero).
    pub fn rss(&self, beta: &[f64]) -> f64 {
        let b = DVector::from_column_slice(beta);
        let quad = b.dot(&(&*self.xtx * &b));
        (self.yty - 2.0 * b.dot(&self.xty) + quad).max(0.0)
    }

    pub fn objective(&self, spec: &PenaltySpec, beta: &[f64]) -> f64 {
        self.rss(beta) + spec.total(beta)
    }

    fn eigenvalues(&self) -> &[f64] {
        self.eigen.get_or_init(|| {
            let e = nalgebra::SymmetricEigen::new((*self.xtx).clone());
            e.eigenvalues.iter().map(|v| v.max(0.0)).collect()
        })
    }

    /// `trace(X (X'X + lam I)^-1 X')`.
    pub fn ridge_df(&self, lam: f64) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|&e| if e + lam > 0.0 { e / (e + lam) } else { 0.0 })
            .sum()
    }
}

/// Coordinate descent workspace: coefficients and maintained correlations.
struct Descent<'a> {
    problem: &'a QuadProblem,
    penalties: Vec<ScalarPenalty>,
    beta: Vec<f64>,
    corr: DVector<f64>,
}

impl<'a> Descent<'a> {
    fn new(problem: &'a QuadProblem, spec: &PenaltySpec, init: Option<&[f64]>) -> Self {
        let p = problem.n_cols();
        let beta = match init {
            Some(b) => b.to_vec(),
            None => vec![0.0; p],
        };
        let corr = problem.correlations(&beta);
        Self {
            problem,
            penalties: (0..p).map(|j| spec.coordinate(j)).collect(),
            beta,
            corr,
        }
    }

    fn set_penalties(&mut self, spec: &PenaltySpec) {
        for (j, pen) in self.penalties.iter_mut().enumerate() {
            *pen = spec.coordinate(j);
        }
    }

    /// Exact minimisation along coordinate `j`; returns `||x_j|| * |delta|`.
    fn update(&mut self, j: usize) -> f64 {
        let g = &*self.problem.xtx;
        let a = g[(j, j)];
        let old = self.beta[j];
        let new = if a > 0.0 {
            self.penalties[j].prox(old + self.corr[j] / a, a)
        } else {
            0.0
        };
        let delta = new - old;
        if delta == 0.0 {
            return 0.0;
        }
        self.beta[j] = new;
        self.corr.axpy(-delta, &g.column(j), 1.0);
        a.sqrt() * delta.abs()
    }

    fn sweep(&mut self, coords: impl Iterator<Item = usize>) -> f64 {
        let mut max_change: f64 = 0.0;
        for j in coords {
            max_change = max_change.max(self.update(j));
        }
        max_change
    }

    /// Runs full sweeps interleaved with sweeps over the nonzero set until a
    /// full sweep moves nothing by more than `tol`.
    fn run(&mut self, opts: &SolverOptions, mask: Option<&[bool]>, spec: &PenaltySpec, trace: &mut Vec<f64>) -> (usize, bool) {
        let p = self.beta.len();
        let allowed = |j: usize| mask.is_none_or(|m| m[j]);
        let mut sweeps = 0;
        while sweeps < opts.max_sweeps {
            let change = self.sweep((0..p).filter(|&j| allowed(j)));
            sweeps += 1;
            if opts.record_trace {
                trace.push(self.problem.objective(spec, &self.beta));
            }
            if change < opts.tol {
                return (sweeps, true);
            }
            let active: Vec<usize> = (0..p).filter(|&j| allowed(j) && self.beta[j] != 0.0).collect();
            while sweeps < opts.max_sweeps {
                let change = self.sweep(active.iter().copied());
                sweeps += 1;
                if opts.record_trace {
                    trace.push(self.problem.objective(spec, &self.beta));
                }
                if change < opts.tol {
                    break;
                }
            }
        }
        (sweeps, false)
    }
}

fn effective_df(problem: &QuadProblem, spec: &PenaltySpec, beta: &[f64]) -> f64 {
    match spec.family() {
        Family::Ridge => problem.ridge_df(spec.lambda()),
        _ => beta.iter().filter(|b| **b != 0.0).count() as f64,
    }
}

fn finish(
    problem: &QuadProblem,
    spec: &PenaltySpec,
    beta: Vec<f64>,
    iterations: usize,
    converged: bool,
    trace: Vec<f64>,
) -> FitResult {
    let rss = problem.rss(&beta);
    FitResult {
        objective: rss + spec.total(&beta),
        rss,
        nnz: beta.iter().filter(|b| **b != 0.0).count(),
        df: effective_df(problem, spec, &beta),
        iterations,
        converged,
        trace,
        beta,
    }
}

fn check_spec(problem: &QuadProblem, spec: &PenaltySpec) -> Result<()> {
    if let Some(w) = spec.adaptive_weights() {
        if w.len() != problem.n_cols() {
            return Err(Error::InvalidSpec(format!(
                "{} adaptive weights for {} coefficients",
                w.len(),
                problem.n_cols()
            )));
        }
    }
    Ok(())
}

fn check_finite(dm: &DesignMatrix) -> Result<()> {
    if dm.n_rows() == 0 || dm.n_cols() == 0 {
        return Err(Error::Numeric("empty design matrix".into()));
    }
    if dm.x.iter().chain(dm.y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("design matrix contains non-finite values".into()));
    }
    Ok(())
}

/// Single coordinate-descent run from `init` (zero when `None`).
pub fn descend(
    problem: &QuadProblem,
    spec: &PenaltySpec,
    init: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<FitResult> {
    check_spec(problem, spec)?;
    if spec.family() == Family::Flash {
        let gamma = spec.shape().unwrap_or(0.0);
        let path = flash_path(problem, gamma, &[spec.lambda()], opts)?;
        return Ok(path.fits.into_iter().next().expect("one fit"));
    }
    let mut cd = Descent::new(problem, spec, init);
    let mut trace = Vec::new();
    let (iterations, converged) = cd.run(opts, None, spec, &mut trace);
    Ok(finish(problem, spec, cd.beta, iterations, converged, trace))
}

/// Minimises the penalised objective on sufficient statistics.
///
/// Convex families converge to the global minimiser from any start. For the
/// nonconvex families (clipped LASSO, CPF, MC+, SCAD) the result is a
/// coordinate-wise minimum; without an explicit `init` several starts are
/// tried (zero, the LASSO solution at the same `lambda`, and the
/// unpenalised solution when `n >= p`) and the lowest objective wins.
pub fn fit_penalized_gram(
    problem: &QuadProblem,
    spec: &PenaltySpec,
    init: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<FitResult> {
    if init.is_some() || spec.family().is_convex() {
        return descend(problem, spec, init, opts);
    }
    let mut best = descend(problem, spec, None, opts)?;
    let mut starts = Vec::new();
    let lasso = PenaltySpec::new(Family::Lasso, spec.lambda(), None)?;
    starts.push(descend(problem, &lasso, None, opts)?.beta);
    if problem.n_rows() >= problem.n_cols() {
        starts.push(descend(problem, &PenaltySpec::ols(), None, opts)?.beta);
    }
    for start in starts {
        let fit = descend(problem, spec, Some(&start), opts)?;
        if fit.objective < best.objective {
            best = fit;
        }
    }
    Ok(best)
}

/// Penalised fit of a design matrix.
pub fn fit_penalized(dm: &DesignMatrix, spec: &PenaltySpec, init: Option<&[f64]>) -> Result<FitResult> {
    check_finite(dm)?;
    let problem = QuadProblem::from_design(dm);
    if spec.family() == Family::Ols {
        return fit_ols(dm);
    }
    let mut fit = fit_penalized_gram(&problem, spec, init, &SolverOptions::default())?;
    refresh_rss(&mut fit, dm, spec);
    Ok(fit)
}

/// Recomputes RSS and objective from residuals rather than the Gram form.
fn refresh_rss(fit: &mut FitResult, dm: &DesignMatrix, spec: &PenaltySpec) {
    let b = DVector::from_column_slice(&fit.beta);
    let r = &dm.y - &dm.x * b;
    fit.rss = r.norm_squared();
    fit.objective = fit.rss + spec.total(&fit.beta);
}

/// Minimum-norm least squares.
pub fn fit_ols(dm: &DesignMatrix) -> Result<FitResult> {
    check_finite(dm)?;
    let svd = dm.x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-12 * dm.n_rows().max(dm.n_cols()) as f64;
    let rank = svd.rank(eps);
    let beta = svd
        .solve(&dm.y, eps)
        .map_err(|e| Error::Numeric(format!("least squares failed: {e}")))?;
    let r = &dm.y - &dm.x * &beta;
    let rss = r.norm_squared();
    let beta: Vec<f64> = beta.iter().copied().collect();
    Ok(FitResult {
        nnz: beta.iter().filter(|b| **b != 0.0).count(),
        objective: rss,
        rss,
        df: rank as f64,
        iterations: 0,
        converged: true,
        trace: Vec::new(),
        beta,
    })
}

fn check_grid(grid: &[f64], spec: &PenaltySpec) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    if grid.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Config("lambda grid must be strictly decreasing".into()));
    }
    // validates caps and sign
    spec.with_lambda(grid[0])?;
    spec.with_lambda(grid[grid.len() - 1])?;
    Ok(())
}

/// Warm-started path on sufficient statistics. `template` fixes family,
/// shape and weights; its own `lambda` is ignored.
pub fn path_gram(
    problem: &QuadProblem,
    template: &PenaltySpec,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<PathResult> {
    check_grid(grid, template)?;
    check_spec(problem, template)?;
    if template.family() == Family::Flash {
        return flash_path(problem, template.shape().unwrap_or(0.0), grid, opts);
    }
    let mut fits = Vec::with_capacity(grid.len());
    let mut cd = Descent::new(problem, template, None);
    for &lam in grid {
        let spec = template.with_lambda(lam)?;
        cd.set_penalties(&spec);
        let mut trace = Vec::new();
        let (iterations, converged) = cd.run(opts, None, &spec, &mut trace);
        fits.push(finish(problem, &spec, cd.beta.clone(), iterations, converged, trace));
    }
    Ok(PathResult {
        lambdas: grid.to_vec(),
        fits,
    })
}

pub fn fit_path(dm: &DesignMatrix, template: &PenaltySpec, grid: &[f64]) -> Result<PathResult> {
    check_finite(dm)?;
    let problem = QuadProblem::from_design(dm);
    let mut path = path_gram(&problem, template, grid, &SolverOptions::default())?;
    for (fit, &lam) in path.fits.iter_mut().zip(grid) {
        refresh_rss(fit, dm, &template.with_lambda(lam)?);
    }
    Ok(path)
}

/// Forward path with adaptive shrinkage.
///
/// Walking down `grid`, the inactive variable with the largest
/// `|2 x_j' r|` enters whenever that exceeds `lambda`, one at a time; after
/// each entry the active coefficients are refitted under
/// `lambda (1 - gamma) |b|`. Variables never leave the active set.
pub fn flash_path(
    problem: &QuadProblem,
    gamma: f64,
    grid: &[f64],
    opts: &SolverOptions,
) -> Result<PathResult> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidSpec(format!("flash gamma {gamma} outside [0, 1]")));
    }
    let template = PenaltySpec::new(Family::Flash, grid.first().copied().unwrap_or(0.0), Some(gamma))?;
    check_grid(grid, &template)?;
    let p = problem.n_cols();
    let mut active = vec![false; p];
    let mut cd = Descent::new(problem, &template, None);
    let mut fits = Vec::with_capacity(grid.len());
    for &lam in grid {
        let spec = template.with_lambda(lam)?;
        cd.set_penalties(&spec);
        let mut iterations = 0;
        let mut converged = true;
        let mut trace = Vec::new();
        loop {
            if active.iter().any(|a| *a) {
                let (it, conv) = cd.run(opts, Some(&active), &spec, &mut trace);
                iterations += it;
                converged &= conv;
            }
            let entry = (0..p)
                .filter(|&j| !active[j] && problem.xtx[(j, j)] > 0.0)
                .map(|j| (j, 2.0 * cd.corr[j].abs()))
                .filter(|&(_, g)| g > lam)
                .max_by(|a, b| a.1.total_cmp(&b.1));
            match entry {
                Some((j, _)) => active[j] = true,
                None => break,
            }
        }
        fits.push(finish(problem, &spec, cd.beta.clone(), iterations, converged, trace));
    }
    Ok(PathResult {
        lambdas: grid.to_vec(),
        fits,
    })
}

pub fn fit_flash(dm: &DesignMatrix, gamma: f64, grid: &[f64]) -> Result<PathResult> {
    check_finite(dm)?;
    let problem = QuadProblem::from_design(dm);
    let mut path = flash_path(&problem, gamma, grid, &SolverOptions::default())?;
    for (fit, &lam) in path.fits.iter_mut().zip(grid) {
        refresh_rss(fit, dm, &PenaltySpec::new(Family::Flash, lam, Some(gamma))?);
    }
    Ok(path)
}

/// Largest violation of the stationarity conditions at `beta`.
///
/// For a nonzero coordinate this is `|2 x_j'r - g'(b_j)|`; for a zero
/// coordinate it is how far `|2 x_j'r|` exceeds the slope of `g` at zero.
pub fn kkt_residual(problem: &QuadProblem, spec: &PenaltySpec, beta: &[f64]) -> f64 {
    let corr = problem.correlations(beta);
    beta.iter()
        .enumerate()
        .map(|(j, &b)| {
            let grad = 2.0 * corr[j];
            let pen = spec.coordinate(j);
            if b != 0.0 {
                (grad - pen.derivative(b)).abs()
            } else {
                (grad.abs() - pen.zero_slope()).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Smallest `lambda` at which every coefficient is zero for L1-type
/// families, `max_j |2 x_j'y| / s_j` with `s_j` the slope of the unit
/// penalty at zero. Families without a finite threshold use the same
/// formula with an L1 slope as a scale anchor.
pub fn lambda_max(problem: &QuadProblem, template: &PenaltySpec) -> f64 {
    let unit = template.with_lambda(1.0).unwrap_or_else(|_| template.clone());
    (0..problem.n_cols())
        .map(|j| {
            let g = 2.0 * problem.xty[j].abs();
            let slope = match unit.coordinate(j) {
                ScalarPenalty::Power { lam, .. } | ScalarPenalty::L2 { lam } => lam,
                other => other.zero_slope(),
            };
            if slope > 0.0 {
                g / slope
            } else {
                g
            }
        })
        .fold(0.0, f64::max)
}

/// Geometric grid from `lambda_max` (capped for LQ and ridge) down to
/// `ratio * top`.
pub fn default_lambda_grid(
    problem: &QuadProblem,
    template: &PenaltySpec,
    points: usize,
    ratio: f64,
) -> Vec<f64> {
    let family = template.family();
    let mut top = lambda_max(problem, template);
    if let Some(cap) = family.lambda_cap() {
        top = if top > 0.0 { top.min(cap) } else { cap };
    }
    if !(top > 0.0) {
        top = 1.0;
    }
    geometric_grid(top, top * ratio, points)
}

pub fn geometric_grid(hi: f64, lo: f64, points: usize) -> Vec<f64> {
    if points <= 1 {
        return vec![hi];
    }
    let step = (lo / hi).ln() / (points - 1) as f64;
    (0..points).map(|i| hi * (step * i as f64).exp()).collect()
}

/// Column scaling to unit root-mean-square; weekday dummies and all-zero
/// columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(dm: &DesignMatrix) -> Self {
        let n = dm.n_rows().max(1) as f64;
        let scales = dm
            .labels
            .iter()
            .enumerate()
            .map(|(j, label)| {
                if is_dummy_label(label) {
                    return 1.0;
                }
                let rms = (dm.x.column(j).norm_squared() / n).sqrt();
                if rms > 0.0 && rms.is_finite() {
                    rms
                } else {
                    1.0
                }
            })
            .collect();
        Self { scales }
    }

    pub fn identity(p: usize) -> Self {
        Self {
            scales: vec![1.0; p],
        }
    }

    pub fn apply(&self, dm: &DesignMatrix) -> DesignMatrix {
        let mut out = dm.clone();
        for (j, s) in self.scales.iter().enumerate() {
            if *s != 1.0 {
                out.x.column_mut(j).unscale_mut(*s);
            }
        }
        out
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(&self.scales).map(|(x, s)| x / s).collect()
    }

    /// Coefficients on the scaled design mapped back to original units.
    pub fn unscale_beta(&self, beta: &[f64]) -> Vec<f64> {
        beta.iter().zip(&self.scales).map(|(b, s)| b / s).collect()
    }
}
