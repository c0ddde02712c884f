//! Rate fits and parameter sweeps over `ε` and the ramp.

use std::fmt;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrate::default_step;
use crate::model::SystemSpec;
use crate::nudging::{balance_residual, run_nudging, NudgingConfig};
use crate::ramp::RampSpec;

/// Residuals are floored here before taking logarithms.
pub const RESIDUAL_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateModel {
    /// `log r = slope · log ε + intercept`.
    Algebraic,
    /// `log r = slope · (T/ε)^{1/3} + intercept`.
    Exponential,
}

impl fmt::Display for RateModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateModel::Algebraic => "algebraic",
            RateModel::Exponential => "exponential",
        })
    }
}

impl std::str::FromStr for RateModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "algebraic" => Ok(RateModel::Algebraic),
            "exponential" => Ok(RateModel::Exponential),
            _ => Err(Error::parse(s, "expected `algebraic` or `exponential`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub model: RateModel,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RateFit {
    /// Empirical order for the algebraic model, decay rate `−slope` for the
    /// exponential one.
    pub fn rate(&self) -> f64 {
        match self.model {
            RateModel::Algebraic => self.slope,
            RateModel::Exponential => -self.slope,
        }
    }
}

fn log_residual(r: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::DegenerateFit(format!("residual {r} is not a nonnegative number")));
    }
    Ok(r.max(RESIDUAL_FLOOR).ln())
}

/// Ordinary least squares on points sorted by abscissa, so the result does
/// not depend on input order.
fn least_squares(model: RateModel, mut xy: Vec<(f64, f64)>) -> Result<RateFit> {
    if xy.len() < 3 {
        return Err(Error::DegenerateFit(format!("need at least 3 points, got {}", xy.len())));
    }
    xy.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 1e-14 * mx.abs().max(1.0).powi(2)) {
        return Err(Error::DegenerateFit("abscissae are not distinct".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xy.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit {
        model,
        slope,
        intercept,
        r_squared,
    })
}

/// Fit of `log residual` against `log ε`.
pub fn fit_algebraic_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    let xy = points
        .iter()
        .map(|&(eps, r)| {
            if !(eps > 0.0) {
                return Err(Error::DegenerateFit(format!("ε = {eps} is not positive")));
            }
            Ok((eps.ln(), log_residual(r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    least_squares(RateModel::Algebraic, xy)
}

/// Fit of `log residual` against `(T/ε)^{1/3}`.
pub fn fit_exponential_rate(points: &[(f64, f64)], t_ramp: f64) -> Result<RateFit> {
    let xy = points
        .iter()
        .map(|&(eps, r)| {
            if !(eps > 0.0) {
                return Err(Error::DegenerateFit(format!("ε = {eps} is not positive")));
            }
            Ok(((t_ramp / eps).cbrt(), log_residual(r)?))
        })
        .collect::<Result<Vec<_>>>()?;
    least_squares(RateModel::Exponential, xy)
}

/// Local slopes `Δ log r / Δ log ε` between consecutive points, ordered by
/// decreasing `ε`.
pub fn local_orders(points: &[(f64, f64)]) -> Vec<f64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    pts.windows(2)
        .map(|w| (w[1].1.max(RESIDUAL_FLOOR) / w[0].1.max(RESIDUAL_FLOOR)).ln() / (w[1].0 / w[0].0).ln())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExecutionMode {
    /// Cells run on the rayon pool when the `parallel` feature is enabled.
    #[default]
    Parallel,
    Sequential,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepOptions {
    pub mode: ExecutionMode,
    /// Pool size; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Steps per `ε`; the cell step is `ε / kappa`.
    pub kappa: usize,
}

impl SweepOptions {
    pub fn new() -> Self {
        SweepOptions {
            kappa: crate::integrate::DEFAULT_KAPPA,
            ..Default::default()
        }
    }

    pub fn sequential(mut self) -> Self {
        self.mode = ExecutionMode::Sequential;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepCell {
    pub eps: f64,
    pub t_ramp: f64,
    pub ramp: String,
    pub n: usize,
    /// NaN for failed cells.
    pub plateau_residual: f64,
    pub plateau_index: Option<usize>,
    pub balance_residual: f64,
    pub error: Option<String>,
}

impl SweepCell {
    pub fn succeeded(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FitOutcome {
    Fitted(RateFit),
    Skipped(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RampFit {
    pub ramp: String,
    pub outcome: FitOutcome,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// Ordered ramp-major, then by position in the `ε` list.
    pub cells: Vec<SweepCell>,
    /// One entry per ramp, in input order.
    pub fits: Vec<RampFit>,
}

impl SweepResult {
    /// The fit of the first ramp, if it was performed.
    pub fn fit(&self) -> Option<&RateFit> {
        self.fits.first().and_then(|f| match &f.outcome {
            FitOutcome::Fitted(fit) => Some(fit),
            FitOutcome::Skipped(_) => None,
        })
    }

    pub fn cells_for<'a>(&'a self, ramp: &'a str) -> impl Iterator<Item = &'a SweepCell> + 'a {
        self.cells.iter().filter(move |c| c.ramp == ramp)
    }
}

fn run_cell(sys: &SystemSpec, base: &NudgingConfig, ramp: &RampSpec, eps: f64, n: usize, kappa: usize) -> SweepCell {
    let mut cfg = base.clone();
    cfg.eps = eps;
    cfg.ramp = ramp.clone();
    cfg.step = default_step(eps, kappa);
    let outcome = run_nudging(sys, &cfg).and_then(|res| {
        let b = balance_residual(sys, &cfg, &res, n)?;
        Ok((res.plateau_residual(), res.plateau_index, b))
    });
    let mut cell = SweepCell {
        eps,
        t_ramp: cfg.t_ramp,
        ramp: ramp.to_string(),
        n,
        plateau_residual: f64::NAN,
        plateau_index: None,
        balance_residual: f64::NAN,
        error: None,
    };
    match outcome {
        Ok((plateau, idx, b)) => {
            cell.plateau_residual = plateau;
            cell.plateau_index = Some(idx);
            cell.balance_residual = b;
        }
        Err(e) => cell.error = Some(e.to_string()),
    }
    cell
}

fn fit_cells(ramp: &RampSpec, cells: &[&SweepCell], t_ramp: f64) -> FitOutcome {
    let points: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.succeeded() && c.balance_residual > RESIDUAL_FLOOR)
        .map(|c| (c.eps, c.balance_residual))
        .collect();
    let usable = cells.iter().filter(|c| c.succeeded()).count();
    if usable > 0 && points.is_empty() {
        return FitOutcome::Skipped("all residuals are zero".into());
    }
    let fit = if ramp.is_exponential() {
        fit_exponential_rate(&points, t_ramp)
    } else {
        fit_algebraic_rate(&points)
    };
    match fit {
        Ok(f) => FitOutcome::Fitted(f),
        Err(e) => FitOutcome::Skipped(e.to_string()),
    }
}

/// Runs one nudging problem per `(ramp, ε)` cell and fits the rate model
/// matching the ramp family to the balance residuals.
pub fn sweep(
    sys: &SystemSpec,
    base: &NudgingConfig,
    eps_list: &[f64],
    ramp_list: &[RampSpec],
    n_for_residual: usize,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    if eps_list.is_empty() || ramp_list.is_empty() {
        return Err(Error::invalid("sweep", "ε list and ramp list must be nonempty"));
    }
    if ramp_list.iter().any(|r| r.is_exponential() != ramp_list[0].is_exponential()) {
        return Err(Error::MixedRampFamilies);
    }
    for &eps in eps_list {
        let mut cfg = base.clone();
        cfg.eps = eps;
        cfg.step = default_step(eps, opts.kappa);
        cfg.validate(sys)?;
    }
    let jobs: Vec<(&RampSpec, f64)> = ramp_list
        .iter()
        .flat_map(|r| eps_list.iter().map(move |&e| (r, e)))
        .collect();
    let run = |&(r, e): &(&RampSpec, f64)| run_cell(sys, base, r, e, n_for_residual, opts.kappa);
    let cells = execute(&jobs, run, opts)?;
    let fits = ramp_list
        .iter()
        .map(|r| {
            let label = r.to_string();
            let mine: Vec<&SweepCell> = cells.iter().filter(|c| c.ramp == label).collect();
            RampFit {
                outcome: fit_cells(r, &mine, base.t_ramp),
                ramp: label,
            }
        })
        .collect();
    Ok(SweepResult { cells, fits })
}

#[cfg(feature = "parallel")]
fn execute<J, F>(jobs: &[J], run: F, opts: &SweepOptions) -> Result<Vec<SweepCell>>
where
    J: Sync,
    F: Fn(&J) -> SweepCell + Sync + Send,
{
    match (opts.mode, opts.workers) {
        (ExecutionMode::Sequential, _) => Ok(jobs.iter().map(run).collect()),
        (ExecutionMode::Parallel, None) => Ok(jobs.par_iter().map(run).collect()),
        (ExecutionMode::Parallel, Some(w)) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::invalid("workers", e.to_string()))?;
            Ok(pool.install(|| jobs.par_iter().map(run).collect()))
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn execute<J, F>(jobs: &[J], run: F, _opts: &SweepOptions) -> Result<Vec<SweepCell>>
where
    F: Fn(&J) -> SweepCell,
{
    Ok(jobs.iter().map(run).collect())
}
