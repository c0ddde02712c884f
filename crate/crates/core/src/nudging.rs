//! Backward-forward nudging towards a balanced state.
//!
//! One cycle integrates backward from `(q*, p_m)` at `t = T` to `t = 0`,
//! overwrites `p` with zero while keeping `q`, and integrates forward again.
//! The new iterate is the momentum at `t = T`, optionally damped.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrate::{
    default_step, integrate_ramped, Direction, IntegrationConfig, Trajectory, DEFAULT_KAPPA,
};
use crate::model::{check_eps_t, PhaseState, SystemSpec};
use crate::ramp::RampSpec;
use crate::series::slow_manifold_point;
use crate::vecops::{distance, norm};

pub const DEFAULT_MAX_ITER: usize = 30;
pub const DEFAULT_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct NudgingConfig {
    pub eps: f64,
    pub t_ramp: f64,
    pub ramp: RampSpec,
    pub q_star: Vec<f64>,
    pub p0: Vec<f64>,
    pub max_iter: usize,
    pub rtol: f64,
    /// Damping factor in `(0, 1]`; `1` is the plain update.
    pub alpha: f64,
    /// RK4 step used for both legs.
    pub step: f64,
}

impl NudgingConfig {
    /// Defaults: `p_0 = 0`, 30 iterations, `rtol = 1e-12`, no damping,
    /// step `ε/20`.
    pub fn new(eps: f64, t_ramp: f64, ramp: RampSpec, q_star: Vec<f64>) -> Self {
        let d = q_star.len();
        NudgingConfig {
            eps,
            t_ramp,
            ramp,
            q_star,
            p0: vec![0.0; d],
            max_iter: DEFAULT_MAX_ITER,
            rtol: DEFAULT_RTOL,
            alpha: 1.0,
            step: default_step(eps, DEFAULT_KAPPA),
        }
    }

    /// Starts from the leading-order slow manifold `g_0(q*) = −J∇V(q*)`.
    pub fn with_leading_order_guess(mut self, sys: &SystemSpec) -> Result<Self> {
        self.p0 = slow_manifold_point(sys, 0, self.eps, &self.q_star)?;
        Ok(self)
    }

    pub fn validate(&self, sys: &SystemSpec) -> Result<()> {
        check_eps_t(self.eps, self.t_ramp)?;
        check_eps_le_t(self.eps, self.t_ramp)?;
        sys.check_len(&self.q_star)?;
        sys.check_len(&self.p0)?;
        check_iteration(self.rtol, self.alpha)?;
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::invalid("step", format!("must be positive, got {}", self.step)));
        }
        if !self.q_star.iter().chain(&self.p0).all(|x| x.is_finite()) {
            return Err(Error::invalid("basepoint", "q* and p_0 must be finite"));
        }
        Ok(())
    }
}

pub(crate) fn check_eps_le_t(eps: f64, t_ramp: f64) -> Result<()> {
    if eps > t_ramp {
        return Err(Error::invalid("epsilon", format!("must not exceed T = {t_ramp}, got {eps}")));
    }
    Ok(())
}

pub(crate) fn check_iteration(rtol: f64, alpha: f64) -> Result<()> {
    if !(rtol >= 0.0) {
        return Err(Error::invalid("rtol", format!("must be nonnegative, got {rtol}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid("alpha", format!("must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NudgingResult<P = Vec<f64>> {
    /// `p_0, …, p_M`.
    pub iterates: Vec<P>,
    /// `‖p_{m+1} − p_m‖`, one shorter than `iterates`.
    pub update_norms: Vec<f64>,
    pub converged: bool,
    pub plateau_index: usize,
    pub final_value: P,
}

impl<P> NudgingResult<P> {
    pub fn cycles(&self) -> usize {
        self.update_norms.len()
    }

    /// Running-minimum update norm at the plateau; infinite before any cycle.
    pub fn plateau_residual(&self) -> f64 {
        plateau_residual(&self.update_norms)
    }

    /// CSV `m,update_norm,balance_residual`; row `m` describes the step from
    /// `p_m` to `p_{m+1}` and the balance residual of `p_{m+1}`.
    pub fn write_trace_csv<W: Write>(&self, writer: W, balance: Option<&[f64]>) -> Result<()> {
        let mut w = crate::report::csv_writer(writer);
        w.write_record(["m", "update_norm", "balance_residual"])?;
        for (m, u) in self.update_norms.iter().enumerate() {
            let b = balance
                .and_then(|b| b.get(m + 1))
                .map(|x| x.to_string())
                .unwrap_or_default();
            w.write_record([m.to_string(), u.to_string(), b])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// First index attaining the minimum of `norms`, i.e. where the running
/// minimum last improved.
pub fn plateau_index(norms: &[f64]) -> usize {
    let mut best = f64::INFINITY;
    let mut idx = 0;
    for (i, &u) in norms.iter().enumerate() {
        if u < best {
            best = u;
            idx = i;
        }
    }
    idx
}

pub fn plateau_residual(norms: &[f64]) -> f64 {
    norms.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Iterate types the nudging driver can update and measure.
pub trait Iterate: Clone {
    fn distance_to(&self, other: &Self) -> f64;
    fn magnitude(&self) -> f64;
    /// `self + α (target − self)`.
    fn damped_towards(&self, target: &Self, alpha: f64) -> Self;
}

impl Iterate for Vec<f64> {
    fn distance_to(&self, other: &Self) -> f64 {
        distance(self, other)
    }

    fn magnitude(&self) -> f64 {
        norm(self)
    }

    fn damped_towards(&self, target: &Self, alpha: f64) -> Self {
        if alpha == 1.0 {
            return target.clone();
        }
        self.iter()
            .zip(target)
            .map(|(a, b)| a + alpha * (b - a))
            .collect()
    }
}

impl Iterate for Complex64 {
    fn distance_to(&self, other: &Self) -> f64 {
        (self - other).norm()
    }

    fn magnitude(&self) -> f64 {
        self.norm()
    }

    fn damped_towards(&self, target: &Self, alpha: f64) -> Self {
        if alpha == 1.0 {
            return *target;
        }
        self + alpha * (target - self)
    }
}

/// Generic fixed-point driver shared by the toy model and the oscillator.
/// `cycle(m, p_m)` returns the undamped `p_m^+(T)`.
pub(crate) fn iterate<P, F>(
    p0: P,
    max_iter: usize,
    rtol: f64,
    alpha: f64,
    mut cycle: F,
) -> Result<NudgingResult<P>>
where
    P: Iterate,
    F: FnMut(usize, &P) -> Result<P>,
{
    let mut iterates = vec![p0];
    let mut update_norms = Vec::new();
    let mut converged = false;
    for m in 0..max_iter {
        let current = iterates.last().expect("nonempty");
        let forward = cycle(m, current).map_err(|e| Error::Cycle {
            cycle: m,
            source: Box::new(e),
        })?;
        let next = current.damped_towards(&forward, alpha);
        let u = next.distance_to(current);
        let scale = next.magnitude().max(1.0);
        update_norms.push(u);
        iterates.push(next);
        if u <= rtol * scale {
            converged = true;
            break;
        }
    }
    let final_value = iterates.last().expect("nonempty").clone();
    Ok(NudgingResult {
        plateau_index: plateau_index(&update_norms),
        iterates,
        update_norms,
        converged,
        final_value,
    })
}

/// Both legs of one cycle, backward first.
pub fn nudging_cycle_trace(
    sys: &SystemSpec,
    cfg: &NudgingConfig,
    p_m: &[f64],
    store: bool,
) -> Result<(Trajectory, Trajectory)> {
    sys.check_len(p_m)?;
    if !p_m.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("p_m", "iterate must be finite"));
    }
    let leg = |direction| {
        let c = IntegrationConfig::new(cfg.step, direction);
        if store {
            c.storing()
        } else {
            c
        }
    };
    let end = PhaseState::new(cfg.q_star.clone(), p_m.to_vec(), cfg.t_ramp);
    let backward = integrate_ramped(sys, &cfg.ramp, cfg.eps, cfg.t_ramp, &end, &leg(Direction::Backward))?;
    let turn = PhaseState::new(backward.last().q.clone(), vec![0.0; sys.dim()], 0.0);
    let forward = integrate_ramped(sys, &cfg.ramp, cfg.eps, cfg.t_ramp, &turn, &leg(Direction::Forward))?;
    Ok((backward, forward))
}

/// `p_m^+(T)`, before damping.
pub fn nudging_cycle(sys: &SystemSpec, cfg: &NudgingConfig, p_m: &[f64]) -> Result<Vec<f64>> {
    let (_, forward) = nudging_cycle_trace(sys, cfg, p_m, false)?;
    Ok(forward.last().p.clone())
}

pub fn run_nudging(sys: &SystemSpec, cfg: &NudgingConfig) -> Result<NudgingResult> {
    cfg.validate(sys)?;
    iterate(cfg.p0.clone(), cfg.max_iter, cfg.rtol, cfg.alpha, |_, p| {
        nudging_cycle(sys, cfg, p)
    })
}

/// `‖p_final − G_n(q*)‖`.
pub fn balance_residual(
    sys: &SystemSpec,
    cfg: &NudgingConfig,
    result: &NudgingResult,
    n: usize,
) -> Result<f64> {
    let g = slow_manifold_point(sys, n, cfg.eps, &cfg.q_star)?;
    Ok(distance(&result.final_value, &g))
}

/// Balance residual of every iterate.
pub fn balance_trace(
    sys: &SystemSpec,
    cfg: &NudgingConfig,
    result: &NudgingResult,
    n: usize,
) -> Result<Vec<f64>> {
    let g = slow_manifold_point(sys, n, cfg.eps, &cfg.q_star)?;
    Ok(result.iterates.iter().map(|p| distance(p, &g)).collect())
}
