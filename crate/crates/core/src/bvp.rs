//! Single shooting for the balanced boundary value problem
//! `p(0) = 0`, `q(T) = q*`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::integrate::{default_step, integrate_ramped, Direction, IntegrationConfig, DEFAULT_KAPPA};
use crate::model::{check_eps_t, PhaseState, SystemSpec};
use crate::ramp::RampSpec;
use crate::vecops::{norm, sub};

const MAX_HALVINGS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct ShootingConfig {
    pub eps: f64,
    pub t_ramp: f64,
    pub ramp: RampSpec,
    pub q_star: Vec<f64>,
    pub newton_tol: f64,
    pub newton_max: usize,
    /// Forward-difference step; `None` means `1e-6 · max(1, ‖q0‖)`.
    pub jacobian_fd_step: Option<f64>,
    pub step: f64,
}

impl ShootingConfig {
    pub fn new(eps: f64, t_ramp: f64, ramp: RampSpec, q_star: Vec<f64>) -> Self {
        ShootingConfig {
            eps,
            t_ramp,
            ramp,
            q_star,
            newton_tol: 1e-12,
            newton_max: 20,
            jacobian_fd_step: None,
            step: default_step(eps, DEFAULT_KAPPA),
        }
    }

    pub fn validate(&self, sys: &SystemSpec) -> Result<()> {
        check_eps_t(self.eps, self.t_ramp)?;
        crate::nudging::check_eps_le_t(self.eps, self.t_ramp)?;
        sys.check_len(&self.q_star)?;
        if !(self.newton_tol > 0.0) {
            return Err(Error::invalid("newton_tol", "must be positive"));
        }
        if let Some(h) = self.jacobian_fd_step {
            if !(h > 0.0) {
                return Err(Error::invalid("jacobian_fd_step", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShootingSolution {
    pub q0: Vec<f64>,
    pub p_t: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    /// `‖q(T) − q*‖` after each accepted Newton step, starting with the guess.
    pub residual_history: Vec<f64>,
}

fn shoot(sys: &SystemSpec, cfg: &ShootingConfig, q0: &[f64]) -> Result<PhaseState> {
    sys.check_len(q0)?;
    if !q0.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("q0", "must be finite"));
    }
    let init = PhaseState::new(q0.to_vec(), vec![0.0; sys.dim()], 0.0);
    let traj = integrate_ramped(
        sys,
        &cfg.ramp,
        cfg.eps,
        cfg.t_ramp,
        &init,
        &IntegrationConfig::new(cfg.step, Direction::Forward),
    )?;
    Ok(traj.last().clone())
}

/// `q(T) − q*` for the forward solution from `(q0, 0)`.
pub fn shooting_residual(sys: &SystemSpec, cfg: &ShootingConfig, q0: &[f64]) -> Result<Vec<f64>> {
    let end = shoot(sys, cfg, q0)?;
    Ok(sub(&end.q, &cfg.q_star))
}

/// Damped Newton from `q0 = q*`; returns the root and the balanced `p(T)`.
pub fn shooting_solve(sys: &SystemSpec, cfg: &ShootingConfig) -> Result<ShootingSolution> {
    cfg.validate(sys)?;
    let d = sys.dim();
    let mut q0 = cfg.q_star.clone();
    let mut end = shoot(sys, cfg, &q0)?;
    let mut r = sub(&end.q, &cfg.q_star);
    let mut r_norm = norm(&r);
    let mut history = vec![r_norm];
    for it in 0..=cfg.newton_max {
        if r_norm <= cfg.newton_tol {
            return Ok(ShootingSolution {
                q0,
                p_t: end.p,
                iterations: it,
                residual_norm: r_norm,
                residual_history: history,
            });
        }
        if it == cfg.newton_max {
            break;
        }
        let h = cfg.jacobian_fd_step.unwrap_or(1e-6 * norm(&q0).max(1.0));
        let mut jac = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut qh = q0.clone();
            qh[j] += h;
            let rh = shooting_residual(sys, cfg, &qh)?;
            for i in 0..d {
                jac[(i, j)] = (rh[i] - r[i]) / h;
            }
        }
        let delta = jac
            .lu()
            .solve(&DVector::from_vec(r.clone()))
            .ok_or(Error::SingularJacobian)?;
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = q0.iter().zip(delta.iter()).map(|(q, dq)| q - lambda * dq).collect();
            if let Ok(e) = shoot(sys, cfg, &trial) {
                let rt = sub(&e.q, &cfg.q_star);
                let nt = norm(&rt);
                if nt < r_norm {
                    accepted = Some((trial, e, rt, nt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((trial, e, rt, nt)) => {
                q0 = trial;
                end = e;
                r = rt;
                r_norm = nt;
                history.push(nt);
            }
            // no decrease along the Newton direction: the residual is at its floor
            None => break,
        }
    }
    Err(Error::NewtonNotConverged {
        iterations: cfg.newton_max,
        best_residual: r_norm,
    })
}
