//! Exact targets for the action-angle oscillator `θ̇ = 1`, `ε ṗ = ip + ρ f(θ)`.
//!
//! The closed forms below, `G(θ) = Σ f_k ε/(i(kε−1)) e^{ikθ}` and
//! `p(T) = ∫₀^T e^{i(T−t)/ε} ρ(t/T) f(θ* + t − T) dt`, are consistent with
//! each other and describe the rescaled momentum `P = εp`, which solves
//! `Ṗ = iP/ε + ρ f(θ)`. The oscillator nudging iteration reports its
//! iterates in the same normalization so that all three can be compared
//! directly.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrate::{default_step, rk4_fixed, DEFAULT_KAPPA};
use crate::model::{check_eps_t, oscillator_vector_field, OscillatorSpec};
use crate::nudging::{check_eps_le_t, check_iteration, iterate, NudgingResult, DEFAULT_MAX_ITER, DEFAULT_RTOL};
use crate::quadrature::Composite;
use crate::ramp::RampSpec;

/// Minimum Gauss–Legendre panels per fast period `2πε`.
pub const PANELS_PER_PERIOD: usize = 40;

fn i() -> Complex64 {
    Complex64::i()
}

/// `G(θ) = Σ f_k ε/(i(kε−1)) e^{ikθ}`.
pub fn oscillator_exact_slow(osc: &OscillatorSpec, eps: f64, theta: f64) -> Result<Complex64> {
    osc.check_resonance(eps)?;
    Ok(osc
        .modes()
        .iter()
        .map(|&(k, fk)| fk * eps / (i() * (k as f64 * eps - 1.0)) * Complex64::from_polar(1.0, k as f64 * theta))
        .sum())
}

/// Default panel count on `[0, T]`.
pub fn default_panels(eps: f64, t_ramp: f64) -> usize {
    (PANELS_PER_PERIOD as f64 * t_ramp / (2.0 * PI * eps)).ceil().max(1.0) as usize
}

/// `p(T)` by composite Gauss–Legendre quadrature.
pub fn oscillator_balanced_pt(
    osc: &OscillatorSpec,
    ramp: &RampSpec,
    eps: f64,
    t_ramp: f64,
    theta_star: f64,
) -> Result<Complex64> {
    oscillator_balanced_pt_with_panels(osc, ramp, eps, t_ramp, theta_star, default_panels(eps, t_ramp))
}

pub fn oscillator_balanced_pt_with_panels(
    osc: &OscillatorSpec,
    ramp: &RampSpec,
    eps: f64,
    t_ramp: f64,
    theta_star: f64,
    panels: usize,
) -> Result<Complex64> {
    check_eps_t(eps, t_ramp)?;
    let q = Composite::new();
    Ok(q.integrate(0.0, t_ramp, panels, |t| {
        Complex64::from_polar(1.0, (t_ramp - t) / eps)
            * ramp.eval(t / t_ramp)
            * osc.coupling(theta_star + t - t_ramp)
    }))
}

/// The explicit remainder after one integration by parts,
/// `−Σ f_k e^{iT/ε + ik(θ*−T)} ε/(i(kε−1)) ∫₀^T e^{(−i/ε + ik)t} ρ'(t/T)/T dt`,
/// which equals `p(T) − G(θ*)`.
pub fn oscillator_ibp_remainder(
    osc: &OscillatorSpec,
    ramp: &RampSpec,
    eps: f64,
    t_ramp: f64,
    theta_star: f64,
) -> Result<Complex64> {
    check_eps_t(eps, t_ramp)?;
    osc.check_resonance(eps)?;
    let q = Composite::new();
    let panels = default_panels(eps, t_ramp);
    let mut total = Complex64::new(0.0, 0.0);
    for &(k, fk) in osc.modes() {
        let k = k as f64;
        let mut failure = None;
        let integral = q.integrate(0.0, t_ramp, panels, |t| {
            let d = ramp.derivative(t / t_ramp, 1).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                0.0
            });
            Complex64::from_polar(1.0, (k - 1.0 / eps) * t) * d / t_ramp
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let prefactor = fk
            * Complex64::from_polar(1.0, t_ramp / eps + k * (theta_star - t_ramp))
            * eps
            / (i() * (k * eps - 1.0));
        total -= prefactor * integral;
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorNudgeConfig {
    pub eps: f64,
    pub t_ramp: f64,
    pub theta_star: f64,
    /// Initial guess in the `εp` normalization.
    pub p0: Complex64,
    pub max_iter: usize,
    pub rtol: f64,
    pub alpha: f64,
    pub step: f64,
}

impl OscillatorNudgeConfig {
    pub fn new(eps: f64, t_ramp: f64, theta_star: f64) -> Self {
        OscillatorNudgeConfig {
            eps,
            t_ramp,
            theta_star,
            p0: Complex64::new(0.0, 0.0),
            max_iter: DEFAULT_MAX_ITER,
            rtol: DEFAULT_RTOL,
            alpha: 1.0,
            step: default_step(eps, DEFAULT_KAPPA),
        }
    }
}

/// Integrates `(θ, p)` with the literal vector field between `t0` and `t1`.
fn oscillator_leg(
    osc: &OscillatorSpec,
    ramp: &RampSpec,
    cfg: &OscillatorNudgeConfig,
    t0: f64,
    t1: f64,
    theta: f64,
    p: Complex64,
) -> Result<(f64, Complex64)> {
    let y = rk4_fixed(
        |t, y, dy| {
            let (dth, dp) = oscillator_vector_field(osc, ramp, cfg.eps, cfg.t_ramp, y[0], Complex64::new(y[1], y[2]), t)
                .expect("parameters validated before integration");
            dy[0] = dth;
            dy[1] = dp.re;
            dy[2] = dp.im;
        },
        t0,
        t1,
        cfg.step,
        vec![theta, p.re, p.im],
        |_, _| {},
    )?;
    Ok((y[0], Complex64::new(y[1], y[2])))
}

/// Nudging on the oscillator. `θ` is carried across the turn-around, `p`
/// is zeroed at `t = 0` and `θ` is reset to `θ*` at `t = T`.
pub fn oscillator_nudge(
    osc: &OscillatorSpec,
    ramp: &RampSpec,
    cfg: &OscillatorNudgeConfig,
) -> Result<NudgingResult<Complex64>> {
    check_eps_t(cfg.eps, cfg.t_ramp)?;
    check_eps_le_t(cfg.eps, cfg.t_ramp)?;
    check_iteration(cfg.rtol, cfg.alpha)?;
    osc.check_resonance(cfg.eps)?;
    if !(cfg.p0.re.is_finite() && cfg.p0.im.is_finite()) {
        return Err(Error::invalid("initial_guess", "must be finite"));
    }
    iterate(cfg.p0, cfg.max_iter, cfg.rtol, cfg.alpha, |_, &big_p| {
        let (theta0, _) = oscillator_leg(osc, ramp, cfg, cfg.t_ramp, 0.0, cfg.theta_star, big_p / cfg.eps)?;
        let (_, p_t) = oscillator_leg(osc, ramp, cfg, 0.0, cfg.t_ramp, theta0, Complex64::new(0.0, 0.0))?;
        Ok(p_t * cfg.eps)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ramp::{make_exp_ramp, make_poly_ramp};
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_mode_value() {
        let g = oscillator_exact_slow(&OscillatorSpec::single_mode(), 0.1, 0.0).unwrap();
        assert_abs_diff_eq!(g.re, 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(g.im, 1.0 / 9.0, epsilon = 1e-16);
    }

    #[test]
    fn empty_coupling_and_small_eps() {
        let none = OscillatorSpec::new(vec![]);
        assert_eq!(oscillator_exact_slow(&none, 0.1, 0.3).unwrap(), Complex64::new(0.0, 0.0));
        let pt = oscillator_balanced_pt(&none, &make_poly_ramp(2), 0.1, 1.0, 0.0).unwrap();
        assert_eq!(pt, Complex64::new(0.0, 0.0));
        let g = oscillator_exact_slow(&OscillatorSpec::acceptance_modes(), 1e-9, 0.7).unwrap();
        assert!(g.norm() < 1e-8);
    }

    #[test]
    fn zero_ramp_gives_zero() {
        let zero = RampSpec::custom_polynomial(vec![0.0]);
        let pt = oscillator_balanced_pt(&OscillatorSpec::single_mode(), &zero, 0.05, 1.0, 0.2).unwrap();
        assert_eq!(pt, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn resonance_is_rejected() {
        let osc = OscillatorSpec::acceptance_modes();
        assert!(matches!(
            oscillator_exact_slow(&osc, 0.5, 0.0),
            Err(Error::Resonance { k: 2, .. })
        ));
    }

    #[test]
    fn panel_doubling_is_stable() {
        let osc = OscillatorSpec::acceptance_modes();
        for ramp in [make_poly_ramp(1), make_poly_ramp(2), make_exp_ramp()] {
            for eps in [0.1, 0.05, 0.025, 0.0125] {
                let n = default_panels(eps, 1.0);
                let a = oscillator_balanced_pt_with_panels(&osc, &ramp, eps, 1.0, 0.4, n).unwrap();
                let b = oscillator_balanced_pt_with_panels(&osc, &ramp, eps, 1.0, 0.4, 2 * n).unwrap();
                assert!((a - b).norm() <= 1e-10, "{ramp} {eps}: {}", (a - b).norm());
            }
        }
    }

    #[test]
    fn integration_by_parts_identity() {
        let osc = OscillatorSpec::acceptance_modes();
        for ramp in [make_poly_ramp(1), make_poly_ramp(2), make_exp_ramp()] {
            for eps in [0.1, 0.05, 0.0125] {
                let pt = oscillator_balanced_pt(&osc, &ramp, eps, 1.0, 0.3).unwrap();
                let g = oscillator_exact_slow(&osc, eps, 0.3).unwrap();
                let rem = oscillator_ibp_remainder(&osc, &ramp, eps, 1.0, 0.3).unwrap();
                assert!((pt - g - rem).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn nudge_converges_in_one_cycle() {
        let osc = OscillatorSpec::acceptance_modes();
        let ramp = make_poly_ramp(2);
        let mut cfg = OscillatorNudgeConfig::new(0.1, 1.0, 0.5);
        cfg.p0 = Complex64::new(3.0, -1.0);
        cfg.step = default_step(0.1, 400);
        let res = oscillator_nudge(&osc, &ramp, &cfg).unwrap();
        let pt = oscillator_balanced_pt(&osc, &ramp, 0.1, 1.0, 0.5).unwrap();
        assert!((res.iterates[1] - pt).norm() < 1e-10);
        assert!((res.iterates[2] - res.iterates[1]).norm() < 1e-12);
        assert!(res.converged);
    }

    #[test]
    fn nudge_at_default_step_matches_quadrature() {
        let osc = OscillatorSpec::single_mode();
        let ramp = make_poly_ramp(2);
        let cfg = OscillatorNudgeConfig::new(0.1, 1.0, 0.0);
        let res = oscillator_nudge(&osc, &ramp, &cfg).unwrap();
        let pt = oscillator_balanced_pt(&osc, &ramp, 0.1, 1.0, 0.0).unwrap();
        assert!((res.final_value - pt).norm() < 1e-8, "{}", (res.final_value - pt).norm());
    }

    #[test]
    fn nudge_with_empty_coupling_is_zero() {
        let cfg = OscillatorNudgeConfig::new(0.05, 1.0, 0.0);
        let res = oscillator_nudge(&OscillatorSpec::new(vec![]), &make_exp_ramp(), &cfg).unwrap();
        assert_eq!(res.iterates[1], Complex64::new(0.0, 0.0));
    }
}
