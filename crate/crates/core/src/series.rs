//! Asymptotic slow-manifold series.
//!
//! The autonomous coefficients satisfy
//!
//! ```text
//! g_0 = −J∇V,   g_k = −J Σ_{i+j=k−1} Dg_i · g_j
//! ```
//!
//! and the ramped, time-dependent ones
//!
//! ```text
//! f_0 = −ρ(t/T) J∇V,   f_k = −J ∂_t f_{k−1} − J Σ_{i+j=k−1} Df_i · f_j .
//! ```
//!
//! Jacobians are never formed. Each product `Dg_i · v` (and each `∂_t`) is
//! obtained by evaluating the lower coefficient at a point perturbed by a
//! fresh [`Jet`] infinitesimal and reading off its coefficient, so the
//! recursion nests one perturbation level per order.

use crate::error::{Error, Result};
use crate::jet::{Jet, Scalar};
use crate::model::{apply_j, check_eps_t, PhaseState, PotentialSpec, SystemSpec};
use crate::ramp::RampSpec;

/// Default cap on the truncation order.
pub const DEFAULT_MAX_ORDER: usize = 8;

/// A evaluated truncated series `Σ coefficients[i] εⁱ`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesEval {
    pub order: usize,
    pub eps: f64,
    pub coefficients: Vec<Vec<f64>>,
    pub value: Vec<f64>,
    pub remainder_norm: Option<f64>,
}

impl SeriesEval {
    fn from_coefficients(coefficients: Vec<Vec<f64>>, eps: f64) -> Self {
        let value = weighted_sum(&coefficients, eps);
        SeriesEval {
            order: coefficients.len() - 1,
            eps,
            coefficients,
            value,
            remainder_norm: None,
        }
    }
}

fn weighted_sum(coefficients: &[Vec<f64>], eps: f64) -> Vec<f64> {
    let dim = coefficients.first().map_or(0, Vec::len);
    let mut value = vec![0.0; dim];
    let mut w = 1.0;
    for c in coefficients {
        for (v, x) in value.iter_mut().zip(c) {
            *v += w * x;
        }
        w *= eps;
    }
    value
}

/// Series evaluator for one system, optionally ramped.
#[derive(Clone, Debug)]
pub struct Series<'a> {
    sys: &'a SystemSpec,
    ramp: Option<(&'a RampSpec, f64)>,
    max_order: usize,
}

impl<'a> Series<'a> {
    pub fn autonomous(sys: &'a SystemSpec) -> Self {
        Series {
            sys,
            ramp: None,
            max_order: DEFAULT_MAX_ORDER,
        }
    }

    pub fn ramped(sys: &'a SystemSpec, ramp: &'a RampSpec, t_ramp: f64) -> Result<Self> {
        check_eps_t(1.0, t_ramp)?;
        Ok(Series {
            sys,
            ramp: Some((ramp, t_ramp)),
            max_order: DEFAULT_MAX_ORDER,
        })
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    fn check_order(&self, n: usize) -> Result<()> {
        if n > self.max_order {
            return Err(Error::SeriesOrderTooHigh {
                order: n,
                max: self.max_order,
            });
        }
        Ok(())
    }

    fn recursion(&self) -> Recursion<'_> {
        Recursion {
            pot: self.sys.potential(),
            ramp: self.ramp,
        }
    }

    /// `[c_0(q,t), …, c_n(q,t)]`; `t` is ignored for the autonomous series.
    pub fn coefficients(&self, n: usize, q: &[f64], t: f64) -> Result<Vec<Vec<f64>>> {
        self.check_order(n)?;
        self.sys.check_len(q)?;
        let (qj, tj) = lift_point(q, t);
        let out = self.recursion().coefficients(&qj, &tj, n)?;
        Ok(out.iter().map(|c| reals(c)).collect())
    }

    pub fn evaluate(&self, n: usize, eps: f64, q: &[f64], t: f64) -> Result<SeriesEval> {
        Ok(SeriesEval::from_coefficients(self.coefficients(n, q, t)?, eps))
    }

    /// `Dc_i(q,t) · v`.
    pub fn directional(&self, i: usize, q: &[f64], t: f64, v: &[f64]) -> Result<Vec<f64>> {
        self.check_order(i)?;
        self.sys.check_len(q)?;
        self.sys.check_len(v)?;
        let (qj, tj) = lift_point(q, t);
        let vj: Vec<Jet> = v.iter().map(|&x| Jet::constant(0, x)).collect();
        Ok(reals(&self.recursion().directional(&qj, &tj, i, &vj)?))
    }

    /// `∂_t c_i(q,t)`; zero for the autonomous series.
    pub fn time_derivative(&self, i: usize, q: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_order(i)?;
        self.sys.check_len(q)?;
        let (qj, tj) = lift_point(q, t);
        Ok(reals(&self.recursion().time_derivative(&qj, &tj, i)?))
    }

    /// `R_n = −εⁿ ∂_t f_n − Σ_{s=n}^{2n} εˢ Σ_{i+j=s, i,j≤n} Df_i f_j`.
    pub fn remainder(&self, n: usize, eps: f64, q: &[f64], t: f64) -> Result<Vec<f64>> {
        check_eps_t(eps, 1.0)?;
        self.check_order(n + 1)?;
        self.sys.check_len(q)?;
        let rec = self.recursion();
        let (qj, tj) = lift_point(q, t);
        let fs = rec.coefficients(&qj, &tj, n)?;
        let mut r: Vec<f64> = reals(&rec.time_derivative(&qj, &tj, n)?)
            .into_iter()
            .map(|x| -eps.powi(n as i32) * x)
            .collect();
        for (j, fj) in fs.iter().enumerate() {
            let qp = perturb(&qj, fj, 0);
            let lifted = rec.coefficients(&qp, &tj, n)?;
            for (i, fi) in lifted.iter().enumerate().skip(n - j) {
                let w = eps.powi((i + j) as i32);
                for (rc, c) in r.iter_mut().zip(fi) {
                    *rc -= w * c.tangent(0).real();
                }
            }
        }
        Ok(r)
    }
}

/// The coefficient recursion on jets.
struct Recursion<'a> {
    pot: &'a PotentialSpec,
    ramp: Option<(&'a RampSpec, f64)>,
}

impl Recursion<'_> {
    fn base(&self, q: &[Jet], t: &Jet) -> Result<Vec<Jet>> {
        let grad = self.pot.gradient(q);
        let scaled = match self.ramp {
            None => grad,
            Some((ramp, t_ramp)) => {
                let theta = t.scale(1.0 / t_ramp);
                let derivs = ramp.derivatives_upto(theta.real(), active_infinitesimals(&theta))?;
                let rho = compose_active(&theta, &derivs);
                grad.iter().map(|g| g.mul(&rho)).collect()
            }
        };
        Ok(neg_j(&scaled))
    }

    fn coefficients(&self, q: &[Jet], t: &Jet, k: usize) -> Result<Vec<Vec<Jet>>> {
        let d = point_depth(q, t);
        let mut out = vec![self.base(q, t)?];
        for m in 1..=k {
            let mut acc = vec![Jet::zero(d); q.len()];
            if self.ramp.is_some() {
                add_assign(&mut acc, &self.time_derivative(q, t, m - 1)?);
            }
            for i in 0..m {
                let dir = out[m - 1 - i].clone();
                add_assign(&mut acc, &self.directional(q, t, i, &dir)?);
            }
            out.push(neg_j(&acc));
        }
        Ok(out)
    }

    fn directional(&self, q: &[Jet], t: &Jet, i: usize, v: &[Jet]) -> Result<Vec<Jet>> {
        let d = point_depth(q, t).max(v.iter().map(Jet::depth).max().unwrap_or(0));
        let qp = perturb(q, v, d);
        let top = self.coefficients(&qp, t, i)?.swap_remove(i);
        Ok(top.iter().map(|c| c.tangent(d)).collect())
    }

    fn time_derivative(&self, q: &[Jet], t: &Jet, i: usize) -> Result<Vec<Jet>> {
        let d = point_depth(q, t);
        if self.ramp.is_none() {
            return Ok(vec![Jet::zero(d); q.len()]);
        }
        let tp = t.lift(d).perturbed(&Jet::constant(d, 1.0));
        let top = self.coefficients(q, &tp, i)?.swap_remove(i);
        Ok(top.iter().map(|c| c.tangent(d)).collect())
    }
}

fn lift_point(q: &[f64], t: f64) -> (Vec<Jet>, Jet) {
    (
        q.iter().map(|&x| Jet::constant(0, x)).collect(),
        Jet::constant(0, t),
    )
}

fn reals(v: &[Jet]) -> Vec<f64> {
    v.iter().map(Jet::real).collect()
}

fn point_depth(q: &[Jet], t: &Jet) -> usize {
    q.iter().map(Jet::depth).max().unwrap_or(0).max(t.depth())
}

fn perturb(q: &[Jet], v: &[Jet], d: usize) -> Vec<Jet> {
    q.iter()
        .zip(v)
        .map(|(x, dx)| x.lift(d).perturbed(&dx.lift(d)))
        .collect()
}

fn neg_j(v: &[Jet]) -> Vec<Jet> {
    apply_j(v).iter().map(|x| x.scale_s(-1.0)).collect()
}

fn add_assign(acc: &mut [Jet], v: &[Jet]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a = a.add(b);
    }
}

/// Number of infinitesimals the jet actually depends on; bounds the
/// nilpotency degree of its non-real part.
fn active_infinitesimals(x: &Jet) -> usize {
    let mut used = 0usize;
    for (mask, &c) in x.coeffs().iter().enumerate().skip(1) {
        if c != 0.0 {
            used |= mask;
        }
    }
    used.count_ones() as usize
}

fn compose_active(x: &Jet, derivs: &[f64]) -> Jet {
    let mut padded = derivs.to_vec();
    padded.resize(x.depth() + 1, 0.0);
    x.compose(&padded)
}

pub fn g_coefficients(sys: &SystemSpec, n: usize, q: &[f64]) -> Result<Vec<Vec<f64>>> {
    Series::autonomous(sys).coefficients(n, q, 0.0)
}

/// `G_n(q) = Σ_{i≤n} g_i(q) εⁱ`.
pub fn slow_manifold_point(sys: &SystemSpec, n: usize, eps: f64, q: &[f64]) -> Result<Vec<f64>> {
    Ok(weighted_sum(&g_coefficients(sys, n, q)?, eps))
}

pub fn f_coefficients(
    sys: &SystemSpec,
    ramp: &RampSpec,
    t_ramp: f64,
    n: usize,
    q: &[f64],
    t: f64,
) -> Result<Vec<Vec<f64>>> {
    Series::ramped(sys, ramp, t_ramp)?.coefficients(n, q, t)
}

/// `F_n(q,t) = Σ_{i≤n} f_i(q,t) εⁱ`.
pub fn ramped_manifold_point(
    sys: &SystemSpec,
    ramp: &RampSpec,
    t_ramp: f64,
    n: usize,
    eps: f64,
    q: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    Ok(weighted_sum(&f_coefficients(sys, ramp, t_ramp, n, q, t)?, eps))
}

#[allow(clippy::too_many_arguments)]
pub fn remainder(
    sys: &SystemSpec,
    ramp: &RampSpec,
    t_ramp: f64,
    n: usize,
    eps: f64,
    q: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    Series::ramped(sys, ramp, t_ramp)?.remainder(n, eps, q, t)
}

/// Ramped series evaluation including the remainder norm.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_ramped(
    sys: &SystemSpec,
    ramp: &RampSpec,
    t_ramp: f64,
    n: usize,
    eps: f64,
    q: &[f64],
    t: f64,
) -> Result<SeriesEval> {
    let series = Series::ramped(sys, ramp, t_ramp)?;
    let mut eval = series.evaluate(n, eps, q, t)?;
    eval.remainder_norm = Some(crate::vecops::norm(&series.remainder(n, eps, q, t)?));
    Ok(eval)
}

/// `w = p − F_n(q, t)`, the fast component relative to the ramped series.
pub fn fast_residual(
    sys: &SystemSpec,
    ramp: &RampSpec,
    t_ramp: f64,
    n: usize,
    eps: f64,
    state: &PhaseState,
) -> Result<Vec<f64>> {
    sys.check_len(&state.p)?;
    let f = ramped_manifold_point(sys, ramp, t_ramp, n, eps, &state.q, state.t)?;
    Ok(state.p.iter().zip(&f).map(|(p, f)| p - f).collect())
}
