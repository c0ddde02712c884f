//! Ramp functions `ρ: [0,1] → [0,1]` switching the nonlinearity on.
//!
//! Two families are provided. The polynomial ramps are the normalized
//! incomplete Beta functions
//! `ρ_n(θ) = ∫₀^θ tⁿ(1−t)ⁿ dt / ∫₀¹ tⁿ(1−t)ⁿ dt`, of degree `2n+1`, whose
//! derivatives of order `1..=n` vanish at both ends. The exponential ramp
//! `e^{−1/θ} / (e^{−1/θ} + e^{−1/(1−θ)})` is flat to all orders at both ends.
//!
//! Arguments outside `[0,1]` are clamped, so the ramp is constant (and all
//! its derivatives are zero) there.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Highest derivative order available for the exponential ramp.
pub const EXP_MAX_DERIVATIVE: usize = 6;

#[derive(Clone, Debug, PartialEq)]
pub enum RampKind {
    Polynomial,
    Exponential,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RampSpec {
    kind: RampKind,
    order: usize,
    /// Monomial coefficients, lowest degree first. Empty for the exponential kind.
    coefficients: Vec<f64>,
}

pub fn make_poly_ramp(n: usize) -> RampSpec {
    // ∫₀^θ tⁿ(1−t)ⁿ dt = Σ_j C(n,j) (−1)^j θ^{n+j+1} / (n+j+1),  normalizer (2n+1)!/(n!)².
    let norm = (n + 1..=2 * n + 1).fold(1.0, |acc, k| acc * k as f64)
        / (1..=n).fold(1.0, |acc, k| acc * k as f64);
    let mut coefficients = vec![0.0; 2 * n + 2];
    let mut binom = 1.0;
    for j in 0..=n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        coefficients[n + j + 1] = sign * binom * norm / (n + j + 1) as f64;
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    RampSpec {
        kind: RampKind::Polynomial,
        order: n,
        coefficients,
    }
}

pub fn make_exp_ramp() -> RampSpec {
    RampSpec {
        kind: RampKind::Exponential,
        order: 0,
        coefficients: Vec::new(),
    }
}

pub fn eval_ramp(ramp: &RampSpec, theta: f64) -> f64 {
    ramp.eval(theta)
}

pub fn eval_ramp_derivative(ramp: &RampSpec, theta: f64, i: usize) -> Result<f64> {
    ramp.derivative(theta, i)
}

impl RampSpec {
    /// A polynomial ramp from raw monomial coefficients. No order condition
    /// is checked; intended for degenerate test ramps such as `ρ ≡ 0`.
    pub fn custom_polynomial(coefficients: Vec<f64>) -> Self {
        RampSpec {
            kind: RampKind::Polynomial,
            order: 0,
            coefficients,
        }
    }

    pub fn kind(&self) -> &RampKind {
        &self.kind
    }

    /// Algebraic order for polynomial ramps; `None` for the exponential ramp,
    /// which satisfies every order.
    pub fn order(&self) -> Option<usize> {
        match self.kind {
            RampKind::Polynomial => Some(self.order),
            RampKind::Exponential => None,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn is_exponential(&self) -> bool {
        self.kind == RampKind::Exponential
    }

    pub fn eval(&self, theta: f64) -> f64 {
        match self.kind {
            RampKind::Polynomial => poly_derivative(&self.coefficients, theta.clamp(0.0, 1.0), 0),
            RampKind::Exponential => exp_ramp(theta),
        }
    }

    pub fn derivative(&self, theta: f64, i: usize) -> Result<f64> {
        if i == 0 {
            return Ok(self.eval(theta));
        }
        if !(0.0..=1.0).contains(&theta) {
            return match self.kind {
                RampKind::Exponential if i > EXP_MAX_DERIVATIVE => {
                    Err(Error::UnsupportedDerivativeOrder {
                        order: i,
                        max: EXP_MAX_DERIVATIVE,
                    })
                }
                _ => Ok(0.0),
            };
        }
        match self.kind {
            RampKind::Polynomial => Ok(poly_derivative(&self.coefficients, theta, i)),
            RampKind::Exponential if i > EXP_MAX_DERIVATIVE => {
                Err(Error::UnsupportedDerivativeOrder {
                    order: i,
                    max: EXP_MAX_DERIVATIVE,
                })
            }
            RampKind::Exponential if theta == 0.0 || theta == 1.0 => Ok(0.0),
            RampKind::Exponential => Ok(exp_ramp_derivatives(theta, i)[i]),
        }
    }

    /// `[ρ(θ), ρ'(θ), …, ρ^(m)(θ)]`.
    pub fn derivatives_upto(&self, theta: f64, m: usize) -> Result<Vec<f64>> {
        if self.is_exponential() && m <= EXP_MAX_DERIVATIVE && theta > 0.0 && theta < 1.0 {
            return Ok(exp_ramp_derivatives(theta, m));
        }
        (0..=m).map(|i| self.derivative(theta, i)).collect()
    }
}

impl fmt::Display for RampSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RampKind::Polynomial => write!(f, "poly:{}", self.order),
            RampKind::Exponential => write!(f, "exp"),
        }
    }
}

impl FromStr for RampSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "exp" {
            return Ok(make_exp_ramp());
        }
        if let Some(n) = s.strip_prefix("poly:") {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Error::parse(s, "ramp order must be a nonnegative integer"))?;
            return Ok(make_poly_ramp(n));
        }
        Err(Error::parse(s, "expected `poly:<n>` or `exp`"))
    }
}

fn poly_derivative(coefficients: &[f64], x: f64, i: usize) -> f64 {
    let mut acc = 0.0;
    for (k, &c) in coefficients.iter().enumerate().skip(i).rev() {
        let falling = ((k - i + 1)..=k).fold(1.0, |a, m| a * m as f64);
        acc = acc * x + c * falling;
    }
    acc
}

fn exp_exponent(theta: f64) -> f64 {
    1.0 / theta - 1.0 / (1.0 - theta)
}

fn exp_ramp(theta: f64) -> f64 {
    if theta <= 0.0 {
        0.0
    } else if theta >= 1.0 {
        1.0
    } else {
        1.0 / (1.0 + exp_exponent(theta).exp())
    }
}

/// `[ρ(θ), ρ'(θ), …, ρ^(m)(θ)]` for the exponential ramp, exact up to
/// rounding, by truncated Taylor arithmetic in `h` around `θ ∈ (0,1)`.
fn exp_ramp_derivatives(theta: f64, m: usize) -> Vec<f64> {
    let u0 = exp_exponent(theta);
    let mut out = vec![0.0; m + 1];
    if (-u0.abs()).exp() == 0.0 {
        // flat to machine precision: every derivative underflows
        out[0] = exp_ramp(theta);
        return out;
    }
    // u(θ+h) = Σ_k [(−1)^k / θ^{k+1} − 1/(1−θ)^{k+1}] h^k
    let flip = u0 > 0.0;
    let mut w: Vec<f64> = (0..=m)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign / theta.powi(k as i32 + 1) - 1.0 / (1.0 - theta).powi(k as i32 + 1)
        })
        .collect();
    if flip {
        w.iter_mut().for_each(|c| *c = -*c);
    }
    // ρ = 1/(1+e^u) = e^{−u}/(1+e^{−u}); expand whichever exponent is ≤ 0
    let e = taylor_exp(&w);
    let one_plus: Vec<f64> = e
        .iter()
        .enumerate()
        .map(|(k, c)| if k == 0 { 1.0 + c } else { *c })
        .collect();
    let numer = if flip {
        e
    } else {
        let mut one = vec![0.0; m + 1];
        one[0] = 1.0;
        one
    };
    let series = taylor_div(&numer, &one_plus);
    let mut factorial = 1.0;
    for (k, c) in series.into_iter().enumerate() {
        if k > 0 {
            factorial *= k as f64;
        }
        out[k] = c * factorial;
    }
    out
}

/// `exp` of a truncated power series.
fn taylor_exp(a: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; a.len()];
    e[0] = a[0].exp();
    for k in 1..a.len() {
        e[k] = (1..=k).map(|j| j as f64 * a[j] * e[k - j]).sum::<f64>() / k as f64;
    }
    e
}

/// `a / b` for truncated power series with `b[0] ≠ 0`.
fn taylor_div(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut c = vec![0.0; a.len()];
    for k in 0..a.len() {
        let acc: f64 = (1..=k).map(|j| b[j] * c[k - j]).sum();
        c[k] = (a[k] - acc) / b[0];
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn poly_ramp_coefficients() {
        assert_eq!(make_poly_ramp(0).coefficients(), &[0.0, 1.0]);
        assert_eq!(make_poly_ramp(1).coefficients(), &[0.0, 0.0, 3.0, -2.0]);
        assert_eq!(
            make_poly_ramp(2).coefficients(),
            &[0.0, 0.0, 0.0, 10.0, -15.0, 6.0]
        );
    }

    #[test]
    fn poly_ramp_values() {
        let r1 = make_poly_ramp(1);
        assert_abs_diff_eq!(r1.eval(0.5), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r1.eval(1.0), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r1.derivative(0.5, 1).unwrap(), 1.5, epsilon = 1e-14);
        let r2 = make_poly_ramp(2);
        assert_eq!(r2.eval(0.0), 0.0);
        assert_abs_diff_eq!(r2.derivative(1.0, 1).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(r2.derivative(0.0, 2).unwrap(), 0.0);
        assert_eq!(make_poly_ramp(0).eval(0.3), 0.3);
    }

    #[test]
    fn exp_ramp_values() {
        let r = make_exp_ramp();
        assert_eq!(r.eval(0.5), 0.5);
        assert_eq!(r.eval(0.0), 0.0);
        assert_eq!(r.eval(1.0), 1.0);
        let expected = 1.0 / (1.0 + (4.0f64 - 4.0 / 3.0).exp());
        assert_abs_diff_eq!(r.eval(0.25), expected, epsilon = 1e-15);
        assert_eq!(r.derivative(0.0, 3).unwrap(), 0.0);
    }

    #[test]
    fn exp_ramp_is_safe_near_endpoints() {
        let r = make_exp_ramp();
        for &t in &[1e-300, 1e-8, 1e-3, 1.0 - 1e-3, 1.0 - 1e-12] {
            let v = r.eval(t);
            assert!(v.is_finite() && (0.0..=1.0).contains(&v));
            for i in 1..=EXP_MAX_DERIVATIVE {
                assert!(r.derivative(t, i).unwrap().is_finite());
            }
        }
    }

    #[test]
    fn clamping_outside_unit_interval() {
        let r = make_poly_ramp(2);
        assert_eq!(r.eval(-0.5), 0.0);
        assert_eq!(r.eval(1.5), 1.0);
        assert_eq!(r.derivative(1.2, 1).unwrap(), 0.0);
    }

    #[test]
    fn exp_ramp_rejects_high_orders() {
        let r = make_exp_ramp();
        assert!(matches!(
            r.derivative(0.3, 7),
            Err(Error::UnsupportedDerivativeOrder { order: 7, .. })
        ));
        assert!(make_poly_ramp(3).derivative(0.3, 12).is_ok());
    }

    #[test]
    fn parse_and_display() {
        assert_eq!("poly:3".parse::<RampSpec>().unwrap(), make_poly_ramp(3));
        assert_eq!(" exp ".parse::<RampSpec>().unwrap(), make_exp_ramp());
        assert!("poly:x".parse::<RampSpec>().is_err());
        assert!("cubic".parse::<RampSpec>().is_err());
        assert_eq!(make_poly_ramp(4).to_string(), "poly:4");
        assert_eq!(make_exp_ramp().to_string(), "exp");
    }

    #[test]
    fn exp_derivatives_match_differences() {
        let r = make_exp_ramp();
        for &t in &[0.2, 0.45, 0.7] {
            let h = 1e-5;
            let fd1 = (r.eval(t + h) - r.eval(t - h)) / (2.0 * h);
            assert_abs_diff_eq!(r.derivative(t, 1).unwrap(), fd1, epsilon = 1e-8);
            for i in 2..=EXP_MAX_DERIVATIVE {
                let d = |x| r.derivative(x, i - 1).unwrap();
                let fd = (d(t + h) - d(t - h)) / (2.0 * h);
                let scale = fd.abs().max(1.0);
                assert_abs_diff_eq!(r.derivative(t, i).unwrap(), fd, epsilon = 1e-5 * scale);
            }
        }
    }

    #[test]
    fn exp_derivatives_at_midpoint() {
        // ρ(1/2 + h) − 1/2 is odd in h; ρ'(1/2) = 8 · 1/4 = 2
        let d = make_exp_ramp().derivatives_upto(0.5, 6).unwrap();
        assert_abs_diff_eq!(d[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], 2.0, epsilon = 1e-13);
        for k in [2, 4, 6] {
            assert_abs_diff_eq!(d[k], 0.0, epsilon = 1e-9);
        }
    }
}
