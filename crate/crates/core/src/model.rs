//! The fast-slow toy model `q̇ = p, ε ṗ = Jp − ρ(t/T) ∇V(q)` and the
//! action-angle oscillator `θ̇ = 1, ε ṗ = i p + ρ(t/T) f(θ)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jet::Scalar;
use crate::ramp::RampSpec;

/// Potential `V(q)`; gradients are analytic.
#[derive(Clone, Debug, PartialEq)]
pub enum PotentialSpec {
    Zero,
    /// `½|q|²`
    Quadratic,
    /// `½|q|² + ¼λ|q|⁴`
    QuadQuartic { lambda: f64 },
    /// Separable `Σ_i Σ_k c_k q_iᵏ` with `coefficients[k-1] = c_k`.
    Polynomial { coefficients: Vec<f64> },
}

impl PotentialSpec {
    pub fn gradient<S: Scalar>(&self, q: &[S]) -> Vec<S> {
        match self {
            PotentialSpec::Zero => q.iter().map(|x| x.constant_like(0.0)).collect(),
            PotentialSpec::Quadratic => q.to_vec(),
            PotentialSpec::QuadQuartic { lambda } => {
                let Some(first) = q.first() else {
                    return Vec::new();
                };
                let mut r2 = first.constant_like(0.0);
                for x in q {
                    r2 = r2.add_s(&x.mul_s(x));
                }
                let factor = r2.scale_s(*lambda).add_s(&first.constant_like(1.0));
                q.iter().map(|x| x.mul_s(&factor)).collect()
            }
            PotentialSpec::Polynomial { coefficients } => q
                .iter()
                .map(|x| {
                    // d/dx Σ c_k x^k = Σ k c_k x^{k-1}, Horner from the top degree.
                    let mut acc = x.constant_like(0.0);
                    for (idx, c) in coefficients.iter().enumerate().rev() {
                        let k = (idx + 1) as f64;
                        acc = acc.mul_s(x).add_s(&x.constant_like(k * c));
                    }
                    acc
                })
                .collect(),
        }
    }

    pub fn gradient_into(&self, q: &[f64], out: &mut [f64]) {
        match self {
            PotentialSpec::Zero => out.fill(0.0),
            PotentialSpec::Quadratic => out.copy_from_slice(q),
            PotentialSpec::QuadQuartic { lambda } => {
                let factor = 1.0 + lambda * q.iter().map(|x| x * x).sum::<f64>();
                for (o, x) in out.iter_mut().zip(q) {
                    *o = x * factor;
                }
            }
            PotentialSpec::Polynomial { .. } => out.copy_from_slice(&self.gradient(q)),
        }
    }

    pub fn has_linear_term(&self) -> bool {
        matches!(self, PotentialSpec::Polynomial { coefficients } if coefficients.first().is_some_and(|&c| c != 0.0))
    }
}

impl fmt::Display for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PotentialSpec::Zero => write!(f, "zero"),
            PotentialSpec::Quadratic => write!(f, "quad"),
            PotentialSpec::QuadQuartic { lambda } => write!(f, "quad+quart:{lambda}"),
            PotentialSpec::Polynomial { coefficients } => {
                let list: Vec<String> = coefficients.iter().map(|c| c.to_string()).collect();
                write!(f, "poly:{}", list.join(","))
            }
        }
    }
}

impl FromStr for PotentialSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "zero" => return Ok(PotentialSpec::Zero),
            "quad" => return Ok(PotentialSpec::Quadratic),
            _ => {}
        }
        if let Some(l) = s.strip_prefix("quad+quart:") {
            let lambda = l
                .trim()
                .parse()
                .map_err(|_| Error::parse(s, "quartic coefficient must be a real number"))?;
            return Ok(PotentialSpec::QuadQuartic { lambda });
        }
        if let Some(list) = s.strip_prefix("poly:") {
            let coefficients = list
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| Error::parse(s, "coefficient list must be comma-separated reals"))?;
            return Ok(PotentialSpec::Polynomial { coefficients });
        }
        Err(Error::parse(
            s,
            "expected `zero`, `quad`, `quad+quart:<λ>` or `poly:<c1,c2,...>`",
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SystemSpec {
    dim: usize,
    potential: PotentialSpec,
}

impl SystemSpec {
    pub fn new(dim: usize, potential: PotentialSpec) -> Result<Self> {
        if dim == 0 || !dim.is_multiple_of(2) {
            return Err(Error::OddDimension(dim));
        }
        Ok(SystemSpec { dim, potential })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub(crate) fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl PhaseState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Self {
        PhaseState { q, p, t }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.q.iter().chain(&self.p).all(|x| x.is_finite())
    }
}

pub fn symplectic_matrix(dim: usize) -> Result<DMatrix<f64>> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::OddDimension(dim));
    }
    let h = dim / 2;
    let mut j = DMatrix::zeros(dim, dim);
    for i in 0..h {
        j[(i, i + h)] = 1.0;
        j[(i + h, i)] = -1.0;
    }
    Ok(j)
}

/// `J v` for the block matrix `[[0, I], [−I, 0]]`.
pub(crate) fn apply_j<S: Scalar>(v: &[S]) -> Vec<S> {
    let h = v.len() / 2;
    (0..v.len())
        .map(|i| if i < h { v[i + h].clone() } else { v[i - h].scale_s(-1.0) })
        .collect()
}

pub fn grad_potential(pot: &PotentialSpec, q: &[f64]) -> Vec<f64> {
    pot.gradient(q)
}

pub(crate) fn check_eps_t(eps: f64, t_ramp: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid("epsilon", format!("must be positive, got {eps}")));
    }
    if !(t_ramp > 0.0 && t_ramp.is_finite()) {
        return Err(Error::invalid("T", format!("must be positive, got {t_ramp}")));
    }
    Ok(())
}

/// Time derivative `(q̇, ṗ)` of the ramped system at `state`.
pub fn ramped_vector_field(
    sys: &SystemSpec,
    ramp: &RampSpec,
    eps: f64,
    t_ramp: f64,
    state: &PhaseState,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_eps_t(eps, t_ramp)?;
    sys.check_len(&state.q)?;
    sys.check_len(&state.p)?;
    let d = sys.dim;
    let mut y = Vec::with_capacity(2 * d);
    y.extend_from_slice(&state.q);
    y.extend_from_slice(&state.p);
    let mut dy = vec![0.0; 2 * d];
    let mut grad = vec![0.0; d];
    ramped_rhs(sys, ramp, eps, t_ramp, state.t, &y, &mut dy, &mut grad);
    let dp = dy.split_off(d);
    Ok((dy, dp))
}

/// Flat-state right-hand side, `y = [q, p]`. `grad` is scratch of length D.
#[allow(clippy::too_many_arguments)]
pub(crate) fn ramped_rhs(
    sys: &SystemSpec,
    ramp: &RampSpec,
    eps: f64,
    t_ramp: f64,
    t: f64,
    y: &[f64],
    dy: &mut [f64],
    grad: &mut [f64],
) {
    let d = sys.dim;
    let h = d / 2;
    let (q, p) = y.split_at(d);
    let rho = ramp.eval(t / t_ramp);
    sys.potential.gradient_into(q, grad);
    let (dq, dp) = dy.split_at_mut(d);
    dq.copy_from_slice(p);
    for i in 0..d {
        let jp = if i < h { p[i + h] } else { -p[i - h] };
        dp[i] = (jp - rho * grad[i]) / eps;
    }
}

/// Fourier modes `(k, f_k)` of the coupling `f(θ) = Σ f_k e^{ikθ}`.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorSpec {
    modes: Vec<(i32, Complex64)>,
}

/// Minimum distance `|kε − 1|` from resonance accepted by the oscillator oracles.
pub const RESONANCE_MARGIN: f64 = 0.1;

impl OscillatorSpec {
    pub fn new(modes: Vec<(i32, Complex64)>) -> Self {
        OscillatorSpec { modes }
    }

    /// `k ∈ {1, 2, 3}` with `f_k = 1/k²`.
    pub fn acceptance_modes() -> Self {
        OscillatorSpec::new(
            (1..=3)
                .map(|k| (k, Complex64::new(1.0 / (k * k) as f64, 0.0)))
                .collect(),
        )
    }

    pub fn single_mode() -> Self {
        OscillatorSpec::new(vec![(1, Complex64::new(1.0, 0.0))])
    }

    pub fn modes(&self) -> &[(i32, Complex64)] {
        &self.modes
    }

    pub fn coupling(&self, theta: f64) -> Complex64 {
        self.modes
            .iter()
            .map(|&(k, fk)| fk * Complex64::from_polar(1.0, k as f64 * theta))
            .sum()
    }

    pub fn check_resonance(&self, eps: f64) -> Result<()> {
        for &(k, _) in &self.modes {
            if (k as f64 * eps - 1.0).abs() < RESONANCE_MARGIN {
                return Err(Error::Resonance { k, eps });
            }
        }
        Ok(())
    }
}

/// `(θ̇, ṗ)` for the ramped oscillator.
pub fn oscillator_vector_field(
    osc: &OscillatorSpec,
    ramp: &RampSpec,
    eps: f64,
    t_ramp: f64,
    theta: f64,
    p: Complex64,
    t: f64,
) -> Result<(f64, Complex64)> {
    check_eps_t(eps, t_ramp)?;
    let rho = ramp.eval(t / t_ramp);
    Ok((1.0, (Complex64::i() * p + osc.coupling(theta) * rho) / eps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ramp::{make_exp_ramp, make_poly_ramp};
    use approx::assert_abs_diff_eq;

    #[test]
    fn symplectic_identities() {
        let j2 = symplectic_matrix(2).unwrap();
        assert_eq!(j2, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert_eq!(&j2 * &j2, -DMatrix::<f64>::identity(2, 2));
        let j4 = symplectic_matrix(4).unwrap();
        assert_eq!(j4.transpose() + &j4, DMatrix::<f64>::zeros(4, 4));
        assert!(matches!(symplectic_matrix(3), Err(Error::OddDimension(3))));
    }

    #[test]
    fn apply_j_matches_matrix() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let j = symplectic_matrix(4).unwrap();
        let expected = &j * nalgebra::DVector::from_row_slice(&v);
        assert_eq!(apply_j(&v), expected.as_slice());
    }

    #[test]
    fn gradients() {
        assert_eq!(grad_potential(&PotentialSpec::Quadratic, &[1.0, 2.0]), vec![1.0, 2.0]);
        let quartic = PotentialSpec::QuadQuartic { lambda: 1.0 };
        assert_eq!(grad_potential(&quartic, &[1.0, 0.0]), vec![2.0, 0.0]);
        for pot in [
            PotentialSpec::Zero,
            PotentialSpec::Quadratic,
            quartic,
            PotentialSpec::Polynomial {
                coefficients: vec![0.0, 0.5, 0.3, 0.1],
            },
        ] {
            assert_eq!(grad_potential(&pot, &[0.0, 0.0]), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn polynomial_gradient_matches_finite_difference() {
        let coefficients = vec![0.2, 0.5, -0.3, 0.25];
        let pot = PotentialSpec::Polynomial {
            coefficients: coefficients.clone(),
        };
        let v = |x: f64| {
            coefficients
                .iter()
                .enumerate()
                .map(|(i, c)| c * x.powi(i as i32 + 1))
                .sum::<f64>()
        };
        let x = 0.7;
        let h = 1e-6;
        let fd = (v(x + h) - v(x - h)) / (2.0 * h);
        assert_abs_diff_eq!(grad_potential(&pot, &[x, 0.0])[0], fd, epsilon = 1e-8);
        let mut out = [0.0; 2];
        pot.gradient_into(&[x, 0.0], &mut out);
        assert_eq!(out[0], grad_potential(&pot, &[x, 0.0])[0]);
    }

    #[test]
    fn potential_parsing() {
        assert_eq!("quad".parse::<PotentialSpec>().unwrap(), PotentialSpec::Quadratic);
        assert_eq!(
            "quad+quart:0.5".parse::<PotentialSpec>().unwrap(),
            PotentialSpec::QuadQuartic { lambda: 0.5 }
        );
        assert_eq!(
            "poly:0, 0.5, 1".parse::<PotentialSpec>().unwrap(),
            PotentialSpec::Polynomial {
                coefficients: vec![0.0, 0.5, 1.0]
            }
        );
        assert!("poly:a".parse::<PotentialSpec>().is_err());
        assert!("cubic".parse::<PotentialSpec>().is_err());
        let p: PotentialSpec = "quad+quart:2".parse().unwrap();
        assert_eq!(p.to_string().parse::<PotentialSpec>().unwrap(), p);
    }

    #[test]
    fn ramped_field_endpoints() {
        let sys = SystemSpec::new(2, PotentialSpec::QuadQuartic { lambda: 1.0 }).unwrap();
        let ramp = make_poly_ramp(2);
        let eps = 0.1;
        let s0 = PhaseState::new(vec![0.3, -0.2], vec![1.0, 2.0], 0.0);
        let (dq, dp) = ramped_vector_field(&sys, &ramp, eps, 1.0, &s0).unwrap();
        assert_eq!(dq, vec![1.0, 2.0]);
        assert_abs_diff_eq!(dp[0], 2.0 / eps, epsilon = 1e-12);
        assert_abs_diff_eq!(dp[1], -1.0 / eps, epsilon = 1e-12);

        let s1 = PhaseState::new(vec![0.3, -0.2], vec![1.0, 2.0], 1.0);
        let (_, dp) = ramped_vector_field(&sys, &ramp, eps, 1.0, &s1).unwrap();
        let g = grad_potential(sys.potential(), &s1.q);
        assert_abs_diff_eq!(dp[0], (2.0 - g[0]) / eps, epsilon = 1e-12);
        assert_abs_diff_eq!(dp[1], (-1.0 - g[1]) / eps, epsilon = 1e-12);

        let rest = PhaseState::new(vec![5.0, 1.0], vec![0.0, 0.0], 0.0);
        let (dq, dp) = ramped_vector_field(&sys, &make_exp_ramp(), eps, 1.0, &rest).unwrap();
        assert_eq!(dq, vec![0.0, 0.0]);
        assert_eq!(dp, vec![0.0, 0.0]);
    }

    #[test]
    fn ramped_field_rejects_bad_parameters() {
        let sys = SystemSpec::new(2, PotentialSpec::Quadratic).unwrap();
        let s = PhaseState::new(vec![0.0; 2], vec![0.0; 2], 0.0);
        let r = make_poly_ramp(1);
        assert!(ramped_vector_field(&sys, &r, 0.0, 1.0, &s).is_err());
        assert!(ramped_vector_field(&sys, &r, 0.1, -1.0, &s).is_err());
        assert!(SystemSpec::new(3, PotentialSpec::Quadratic).is_err());
    }

    #[test]
    fn oscillator_field() {
        let osc = OscillatorSpec::single_mode();
        let ramp = make_poly_ramp(1);
        let eps = 0.1;
        let (dth, dp) =
            oscillator_vector_field(&osc, &ramp, eps, 1.0, 0.0, Complex64::new(0.0, 0.0), 1.0)
                .unwrap();
        assert_eq!(dth, 1.0);
        assert_abs_diff_eq!(dp.re, 1.0 / eps, epsilon = 1e-12);
        assert_abs_diff_eq!(dp.im, 0.0, epsilon = 1e-12);

        let p = Complex64::new(0.3, -0.4);
        let (_, dp) = oscillator_vector_field(&osc, &ramp, eps, 1.0, 1.0, p, 0.0).unwrap();
        assert_eq!(dp, Complex64::i() * p / eps);

        let (_, dp) = oscillator_vector_field(
            &osc,
            &ramp,
            eps,
            1.0,
            std::f64::consts::FRAC_PI_2,
            Complex64::new(0.0, 0.0),
            1.0,
        )
        .unwrap();
        assert_abs_diff_eq!(dp.re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(dp.im, 1.0 / eps, epsilon = 1e-12);
    }

    #[test]
    fn resonance_guard() {
        let osc = OscillatorSpec::acceptance_modes();
        assert!(osc.check_resonance(0.1).is_ok());
        assert!(matches!(
            osc.check_resonance(0.34),
            Err(Error::Resonance { k: 3, .. })
        ));
    }
}
