//! Nested first-order perturbations.
//!
//! A [`Jet`] of depth `d` is a real number carrying `d` independent
//! infinitesimals `δ_0 … δ_{d-1}` with `δ_i² = 0`. It is stored as the
//! `2^d` coefficients of the multilinear polynomial in those
//! infinitesimals, indexed by subset bitmask. Perturbing a point along a
//! direction adds a fresh infinitesimal; reading the coefficient of that
//! infinitesimal back out after evaluating a function gives the
//! Jacobian-vector product. Because every level uses its own
//! infinitesimal, derivatives of functions which themselves take
//! derivatives come out exactly, without perturbation confusion.

use std::fmt;

#[derive(Clone, PartialEq)]
pub struct Jet {
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Jet(d={}, {:?})", self.depth(), self.coeffs)
    }
}

impl Jet {
    pub fn constant(depth: usize, value: f64) -> Self {
        let mut coeffs = vec![0.0; 1 << depth];
        coeffs[0] = value;
        Jet { coeffs }
    }

    pub fn zero(depth: usize) -> Self {
        Jet::constant(depth, 0.0)
    }

    pub fn depth(&self) -> usize {
        self.coeffs.len().trailing_zeros() as usize
    }

    /// Value with all infinitesimals set to zero.
    pub fn real(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Zero-pads to `depth`; a no-op if already at least that deep.
    pub fn lift(&self, depth: usize) -> Jet {
        if self.depth() >= depth {
            return self.clone();
        }
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(1 << depth, 0.0);
        Jet { coeffs }
    }

    /// `self + δ_d · direction`, where `d` is the larger of the two depths.
    pub fn perturbed(&self, direction: &Jet) -> Jet {
        let d = self.depth().max(direction.depth());
        let mut coeffs = self.lift(d).coeffs;
        coeffs.extend_from_slice(&direction.lift(d).coeffs);
        Jet { coeffs }
    }

    /// Splits off the coefficient of infinitesimal `δ_d`, returning
    /// `(primal, tangent)`, both of depth `d`. A jet shallower than `d + 1`
    /// does not depend on `δ_d` and has a zero tangent.
    pub fn split(&self, d: usize) -> (Jet, Jet) {
        if self.depth() <= d {
            return (self.lift(d), Jet::zero(d));
        }
        debug_assert_eq!(self.depth(), d + 1, "jet deeper than expected");
        let half = 1 << d;
        (
            Jet {
                coeffs: self.coeffs[..half].to_vec(),
            },
            Jet {
                coeffs: self.coeffs[half..2 * half].to_vec(),
            },
        )
    }

    pub fn tangent(&self, d: usize) -> Jet {
        self.split(d).1
    }

    pub fn add(&self, other: &Jet) -> Jet {
        let (mut long, short) = if self.coeffs.len() >= other.coeffs.len() {
            (self.coeffs.clone(), &other.coeffs)
        } else {
            (other.coeffs.clone(), &self.coeffs)
        };
        for (a, b) in long.iter_mut().zip(short.iter()) {
            *a += b;
        }
        Jet { coeffs: long }
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_real(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        if self.coeffs.len() == 1 {
            return other.scale(self.coeffs[0]);
        }
        if other.coeffs.len() == 1 {
            return self.scale(other.coeffs[0]);
        }
        let n = self.coeffs.len().max(other.coeffs.len());
        let a = &self.coeffs;
        let b = &other.coeffs;
        let mut out = vec![0.0; n];
        // out[s] = Σ_{u ⊆ s} a[u] b[s \ u]; masks beyond a slice's length are zero.
        for (s, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            let mut u = s;
            loop {
                let v = s ^ u;
                if u < a.len() && v < b.len() {
                    acc += a[u] * b[v];
                }
                if u == 0 {
                    break;
                }
                u = (u - 1) & s;
            }
            *slot = acc;
        }
        Jet { coeffs: out }
    }

    /// Applies a scalar function given its derivatives at the real part:
    /// `Σ_m f^(m)(a)/m! · N^m` with `N = self - a` nilpotent. Needs
    /// `derivs.len() > depth`; higher entries are ignored.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let depth = self.depth();
        assert!(
            derivs.len() > depth,
            "need {} derivatives, got {}",
            depth + 1,
            derivs.len()
        );
        let mut nil = self.clone();
        nil.coeffs[0] = 0.0;
        let mut out = Jet::constant(depth, derivs[0]);
        let mut power = Jet::constant(depth, 1.0);
        let mut factorial = 1.0;
        for (m, dm) in derivs.iter().enumerate().take(depth + 1).skip(1) {
            power = power.mul(&nil);
            factorial *= m as f64;
            out = out.add(&power.scale(dm / factorial));
        }
        out
    }
}

/// Arithmetic needed to evaluate potentials generically over `f64` and [`Jet`].
pub trait Scalar: Clone {
    fn constant_like(&self, value: f64) -> Self;
    fn add_s(&self, other: &Self) -> Self;
    fn mul_s(&self, other: &Self) -> Self;
    fn scale_s(&self, s: f64) -> Self;
}

impl Scalar for f64 {
    fn constant_like(&self, value: f64) -> Self {
        value
    }
    fn add_s(&self, other: &Self) -> Self {
        self + other
    }
    fn mul_s(&self, other: &Self) -> Self {
        self * other
    }
    fn scale_s(&self, s: f64) -> Self {
        self * s
    }
}

impl Scalar for Jet {
    fn constant_like(&self, value: f64) -> Self {
        Jet::constant(self.depth(), value)
    }
    fn add_s(&self, other: &Self) -> Self {
        self.add(other)
    }
    fn mul_s(&self, other: &Self) -> Self {
        self.mul(other)
    }
    fn scale_s(&self, s: f64) -> Self {
        self.scale(s)
    }
}
