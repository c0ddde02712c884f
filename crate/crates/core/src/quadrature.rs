//! Composite Gauss–Legendre rules for complex integrands.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

/// Nodes per panel.
pub(crate) const GL_POINTS: usize = 10;

pub(crate) struct Composite {
    rule: GaussLegendre,
}

impl Composite {
    pub(crate) fn new() -> Self {
        Composite {
            rule: GaussLegendre::new(NonZeroUsize::new(GL_POINTS).expect("nonzero")),
        }
    }

    /// `∫_a^b f` over `panels` equal panels.
    pub(crate) fn integrate<F>(&self, a: f64, b: f64, panels: usize, mut f: F) -> Complex64
    where
        F: FnMut(f64) -> Complex64,
    {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for j in 0..panels {
            let lo = a + j as f64 * h;
            let mid = lo + 0.5 * h;
            let mut acc = Complex64::new(0.0, 0.0);
            for &(x, w) in self.rule.as_node_weight_pairs() {
                acc += w * f(mid + 0.5 * h * x);
            }
            total += 0.5 * h * acc;
        }
        total
    }
}
