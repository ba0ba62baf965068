//! A posteriori stability of the atomistic Hessian.
//!
//! With `A_c = φ''(s_c) + 2φ''(s_{c-1}+s_c) + 2φ''(s_c+s_{c+1})` and
//! `B_c = -φ''(s_c+s_{c+1})` the second variation reads
//! `ε Σ A_c |v'_c|² + ε Σ B_c ε² |v''_c|²`, so `A_* = min A_c` bounds it from
//! below whenever every `B_c ≥ 0`.

use crate::atomistic::AtomisticState;
use crate::error::{QcError, Result};
use crate::potential::Potential;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// `min A_c`.
    pub a_star: f64,
    /// Smallest nearest-neighbour stretch μ.
    pub min_stretch: f64,
    /// `μ ≥ r_*/2`: all next-nearest bonds sit in the concave range.
    pub stretch_ok: bool,
    /// `M₃([μ,∞)) + 8 M₃([2μ,∞))`; `None` for potentials without a decaying tail.
    pub c_lip: Option<f64>,
    /// `½ M₂([μ,∞)) + 2 M₂([2μ,∞))`.
    pub c_energy: Option<f64>,
}

impl StabilityReport {
    /// Both hypotheses of the coercivity bound hold.
    pub fn is_stable(&self) -> bool {
        self.stretch_ok && self.a_star > 0.0
    }
}

/// `(A_c, B_c)` for the nearest-neighbour strains `s`.
pub fn coefficients(potential: &Potential, s: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = s.len();
    let t = |c: usize| s[c] + s[(c + 1) % n];
    let a = (0..n)
        .map(|c| potential.d2(s[c]) + 2.0 * potential.d2(t((c + n - 1) % n)) + 2.0 * potential.d2(t(c)))
        .collect();
    let b = (0..n).map(|c| -potential.d2(t(c))).collect();
    (a, b)
}

/// `ε Σ A_c |v'_c|² + ε Σ B_c ε² |v''_c|²` for slopes `dv`.
pub fn rewritten_form(a: &[f64], b: &[f64], dv: &[f64]) -> f64 {
    let n = dv.len();
    let eps = 1.0 / n as f64;
    (0..n)
        .map(|c| {
            let jump = dv[(c + 1) % n] - dv[c]; // ε v''_c
            eps * (a[c] * dv[c] * dv[c] + b[c] * jump * jump)
        })
        .sum()
}

/// Stability constants at a lattice state, typically `J_{𝒰_qc} y_qc`.
pub fn assess_stability(y: &AtomisticState, potential: &Potential) -> Result<StabilityReport> {
    let s = y.strains();
    let mu = s.iter().copied().fold(f64::INFINITY, f64::min);
    if !(mu > 0.0) {
        return Err(QcError::Domain {
            location: "stability assessment".into(),
            value: mu,
        });
    }
    let (a, b) = coefficients(potential, &s);
    let a_star = a.iter().copied().fold(f64::INFINITY, f64::min);
    let (c_lip, c_energy) = if potential.has_decaying_tail() {
        (
            Some(potential.derivative_bound(3, mu)? + 8.0 * potential.derivative_bound(3, 2.0 * mu)?),
            Some(0.5 * potential.derivative_bound(2, mu)? + 2.0 * potential.derivative_bound(2, 2.0 * mu)?),
        )
    } else {
        (None, None)
    };
    Ok(StabilityReport {
        a,
        b,
        a_star,
        min_stretch: mu,
        stretch_ok: mu >= 0.5 * potential.r_star(),
        c_lip,
        c_energy,
    })
}
