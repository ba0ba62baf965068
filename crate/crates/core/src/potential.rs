//! Pair interaction potentials with closed-form derivatives up to third order.
//!
//! All potentials are value objects; nothing in the production path uses
//! numerical differentiation. [`Potential::derivative_bound`] gives upper
//! bounds for `sup |φ^(k)|` on half-lines `[μ, ∞)`, used by the Lipschitz
//! constants of the stability module.

use crate::error::{QcError, Result};

/// Stiffness parameter of the Morse potential.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MorseParams {
    pub alpha: f64,
}

/// A pair potential φ on (0, ∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Potential {
    /// φ(r) = e^{-2α(r-1)} - 2 e^{-α(r-1)}
    Morse(MorseParams),
    /// φ(r) = r^{-12} - 2 r^{-6}, equilibrium at r = 1 with depth -1.
    LennardJones,
    /// φ(r) = ½ k (r - 1)². Convex everywhere, no decaying tail; handy for
    /// linear sanity checks but rejected by [`Potential::derivative_bound`].
    Harmonic { stiffness: f64 },
}

/// Sampling window (lattice units) used by [`Potential::derivative_bound`].
pub const BOUND_WINDOW: f64 = 10.0;
const BOUND_SAMPLES: usize = 20_001;

impl Potential {
    pub fn morse(params: MorseParams) -> Result<Self> {
        if !(params.alpha > 0.0) || !params.alpha.is_finite() {
            return Err(QcError::param(format!(
                "Morse stiffness must be positive, got {}",
                params.alpha
            )));
        }
        Ok(Potential::Morse(params))
    }

    pub fn harmonic(stiffness: f64) -> Result<Self> {
        if !(stiffness > 0.0) || !stiffness.is_finite() {
            return Err(QcError::param(format!(
                "harmonic stiffness must be positive, got {stiffness}"
            )));
        }
        Ok(Potential::Harmonic { stiffness })
    }

    #[inline]
    pub fn phi(&self, r: f64) -> f64 {
        match *self {
            Potential::Morse(MorseParams { alpha }) => {
                let e = (-alpha * (r - 1.0)).exp();
                e * e - 2.0 * e
            }
            Potential::LennardJones => {
                let i6 = r.powi(-6);
                i6 * i6 - 2.0 * i6
            }
            Potential::Harmonic { stiffness } => 0.5 * stiffness * (r - 1.0) * (r - 1.0),
        }
    }

    #[inline]
    pub fn d1(&self, r: f64) -> f64 {
        match *self {
            Potential::Morse(MorseParams { alpha }) => {
                let e = (-alpha * (r - 1.0)).exp();
                -2.0 * alpha * (e * e - e)
            }
            Potential::LennardJones => {
                let i6 = r.powi(-6);
                (-12.0 * i6 * i6 + 12.0 * i6) / r
            }
            Potential::Harmonic { stiffness } => stiffness * (r - 1.0),
        }
    }

    #[inline]
    pub fn d2(&self, r: f64) -> f64 {
        match *self {
            Potential::Morse(MorseParams { alpha }) => {
                let e = (-alpha * (r - 1.0)).exp();
                alpha * alpha * (4.0 * e * e - 2.0 * e)
            }
            Potential::LennardJones => {
                let i6 = r.powi(-6);
                (156.0 * i6 * i6 - 84.0 * i6) / (r * r)
            }
            Potential::Harmonic { stiffness } => stiffness,
        }
    }

    #[inline]
    pub fn d3(&self, r: f64) -> f64 {
        match *self {
            Potential::Morse(MorseParams { alpha }) => {
                let e = (-alpha * (r - 1.0)).exp();
                alpha * alpha * alpha * (-8.0 * e * e + 2.0 * e)
            }
            Potential::LennardJones => {
                let i6 = r.powi(-6);
                (-2184.0 * i6 * i6 + 672.0 * i6) / (r * r * r)
            }
            Potential::Harmonic { .. } => 0.0,
        }
    }

    /// Derivative of order 0..=3.
    pub fn derivative(&self, order: u8, r: f64) -> f64 {
        match order {
            0 => self.phi(r),
            1 => self.d1(r),
            2 => self.d2(r),
            3 => self.d3(r),
            _ => panic!("derivative order {order} not available"),
        }
    }

    /// Inflection radius r_*: φ is convex on (0, r_*) and concave beyond.
    pub fn r_star(&self) -> f64 {
        match *self {
            Potential::Morse(MorseParams { alpha }) => 1.0 + std::f64::consts::LN_2 / alpha,
            Potential::LennardJones => (13.0f64 / 7.0).powf(1.0 / 6.0),
            Potential::Harmonic { .. } => f64::INFINITY,
        }
    }

    pub fn has_decaying_tail(&self) -> bool {
        !matches!(self, Potential::Harmonic { .. })
    }

    /// A nonincreasing envelope `E(r) ≥ |φ^(order)(s)|` for all `s ≥ r`.
    fn tail_envelope(&self, order: u8, r: f64) -> Option<f64> {
        match *self {
            Potential::Morse(MorseParams { alpha }) => {
                // |φ^(k)| ≤ α^k (2^k e^{-2α(r-1)} + 2 e^{-α(r-1)}), both terms decreasing.
                let e = (-alpha * (r - 1.0)).exp();
                let k = order as i32;
                Some(alpha.powi(k) * (2f64.powi(k) * e * e + 2.0 * e))
            }
            Potential::LennardJones => {
                // |d^k r^{-12}| + 2 |d^k r^{-6}|, each decreasing in r.
                let (c12, c6) = match order {
                    0 => (1.0, 1.0),
                    1 => (12.0, 6.0),
                    2 => (156.0, 42.0),
                    3 => (2184.0, 336.0),
                    _ => return None,
                };
                let k = order as i32;
                Some(c12 * r.powi(-12 - k) + 2.0 * c6 * r.powi(-6 - k))
            }
            Potential::Harmonic { .. } => None,
        }
    }

    /// Upper bound for `max_{r ≥ μ} |φ^(order)(r)|`, `order ∈ {2, 3}`.
    ///
    /// Dense sampling of `[μ, μ + W]` with golden-section refinement of every
    /// sampled local maximum, combined with the analytic tail envelope beyond
    /// `μ + W`.
    pub fn derivative_bound(&self, order: u8, mu: f64) -> Result<f64> {
        if order != 2 && order != 3 {
            return Err(QcError::param(format!(
                "derivative bounds are provided for orders 2 and 3, got {order}"
            )));
        }
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(QcError::param(format!("mu must be positive, got {mu}")));
        }
        if !self.has_decaying_tail() {
            return Err(QcError::param(
                "potential has no decaying tail; derivative bound is unverifiable",
            ));
        }
        let g = |r: f64| self.derivative(order, r).abs();
        let h = BOUND_WINDOW / (BOUND_SAMPLES - 1) as f64;
        let grid: Vec<f64> = (0..BOUND_SAMPLES).map(|i| g(mu + h * i as f64)).collect();
        let mut best = grid[0].max(grid[BOUND_SAMPLES - 1]);
        for i in 1..BOUND_SAMPLES - 1 {
            if grid[i] >= grid[i - 1] && grid[i] >= grid[i + 1] {
                let lo = mu + h * (i - 1) as f64;
                let peak = golden_max(&g, lo, lo + 2.0 * h);
                best = best.max(grid[i]).max(peak);
            }
        }
        let tail = self
            .tail_envelope(order, mu + BOUND_WINDOW)
            .expect("decaying potentials provide an envelope");
        Ok((best * (1.0 + 1e-9)).max(tail))
    }
}

/// Maximum of a unimodal function on `[a, b]` by golden-section search.
fn golden_max(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..80 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d);
        }
        if b - a < 1e-15 * (1.0 + a.abs()) {
            break;
        }
    }
    gc.max(gd).max(g(0.5 * (a + b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn morse5() -> Potential {
        Potential::morse(MorseParams { alpha: 5.0 }).unwrap()
    }

    #[test]
    fn morse_values_at_equilibrium() {
        let p = morse5();
        assert_eq!(p.phi(1.0), -1.0);
        assert_eq!(p.d1(1.0), 0.0);
        assert!((p.d2(1.0) - 50.0).abs() < 1e-12);
        let expected = (-10f64).exp() - 2.0 * (-5f64).exp();
        assert!((p.phi(2.0) - expected).abs() < 1e-15);
        assert!((p.phi(2.0) + 0.01343).abs() < 5e-6);
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        assert!(Potential::morse(MorseParams { alpha: 0.0 }).is_err());
        assert!(Potential::morse(MorseParams { alpha: -1.0 }).is_err());
        assert!(Potential::morse(MorseParams { alpha: f64::NAN }).is_err());
    }

    fn fd_order_ratio(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, r: f64) -> f64 {
        let err = |h: f64| ((f(r + h) - f(r - h)) / (2.0 * h) - df(r)).abs();
        err(1e-2) / err(5e-3)
    }

    #[test]
    fn derivatives_match_central_differences() {
        for p in [morse5(), Potential::LennardJones] {
            for r in [0.8, 1.0, 1.5] {
                let ratios = [
                    fd_order_ratio(|x| p.phi(x), |x| p.d1(x), r),
                    fd_order_ratio(|x| p.d1(x), |x| p.d2(x), r),
                    fd_order_ratio(|x| p.d2(x), |x| p.d3(x), r),
                ];
                for q in ratios {
                    assert!((q - 4.0).abs() < 0.2, "{p:?} r={r}: ratio {q}");
                }
            }
        }
    }

    #[test]
    fn curvature_changes_sign_at_r_star() {
        for p in [morse5(), Potential::LennardJones] {
            let rs = p.r_star();
            assert!(p.d2(rs - 1e-3) > 0.0);
            assert!(p.d2(rs + 1e-3) < 0.0);
            assert!(p.d2(rs).abs() < 1e-9);
        }
    }

    #[test]
    fn morse_second_derivative_bound_on_unit_half_line() {
        let b = morse5().derivative_bound(2, 1.0).unwrap();
        assert!(b >= 50.0 && b <= 50.0 * (1.0 + 1e-6), "{b}");
    }

    #[test]
    fn morse_third_derivative_bound_matches_scan() {
        let p = morse5();
        let b = p.derivative_bound(3, 2.0).unwrap();
        let scan = (0..=200_000)
            .map(|i| p.d3(2.0 + 1e-4 * i as f64).abs())
            .fold(0.0, f64::max);
        assert!(b >= scan && (b - scan) / scan < 1e-3, "{b} vs {scan}");
    }

    #[test]
    fn bound_catches_interior_peak() {
        // |φ''| for Morse has an interior maximum beyond r_* (the concave well).
        let p = morse5();
        let mu = p.r_star();
        let b = p.derivative_bound(2, mu).unwrap();
        let scan = (0..=100_000)
            .map(|i| p.d2(mu + 1e-5 * i as f64).abs())
            .fold(0.0, f64::max);
        assert!(b >= scan);
    }

    #[test]
    fn bound_monotone_in_mu() {
        for p in [morse5(), Potential::LennardJones] {
            for order in [2, 3] {
                let mut prev = f64::INFINITY;
                for mu in [0.6, 0.9, 1.0, 1.2, 2.0, 3.5] {
                    let b = p.derivative_bound(order, mu).unwrap();
                    assert!(b <= prev * (1.0 + 1e-12));
                    prev = b;
                }
            }
        }
    }

    #[test]
    fn bound_rejects_non_decaying_potential() {
        let p = Potential::harmonic(3.0).unwrap();
        assert!(p.derivative_bound(2, 1.0).is_err());
        assert!(morse5().derivative_bound(1, 1.0).is_err());
        assert!(morse5().derivative_bound(2, 0.0).is_err());
    }
}
