//! Damped Newton minimizer shared by the atomistic and QC models.
//!
//! Both energies are invariant under constant shifts of the deformation, so
//! the Hessian is singular along constants. Steps are computed with the last
//! unknown pinned and the iterate is then re-projected onto the gauge.

use crate::banded::SymCyclicBand;
use crate::error::{QcError, Result};

/// A smooth energy on nodal deformation vectors.
pub trait EnergyModel {
    fn dim(&self) -> usize;
    fn energy(&self, y: &[f64]) -> Result<f64>;
    fn gradient(&self, y: &[f64]) -> Result<Vec<f64>>;
    fn hessian(&self, y: &[f64]) -> Result<SymCyclicBand>;
    /// Smallest bond/element stretch; nonpositive means outside the domain.
    fn min_stretch(&self, y: &[f64]) -> f64;
    /// Re-imposes the zero-mean gauge in place.
    fn project(&self, y: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Absolute tolerance on the Euclidean gradient norm.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Iterates must keep every stretch at or above this value.
    pub stretch_floor: f64,
}

impl NewtonOptions {
    /// `‖g‖₂ ≤ 10⁻¹⁰ √dim`, stretches kept above `r_*/4`.
    pub fn for_problem(dim: usize, r_star: f64) -> Self {
        Self {
            tolerance: 1e-10 * (dim as f64).sqrt(),
            max_iterations: 200,
            stretch_floor: if r_star.is_finite() { 0.25 * r_star } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Accepted step length of every iteration.
    pub line_search: Vec<f64>,
    pub min_stretch: f64,
    pub converged: bool,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-12;

/// Minimizes `model` from `y0`. On failure the error carries the iteration
/// count; the caller can rerun with the same guess to inspect the iterate.
pub fn minimize<M: EnergyModel + ?Sized>(model: &M, y0: &[f64], opts: &NewtonOptions) -> Result<(Vec<f64>, SolveReport)> {
    let n = model.dim();
    if y0.len() != n {
        return Err(QcError::param(format!("initial guess has {} entries, expected {n}", y0.len())));
    }
    let mut y = y0.to_vec();
    model.project(&mut y);
    if model.min_stretch(&y) <= opts.stretch_floor.max(0.0) {
        return Err(QcError::Solver {
            iterations: 0,
            reason: format!("initial guess has stretch {} below the floor", model.min_stretch(&y)),
        });
    }
    let mut e = model.energy(&y)?;
    let mut history = Vec::new();
    let pin = n - 1;
    for it in 0..=opts.max_iterations {
        let g = model.gradient(&y)?;
        let gnorm = norm2(&g);
        if gnorm <= opts.tolerance {
            return Ok((
                y.clone(),
                SolveReport {
                    iterations: it,
                    gradient_norm: gnorm,
                    line_search: history,
                    min_stretch: model.min_stretch(&y),
                    converged: true,
                },
            ));
        }
        if it == opts.max_iterations {
            break;
        }
        let mut h = model.hessian(&y)?;
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut shift = 0.0;
        let d = loop {
            match h.solve_pinned(&rhs, pin) {
                Ok(d) => break d,
                Err(_) => {
                    let next = if shift == 0.0 { 1e-8 * h.max_abs_diagonal().max(1.0) } else { shift };
                    h.add_to_diagonal(next);
                    shift += next;
                    if shift > 1e12 {
                        return Err(QcError::Solver {
                            iterations: it,
                            reason: "Hessian could not be regularized".into(),
                        });
                    }
                }
            }
        };
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            return Err(QcError::Solver {
                iterations: it,
                reason: "Newton direction is not a descent direction".into(),
            });
        }
        // Energy differences below this are rounding noise.
        let slack = 1e-14 * (1.0 + e.abs()) * (n as f64).sqrt();
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            if model.min_stretch(&trial) > opts.stretch_floor.max(0.0) {
                if let Ok(et) = model.energy(&trial) {
                    if et <= e + ARMIJO_C * alpha * slope + slack {
                        y = trial;
                        model.project(&mut y);
                        e = model.energy(&y)?;
                        break;
                    }
                }
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                return Err(QcError::Solver {
                    iterations: it,
                    reason: format!("line search failed (gradient norm {gnorm:.3e})"),
                });
            }
        }
        history.push(alpha);
    }
    let g = model.gradient(&y)?;
    Err(QcError::Solver {
        iterations: opts.max_iterations,
        reason: format!("no convergence, gradient norm {:.3e}", norm2(&g)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// E(y) = Σ ½ k (y_i - y_{i-1} - 1)² + ¼ (y_i - y_{i-1} - 1)⁴ on a ring.
    struct Ring {
        n: usize,
    }

    impl Ring {
        fn s(&self, y: &[f64], i: usize) -> f64 {
            let prev = if i == 0 { y[self.n - 1] - self.n as f64 } else { y[i - 1] };
            y[i] - prev
        }
    }

    impl EnergyModel for Ring {
        fn dim(&self) -> usize {
            self.n
        }
        fn energy(&self, y: &[f64]) -> Result<f64> {
            Ok((0..self.n)
                .map(|i| {
                    let d = self.s(y, i) - 1.0 + 0.1 * (i as f64).sin();
                    0.5 * d * d + 0.25 * d.powi(4)
                })
                .sum())
        }
        fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
            let mut g = vec![0.0; self.n];
            for i in 0..self.n {
                let d = self.s(y, i) - 1.0 + 0.1 * (i as f64).sin();
                let w = d + d.powi(3);
                g[i] += w;
                g[(i + self.n - 1) % self.n] -= w;
            }
            Ok(g)
        }
        fn hessian(&self, y: &[f64]) -> Result<SymCyclicBand> {
            let mut h = SymCyclicBand::new(self.n, 1);
            for i in 0..self.n {
                let d = self.s(y, i) - 1.0 + 0.1 * (i as f64).sin();
                let w = 1.0 + 3.0 * d * d;
                let j = (i + self.n - 1) % self.n;
                h.add(i, i, w);
                h.add(j, j, w);
                h.add(i, j, -w);
            }
            Ok(h)
        }
        fn min_stretch(&self, y: &[f64]) -> f64 {
            (0..self.n).map(|i| self.s(y, i)).fold(f64::INFINITY, f64::min)
        }
        fn project(&self, y: &mut [f64]) {
            let m = y.iter().enumerate().map(|(i, v)| v - (i + 1) as f64).sum::<f64>() / self.n as f64;
            y.iter_mut().for_each(|v| *v -= m);
        }
    }

    #[test]
    fn converges_on_a_convex_ring() {
        let ring = Ring { n: 20 };
        let y0: Vec<f64> = (1..=20).map(|i| i as f64).collect();
        let opts = NewtonOptions::for_problem(20, f64::INFINITY);
        let (y, rep) = minimize(&ring, &y0, &opts).unwrap();
        assert!(rep.converged);
        assert!(rep.iterations < 20);
        assert!(norm2(&ring.gradient(&y).unwrap()) <= opts.tolerance);
        assert_eq!(rep.line_search.len(), rep.iterations);
    }

    #[test]
    fn rejects_inadmissible_guess() {
        let ring = Ring { n: 10 };
        let y0: Vec<f64> = (1..=10).map(|i| -(i as f64)).collect();
        let err = minimize(&ring, &y0, &NewtonOptions::for_problem(10, 2.0)).unwrap_err();
        assert!(matches!(err, QcError::Solver { iterations: 0, .. }));
    }
}
