//! Consistent energy-based QC energy on a mesh and its minimizer.
//!
//! Each bond contributes `a_b = (|b∩Ω_a|/r) φ(r D_{b∩Ω_a} y)` and
//! `c_b = (1/r) ∫_{b∩Ω_c} φ(r y')`. The continuum integrals are exact sums
//! over at most two element pieces, and are folded into per-element weights
//! `W_{e,r} = Σ_b |b ∩ T_e| / r` once per mesh.

use std::sync::Arc;

use crate::banded::SymCyclicBand;
use crate::error::{QcError, Result};
use crate::field::{Field, FieldKind};
use crate::lattice::{classify_bonds, BondSet, Mesh, Region};
use crate::newton::{minimize, EnergyModel, NewtonOptions, SolveReport};
use crate::par;
use crate::potential::Potential;

/// `D_ω y = (y(R_ω) - y(L_ω)) / |ω|`.
pub fn bond_difference(y: &Field, lo: f64, hi: f64) -> Result<f64> {
    if !(hi > lo) {
        return Err(QcError::param(format!("empty bond interval ({lo}, {hi})")));
    }
    Ok((y.value_at(hi) - y.value_at(lo)) / (hi - lo))
}

/// A QC deformation on the mesh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct QcState {
    mesh: Arc<Mesh>,
    y: Field,
}

impl QcState {
    pub fn new(mesh: Arc<Mesh>, y: Vec<f64>) -> Result<Self> {
        let kind = FieldKind::Deformation {
            big_f: mesh.config().big_f(),
        };
        let y = Field::new(mesh.partition().clone(), y, kind)?;
        Ok(Self { mesh, y })
    }

    pub fn homogeneous(mesh: Arc<Mesh>) -> Self {
        let big_f = mesh.config().big_f();
        let y = Field::from_fn(mesh.partition().clone(), FieldKind::Deformation { big_f }, |x| big_f * x);
        Self { mesh, y }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn field(&self) -> &Field {
        &self.y
    }

    pub fn values(&self) -> &[f64] {
        self.y.values()
    }

    /// `y_h'|_{T_e}` for every element.
    pub fn element_gradients(&self) -> Vec<f64> {
        self.y.derivative()
    }
}

#[derive(Debug, Clone, Copy)]
struct AtomisticTerm {
    left: usize,
    right: usize,
    len: f64,
    r: f64,
}

/// QC total energy `E_qc(y) = Σ_b (a_b + c_b) - ⟨f, u_h⟩_h`.
#[derive(Debug, Clone)]
pub struct QcModel {
    mesh: Arc<Mesh>,
    bonds: Arc<BondSet>,
    potential: Potential,
    terms: Vec<AtomisticTerm>,
    /// `W_{e,1}`, `W_{e,2}`.
    weights: Vec<[f64; 2]>,
    /// `f(x_k)` and its version with zero trapezoidal mean.
    force: Vec<f64>,
    force_centered: Vec<f64>,
    trap: Vec<f64>,
}

impl QcModel {
    /// `force` is a lattice field, evaluated at the nodes via `I_ε f`.
    pub fn new(mesh: Arc<Mesh>, potential: Potential, force: Option<&Field>) -> Result<Self> {
        let bonds = Arc::new(classify_bonds(&mesh)?);
        Self::with_bonds(mesh, bonds, potential, force)
    }

    pub fn with_bonds(mesh: Arc<Mesh>, bonds: Arc<BondSet>, potential: Potential, force: Option<&Field>) -> Result<Self> {
        let k = mesh.len();
        let mut weights = vec![[0.0; 2]; k];
        let mut terms = Vec::new();
        for b in bonds.bonds() {
            let r = b.r as f64;
            for piece in &b.continuum {
                weights[piece.element][b.r - 1] += piece.len / r;
            }
            if let Some(a) = b.atomistic {
                terms.push(AtomisticTerm {
                    left: a.left,
                    right: a.right,
                    len: a.len,
                    r,
                });
            }
        }
        let trap = mesh.partition().trapezoid_weights();
        let force: Vec<f64> = match force {
            None => vec![0.0; k],
            Some(f) => {
                if f.partition().len() != mesh.config().n() {
                    return Err(QcError::param("force must be given on the lattice partition"));
                }
                mesh.nodes().iter().map(|nd| f.value_at(nd.x)).collect()
            }
        };
        let mean: f64 = force.iter().zip(&trap).map(|(f, w)| f * w).sum();
        let force_centered = force.iter().map(|f| f - mean).collect();
        Ok(Self {
            mesh,
            bonds,
            potential,
            terms,
            weights,
            force,
            force_centered,
            trap,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn bonds(&self) -> &Arc<BondSet> {
        &self.bonds
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `W_{e,r}`; equals `ε_e^h` for continuum elements (bond density).
    pub fn continuum_weight(&self, e: usize, r: usize) -> f64 {
        self.weights[e][r - 1]
    }

    /// `f(x_k)` at the mesh nodes.
    pub fn nodal_force(&self) -> &[f64] {
        &self.force
    }

    /// `u_k = y_k - F x_k`. Differencing `u` rather than `y` keeps the
    /// homogeneous state free of cancellation error.
    fn displacement(&self, y: &[f64]) -> Vec<f64> {
        let big_f = self.mesh.config().big_f();
        y.iter().zip(self.mesh.nodes()).map(|(&v, nd)| v - big_f * nd.x).collect()
    }

    pub fn element_gradients(&self, y: &[f64]) -> Vec<f64> {
        let big_f = self.mesh.config().big_f();
        let u = self.displacement(y);
        let k = u.len();
        (0..k)
            .map(|e| big_f + (u[e] - u[(e + k - 1) % k]) / self.mesh.element_size(e))
            .collect()
    }

    fn term_stretch(&self, u: &[f64], t: &AtomisticTerm) -> f64 {
        t.r * (self.mesh.config().big_f() + (u[t.right] - u[t.left]) / t.len)
    }

    fn check(&self, y: &[f64], g: &[f64]) -> Result<()> {
        let u = self.displacement(y);
        for (e, &ge) in g.iter().enumerate() {
            if !(ge > 0.0) {
                return Err(QcError::Domain {
                    location: format!("element {e}"),
                    value: ge,
                });
            }
        }
        for t in &self.terms {
            let s = self.term_stretch(&u, t);
            if !(s > 0.0) {
                return Err(QcError::Domain {
                    location: format!("atomistic bond between nodes {} and {}", t.left, t.right),
                    value: s,
                });
            }
        }
        Ok(())
    }

    /// Stored energy `𝓔_qc(y)`.
    pub fn stored_energy(&self, y: &[f64]) -> Result<f64> {
        let u = self.displacement(y);
        let g = self.element_gradients(y);
        self.check(y, &g)?;
        let p = &self.potential;
        let a: Vec<f64> = par::map_slice(&self.terms, |t| t.len / t.r * p.phi(self.term_stretch(&u, t)));
        let c: Vec<f64> = par::map_range(g.len(), |e| {
            if self.mesh.element_region(e) == Region::Continuum {
                self.weights[e][0] * p.phi(g[e]) + self.weights[e][1] * p.phi(2.0 * g[e])
            } else {
                0.0
            }
        });
        Ok(a.iter().sum::<f64>() + c.iter().sum::<f64>())
    }

    /// `⟨f, u_h⟩_h` with the nodal force as given.
    pub fn external_energy(&self, y: &[f64]) -> f64 {
        self.external_with(&self.force, y)
    }

    fn external_with(&self, f: &[f64], y: &[f64]) -> f64 {
        let big_f = self.mesh.config().big_f();
        y.iter()
            .zip(self.mesh.nodes())
            .zip(f.iter().zip(&self.trap))
            .map(|((&v, nd), (&fk, &w))| w * fk * (v - big_f * nd.x))
            .sum()
    }

    /// `𝓔_qc'(y)` as a nodal vector.
    pub fn stored_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let u = self.displacement(y);
        let g = self.element_gradients(y);
        self.check(y, &g)?;
        let k = y.len();
        let p = &self.potential;
        let mut out = vec![0.0; k];
        for t in &self.terms {
            let d = p.d1(self.term_stretch(&u, t));
            out[t.right] += d;
            out[t.left] -= d;
        }
        for e in 0..k {
            if self.mesh.element_region(e) != Region::Continuum {
                continue;
            }
            let l = self.mesh.left_node(e);
            if l == e {
                continue;
            }
            let h = self.mesh.element_size(e);
            let w = (self.weights[e][0] * p.d1(g[e]) + 2.0 * self.weights[e][1] * p.d1(2.0 * g[e])) / h;
            out[e] += w;
            out[l] -= w;
        }
        Ok(out)
    }
}

impl EnergyModel for QcModel {
    fn dim(&self) -> usize {
        self.mesh.len()
    }

    /// Uses the force with zero trapezoidal mean; on gauge-fixed states this
    /// equals `𝓔_qc - ⟨f, u_h⟩_h`.
    fn energy(&self, y: &[f64]) -> Result<f64> {
        Ok(self.stored_energy(y)? - self.external_with(&self.force_centered, y))
    }

    fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.stored_gradient(y)?;
        for ((gi, f), w) in g.iter_mut().zip(&self.force_centered).zip(&self.trap) {
            *gi -= w * f;
        }
        Ok(g)
    }

    fn hessian(&self, y: &[f64]) -> Result<SymCyclicBand> {
        let u = self.displacement(y);
        let g = self.element_gradients(y);
        self.check(y, &g)?;
        let k = y.len();
        let p = &self.potential;
        let mut h = SymCyclicBand::new(k, 2);
        for t in &self.terms {
            let c = t.r * p.d2(self.term_stretch(&u, t)) / t.len;
            h.add(t.right, t.right, c);
            h.add(t.left, t.left, c);
            h.add(t.right, t.left, -c);
        }
        for e in 0..k {
            if self.mesh.element_region(e) != Region::Continuum {
                continue;
            }
            let l = self.mesh.left_node(e);
            if l == e {
                continue;
            }
            let he = self.mesh.element_size(e);
            let c = (self.weights[e][0] * p.d2(g[e]) + 4.0 * self.weights[e][1] * p.d2(2.0 * g[e])) / (he * he);
            h.add(e, e, c);
            h.add(l, l, c);
            h.add(e, l, -c);
        }
        Ok(h)
    }

    fn min_stretch(&self, y: &[f64]) -> f64 {
        let u = self.displacement(y);
        let g = self.element_gradients(y);
        let m = g.iter().copied().fold(f64::INFINITY, f64::min);
        self.terms
            .iter()
            .map(|t| self.term_stretch(&u, t) / t.r)
            .fold(m, f64::min)
    }

    fn project(&self, y: &mut [f64]) {
        let big_f = self.mesh.config().big_f();
        let m: f64 = y
            .iter()
            .zip(self.mesh.nodes())
            .zip(&self.trap)
            .map(|((&v, nd), &w)| w * (v - big_f * nd.x))
            .sum();
        y.iter_mut().for_each(|v| *v -= m);
    }
}

/// Minimizes the QC energy; the initial guess defaults to `y = Fx`.
pub fn solve_qc(
    mesh: Arc<Mesh>,
    potential: Potential,
    force: Option<&Field>,
    initial: Option<&QcState>,
) -> Result<(QcState, SolveReport)> {
    let model = QcModel::new(mesh.clone(), potential, force)?;
    solve_with(&model, initial)
}

/// As [`solve_qc`] with a prebuilt model.
pub fn solve_with(model: &QcModel, initial: Option<&QcState>) -> Result<(QcState, SolveReport)> {
    let mesh = model.mesh().clone();
    let y0 = initial.map_or_else(|| QcState::homogeneous(mesh.clone()), Clone::clone);
    let opts = NewtonOptions::for_problem(mesh.len(), model.potential().r_star());
    let (y, report) = minimize(model, y0.values(), &opts)?;
    Ok((QcState::new(mesh, y)?, report))
}
