//! The fully atomistic chain with nearest and next-nearest neighbour bonds.
//!
//! Unknowns are `y[i] = y((i + 1)ε)`, `i = 0..N`; cell `c = [cε, (c+1)ε]`
//! carries the strain `s_c = (y[c] - y[c-1])/ε` with `y[-1] = y[N-1] - F`.

use std::sync::Arc;

use crate::banded::SymCyclicBand;
use crate::error::{QcError, Result};
use crate::field::{Field, FieldKind, Partition};
use crate::lattice::ChainConfig;
use crate::newton::{minimize, EnergyModel, NewtonOptions, SolveReport};
use crate::potential::Potential;

/// Atomistic deformation on one period.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomisticState {
    y: Field,
}

impl AtomisticState {
    pub fn new(cfg: &ChainConfig, y: Vec<f64>) -> Result<Self> {
        let y = Field::new(
            cfg.lattice_partition(),
            y,
            FieldKind::Deformation { big_f: cfg.big_f() },
        )?;
        Ok(Self { y })
    }

    /// Wraps a deformation field living on the lattice partition.
    pub fn from_field(cfg: &ChainConfig, y: Field) -> Result<Self> {
        if y.partition().len() != cfg.n() {
            return Err(QcError::param("atomistic state must live on the lattice partition"));
        }
        Ok(Self { y })
    }

    /// `y = Fx`.
    pub fn homogeneous(cfg: &ChainConfig) -> Self {
        let big_f = cfg.big_f();
        Self {
            y: Field::from_fn(cfg.lattice_partition(), FieldKind::Deformation { big_f }, |x| big_f * x),
        }
    }

    pub fn field(&self) -> &Field {
        &self.y
    }

    pub fn values(&self) -> &[f64] {
        self.y.values()
    }

    /// Nearest-neighbour strains `y'_c`.
    pub fn strains(&self) -> Vec<f64> {
        self.y.derivative()
    }

    pub fn min_stretch(&self) -> f64 {
        let s = self.strains();
        let n = s.len();
        (0..n)
            .map(|c| s[c].min(s[c] + s[(c + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Atomistic energy `E_a(y) = ε Σ φ(s_c) + ε Σ φ(s_c + s_{c+1}) - ⟨f, u⟩_ε`.
#[derive(Debug, Clone)]
pub struct AtomisticModel {
    cfg: ChainConfig,
    potential: Potential,
    force: Vec<f64>,
    x: Arc<Partition>,
}

impl AtomisticModel {
    /// `force` must live on the lattice partition; `None` means `f = 0`.
    pub fn new(cfg: &ChainConfig, potential: Potential, force: Option<&Field>) -> Result<Self> {
        let n = cfg.n();
        let force = match force {
            None => vec![0.0; n],
            Some(f) if f.partition().len() == n => f.values().to_vec(),
            Some(f) => {
                return Err(QcError::param(format!(
                    "force has {} nodal values, expected {n}",
                    f.partition().len()
                )))
            }
        };
        Ok(Self {
            cfg: *cfg,
            potential,
            force,
            x: cfg.lattice_partition(),
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    fn strains(&self, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        let nf = n as f64;
        let big_f = self.cfg.big_f();
        let u: Vec<f64> = y.iter().zip(self.x.nodes()).map(|(&v, &x)| v - big_f * x).collect();
        (0..n).map(|c| big_f + (u[c] - u[(c + n - 1) % n]) * nf).collect()
    }

    fn check(&self, s: &[f64]) -> Result<()> {
        let n = s.len();
        for c in 0..n {
            if !(s[c] > 0.0) {
                return Err(QcError::Domain {
                    location: format!("nearest-neighbour bond ({c}, {})", c + 1),
                    value: s[c],
                });
            }
            let t = s[c] + s[(c + 1) % n];
            if !(t > 0.0) {
                return Err(QcError::Domain {
                    location: format!("next-nearest-neighbour bond ({c}, {})", c + 2),
                    value: t,
                });
            }
        }
        Ok(())
    }

    /// Stored energy `𝓔_a(y)`.
    pub fn stored_energy(&self, y: &[f64]) -> Result<f64> {
        let s = self.strains(y);
        self.check(&s)?;
        let n = s.len();
        let eps = self.cfg.eps();
        let sum: f64 = (0..n)
            .map(|c| self.potential.phi(s[c]) + self.potential.phi(s[c] + s[(c + 1) % n]))
            .sum();
        Ok(eps * sum)
    }

    /// `⟨f, u⟩_ε` with `u = y - Fx`.
    pub fn external_energy(&self, y: &[f64]) -> f64 {
        let eps = self.cfg.eps();
        let big_f = self.cfg.big_f();
        y.iter()
            .zip(self.x.nodes())
            .zip(&self.force)
            .map(|((&v, &x), &f)| eps * f * (v - big_f * x))
            .sum()
    }

    /// `𝓔_a'(y)` as a nodal vector (without the external term).
    pub fn stored_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let s = self.strains(y);
        self.check(&s)?;
        let n = s.len();
        let p = &self.potential;
        let d1: Vec<f64> = s.iter().map(|&v| p.d1(v)).collect();
        let d2: Vec<f64> = (0..n).map(|c| p.d1(s[c] + s[(c + 1) % n])).collect();
        Ok((0..n)
            .map(|i| {
                let ip = (i + 1) % n;
                let im = (i + n - 1) % n;
                d1[i] - d1[ip] + d2[im] - d2[ip]
            })
            .collect())
    }

    /// Raw second variation `ε Σ φ''(s_c)|v'_c|² + ε Σ φ''(s_c+s_{c+1})|v'_c+v'_{c+1}|²`.
    pub fn second_variation(&self, y: &[f64], v: &[f64], w: &[f64]) -> Result<f64> {
        let s = self.strains(y);
        self.check(&s)?;
        let n = s.len();
        let nf = n as f64;
        let dv = |z: &[f64], c: usize| (z[c] - z[(c + n - 1) % n]) * nf;
        let eps = self.cfg.eps();
        let p = &self.potential;
        let mut acc = 0.0;
        for c in 0..n {
            let cp = (c + 1) % n;
            acc += p.d2(s[c]) * dv(v, c) * dv(w, c);
            acc += p.d2(s[c] + s[cp]) * (dv(v, c) + dv(v, cp)) * (dv(w, c) + dv(w, cp));
        }
        Ok(eps * acc)
    }
}

impl EnergyModel for AtomisticModel {
    fn dim(&self) -> usize {
        self.cfg.n()
    }

    fn energy(&self, y: &[f64]) -> Result<f64> {
        Ok(self.stored_energy(y)? - self.external_energy(y))
    }

    fn gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let eps = self.cfg.eps();
        let mut g = self.stored_gradient(y)?;
        for (gi, fi) in g.iter_mut().zip(&self.force) {
            *gi -= eps * fi;
        }
        Ok(g)
    }

    fn hessian(&self, y: &[f64]) -> Result<SymCyclicBand> {
        let s = self.strains(y);
        self.check(&s)?;
        let n = s.len();
        let nf = n as f64;
        let p = &self.potential;
        let mut h = SymCyclicBand::new(n, 2);
        for c in 0..n {
            let cm = (c + n - 1) % n;
            let cp = (c + 1) % n;
            let a = p.d2(s[c]) * nf;
            h.add(c, c, a);
            h.add(cm, cm, a);
            h.add(c, cm, -a);
            // bond (c, c+2) couples y[c-1] and y[c+1]
            let b = p.d2(s[c] + s[cp]) * nf;
            h.add(cp, cp, b);
            h.add(cm, cm, b);
            h.add(cp, cm, -b);
        }
        Ok(h)
    }

    fn min_stretch(&self, y: &[f64]) -> f64 {
        let s = self.strains(y);
        let n = s.len();
        (0..n)
            .map(|c| s[c].min(s[c] + s[(c + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    fn project(&self, y: &mut [f64]) {
        let big_f = self.cfg.big_f();
        let eps = self.cfg.eps();
        let m: f64 = y.iter().zip(self.x.nodes()).map(|(&v, &x)| eps * (v - big_f * x)).sum();
        y.iter_mut().for_each(|v| *v -= m);
    }
}

/// Minimizes the atomistic energy; the initial guess defaults to `y = Fx`.
pub fn solve_atomistic(
    cfg: &ChainConfig,
    potential: Potential,
    force: Option<&Field>,
    initial: Option<&AtomisticState>,
) -> Result<(AtomisticState, SolveReport)> {
    let model = AtomisticModel::new(cfg, potential, force)?;
    let y0 = initial.map_or_else(|| AtomisticState::homogeneous(cfg), Clone::clone);
    let opts = NewtonOptions::for_problem(cfg.n(), potential.r_star());
    let (y, report) = minimize(&model, y0.values(), &opts)?;
    Ok((AtomisticState::new(cfg, y)?, report))
}
