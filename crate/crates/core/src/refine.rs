//! Mesh generation: the analytic quasi-optimal mesh and estimator-driven
//! adaptive refinement (bisection with Dörfler marking).
//!
//! All three schemes centre the atomistic region at atom `(N-1)/2 + 1`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use crate::error::{QcError, Result};
use crate::estimator::{estimate_unchecked, EstimatorReport};
use crate::field::Field;
use crate::lattice::{ChainConfig, Mesh, NodeKind, RegionDecomposition, Region, SNAP_TOL};
use crate::newton::SolveReport;
use crate::potential::Potential;
use crate::qc::{solve_qc, QcState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    /// Analytic mesh from the optimal mesh-size formula.
    Optimal,
    /// Refinement driven by the deformation-gradient indicators.
    Gradient,
    /// Refinement driven by the energy indicators.
    Energy,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Optimal, Scheme::Gradient, Scheme::Energy];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Optimal => "optimal",
            Scheme::Gradient => "gradient",
            Scheme::Energy => "energy",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = QcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" | "1" => Ok(Scheme::Optimal),
            "gradient" | "2" => Ok(Scheme::Gradient),
            "energy" | "3" => Ok(Scheme::Energy),
            _ => Err(QcError::param(format!("unknown scheme '{s}' (optimal, gradient, energy)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementConfig {
    pub scheme: Scheme,
    /// Atoms on each side of the centre atom (optimal mesh).
    pub k_atoms: usize,
    pub max_dof: usize,
    /// Dörfler fraction θ: mark until `Σ η_i² ≥ θ η²`.
    pub marking_fraction: f64,
    /// Atoms on each side of the centre in the initial adaptive mesh.
    pub initial_atoms: usize,
}

impl RefinementConfig {
    pub fn new(scheme: Scheme, max_dof: usize) -> Self {
        Self {
            scheme,
            k_atoms: 8,
            max_dof,
            marking_fraction: 0.5,
            initial_atoms: 5,
        }
    }

    pub fn validate(&self, cfg: &ChainConfig) -> Result<()> {
        if self.max_dof > cfg.n() {
            return Err(QcError::validation(
                "max-dof",
                format!("max DOF {} exceeds N = {}", self.max_dof, cfg.n()),
            ));
        }
        if self.k_atoms == 0 || self.initial_atoms == 0 {
            return Err(QcError::validation("atoms-per-side", "need at least one atom per side"));
        }
        if !(self.marking_fraction > 0.0 && self.marking_fraction <= 1.0) {
            return Err(QcError::validation(
                "marking-fraction",
                format!("marking fraction {} outside (0, 1]", self.marking_fraction),
            ));
        }
        Ok(())
    }
}

/// Centre atom `(N-1)/2 + 1`.
pub fn center_atom(cfg: &ChainConfig) -> usize {
    (cfg.n() - 1) / 2 + 1
}

/// Optimal mesh size in lattice units, `h(r) = (f(Kε)/f(r) · r/(Kε))^{2/3}`.
/// `radial` is the force magnitude as a function of the distance `r`.
pub fn optimal_mesh_size(radial: &dyn Fn(f64) -> f64, k_eps: f64, r: f64) -> f64 {
    let fr = radial(r);
    if !(fr > 0.0) {
        return f64::INFINITY;
    }
    (radial(k_eps) / fr * r / k_eps).powf(2.0 / 3.0)
}

/// Node offsets (lattice units, measured from the centre) of one side of the
/// optimal mesh, from `k` to `limit`.
fn optimal_side(radial: &dyn Fn(f64) -> f64, eps: f64, k: usize, limit: f64) -> Result<Vec<f64>> {
    let k_eps = k as f64 * eps;
    let mut out: Vec<f64> = Vec::new();
    let mut d = k as f64;
    if limit - d < 2.0 - SNAP_TOL {
        return Err(QcError::validation(
            "atomistic-region-size",
            format!("{k} atoms per side leave no room for a continuum element"),
        ));
    }
    while d < limit - SNAP_TOL {
        let h = optimal_mesh_size(radial, k_eps, d * eps);
        let next = d + if h > 2.0 { h } else { 2.0 };
        if next >= limit - SNAP_TOL || limit - next < 2.0 - SNAP_TOL {
            // A remainder below 2ε is merged into the last element.
            out.push(limit);
            break;
        }
        out.push(next);
        d = next;
    }
    Ok(out)
}

/// Symmetric mesh with `K` atoms on each side of the centre; 2ε elements
/// until the optimal size exceeds 2ε, then sizes from the formula (nodes
/// then generally fall between atoms).
pub fn optimal_mesh(cfg: &ChainConfig, radial: &dyn Fn(f64) -> f64, rc: &RefinementConfig) -> Result<Mesh> {
    let n = cfg.n();
    let k = rc.k_atoms;
    let mid = center_atom(cfg);
    if k == 0 || k + 3 > mid || mid + k + 3 > n {
        return Err(QcError::validation(
            "atomistic-region-size",
            format!("{k} atoms per side do not fit into N = {n}"),
        ));
    }
    let regions = RegionDecomposition::from_atoms(cfg, &[(mid - k, mid + k)])?;
    let nf = n as f64;
    let mut ts: Vec<f64> = Vec::new();
    for d in optimal_side(radial, cfg.eps(), k, (n - mid) as f64)? {
        ts.push(mid as f64 + d);
    }
    for d in optimal_side(radial, cfg.eps(), k, mid as f64)? {
        let t = mid as f64 - d;
        ts.push(if t <= SNAP_TOL { nf } else { t });
    }
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup_by(|a, b| (*a - *b).abs() <= SNAP_TOL);
    let xs: Vec<f64> = ts.iter().map(|t| t / nf).collect();
    Mesh::build(cfg, &regions, &xs)
}

/// `initial_atoms` atoms on each side of the centre, and each continuum side
/// split into two elements at an atom near its midpoint.
pub fn initial_adaptive_mesh(cfg: &ChainConfig, initial_atoms: usize) -> Result<Mesh> {
    let n = cfg.n();
    let mid = center_atom(cfg);
    if initial_atoms + 4 > mid || mid + initial_atoms + 4 > n {
        return Err(QcError::validation(
            "atomistic-region-size",
            format!("{initial_atoms} atoms per side do not fit into N = {n}"),
        ));
    }
    let (a, b) = (mid - initial_atoms, mid + initial_atoms);
    let regions = RegionDecomposition::from_atoms(cfg, &[(a, b)])?;
    let xs = [a / 2, b + (n - b) / 2, n].map(|l| cfg.atom_x(l));
    Mesh::build(cfg, &regions, &xs)
}

/// Minimal Dörfler set: element indices in descending indicator order (ties by
/// index) until `Σ η_i² ≥ θ Σ η²`. Empty when all indicators vanish.
pub fn dorfler_mark(eta: &[f64], theta: f64) -> Vec<usize> {
    let total: f64 = eta.iter().map(|e| e * e).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&i, &j| eta[j].partial_cmp(&eta[i]).unwrap());
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for i in order {
        marked.push(i);
        acc += eta[i] * eta[i];
        if acc >= theta * total {
            break;
        }
    }
    marked
}

/// Applies one refinement step to the marked elements. A marked continuum
/// element next to an atomistic interval that is too small to bisect
/// (< 4ε) is merged into the interval; others are bisected at an atom near
/// the midpoint with both children ≥ 2ε. Returns `None` if nothing changed.
pub fn refine_marked(mesh: &Mesh, marked: &[usize]) -> Result<Option<Mesh>> {
    let cfg = mesh.config();
    let n = cfg.n() as i64;
    let mut intervals: Vec<(i64, i64)> =
        mesh.regions().intervals().iter().map(|iv| (iv.a as i64, iv.b as i64)).collect();
    let mut ts: Vec<f64> = mesh
        .nodes()
        .iter()
        .filter(|nd| nd.kind == NodeKind::Continuum)
        .map(|nd| nd.t)
        .collect();
    let mut changed = false;
    for &e in marked {
        if mesh.element_region(e) == Region::Atomistic {
            continue;
        }
        let (lo, hi) = mesh.element_span(e);
        let size = hi - lo;
        if size < 4.0 - SNAP_TOL {
            if let Some(i) = intervals.iter().position(|iv| iv.0 as f64 == hi) {
                let new_a = lo.round() as i64;
                let room = if i == 0 { 3 } else { intervals[i - 1].1 + 2 };
                if (lo - new_a as f64).abs() <= SNAP_TOL && new_a >= room {
                    intervals[i].0 = new_a;
                    changed = true;
                }
            } else if let Some(i) = intervals.iter().position(|iv| iv.1 as f64 == lo) {
                let new_b = hi.round() as i64;
                let room = if i + 1 == intervals.len() { n - 3 } else { intervals[i + 1].0 - 2 };
                if (hi - new_b as f64).abs() <= SNAP_TOL && new_b <= room {
                    intervals[i].1 = new_b;
                    changed = true;
                }
            }
            continue;
        }
        let half = 0.5 * (lo + hi);
        let split = [half.floor(), half.ceil()]
            .into_iter()
            .find(|&m| m - lo >= 2.0 - SNAP_TOL && hi - m >= 2.0 - SNAP_TOL);
        if let Some(m) = split {
            ts.push(if m <= 0.0 { m + n as f64 } else { m });
            changed = true;
        }
    }
    if !changed {
        return Ok(None);
    }
    let atoms: Vec<(usize, usize)> = intervals.iter().map(|&(a, b)| (a as usize, b as usize)).collect();
    let regions = RegionDecomposition::from_atoms(cfg, &atoms)?;
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    let xs: Vec<f64> = ts.iter().map(|t| t / n as f64).collect();
    Mesh::build(cfg, &regions, &xs).map(Some)
}

/// One solve–estimate cycle.
#[derive(Debug, Clone)]
pub struct Level {
    pub mesh: Arc<Mesh>,
    pub state: QcState,
    pub solve: SolveReport,
    pub report: EstimatorReport,
    /// Wall time of solve + estimate in seconds.
    pub elapsed: f64,
}

impl Level {
    pub fn dof(&self) -> usize {
        self.mesh.len()
    }
}

/// Levels up to the first failure, which is kept for reporting.
#[derive(Debug)]
pub struct Trajectory {
    pub levels: Vec<Level>,
    pub failure: Option<QcError>,
}

/// Solves and estimates on one mesh, warm-starting from `previous`. A lost
/// stability constant is reported in the level, not as an error.
pub fn solve_level(
    mesh: Arc<Mesh>,
    potential: Potential,
    force: Option<&Field>,
    previous: Option<&QcState>,
) -> Result<Level> {
    let start = Instant::now();
    let initial = previous
        .map(|p| {
            let y = mesh.nodes().iter().map(|nd| p.field().value_at(nd.x)).collect();
            QcState::new(mesh.clone(), y)
        })
        .transpose()?;
    let (state, solve) = solve_qc(mesh.clone(), potential, force, initial.as_ref())?;
    let report = estimate_unchecked(&state, &potential, force)?;
    Ok(Level {
        mesh,
        state,
        solve,
        report,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

/// Element indicators used for marking by `scheme`.
pub fn indicators(scheme: Scheme, report: &EstimatorReport) -> Vec<f64> {
    match scheme {
        Scheme::Energy => report.energy_indicators(),
        _ => report.deformation_indicators(),
    }
}

/// Solve → estimate → mark → refine until the DOF budget is reached or the
/// mesh stops changing. Levels without coercivity are kept (flagged in their
/// stability report) and refined on the residual indicators; the next level
/// then starts from `y = Fx` instead of the previous solution.
pub fn refine_adaptive(
    cfg: &ChainConfig,
    potential: Potential,
    force: Option<&Field>,
    rc: &RefinementConfig,
) -> Result<Trajectory> {
    rc.validate(cfg)?;
    if rc.scheme == Scheme::Optimal {
        return Err(QcError::param("the optimal scheme is not adaptive"));
    }
    let mut mesh = Arc::new(initial_adaptive_mesh(cfg, rc.initial_atoms)?);
    let mut levels: Vec<Level> = Vec::new();
    loop {
        let warm = levels.last().filter(|l| l.report.stability.is_stable()).map(|l| &l.state);
        let level = match solve_level(mesh.clone(), potential, force, warm) {
            Ok(l) => l,
            Err(e) => {
                return Ok(Trajectory {
                    levels,
                    failure: Some(e),
                })
            }
        };
        let eta = indicators(rc.scheme, &level.report);
        levels.push(level);
        if mesh.len() >= rc.max_dof {
            break;
        }
        let marked = dorfler_mark(&eta, rc.marking_fraction);
        match refine_marked(&mesh, &marked)? {
            Some(next) if next.len() > mesh.len() => mesh = Arc::new(next),
            _ => break,
        }
    }
    Ok(Trajectory { levels, failure: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decaying(r: f64) -> f64 {
        1.0 / r
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.name().parse::<Scheme>().unwrap(), s);
        }
        assert!("bogus".parse::<Scheme>().is_err());
    }

    #[test]
    fn mesh_size_formula() {
        let k_eps = 4.0 / 129.0;
        assert!((optimal_mesh_size(&decaying, k_eps, k_eps) - 1.0).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 4..60 {
            let h = optimal_mesh_size(&decaying, k_eps, i as f64 / 129.0);
            assert!(h >= prev);
            prev = h;
        }
    }

    #[test]
    fn optimal_mesh_is_valid_and_symmetric() {
        let cfg = ChainConfig::new(129, 1.0).unwrap();
        let mut rc = RefinementConfig::new(Scheme::Optimal, 129);
        rc.k_atoms = 4;
        let mesh = optimal_mesh(&cfg, &decaying, &rc).unwrap();
        mesh.check_invariants().unwrap();
        assert!(!mesh.unaligned_nodes().is_empty());
        let mid = center_atom(&cfg) as f64;
        let right: Vec<f64> = mesh.nodes().iter().map(|nd| nd.t - mid).filter(|d| *d > 0.0 && *d < 64.0).collect();
        let left: Vec<f64> = mesh.nodes().iter().map(|nd| mid - nd.t).filter(|d| *d > 0.0 && *d < 64.0).collect();
        for d in &right {
            assert!(left.iter().any(|l| (l - d).abs() < 1e-9), "offset {d} not mirrored");
        }
        // first continuum elements have the 2ε floor
        assert!(right.iter().any(|d| (d - 6.0).abs() < 1e-12));
        rc.k_atoms = 62;
        assert!(optimal_mesh(&cfg, &decaying, &rc).is_err());
    }

    #[test]
    fn initial_mesh_shape() {
        let cfg = ChainConfig::new(129, 1.0).unwrap();
        let mesh = initial_adaptive_mesh(&cfg, 5).unwrap();
        assert_eq!(mesh.len(), 11 + 3);
        assert_eq!(mesh.continuum_elements().len(), 4);
    }

    #[test]
    fn dorfler_prefix_is_minimal() {
        let eta = [0.1, 3.0, 1.0, 3.0, 0.5];
        let m = dorfler_mark(&eta, 0.5);
        assert_eq!(m, vec![1, 3]);
        let total: f64 = eta.iter().map(|e| e * e).sum();
        let sum = |s: &[usize]| s.iter().map(|&i| eta[i] * eta[i]).sum::<f64>();
        assert!(sum(&m) >= 0.5 * total && sum(&m[..m.len() - 1]) < 0.5 * total);
        assert!(dorfler_mark(&[0.0; 4], 0.5).is_empty());
        assert_eq!(dorfler_mark(&[1.0; 4], 0.5), vec![0, 1]);
    }

    #[test]
    fn bisection_snaps_and_merges() {
        let cfg = ChainConfig::new(64, 1.0).unwrap();
        let regions = RegionDecomposition::from_atoms(&cfg, &[(30, 34)]).unwrap();
        let xs: Vec<f64> = [27, 36, 41, 64].iter().map(|&l| cfg.atom_x(l)).collect();
        let mesh = Mesh::build(&cfg, &regions, &xs).unwrap();
        let elem = |lo: f64, hi: f64| (0..mesh.len()).find(|&e| mesh.element_span(e) == (lo, hi)).unwrap();
        // odd span 5 → split at 38 (children 2 and 3)
        let fine = refine_marked(&mesh, &[elem(36.0, 41.0)]).unwrap().unwrap();
        assert!(fine.nodes().iter().any(|nd| nd.t == 38.0));
        // span 3 next to the atomistic region merges
        let merged = refine_marked(&mesh, &[elem(27.0, 30.0)]).unwrap().unwrap();
        assert_eq!(merged.regions().intervals()[0].a, 27);
        merged.check_invariants().unwrap();
        // span 2 away from any interval cannot change
        let cfg2 = ChainConfig::new(64, 1.0).unwrap();
        let m2 = Mesh::build(&cfg2, &regions, &[27, 36, 38, 64].map(|l| cfg2.atom_x(l))).unwrap();
        let e2 = (0..m2.len()).find(|&e| m2.element_span(e) == (36.0, 38.0)).unwrap();
        assert!(refine_marked(&m2, &[e2]).unwrap().is_none());
    }

    #[test]
    fn zero_force_stops_at_initial_mesh() {
        let cfg = ChainConfig::new(65, 1.0).unwrap();
        let pot = Potential::morse(crate::potential::MorseParams { alpha: 5.0 }).unwrap();
        let traj = refine_adaptive(&cfg, pot, None, &RefinementConfig::new(Scheme::Gradient, 60)).unwrap();
        assert!(traj.failure.is_none());
        assert_eq!(traj.levels.len(), 1);
        assert_eq!(traj.levels[0].dof(), 14);
    }
}
