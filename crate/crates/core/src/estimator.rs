//! A posteriori estimators for the QC solution.
//!
//! The stored-energy residual `𝓔_a'(J y_h)[v] - 𝓔_qc'(y_h)[J v]` collapses to
//! `Σ_ℓ c_ℓ v'_ℓ`, with `c_ℓ` nonzero only on the three cells around each
//! non-atomistic node and given in closed form by the bonds straddling that
//! node. The same bonds carry the whole stored-energy difference.
//!
//! The external-force residual `⟨f, J v⟩_h - ⟨f, v⟩_ε` is split on the
//! common refinement 𝒯^r into a lattice-vs-merged quadrature part, an
//! interpolation part and a merged-vs-mesh quadrature part.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::atomistic::AtomisticState;
use crate::error::{QcError, Result};
use crate::field::{transfer_to_lattice, Field};
use crate::lattice::{MergedPartition, Mesh, NodeKind, Region};
use crate::par;
use crate::potential::Potential;
use crate::qc::QcState;
use crate::stability::{assess_stability, StabilityReport};

/// Closed-form contributions of the bonds straddling one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeJumps {
    pub node: usize,
    pub kind: NodeKind,
    /// Zero-based cells `ℓ-1, ℓ, ℓ+1` (mod N).
    pub cells: [usize; 3],
    /// `c_{ℓ-1+j} = ε [[φ']]` contributions, `j = 0, 1, 2`.
    pub gradient: [f64; 3],
    /// Stored-energy differences of subcases 1, 2, 3.
    pub energy: [f64; 3],
}

/// Gradient and energy jumps at a node with offset `θ` between element
/// gradients `g_l` and `g_r`. Returns `([c_0, c_1, c_2], [E_1, E_2, E_3])`.
pub fn jump_closed_forms(potential: &Potential, eps: f64, theta: f64, g_l: f64, g_r: f64) -> ([f64; 3], [f64; 3]) {
    let p = potential;
    let s1 = (1.0 - theta) * g_r + theta * g_l;
    let s2 = (1.0 + theta) * g_l + (1.0 - theta) * g_r;
    let s3 = theta * g_l + (2.0 - theta) * g_r;
    let (d1l, d1r) = (p.d1(g_l), p.d1(g_r));
    let (d2l, d2r) = (p.d1(2.0 * g_l), p.d1(2.0 * g_r));
    let split2 = theta * d2l + (1.0 - theta) * d2r;
    let sub1 = p.d1(s1) - (1.0 - theta) * d1r - theta * d1l;
    let grad = [
        eps * (p.d1(s2) - d2l),
        eps * (sub1 + (p.d1(s2) - split2) + (p.d1(s3) - split2)),
        eps * (p.d1(s3) - d2r),
    ];
    let (e2l, e2r) = (p.phi(2.0 * g_l), p.phi(2.0 * g_r));
    let energy = [
        eps * (p.phi(s1) - theta * p.phi(g_l) - (1.0 - theta) * p.phi(g_r)),
        eps * (p.phi(s2) - 0.5 * (1.0 + theta) * e2l - 0.5 * (1.0 - theta) * e2r),
        eps * (p.phi(s3) - 0.5 * theta * e2l - 0.5 * (2.0 - theta) * e2r),
    ];
    (grad, energy)
}

/// Jump terms of every non-atomistic node for element gradients `g`.
pub fn node_jumps(mesh: &Mesh, potential: &Potential, g: &[f64]) -> Vec<NodeJumps> {
    let n = mesh.config().n();
    let eps = mesh.config().eps();
    let k = mesh.len();
    (0..k)
        .filter(|&i| mesh.node(i).kind != NodeKind::Atomistic)
        .map(|i| {
            let nd = mesh.node(i);
            let (grad, energy) = jump_closed_forms(potential, eps, nd.theta, g[i], g[(i + 1) % k]);
            let l = nd.ell % n;
            NodeJumps {
                node: i,
                kind: nd.kind,
                cells: [(l + n - 1) % n, l, (l + 1) % n],
                gradient: grad,
                energy,
            }
        })
        .collect()
}

/// Per-cell residual coefficients `c_ℓ`, so that the stored-energy residual
/// applied to `v` is `Σ_ℓ c_ℓ v'_ℓ`.
pub fn cell_coefficients(n: usize, jumps: &[NodeJumps]) -> Vec<f64> {
    let mut c = vec![0.0; n];
    for nj in jumps {
        for j in 0..3 {
            c[nj.cells[j]] += nj.gradient[j];
        }
    }
    c
}

/// Elements receiving a node's share, with weights.
fn node_targets(mesh: &Mesh, node: usize, kind: NodeKind) -> [(usize, f64); 2] {
    let right = mesh.right_element(node);
    match kind {
        NodeKind::LeftInterface => [(node, 1.0), (node, 0.0)],
        NodeKind::RightInterface => [(right, 1.0), (right, 0.0)],
        _ => [(node, 0.5), (right, 0.5)],
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredResidual {
    pub jumps: Vec<NodeJumps>,
    /// `c_ℓ` per cell.
    pub cells: Vec<f64>,
    /// η_k^e per element.
    pub eta_e: Vec<f64>,
    /// η_E^e,k per element.
    pub eta_energy: Vec<f64>,
    /// `(Σ_ℓ c_ℓ²/ε)^½`.
    pub e_store: f64,
    /// `Σ_b` of the straddling-bond energy differences.
    pub energy_difference: f64,
}

/// Stored-energy residual and energy jumps of a QC state.
pub fn stored_energy_residual(state: &QcState, potential: &Potential) -> Result<StoredResidual> {
    let mesh = state.mesh();
    let g = state.element_gradients();
    if let Some((e, &v)) = g.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(QcError::Domain {
            location: format!("element {e}"),
            value: v,
        });
    }
    let n = mesh.config().n();
    let eps = mesh.config().eps();
    let jumps = node_jumps(mesh, potential, &g);
    let cells = cell_coefficients(n, &jumps);
    let mut touch = vec![0u32; n];
    for nj in &jumps {
        for &c in &nj.cells {
            touch[c] += 1;
        }
    }
    let k = mesh.len();
    let mut eta2 = vec![0.0; k];
    let mut eta_energy = vec![0.0; k];
    for nj in &jumps {
        let share: f64 = nj
            .cells
            .iter()
            .map(|&c| cells[c] * cells[c] / eps / touch[c] as f64)
            .sum();
        let en: f64 = nj.energy.iter().map(|e| e.abs()).sum();
        for (e, w) in node_targets(mesh, nj.node, nj.kind) {
            eta2[e] += w * share;
            eta_energy[e] += w * en;
        }
    }
    let e_store = cells.iter().map(|c| c * c / eps).sum::<f64>().sqrt();
    let energy_difference = jumps.iter().flat_map(|nj| nj.energy).sum();
    Ok(StoredResidual {
        jumps,
        cells,
        eta_e: eta2.iter().map(|v| v.sqrt()).collect(),
        eta_energy,
        e_store,
        energy_difference,
    })
}

/// External-force residual per element and its term-wise aggregates.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalResidual {
    /// η_k^f per element.
    pub eta_f: Vec<f64>,
    /// Squared per-element parts: lattice/merged quadrature, interpolation,
    /// second-difference and first-difference quadrature terms.
    pub parts: Vec<[f64; 4]>,
    pub e_ext: f64,
    /// `(1/8) ε² ‖f'‖_{ℓ²_ε(𝒦_U)}`.
    pub quadrature_bound: f64,
    /// `[Σ h̃_k² ‖f^r‖²]^½`.
    pub interpolation_bound: f64,
    /// `(1/8)[(nε)⁴ Σ ĥ_k⁴ ‖f^r''‖²]^½ + [Σ ĥ_k⁴ ‖f^r'‖²]^½`.
    pub mesh_quadrature_bound: f64,
    pub h_tilde: Vec<f64>,
    pub h_hat: Vec<f64>,
    /// Merged index ranges `(first, last)` of 𝒟¹_k (unwrapped; reduce mod n).
    pub d1: Vec<(usize, usize)>,
    pub merged_len: usize,
    pub unaligned: Vec<usize>,
}

/// Merged indices `j_{k-1}` and the sub-interval count of element `e`.
fn element_span(mesh: &Mesh, merged: &MergedPartition, e: usize) -> (usize, usize) {
    let n = merged.len();
    let j0 = merged.j_of_node(mesh.left_node(e));
    let j1 = merged.j_of_node(e);
    let m = (j1 + n - j0) % n;
    (j0, if m == 0 { n } else { m })
}

pub fn external_force_residual(mesh: &Mesh, merged: &MergedPartition, force: Option<&Field>) -> Result<ExternalResidual> {
    let n_lat = mesh.config().n();
    let eps = mesh.config().eps();
    let k = mesh.len();
    let nr = merged.len();
    let f_lat: Vec<f64> = match force {
        None => vec![0.0; n_lat],
        Some(f) if f.partition().len() == n_lat => f.values().to_vec(),
        Some(_) => return Err(QcError::param("force must be given on the lattice partition")),
    };
    let fr: Vec<f64> = match force {
        None => vec![0.0; nr],
        Some(f) => merged.partition().nodes().iter().map(|&x| f.value_at(x)).collect(),
    };
    let er = merged.eps_r();
    let eb = merged.eps_bar();
    let d1f: Vec<f64> = (0..nr).map(|j| (fr[j] - fr[(j + nr - 1) % nr]) / er[j]).collect();
    let d2f: Vec<f64> = (0..nr).map(|j| (d1f[(j + 1) % nr] - d1f[j]) / eb[j]).collect();
    let unaligned = mesh.unaligned_nodes();
    let mut t1 = vec![0.0; k];
    for &i in &unaligned {
        let l = mesh.node(i).ell % n_lat;
        let fp = (f_lat[l] - f_lat[(l + n_lat - 1) % n_lat]) / eps;
        let v = eps.powi(5) * fp * fp / 128.0;
        t1[i] += v;
        t1[mesh.right_element(i)] += v;
    }
    let n_eps = nr as f64 * eps;
    let rows: Vec<([f64; 4], f64, f64, (usize, usize))> = par::map_range(k, |e| {
        let (j0, m) = element_span(mesh, merged, e);
        if mesh.element_region(e) == Region::Atomistic {
            return ([t1[e], 0.0, 0.0, 0.0], 0.0, 0.0, (j0 + 1, j0 + m));
        }
        let h = mesh.element_size(e);
        let mf = m as f64;
        let h_tilde = 0.5 * mf * eps;
        let h_hat2 = (mf * eps) * ((mf + 1.0) * eps).powi(2) / h;
        let h_hat4 = h_hat2 * h_hat2;
        let mut s0 = 0.0;
        let mut s2 = 0.0;
        for q in 1..m {
            let j = (j0 + q) % nr;
            s0 += eb[j] * fr[j] * fr[j];
            s2 += eb[j] * d2f[j] * d2f[j];
        }
        let s1: f64 = (1..=m)
            .map(|q| {
                let j = (j0 + q) % nr;
                er[j] * d1f[j] * d1f[j]
            })
            .sum();
        (
            [t1[e], h_tilde * h_tilde * s0, n_eps.powi(4) * h_hat4 * s2 / 64.0, h_hat4 * s1],
            h_tilde,
            h_hat2.sqrt(),
            (j0 + 1, j0 + m),
        )
    });
    let parts: Vec<[f64; 4]> = rows.iter().map(|r| r.0).collect();
    let total = |i: usize| parts.iter().map(|p| p[i]).sum::<f64>();
    let eta_f: Vec<f64> = parts.iter().map(|p| p.iter().sum::<f64>().sqrt()).collect();
    Ok(ExternalResidual {
        e_ext: eta_f.iter().map(|v| v * v).sum::<f64>().sqrt(),
        quadrature_bound: total(0).sqrt(),
        interpolation_bound: total(1).sqrt(),
        mesh_quadrature_bound: total(2).sqrt() + total(3).sqrt(),
        eta_f,
        parts,
        h_tilde: rows.iter().map(|r| r.1).collect(),
        h_hat: rows.iter().map(|r| r.2).collect(),
        d1: rows.iter().map(|r| r.3).collect(),
        merged_len: nr,
        unaligned,
    })
}

/// η_E^f,k: `|∫_{T_k} I_ε(f u_h) - ½ h_k (f_{k-1}u_{k-1} + f_k u_k)|` with the
/// zero-mean displacement `u_h`. Returns the signed per-element differences.
pub fn external_energy_terms(state: &QcState, force: Option<&Field>) -> Vec<f64> {
    let mesh = state.mesh();
    let k = mesh.len();
    let Some(f) = force else { return vec![0.0; k] };
    let u = state.field().displacement();
    let n = mesh.config().n();
    let nf = n as f64;
    let fu = |t: f64| {
        let x = t / nf;
        f.value_at(x) * u.value_at(x)
    };
    par::map_range(k, |e| {
        let (lo, hi) = mesh.element_span(e);
        let h = mesh.element_size(e);
        let trap_h = 0.5 * h * (fu(lo) + fu(hi));
        // ∫ over [lo, hi] of the lattice interpolant of f·u_h
        let mut acc = 0.0;
        let first = lo.floor() as i64;
        let last = hi.ceil() as i64;
        for c in first..last {
            let (a, b) = (c as f64, (c + 1) as f64);
            let (fa, fb) = (fu(a), fu(b));
            let (p, q) = (a.max(lo), b.min(hi));
            if q <= p {
                continue;
            }
            let at = |t: f64| fa + (fb - fa) * (t - a);
            acc += 0.5 * (q - p) / nf * (at(p) + at(q));
        }
        acc - trap_h
    })
}

/// Everything the a posteriori analysis produces for one QC solution.
#[derive(Debug, Clone)]
pub struct EstimatorReport {
    pub eta_e: Vec<f64>,
    pub eta_f: Vec<f64>,
    pub eta_energy_e: Vec<f64>,
    pub eta_energy_f: Vec<f64>,
    pub e_store: f64,
    pub e_ext: f64,
    pub stability: StabilityReport,
    /// `(2/A_*)(𝓔_store + 𝓔_ext)`.
    pub deformation_bound: f64,
    /// `C^E (deformation bound)² + Σ_k (η_E^e,k + η_E^f,k)`; `None` without `C^E`.
    pub energy_bound: Option<f64>,
    pub stored: StoredResidual,
    pub external: ExternalResidual,
    /// `E_a(J y_h) - E_qc(y_h)`, split into stored and external parts.
    pub stored_energy_difference: f64,
    pub external_energy_difference: f64,
    /// The lattice projection `J_{𝒰_qc} y_h`.
    pub projected: AtomisticState,
}

/// The closeness assumption behind the deformation bound cannot be checked
/// a posteriori; it is recorded, not used.
pub const CLOSENESS_ASSUMPTION: &str = "assumed, unverifiable";

impl EstimatorReport {
    /// Element indicator for the deformation gradient. Without coercivity
    /// (`A_* ≤ 0`) the unscaled residual `[(η^e)² + (η^f)²]^½` is returned.
    pub fn deformation_indicators(&self) -> Vec<f64> {
        let a = if self.stability.a_star > 0.0 { 0.5 * self.stability.a_star } else { 1.0 };
        self.eta_e
            .iter()
            .zip(&self.eta_f)
            .map(|(e, f)| (e * e + f * f).sqrt() / a)
            .collect()
    }

    /// Element indicator for the energy; falls back to the deformation
    /// residual when `A_* ≤ 0`.
    pub fn energy_indicators(&self) -> Vec<f64> {
        if !(self.stability.a_star > 0.0) {
            return self.deformation_indicators();
        }
        let ce = self.stability.c_energy.unwrap_or(0.0);
        self.deformation_indicators()
            .iter()
            .zip(self.eta_energy_e.iter().zip(&self.eta_energy_f))
            .map(|(d, (a, b))| ce * d * d + a + b)
            .collect()
    }

    /// CSV rows `k,case,eta_e,eta_f,eta_Ee,eta_Ef` and a summary comment.
    pub fn to_csv(&self, mesh: &Mesh) -> String {
        let mut s = String::from("k,case,eta_e,eta_f,eta_Ee,eta_Ef\n");
        for e in 0..mesh.len() {
            let _ = writeln!(
                s,
                "{e},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                element_case(mesh, e),
                self.eta_e[e],
                self.eta_f[e],
                self.eta_energy_e[e],
                self.eta_energy_f[e]
            );
        }
        let _ = writeln!(
            s,
            "# e_store={:.16e} e_ext={:.16e} a_star={:.16e} deformation_bound={:.16e} energy_bound={} stretch_ok={} closeness={}",
            self.e_store,
            self.e_ext,
            self.stability.a_star,
            self.deformation_bound,
            self.energy_bound.map_or("none".into(), |v| format!("{v:.16e}")),
            self.stability.stretch_ok,
            CLOSENESS_ASSUMPTION
        );
        s
    }
}

/// `atomistic`, `interior`, `left-interface` or `right-interface`.
pub fn element_case(mesh: &Mesh, e: usize) -> &'static str {
    if mesh.element_region(e) == Region::Atomistic {
        return "atomistic";
    }
    match (mesh.node(mesh.left_node(e)).kind, mesh.node(e).kind) {
        (_, NodeKind::LeftInterface) => "left-interface",
        (NodeKind::RightInterface, _) => "right-interface",
        _ => "interior",
    }
}

/// Runs the full a posteriori analysis. Fails with `StabilityLost` when
/// `A_* ≤ 0` at the projected state.
pub fn estimate(state: &QcState, potential: &Potential, force: Option<&Field>) -> Result<EstimatorReport> {
    let report = estimate_unchecked(state, potential, force)?;
    if !(report.stability.a_star > 0.0) {
        return Err(QcError::StabilityLost {
            a_star: report.stability.a_star,
        });
    }
    Ok(report)
}

/// As [`estimate`] but also returns a report when `A_* ≤ 0`; the bounds are
/// then infinite and only the residual indicators are meaningful.
pub fn estimate_unchecked(state: &QcState, potential: &Potential, force: Option<&Field>) -> Result<EstimatorReport> {
    let mesh: &Arc<Mesh> = state.mesh();
    let n = mesh.config().n();
    let projected = AtomisticState::from_field(mesh.config(), transfer_to_lattice(state.field(), n))?;
    let stability = assess_stability(&projected, potential)?;
    let stored = stored_energy_residual(state, potential)?;
    let merged = MergedPartition::new(mesh);
    let external = external_force_residual(mesh, &merged, force)?;
    let ext_terms = external_energy_terms(state, force);
    let deformation_bound = if stability.a_star > 0.0 {
        2.0 / stability.a_star * (stored.e_store + external.e_ext)
    } else {
        f64::INFINITY
    };
    let eta_energy_f: Vec<f64> = ext_terms.iter().map(|v| v.abs()).collect();
    let energy_bound = stability.c_energy.map(|ce| {
        ce * deformation_bound * deformation_bound
            + stored.eta_energy.iter().sum::<f64>()
            + eta_energy_f.iter().sum::<f64>()
    });
    Ok(EstimatorReport {
        eta_e: stored.eta_e.clone(),
        eta_f: external.eta_f.clone(),
        eta_energy_e: stored.eta_energy.clone(),
        eta_energy_f,
        e_store: stored.e_store,
        e_ext: external.e_ext,
        deformation_bound,
        energy_bound,
        stored_energy_difference: stored.energy_difference,
        external_energy_difference: -ext_terms.iter().sum::<f64>(),
        stability,
        stored,
        external,
        projected,
    })
}
