//! Reference lattice, atomistic/continuum regions, the QC mesh, the merged
//! lattice+mesh partition and the bond taxonomy.
//!
//! Positions are handled in two coordinates: `x ∈ (0, 1]` and the lattice
//! coordinate `t = xN = ℓ + θ`. Atom-aligned nodes have integral `t`, which
//! keeps all interface geometry exact in floating point.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{QcError, Result};
use crate::field::Partition;

/// Node/atom coincidence tolerance, in units of ε.
pub const SNAP_TOL: f64 = 1e-12;

/// The periodic reference lattice: `N` atoms per period, spacing `ε = 1/N`,
/// macroscopic gradient `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    n: usize,
    big_f: f64,
}

impl ChainConfig {
    pub fn new(n: usize, big_f: f64) -> Result<Self> {
        if n < 8 {
            return Err(QcError::param(format!("N = {n} must be at least 8")));
        }
        if !(big_f > 0.0 && big_f.is_finite()) {
            return Err(QcError::param(format!("F = {big_f} must be positive")));
        }
        Ok(Self { n, big_f })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eps(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn big_f(&self) -> f64 {
        self.big_f
    }

    /// Position of atom `ℓ`, computed as `ℓ/N` (not `ℓ·ε`) so that integral
    /// lattice coordinates map to the same float everywhere.
    pub fn atom_x(&self, l: usize) -> f64 {
        l as f64 / self.n as f64
    }

    pub fn lattice_partition(&self) -> Arc<Partition> {
        Arc::new(Partition::lattice(self.n))
    }

    /// Anchor `(ℓ, θ)` of `x`, with `θ = 0` whenever `x` is within
    /// [`SNAP_TOL`]·ε of an atom.
    pub fn anchor(&self, x: f64) -> (usize, f64) {
        let t = x * self.n as f64;
        let r = t.round();
        if (t - r).abs() <= SNAP_TOL {
            (r.max(0.0) as usize, 0.0)
        } else {
            let l = t.floor();
            (l.max(0.0) as usize, t - l)
        }
    }
}

/// Atomistic interval `(aε, bε)` given by its end atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AtomInterval {
    pub a: usize,
    pub b: usize,
}

/// Disjoint atomistic intervals of one period; the complement is continuum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionDecomposition {
    intervals: Vec<AtomInterval>,
    full: bool,
}

impl RegionDecomposition {
    /// No atomistic region at all (pure continuum).
    pub fn continuum() -> Self {
        Self {
            intervals: Vec::new(),
            full: false,
        }
    }

    /// The whole period is atomistic; every atom is a node.
    pub fn full_atomistic() -> Self {
        Self {
            intervals: Vec::new(),
            full: true,
        }
    }

    pub fn from_atoms(cfg: &ChainConfig, intervals: &[(usize, usize)]) -> Result<Self> {
        let intervals: Vec<AtomInterval> =
            intervals.iter().map(|&(a, b)| AtomInterval { a, b }).collect();
        let n = cfg.n();
        for (i, iv) in intervals.iter().enumerate() {
            if iv.b <= iv.a {
                return Err(QcError::validation(
                    "interval-order",
                    format!("atomistic interval ({}, {}) is empty", iv.a, iv.b),
                ));
            }
            if i > 0 && iv.a < intervals[i - 1].b + 2 {
                return Err(QcError::validation(
                    "interval-separation",
                    format!(
                        "intervals ending at atom {} and starting at atom {} leave no room for a 2ε continuum element",
                        intervals[i - 1].b,
                        iv.a
                    ),
                ));
            }
        }
        if let (Some(first), Some(last)) = (intervals.first(), intervals.last()) {
            if first.a < 3 || last.b + 3 > n {
                return Err(QcError::validation(
                    "boundary-buffer",
                    format!(
                        "atomistic region must keep more than 2ε from the period boundary (atoms {}..{} of {n})",
                        first.a, last.b
                    ),
                ));
            }
        }
        Ok(Self {
            intervals,
            full: false,
        })
    }

    /// Snaps real endpoints to the nearest atoms.
    pub fn from_intervals(cfg: &ChainConfig, intervals: &[(f64, f64)]) -> Result<Self> {
        let nf = cfg.n() as f64;
        let atoms: Vec<(usize, usize)> = intervals
            .iter()
            .map(|&(lo, hi)| ((lo * nf).round().max(0.0) as usize, (hi * nf).round().max(0.0) as usize))
            .collect();
        Self::from_atoms(cfg, &atoms)
    }

    pub fn intervals(&self) -> &[AtomInterval] {
        &self.intervals
    }

    pub fn is_full(&self) -> bool {
        self.full
    }

    /// Interval whose closure contains atom `l`.
    fn interval_of_atom(&self, l: usize) -> Option<&AtomInterval> {
        self.intervals.iter().find(|iv| iv.a <= l && l <= iv.b)
    }

    fn strictly_inside(&self, t: f64) -> bool {
        self.intervals
            .iter()
            .any(|iv| t > iv.a as f64 && t < iv.b as f64)
    }

    fn to_text(&self) -> String {
        if self.full {
            "full".into()
        } else if self.intervals.is_empty() {
            "none".into()
        } else {
            self.intervals
                .iter()
                .map(|iv| format!("{}:{}", iv.a, iv.b))
                .collect::<Vec<_>>()
                .join(" ")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Atomistic,
    Continuum,
}

/// Position of a node relative to the regions of its two elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    /// Both neighbouring elements are continuum.
    Continuum,
    /// Continuum on the left, atomistic on the right.
    LeftInterface,
    /// Atomistic on the left, continuum on the right.
    RightInterface,
    Atomistic,
}

impl NodeKind {
    fn tag(self) -> &'static str {
        match self {
            NodeKind::Continuum => "c",
            NodeKind::LeftInterface => "la",
            NodeKind::RightInterface => "ra",
            NodeKind::Atomistic => "a",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        Some(match s {
            "c" => NodeKind::Continuum,
            "la" => NodeKind::LeftInterface,
            "ra" => NodeKind::RightInterface,
            "a" => NodeKind::Atomistic,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    /// Lattice coordinate `ℓ + θ`.
    pub t: f64,
    pub ell: usize,
    pub theta: f64,
    pub kind: NodeKind,
}

impl Node {
    pub fn is_aligned(&self) -> bool {
        self.theta == 0.0
    }
}

/// The QC partition 𝒯^h. Element `e` is `[x_{e-1}, x_e]`; node `k` separates
/// element `k` (left) from element `k + 1 mod K` (right).
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    cfg: ChainConfig,
    regions: RegionDecomposition,
    nodes: Vec<Node>,
    /// Element sizes in lattice units.
    dt: Vec<f64>,
    region: Vec<Region>,
    partition: Arc<Partition>,
}

impl Mesh {
    /// Builds and validates a mesh from the region decomposition and the
    /// continuum nodes; atoms of the atomistic region are added automatically.
    pub fn build(cfg: &ChainConfig, regions: &RegionDecomposition, continuum_nodes: &[f64]) -> Result<Mesh> {
        if regions.is_full() {
            return Self::full_atomistic(cfg);
        }
        let n = cfg.n();
        let mut ts: Vec<(f64, usize, f64)> = Vec::new();
        for (i, &x) in continuum_nodes.iter().enumerate() {
            if !(x.is_finite() && x > 0.0 && x <= 1.0 + SNAP_TOL / n as f64) {
                return Err(QcError::validation("node-range", format!("node {x} outside (0, 1]")));
            }
            if i > 0 && x <= continuum_nodes[i - 1] {
                return Err(QcError::validation(
                    "node-order",
                    format!("continuum nodes not strictly increasing at {x}"),
                ));
            }
            let (l, th) = cfg.anchor(x);
            if l == 0 && th == 0.0 {
                return Err(QcError::validation("node-range", format!("node {x} coincides with 0")));
            }
            let t = l as f64 + th;
            if regions.strictly_inside(t) {
                if th != 0.0 {
                    return Err(QcError::validation(
                        "node-inside-atomistic",
                        format!("node {x} lies strictly inside an atomistic interval between atoms"),
                    ));
                }
                continue; // the atom is added below anyway
            }
            ts.push((t, l, th));
        }
        for iv in regions.intervals() {
            for l in iv.a..=iv.b {
                ts.push((l as f64, l, 0.0));
            }
        }
        ts.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        ts.dedup_by(|p, q| p.0 == q.0);
        if ts.is_empty() {
            return Err(QcError::validation("empty-mesh", "mesh needs at least one node"));
        }
        let k = ts.len();
        let t_of = |i: usize| ts[i].0;
        let mut dt = Vec::with_capacity(k);
        let mut region = Vec::with_capacity(k);
        for e in 0..k {
            let (lo, hi) = if e == 0 { (t_of(k - 1) - n as f64, t_of(0)) } else { (t_of(e - 1), t_of(e)) };
            dt.push(hi - lo);
            let atomistic = ts[e].2 == 0.0
                && hi - lo == 1.0
                && {
                    let l_hi = ts[e].1;
                    let l_lo = if e == 0 { ts[k - 1].1 as i64 - n as i64 } else { ts[e - 1].1 as i64 };
                    l_lo >= 0
                        && regions
                            .interval_of_atom(l_hi)
                            .is_some_and(|iv| iv.a as i64 <= l_lo && l_hi <= iv.b)
                };
            region.push(if atomistic { Region::Atomistic } else { Region::Continuum });
        }
        for e in 0..k {
            if region[e] == Region::Continuum && dt[e] < 2.0 - SNAP_TOL {
                return Err(QcError::validation(
                    "continuum-element-size",
                    format!(
                        "continuum element {e} has size {:.6}ε < 2ε (ending at x = {})",
                        dt[e],
                        ts[e].0 / n as f64
                    ),
                ));
            }
        }
        let nodes = (0..k)
            .map(|i| {
                let (t, l, th) = ts[i];
                let x = if th == 0.0 { cfg.atom_x(l) } else { t / n as f64 };
                let left = region[i];
                let right = region[(i + 1) % k];
                let kind = match (left, right) {
                    (Region::Continuum, Region::Continuum) => NodeKind::Continuum,
                    (Region::Continuum, Region::Atomistic) => NodeKind::LeftInterface,
                    (Region::Atomistic, Region::Continuum) => NodeKind::RightInterface,
                    (Region::Atomistic, Region::Atomistic) => NodeKind::Atomistic,
                };
                Node { x, t, ell: l, theta: th, kind }
            })
            .collect::<Vec<_>>();
        let partition = Arc::new(Partition::new(nodes.iter().map(|nd| nd.x).collect())?);
        let mesh = Mesh {
            cfg: *cfg,
            regions: regions.clone(),
            nodes,
            dt,
            region,
            partition,
        };
        Ok(mesh)
    }

    /// Every atom is a node and every element atomistic; the QC model then
    /// coincides with the atomistic one.
    pub fn full_atomistic(cfg: &ChainConfig) -> Result<Mesh> {
        let n = cfg.n();
        let nodes = (1..=n)
            .map(|l| Node {
                x: cfg.atom_x(l),
                t: l as f64,
                ell: l,
                theta: 0.0,
                kind: NodeKind::Atomistic,
            })
            .collect::<Vec<_>>();
        let partition = Arc::new(Partition::new(nodes.iter().map(|nd| nd.x).collect())?);
        Ok(Mesh {
            cfg: *cfg,
            regions: RegionDecomposition::full_atomistic(),
            nodes,
            dt: vec![1.0; n],
            region: vec![Region::Atomistic; n],
            partition,
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    pub fn regions(&self) -> &RegionDecomposition {
        &self.regions
    }

    /// Number of nodes (= elements = degrees of freedom) per period.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> &Node {
        &self.nodes[k]
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    /// Size `ε_e^h` of element `e`.
    pub fn element_size(&self, e: usize) -> f64 {
        self.dt[e] / self.cfg.n() as f64
    }

    /// Size of element `e` in lattice units.
    pub fn element_size_lattice(&self, e: usize) -> f64 {
        self.dt[e]
    }

    pub fn element_region(&self, e: usize) -> Region {
        self.region[e]
    }

    pub fn left_node(&self, e: usize) -> usize {
        (e + self.len() - 1) % self.len()
    }

    pub fn right_element(&self, k: usize) -> usize {
        (k + 1) % self.len()
    }

    /// Lattice-coordinate interval of element `e`; the left end is unwrapped
    /// (negative for `e = 0` when it crosses the period boundary).
    pub fn element_span(&self, e: usize) -> (f64, f64) {
        let hi = self.nodes[e].t;
        (hi - self.dt[e], hi)
    }

    /// 𝒦_c: continuum elements.
    pub fn continuum_elements(&self) -> Vec<usize> {
        (0..self.len()).filter(|&e| self.region[e] == Region::Continuum).collect()
    }

    /// 𝒦'_c: continuum elements that do not touch an atomistic region.
    pub fn interior_continuum_elements(&self) -> Vec<usize> {
        self.continuum_elements()
            .into_iter()
            .filter(|&e| {
                self.nodes[e].kind == NodeKind::Continuum && self.nodes[self.left_node(e)].kind == NodeKind::Continuum
            })
            .collect()
    }

    /// 𝒦_U: nodes that are not atom positions.
    pub fn unaligned_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.nodes[k].is_aligned()).collect()
    }

    /// Positions of the purely continuum nodes (those not generated by the
    /// region decomposition).
    pub fn continuum_node_positions(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .filter(|nd| nd.kind == NodeKind::Continuum)
            .map(|nd| nd.x)
            .collect()
    }

    /// Re-checks every structural invariant.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.cfg.n() as f64;
        let k = self.len();
        let fail = |detail: String| Err(QcError::validation("invariant", detail));
        for (i, nd) in self.nodes.iter().enumerate() {
            if !(0.0..1.0).contains(&nd.theta) {
                return fail(format!("node {i}: θ = {}", nd.theta));
            }
            if ((nd.ell as f64 + nd.theta) / n - nd.x).abs() > 1e-12 {
                return fail(format!("node {i}: anchor does not reproduce x"));
            }
            if i > 0 && nd.x <= self.nodes[i - 1].x {
                return fail(format!("node {i}: not increasing"));
            }
        }
        for e in 0..k {
            match self.region[e] {
                Region::Continuum if self.dt[e] < 2.0 - SNAP_TOL => {
                    return fail(format!("element {e}: continuum size {}ε", self.dt[e]));
                }
                Region::Atomistic if self.dt[e] != 1.0 => {
                    return fail(format!("element {e}: atomistic element is not one cell"));
                }
                _ => {}
            }
        }
        for iv in self.regions.intervals() {
            for l in iv.a..=iv.b {
                if !self.nodes.iter().any(|nd| nd.t == l as f64) {
                    return fail(format!("atom {l} of the atomistic region is not a node"));
                }
            }
        }
        let k_c = self.continuum_elements();
        let k_cp = self.interior_continuum_elements();
        if !k_cp.iter().all(|e| k_c.contains(e)) {
            return fail("𝒦'_c not contained in 𝒦_c".into());
        }
        Ok(())
    }

    /// Plain-text serialization: a header with N, F, K and the regions, then
    /// one line `index x ell theta kind` per node.
    pub fn to_text(&self) -> String {
        let mut s = String::from("# qc-chain mesh\n");
        let _ = writeln!(s, "N {}", self.cfg.n());
        let _ = writeln!(s, "F {:e}", self.cfg.big_f());
        let _ = writeln!(s, "K {}", self.len());
        let _ = writeln!(s, "regions {}", self.regions.to_text());
        for (i, nd) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{i} {:e} {} {:e} {}", nd.x, nd.ell, nd.theta, nd.kind.tag());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut n = None;
        let mut big_f = None;
        let mut k = None;
        let mut regions_line = None;
        let mut rows = Vec::new();
        let perr = |line: usize, detail: String| QcError::Parse { line, detail };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks[0] {
                "N" => n = Some(toks.get(1).and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| perr(i + 1, "bad N".into()))?),
                "F" => big_f = Some(toks.get(1).and_then(|v| v.parse::<f64>().ok()).ok_or_else(|| perr(i + 1, "bad F".into()))?),
                "K" => k = Some(toks.get(1).and_then(|v| v.parse::<usize>().ok()).ok_or_else(|| perr(i + 1, "bad K".into()))?),
                "regions" => regions_line = Some((i + 1, toks[1..].iter().map(|s| s.to_string()).collect::<Vec<_>>())),
                _ => {
                    if toks.len() != 5 {
                        return Err(perr(i + 1, "expected `index x ell theta kind`".into()));
                    }
                    let x: f64 = toks[1].parse().map_err(|_| perr(i + 1, "bad x".into()))?;
                    let ell: usize = toks[2].parse().map_err(|_| perr(i + 1, "bad ell".into()))?;
                    let theta: f64 = toks[3].parse().map_err(|_| perr(i + 1, "bad theta".into()))?;
                    let kind = NodeKind::from_tag(toks[4]).ok_or_else(|| perr(i + 1, "bad kind".into()))?;
                    rows.push((i + 1, x, ell, theta, kind));
                }
            }
        }
        let missing = |what: &str| perr(0, format!("missing {what} header"));
        let cfg = ChainConfig::new(n.ok_or_else(|| missing("N"))?, big_f.ok_or_else(|| missing("F"))?)?;
        let (rline, rtoks) = regions_line.ok_or_else(|| missing("regions"))?;
        let regions = match rtoks.first().map(String::as_str) {
            Some("full") => RegionDecomposition::full_atomistic(),
            Some("none") | None => RegionDecomposition::continuum(),
            _ => {
                let mut ivs = Vec::new();
                for tok in &rtoks {
                    let (a, b) = tok.split_once(':').ok_or_else(|| perr(rline, format!("bad interval {tok}")))?;
                    let a = a.parse().map_err(|_| perr(rline, format!("bad interval {tok}")))?;
                    let b = b.parse().map_err(|_| perr(rline, format!("bad interval {tok}")))?;
                    ivs.push((a, b));
                }
                RegionDecomposition::from_atoms(&cfg, &ivs)?
            }
        };
        let cont: Vec<f64> = rows
            .iter()
            .filter(|r| r.4 == NodeKind::Continuum)
            .map(|r| r.1)
            .collect();
        let mesh = Mesh::build(&cfg, &regions, &cont)?;
        if let Some(kk) = k {
            if kk != mesh.len() || rows.len() != kk {
                return Err(perr(0, format!("K = {kk} but mesh has {} nodes", mesh.len())));
            }
        }
        for (row, nd) in rows.iter().zip(mesh.nodes()) {
            if row.1.to_bits() != nd.x.to_bits() || row.2 != nd.ell || row.3.to_bits() != nd.theta.to_bits() || row.4 != nd.kind {
                return Err(perr(row.0, "node does not match the rebuilt mesh".into()));
            }
        }
        Ok(mesh)
    }
}

/// The common refinement 𝒯^r of the lattice and the mesh.
#[derive(Debug, Clone)]
pub struct MergedPartition {
    t: Vec<f64>,
    partition: Arc<Partition>,
    j_of_node: Vec<usize>,
    eps_r: Vec<f64>,
    eps_bar: Vec<f64>,
}

impl MergedPartition {
    pub fn new(mesh: &Mesh) -> Self {
        let cfg = mesh.config();
        let n = cfg.n();
        let mut extra: Vec<Option<usize>> = vec![None; n + 1];
        for (k, nd) in mesh.nodes().iter().enumerate() {
            if !nd.is_aligned() {
                extra[nd.ell] = Some(k);
            }
        }
        let mut t = Vec::with_capacity(n + mesh.len());
        let mut xs = Vec::with_capacity(n + mesh.len());
        let mut j_of_node = vec![0; mesh.len()];
        let mut atom_j = vec![0; n + 1];
        for l in 0..=n {
            if l >= 1 {
                atom_j[l] = t.len();
                t.push(l as f64);
                xs.push(cfg.atom_x(l));
            }
            if let Some(k) = extra[l] {
                j_of_node[k] = t.len();
                t.push(mesh.node(k).t);
                xs.push(mesh.node(k).x);
            }
        }
        for (k, nd) in mesh.nodes().iter().enumerate() {
            if nd.is_aligned() {
                j_of_node[k] = atom_j[nd.ell];
            }
        }
        let m = t.len();
        let nf = n as f64;
        let eps_r: Vec<f64> = (0..m)
            .map(|j| if j == 0 { (t[0] - (t[m - 1] - nf)) / nf } else { (t[j] - t[j - 1]) / nf })
            .collect();
        let eps_bar = (0..m).map(|j| 0.5 * (eps_r[j] + eps_r[(j + 1) % m])).collect();
        Self {
            t,
            partition: Arc::new(Partition::new(xs).expect("merged nodes are sorted")),
            j_of_node,
            eps_r,
            eps_bar,
        }
    }

    /// Number of merged nodes `n`.
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    /// Lattice coordinates of the merged nodes.
    pub fn lattice_coords(&self) -> &[f64] {
        &self.t
    }

    /// `j_k`: merged index of mesh node `k`.
    pub fn j_of_node(&self, k: usize) -> usize {
        self.j_of_node[k]
    }

    pub fn eps_r(&self) -> &[f64] {
        &self.eps_r
    }

    pub fn eps_bar(&self) -> &[f64] {
        &self.eps_bar
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subcase {
    One,
    Two,
    Three,
}

/// Position of a bond relative to the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondCase {
    InteriorAtomistic,
    InteriorElement,
    /// Across a node between two continuum elements.
    AcrossElements(Subcase),
    /// Across the node where the atomistic region starts.
    LeftInterface(Subcase),
    /// Across the node where the atomistic region ends.
    RightInterface(Subcase),
}

/// The part `b ∩ Ω_a` of a bond: its end nodes and length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomisticPart {
    pub left: usize,
    pub right: usize,
    /// Periods to add to `y(right) - y(left)` (0 or 1).
    pub wrap: f64,
    pub len: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuumPiece {
    pub element: usize,
    pub len: f64,
}

/// Bond `(iε, (i + r)ε)` with its decomposition into regions.
#[derive(Debug, Clone, PartialEq)]
pub struct Bond {
    pub start: usize,
    pub r: usize,
    pub case: BondCase,
    /// Mesh node strictly inside the bond, if any.
    pub node: Option<usize>,
    pub atomistic: Option<AtomisticPart>,
    pub continuum: Vec<ContinuumPiece>,
}

impl Bond {
    pub fn atomistic_len(&self) -> f64 {
        self.atomistic.map_or(0.0, |a| a.len)
    }

    pub fn continuum_len(&self) -> f64 {
        self.continuum.iter().map(|p| p.len).sum()
    }
}

/// All `2N` bonds of one period.
#[derive(Debug, Clone, PartialEq)]
pub struct BondSet {
    bonds: Vec<Bond>,
}

impl BondSet {
    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }
}

/// First node with lattice coordinate strictly above `t` (cyclically), and
/// that coordinate unwrapped into `t`'s frame.
fn next_node_after(mesh: &Mesh, t: f64) -> (usize, f64) {
    let nf = mesh.config().n() as f64;
    let periods = (t / nf).floor();
    let nodes = mesh.nodes();
    // Compare unwrapped, with the same arithmetic as the returned value, so
    // that the result is strictly above `t` even after rounding.
    let idx = nodes.partition_point(|nd| nd.t + periods * nf <= t);
    if idx == nodes.len() {
        (0, nodes[0].t + (periods + 1.0) * nf)
    } else {
        (idx, nodes[idx].t + periods * nf)
    }
}

pub fn classify_bonds(mesh: &Mesh) -> Result<BondSet> {
    let n = mesh.config().n();
    let nf = n as f64;
    let mut bonds = Vec::with_capacity(2 * n);
    for r in 1..=2usize {
        for i in 0..n {
            let lo = i as f64;
            let hi = lo + r as f64;
            let mut cur = lo;
            let mut interior: Vec<(usize, f64)> = Vec::new();
            let mut pieces: Vec<(usize, f64, f64)> = Vec::new();
            loop {
                let (k, tk) = next_node_after(mesh, cur);
                let end = tk.min(hi);
                pieces.push((k, cur, end));
                if tk < hi {
                    interior.push((k, tk));
                    cur = tk;
                } else {
                    break;
                }
            }
            if interior.len() > 1 {
                return Err(QcError::validation(
                    "bond-span",
                    format!("bond ({i}, {}) spans more than two elements", i + r),
                ));
            }
            let mut atomistic: Option<AtomisticPart> = None;
            let mut continuum = Vec::new();
            for &(e, a, b) in &pieces {
                match mesh.element_region(e) {
                    Region::Continuum => continuum.push(ContinuumPiece {
                        element: e,
                        len: (b - a) / nf,
                    }),
                    Region::Atomistic => {
                        let left = mesh.left_node(e);
                        let wrap_l = ((a - mesh.node(left).t) / nf).round();
                        let wrap_r = ((b - mesh.node(e).t) / nf).round();
                        atomistic = Some(match atomistic {
                            None => AtomisticPart {
                                left,
                                right: e,
                                wrap: wrap_r - wrap_l,
                                len: (b - a) / nf,
                            },
                            Some(prev) => AtomisticPart {
                                left: prev.left,
                                right: e,
                                wrap: prev.wrap + (wrap_r - wrap_l),
                                len: prev.len + (b - a) / nf,
                            },
                        });
                    }
                }
            }
            let case = match interior.first() {
                None if atomistic.is_some() => BondCase::InteriorAtomistic,
                None => BondCase::InteriorElement,
                Some(&(k, tk)) => match mesh.node(k).kind {
                    NodeKind::Atomistic => BondCase::InteriorAtomistic,
                    NodeKind::Continuum => {
                        if r == 1 {
                            BondCase::AcrossElements(Subcase::One)
                        } else if tk - lo >= 1.0 {
                            BondCase::AcrossElements(Subcase::Two)
                        } else {
                            BondCase::AcrossElements(Subcase::Three)
                        }
                    }
                    NodeKind::LeftInterface => BondCase::LeftInterface(Subcase::Two),
                    NodeKind::RightInterface => BondCase::RightInterface(Subcase::Three),
                },
            };
            bonds.push(Bond {
                start: i,
                r,
                case,
                node: interior.first().map(|p| p.0),
                atomistic,
                continuum,
            });
        }
    }
    Ok(BondSet { bonds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg8() -> ChainConfig {
        ChainConfig::new(8, 1.0).unwrap()
    }

    #[test]
    fn wrapped_nodes_near_the_boundary_terminate() {
        // Reducing `t + N` back into the period may round below `t`.
        for n in [37usize, 64, 99, 257] {
            let cfg = ChainConfig::new(n, 1.0).unwrap();
            for frac in [0.1, 0.3, 0.7, 0.9, 1.3, 1.7] {
                let mut ts = vec![frac];
                let mut t = frac + 3.0;
                while t + 2.0 < n as f64 + frac {
                    ts.push(t);
                    t += 3.0;
                }
                let xs: Vec<f64> = ts.iter().map(|t| t / n as f64).collect();
                let m = Mesh::build(&cfg, &RegionDecomposition::continuum(), &xs).unwrap();
                assert_eq!(classify_bonds(&m).unwrap().len(), 2 * n);
            }
        }
    }

    #[test]
    fn tiny_hand_mesh() {
        let cfg = cfg8();
        let regions = RegionDecomposition::from_intervals(&cfg, &[(0.375, 0.625)]).unwrap();
        // Continuum elements must be at least 2ε, so with N = 8 only two
        // continuum nodes fit besides the interface atoms.
        let err = Mesh::build(&cfg, &regions, &[0.125, 0.875, 1.0]).unwrap_err();
        assert!(matches!(err, QcError::Validation { rule: "continuum-element-size", .. }));
        let mesh = Mesh::build(&cfg, &regions, &[0.125, 0.875]).unwrap();
        assert_eq!(mesh.len(), 5);
        mesh.check_invariants().unwrap();
        let kinds: Vec<NodeKind> = mesh.nodes().iter().map(|n| n.kind).collect();
        use NodeKind::*;
        assert_eq!(kinds, vec![Continuum, LeftInterface, Atomistic, RightInterface, Continuum]);
        assert_eq!(mesh.continuum_elements(), vec![0, 1, 4]);
        assert_eq!(mesh.interior_continuum_elements(), vec![0]);
        assert_eq!(mesh.element_size(0), 0.25);
    }

    #[test]
    fn anchors() {
        let cfg = cfg8();
        let (l, th) = cfg.anchor(0.3);
        assert_eq!(l, 2);
        assert!((th - 0.4).abs() < 1e-12);
        assert_eq!(cfg.anchor(0.375 + 1e-15), (3, 0.0));
        assert_eq!(cfg.anchor(1.0), (8, 0.0));
    }

    #[test]
    fn small_continuum_element_is_rejected() {
        let cfg = ChainConfig::new(16, 1.0).unwrap();
        let err = Mesh::build(&cfg, &RegionDecomposition::continuum(), &[0.25, 0.25 + 1.5 / 16.0, 1.0]).unwrap_err();
        assert!(matches!(err, QcError::Validation { rule: "continuum-element-size", .. }));
    }

    #[test]
    fn region_rules() {
        let cfg = ChainConfig::new(32, 1.0).unwrap();
        let rule = |r: Result<RegionDecomposition>| match r {
            Err(QcError::Validation { rule, .. }) => rule,
            _ => "ok",
        };
        assert_eq!(rule(RegionDecomposition::from_atoms(&cfg, &[(2, 10)])), "boundary-buffer");
        assert_eq!(rule(RegionDecomposition::from_atoms(&cfg, &[(3, 29)])), "ok");
        assert_eq!(rule(RegionDecomposition::from_atoms(&cfg, &[(3, 30)])), "boundary-buffer");
        assert_eq!(rule(RegionDecomposition::from_atoms(&cfg, &[(5, 5)])), "interval-order");
        assert_eq!(rule(RegionDecomposition::from_atoms(&cfg, &[(5, 9), (10, 12)])), "interval-separation");
        assert_eq!(rule(RegionDecomposition::from_atoms(&cfg, &[(5, 9), (11, 12)])), "ok");
        let regions = RegionDecomposition::from_atoms(&cfg, &[(10, 20)]).unwrap();
        let err = Mesh::build(&cfg, &regions, &[0.5 + 0.3 / 32.0, 1.0]).unwrap_err();
        assert!(matches!(err, QcError::Validation { rule: "node-inside-atomistic", .. }));
    }

    #[test]
    fn merged_partition_counts() {
        let cfg = cfg8();
        let regions = RegionDecomposition::from_intervals(&cfg, &[(0.375, 0.625)]).unwrap();
        let aligned = Mesh::build(&cfg, &regions, &[0.125, 0.875]).unwrap();
        assert_eq!(MergedPartition::new(&aligned).len(), 8);
        let cfg16 = ChainConfig::new(16, 1.0).unwrap();
        let mesh = Mesh::build(&cfg16, &RegionDecomposition::continuum(), &[0.15, 0.3, 0.55, 1.0]).unwrap();
        let m = MergedPartition::new(&mesh);
        assert_eq!(m.len(), 16 + 3);
        for k in 0..mesh.len() {
            assert_eq!(m.partition().node(m.j_of_node(k)), mesh.node(k).x);
        }
        assert!(m.eps_r().iter().all(|&e| e > 0.0));
        assert!((m.eps_r().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        let one = Mesh::build(&cfg, &RegionDecomposition::continuum(), &[1.0]).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(MergedPartition::new(&one).len(), 8);
    }

    #[test]
    fn bond_cases_and_lengths() {
        let cfg = ChainConfig::new(20, 1.0).unwrap();
        let regions = RegionDecomposition::from_atoms(&cfg, &[(8, 11)]).unwrap();
        let x = |t: f64| t / 20.0;
        let mesh = Mesh::build(&cfg, &regions, &[x(2.4), x(5.0), x(14.5), x(20.0)]).unwrap();
        let bonds = classify_bonds(&mesh).unwrap();
        assert_eq!(bonds.len(), 40);
        let total: f64 = bonds.bonds().iter().map(|b| b.atomistic_len() + b.continuum_len()).sum();
        assert!((total - 3.0).abs() < 1e-12);
        for b in bonds.bonds() {
            assert!((b.atomistic_len() + b.continuum_len() - b.r as f64 / 20.0).abs() < 1e-14);
        }
        let case = |i: usize, r: usize| bonds.bonds().iter().find(|b| b.start == i && b.r == r).unwrap().case;
        use BondCase::*;
        assert_eq!(case(2, 1), AcrossElements(Subcase::One));
        assert_eq!(case(1, 2), AcrossElements(Subcase::Two));
        assert_eq!(case(2, 2), AcrossElements(Subcase::Three));
        assert_eq!(case(4, 2), AcrossElements(Subcase::Two)); // aligned node at 5
        assert_eq!(case(7, 2), LeftInterface(Subcase::Two));
        assert_eq!(case(10, 2), RightInterface(Subcase::Three));
        assert_eq!(case(8, 2), InteriorAtomistic);
        assert_eq!(case(15, 1), InteriorElement);
        assert_eq!(case(19, 2), AcrossElements(Subcase::Two)); // wraps through x = 1
        assert_eq!(case(16, 2), InteriorElement);
        let across = bonds.bonds().iter().find(|b| b.start == 9 && b.r == 2).unwrap();
        assert_eq!(across.atomistic.unwrap().len, 0.1);
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let cfg = ChainConfig::new(32, 1.1).unwrap();
        let regions = RegionDecomposition::from_atoms(&cfg, &[(10, 14), (20, 23)]).unwrap();
        let mesh = Mesh::build(&cfg, &regions, &[0.1, 0.2 + 1e-3, 17.3 / 32.0, 0.9, 1.0]).unwrap();
        let back = Mesh::from_text(&mesh.to_text()).unwrap();
        assert_eq!(back, mesh);
        let full = Mesh::full_atomistic(&cfg).unwrap();
        assert_eq!(Mesh::from_text(&full.to_text()).unwrap(), full);
    }
}
