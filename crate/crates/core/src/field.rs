//! Periodic continuous piecewise-linear functions on 1D partitions.
//!
//! A [`Partition`] stores the nodes `x_1 < … < x_K` of one period `(0, 1]`;
//! element `k` is `[x_{k-1}, x_k]` with `x_{-1} = x_{K-1} - 1`. A [`Field`]
//! holds nodal values on such a partition. Deformations `y = Fx + u` carry
//! the macroscopic gradient so that `y(x + 1) = y(x) + F`.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{QcError, Result};

/// Weighted ℓᵖ norms used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    L2,
    LInf,
}

/// Weighted norm of `values` over `indices`: `Σ w|v|`, `(Σ w v²)^½` or `max |v|`.
///
/// An empty index set has norm 0 for `p < ∞` and is an error for `p = ∞`.
pub fn weighted_norm(
    values: &[f64],
    weights: &[f64],
    p: Norm,
    indices: impl IntoIterator<Item = usize>,
) -> Result<f64> {
    let mut acc = 0.0;
    let mut seen = false;
    for i in indices {
        seen = true;
        let v = values[i].abs();
        match p {
            Norm::L1 => acc += weights[i] * v,
            Norm::L2 => acc += weights[i] * v * v,
            Norm::LInf => acc = f64::max(acc, v),
        }
    }
    match p {
        Norm::L1 => Ok(acc),
        Norm::L2 => Ok(acc.sqrt()),
        Norm::LInf if !seen => Err(QcError::param("max norm over an empty index set")),
        Norm::LInf => Ok(acc),
    }
}

/// Sorted nodes of one period, `0 < x_1 < … < x_K ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    nodes: Vec<f64>,
}

impl Partition {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(QcError::param("partition needs at least one node"));
        }
        if nodes[0] <= 0.0 || *nodes.last().unwrap() > 1.0 {
            return Err(QcError::param("partition nodes must lie in (0, 1]"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(QcError::param("partition nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    /// The lattice partition with atoms at `ℓ/N`, `ℓ = 1..=N`.
    pub fn lattice(n: usize) -> Self {
        Self {
            nodes: (1..=n).map(|l| l as f64 / n as f64).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node(&self, k: usize) -> f64 {
        self.nodes[k]
    }

    /// Left endpoint of element `k`, unwrapped so that it is below `x_k`.
    pub fn left_of(&self, k: usize) -> f64 {
        if k == 0 {
            self.nodes[self.nodes.len() - 1] - 1.0
        } else {
            self.nodes[k - 1]
        }
    }

    /// Element sizes `h_k = x_k - x_{k-1}`.
    pub fn sizes(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.nodes[k] - self.left_of(k)).collect()
    }

    /// Trapezoid weights `½(x_{k+1} - x_{k-1})`; they sum to one.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.sizes();
        let k = h.len();
        (0..k).map(|i| 0.5 * (h[i] + h[(i + 1) % k])).collect()
    }

    /// Element `k` with `x_{k-1} ≤ x < x_k` for `x ∈ [0, 1)`; returns `k = K`
    /// for the wrap-around piece `[x_{K-1}, x_0 + 1)` when `x_{K-1} < 1`.
    fn locate(&self, x: f64) -> usize {
        self.nodes.partition_point(|&n| n <= x)
    }
}

/// What a field's nodal values represent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldKind {
    /// 1-periodic displacement `u`.
    Displacement,
    /// Deformation `y = Fx + u`.
    Deformation { big_f: f64 },
}

impl FieldKind {
    pub fn period_jump(&self) -> f64 {
        match *self {
            FieldKind::Displacement => 0.0,
            FieldKind::Deformation { big_f } => big_f,
        }
    }
}

/// Continuous piecewise-linear function on a partition.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    partition: Arc<Partition>,
    values: Vec<f64>,
    kind: FieldKind,
}

impl Field {
    pub fn new(partition: Arc<Partition>, values: Vec<f64>, kind: FieldKind) -> Result<Self> {
        if values.len() != partition.len() {
            return Err(QcError::param(format!(
                "field has {} values for {} nodes",
                values.len(),
                partition.len()
            )));
        }
        Ok(Self {
            partition,
            values,
            kind,
        })
    }

    /// Samples `g` at the nodes.
    pub fn from_fn(partition: Arc<Partition>, kind: FieldKind, g: impl Fn(f64) -> f64) -> Self {
        let values = partition.nodes().iter().map(|&x| g(x)).collect();
        Self {
            partition,
            values,
            kind,
        }
    }

    pub fn partition(&self) -> &Arc<Partition> {
        &self.partition
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    /// Value at an arbitrary real `x`, half-open convention `[x_{k-1}, x_k)`.
    pub fn value_at(&self, x: f64) -> f64 {
        let p = &self.partition;
        let jump = self.kind.period_jump();
        let periods = x.floor();
        let xr = x - periods;
        let k = p.locate(xr);
        let kk = p.len();
        let (xl, vl, xh, vh) = if k == kk {
            (p.nodes[kk - 1], self.values[kk - 1], p.nodes[0] + 1.0, self.values[0] + jump)
        } else if k == 0 {
            (p.nodes[kk - 1] - 1.0, self.values[kk - 1] - jump, p.nodes[0], self.values[0])
        } else {
            (p.nodes[k - 1], self.values[k - 1], p.nodes[k], self.values[k])
        };
        let t = (xr - xl) / (xh - xl);
        vl + t * (vh - vl) + jump * periods
    }

    /// Elementwise slopes `v'_k = (v_k - v_{k-1}) / h_k`. Deformations are
    /// differenced through `u = y - Fx`, so `y = Fx` has slope exactly `F`.
    pub fn derivative(&self) -> Vec<f64> {
        let h = self.partition.sizes();
        let jump = self.kind.period_jump();
        let u: Vec<f64> = self.values.iter().zip(self.partition.nodes()).map(|(&v, &x)| v - jump * x).collect();
        let k = u.len();
        (0..k)
            .map(|i| jump + (u[i] - u[(i + k - 1) % k]) / h[i])
            .collect()
    }

    /// Second differences `v''_k = (v'_{k+1} - v'_k) / ½(h_k + h_{k+1})`, one per node.
    pub fn second_derivative(&self) -> Vec<f64> {
        let d = self.derivative();
        let w = self.partition.trapezoid_weights();
        let k = d.len();
        (0..k).map(|i| (d[(i + 1) % k] - d[i]) / w[i]).collect()
    }

    /// `‖v'‖` in the ℓᵖ norm weighted by element sizes; for p = 2 this is the
    /// exact `L²(0,1)` norm of the derivative.
    pub fn derivative_norm(&self, p: Norm) -> f64 {
        let d = self.derivative();
        weighted_norm(&d, &self.partition.sizes(), p, 0..d.len()).expect("nonempty")
    }

    /// Trapezoidal mean `Σ_k ½(x_{k+1} - x_{k-1}) u_k` of the displacement part.
    pub fn mean(&self) -> f64 {
        let w = self.partition.trapezoid_weights();
        let jump = self.kind.period_jump();
        self.values
            .iter()
            .zip(self.partition.nodes())
            .zip(&w)
            .map(|((&v, &x), &w)| w * (v - jump * x))
            .sum()
    }

    /// Subtracts the trapezoidal mean of the displacement part.
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
    }

    /// Displacement part `u = y - Fx` (identity for displacements).
    pub fn displacement(&self) -> Field {
        let jump = self.kind.period_jump();
        let values = self
            .values
            .iter()
            .zip(self.partition.nodes())
            .map(|(&v, &x)| v - jump * x)
            .collect();
        Field {
            partition: self.partition.clone(),
            values,
            kind: FieldKind::Displacement,
        }
    }

    /// Writes `x value` lines with a comment header.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self.kind {
            FieldKind::Displacement => s.push_str("# displacement\n"),
            FieldKind::Deformation { big_f } => {
                let _ = writeln!(s, "# deformation F={big_f:e}");
            }
        }
        for (x, v) in self.partition.nodes().iter().zip(&self.values) {
            let _ = writeln!(s, "{x:e} {v:e}");
        }
        s
    }

    /// Parses `x value` lines; blank lines and `#` comments are skipped.
    pub fn from_text(text: &str, kind: FieldKind) -> Result<Field> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<f64> {
                tok.ok_or_else(|| QcError::Parse {
                    line: i + 1,
                    detail: "expected `x value`".into(),
                })?
                .parse::<f64>()
                .map_err(|e| QcError::Parse {
                    line: i + 1,
                    detail: e.to_string(),
                })
            };
            xs.push(parse(it.next())?);
            vs.push(parse(it.next())?);
            if it.next().is_some() {
                return Err(QcError::Parse {
                    line: i + 1,
                    detail: "trailing tokens".into(),
                });
            }
        }
        Field::new(Arc::new(Partition::new(xs)?), vs, kind)
    }
}

/// Nodal interpolation of `src` onto `target`.
pub fn interpolate(src: &Field, target: &Arc<Partition>) -> Field {
    let values = target.nodes().iter().map(|&x| src.value_at(x)).collect();
    Field {
        partition: target.clone(),
        values,
        kind: src.kind,
    }
}

/// `J_𝒰`: lattice displacement → mesh displacement, `I_h u` minus its
/// trapezoidal mean. Deformations are mapped through their displacement part.
pub fn transfer_to_mesh(u: &Field, mesh: &Arc<Partition>) -> Field {
    let mut out = interpolate(u, mesh);
    out.remove_mean();
    out
}

/// `J_{𝒰_qc}`: mesh field → lattice field, `I_ε u_h - ε Σ_ℓ u_h(ℓε)`.
pub fn transfer_to_lattice(u_h: &Field, n: usize) -> Field {
    let mut out = interpolate(u_h, &Arc::new(Partition::lattice(n)));
    out.remove_mean();
    out
}

/// `Σ_j w_j f(x_j) g(x_j)` with the trapezoid weights of `on`, i.e. `∫ I(fg)`.
pub fn inner_product(f: &Field, g: &Field, on: &Partition) -> f64 {
    on.trapezoid_weights()
        .iter()
        .zip(on.nodes())
        .map(|(&w, &x)| w * f.value_at(x) * g.value_at(x))
        .sum()
}

/// Exact `‖a' - b'‖_{L²(lo, hi)}` for two fields, integrating over the
/// common refinement of both partitions. Requires `lo < hi ≤ lo + 1`.
pub fn derivative_difference_l2(a: &Field, b: Option<&Field>, lo: f64, hi: f64) -> f64 {
    let mut cuts = vec![lo, hi];
    for f in std::iter::once(a).chain(b) {
        for &x in f.partition.nodes() {
            for shift in [-1.0, 0.0, 1.0] {
                let xs = x + lo.floor() + shift;
                if xs > lo && xs < hi {
                    cuts.push(xs);
                }
            }
        }
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let slope = |f: &Field| (f.value_at(w[1]) - f.value_at(w[0])) / len;
        let d = slope(a) - b.map_or(0.0, slope);
        acc += len * d * d;
    }
    acc.sqrt()
}
