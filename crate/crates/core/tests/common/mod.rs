//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use qc_chain::{ChainConfig, Field, FieldKind, Mesh, MorseParams, Potential, RegionDecomposition};
use rand::Rng;

pub fn morse() -> Potential {
    Potential::morse(MorseParams { alpha: 5.0 }).unwrap()
}

/// Next-node offsets inside a continuum gap: steps in [2, 5), with roughly
/// half of the nodes off the lattice.
fn fill_gap<R: Rng>(rng: &mut R, start: f64, end: f64, out: &mut Vec<f64>) {
    let mut t = start;
    loop {
        let step = if rng.gen_bool(0.5) {
            rng.gen_range(2..5) as f64
        } else {
            rng.gen_range(2..4) as f64 + rng.gen_range(0.1..0.9)
        };
        let next = t + step;
        if end - next < 2.0 {
            break;
        }
        out.push(next);
        t = next;
    }
}

/// A random valid mesh on `n` atoms: no, one or two atomistic intervals and
/// continuum nodes with mixed alignment. `n` should be at least 24.
pub fn random_mesh<R: Rng>(rng: &mut R, n: usize, big_f: f64) -> Arc<Mesh> {
    let cfg = ChainConfig::new(n, big_f).unwrap();
    let count = rng.gen_range(0..3usize);
    let mut intervals = Vec::new();
    if count > 0 {
        // split [3, n-3] into `count` slots
        let slot = (n - 6) / count;
        for i in 0..count {
            let lo = 3 + i * slot;
            let hi = lo + slot - 2; // leave a separation of at least 2
            let a = rng.gen_range(lo..lo + (hi - lo) / 2);
            let b = rng.gen_range(a + 1..=hi.min(n - 3));
            intervals.push((a, b));
        }
    }
    let regions = if intervals.is_empty() {
        RegionDecomposition::continuum()
    } else {
        RegionDecomposition::from_atoms(&cfg, &intervals).unwrap()
    };
    let nf = n as f64;
    let mut ts = Vec::new();
    if intervals.is_empty() {
        ts.push(nf);
        fill_gap(rng, 0.0, nf, &mut ts);
    } else {
        for (i, &(_, b)) in intervals.iter().enumerate() {
            let next_a = intervals.get(i + 1).map_or(intervals[0].0 as f64 + nf, |iv| iv.0 as f64);
            fill_gap(rng, b as f64, next_a, &mut ts);
        }
    }
    let mut xs: Vec<f64> = ts
        .iter()
        .map(|&t| {
            let t = if t > nf { t - nf } else { t };
            t / nf
        })
        .collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Arc::new(Mesh::build(&cfg, &regions, &xs).unwrap())
}

/// Zero-mean random lattice displacement.
pub fn random_lattice_field<R: Rng>(rng: &mut R, n: usize, smooth: bool) -> Field {
    let phase: f64 = rng.gen_range(0.0..1.0);
    let amp: f64 = rng.gen_range(0.2..2.0);
    let noise = if smooth { 0.05 } else { 1.0 };
    let values: Vec<f64> = (1..=n)
        .map(|l| {
            let x = l as f64 / n as f64;
            amp * (2.0 * std::f64::consts::PI * (x + phase)).sin() + noise * rng.gen_range(-1.0..1.0)
        })
        .collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let values = values.into_iter().map(|v| v - mean).collect();
    Field::new(Arc::new(qc_chain::Partition::lattice(n)), values, FieldKind::Displacement).unwrap()
}

/// `ε Σ |v'_ℓ|²` to the one-half, computed from atom values.
pub fn lattice_gradient_norm(v: &Field, n: usize) -> f64 {
    let eps = 1.0 / n as f64;
    (1..=n)
        .map(|l| {
            let d = (v.value_at(l as f64 * eps) - v.value_at((l - 1) as f64 * eps)) / eps;
            eps * d * d
        })
        .sum::<f64>()
        .sqrt()
}
