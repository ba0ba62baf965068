//! Symmetric cyclic band matrices and an O(n·p²) solver for the periodic
//! Hessians of both chain models.
//!
//! A periodic chain with next-nearest-neighbour bonds gives a matrix whose
//! nonzeros sit within cyclic distance `p = 2` of the diagonal. Fixing one
//! unknown (the translation gauge) leaves an SPD system that is banded except
//! for `p × p` corner blocks; we factor the banded interior with LDLᵀ and
//! close the corners with a small Schur complement.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NotPositiveDefinite {
    pub pivot: usize,
    pub value: f64,
}

impl fmt::Display for NotPositiveDefinite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "pivot {} is {} (matrix not positive definite)", self.pivot, self.value)
    }
}

#[derive(Debug, Clone)]
enum Storage {
    /// `band[i * (p + 1) + d] = A(i, (i + d) mod n)` for `d = 0..=p`.
    Band(Vec<f64>),
    /// Row-major dense storage for tiny systems where cyclic offsets alias.
    Dense(Vec<f64>),
}

/// Symmetric matrix with cyclic half-bandwidth `p`.
#[derive(Debug, Clone)]
pub struct SymCyclicBand {
    n: usize,
    p: usize,
    storage: Storage,
}

impl SymCyclicBand {
    pub fn new(n: usize, p: usize) -> Self {
        assert!(n > 0);
        let storage = if n > 2 * p {
            Storage::Band(vec![0.0; n * (p + 1)])
        } else {
            Storage::Dense(vec![0.0; n * n])
        };
        Self { n, p, storage }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.p
    }

    /// Adds `v` to `A(i, j)` and, for `i != j`, to `A(j, i)`.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let n = self.n;
        match &mut self.storage {
            Storage::Dense(a) => {
                a[i * n + j] += v;
                if i != j {
                    a[j * n + i] += v;
                }
            }
            Storage::Band(b) => {
                let p = self.p;
                let d = (j + n - i) % n;
                if d <= p {
                    b[i * (p + 1) + d] += v;
                } else {
                    let d2 = (i + n - j) % n;
                    assert!(d2 <= p, "entry ({i},{j}) outside cyclic band {p}");
                    b[j * (p + 1) + d2] += v;
                }
            }
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        match &self.storage {
            Storage::Dense(a) => a[i * n + j],
            Storage::Band(b) => {
                let p = self.p;
                let d = (j + n - i) % n;
                if d <= p {
                    b[i * (p + 1) + d]
                } else {
                    let d2 = (i + n - j) % n;
                    if d2 <= p {
                        b[j * (p + 1) + d2]
                    } else {
                        0.0
                    }
                }
            }
        }
    }

    pub fn add_to_diagonal(&mut self, shift: f64) {
        for i in 0..self.n {
            self.add(i, i, shift);
        }
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).abs()).fold(0.0, f64::max)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(x.len(), n);
        match &self.storage {
            Storage::Dense(a) => (0..n)
                .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
                .collect(),
            Storage::Band(b) => {
                let p = self.p;
                let mut y = vec![0.0; n];
                for i in 0..n {
                    y[i] += b[i * (p + 1)] * x[i];
                    for d in 1..=p {
                        let j = (i + d) % n;
                        let a = b[i * (p + 1) + d];
                        y[i] += a * x[j];
                        y[j] += a * x[i];
                    }
                }
                y
            }
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Solves `A x = b` on the subspace `x[pin] = 0`, discarding equation
    /// `pin`. The reduced matrix must be positive definite.
    pub fn solve_pinned(&self, b: &[f64], pin: usize) -> Result<Vec<f64>, NotPositiveDefinite> {
        let n = self.n;
        assert_eq!(b.len(), n);
        assert!(pin < n);
        if n == 1 {
            return Ok(vec![0.0]);
        }
        let m = n - 1;
        // Rotate so that the pinned unknown would be index m.
        let orig = |q: usize| (pin + 1 + q) % n;
        let a = |q1: usize, q2: usize| self.get(orig(q1), orig(q2));
        let rhs: Vec<f64> = (0..m).map(|q| b[orig(q)]).collect();
        let p = self.p;
        let xr = if m <= 3 * p {
            dense_ldlt_solve(m, &a, &rhs)?
        } else {
            bordered_band_solve(m, p, &a, &rhs)?
        };
        let mut x = vec![0.0; n];
        for (q, v) in xr.into_iter().enumerate() {
            x[orig(q)] = v;
        }
        Ok(x)
    }
}

fn pivot_ok(v: f64, scale: f64) -> bool {
    v > 1e-14 * scale && v.is_finite()
}

fn dense_ldlt_solve(
    m: usize,
    a: &impl Fn(usize, usize) -> f64,
    rhs: &[f64],
) -> Result<Vec<f64>, NotPositiveDefinite> {
    let mut l = vec![0.0; m * m];
    let mut d = vec![0.0; m];
    let scale = (0..m).map(|i| a(i, i).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for i in 0..m {
        for j in 0..i {
            let mut s = a(i, j);
            for k in 0..j {
                s -= l[i * m + k] * l[j * m + k] * d[k];
            }
            l[i * m + j] = s / d[j];
        }
        let mut s = a(i, i);
        for k in 0..i {
            s -= l[i * m + k] * l[i * m + k] * d[k];
        }
        if !pivot_ok(s, scale) {
            return Err(NotPositiveDefinite { pivot: i, value: s });
        }
        d[i] = s;
    }
    let mut z = rhs.to_vec();
    for i in 0..m {
        for k in 0..i {
            z[i] -= l[i * m + k] * z[k];
        }
    }
    for i in 0..m {
        z[i] /= d[i];
    }
    for i in (0..m).rev() {
        for k in i + 1..m {
            z[i] -= l[k * m + i] * z[k];
        }
    }
    Ok(z)
}

/// Banded LDLᵀ factor of a symmetric band matrix of size `q`.
struct BandLdlt {
    q: usize,
    p: usize,
    /// `l[i * p + (d - 1)] = L(i, i - d)`.
    l: Vec<f64>,
    d: Vec<f64>,
}

impl BandLdlt {
    fn factor(
        q: usize,
        p: usize,
        a: &impl Fn(usize, usize) -> f64,
        scale: f64,
    ) -> Result<Self, NotPositiveDefinite> {
        let mut l = vec![0.0; q * p];
        let mut d = vec![0.0; q];
        for i in 0..q {
            let j0 = i.saturating_sub(p);
            for j in j0..i {
                let mut s = a(i, j);
                for k in j0.max(j.saturating_sub(p))..j {
                    s -= l[i * p + (i - k - 1)] * l[j * p + (j - k - 1)] * d[k];
                }
                l[i * p + (i - j - 1)] = s / d[j];
            }
            let mut s = a(i, i);
            for k in j0..i {
                let lik = l[i * p + (i - k - 1)];
                s -= lik * lik * d[k];
            }
            if !pivot_ok(s, scale) {
                return Err(NotPositiveDefinite { pivot: i, value: s });
            }
            d[i] = s;
        }
        Ok(Self { q, p, l, d })
    }

    fn solve_in_place(&self, z: &mut [f64]) {
        let (q, p) = (self.q, self.p);
        for i in 0..q {
            for k in i.saturating_sub(p)..i {
                z[i] -= self.l[i * p + (i - k - 1)] * z[k];
            }
        }
        for i in 0..q {
            z[i] /= self.d[i];
        }
        for i in (0..q).rev() {
            for k in i + 1..(i + p + 1).min(q) {
                z[i] -= self.l[k * p + (k - i - 1)] * z[k];
            }
        }
    }
}

fn bordered_band_solve(
    m: usize,
    p: usize,
    a: &impl Fn(usize, usize) -> f64,
    rhs: &[f64],
) -> Result<Vec<f64>, NotPositiveDefinite> {
    let q = m - p;
    let scale = (0..m).map(|i| a(i, i).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let fac = BandLdlt::factor(q, p, a, scale)?;
    // Border columns are nonzero only in the first and last p rows of the interior.
    let border_rows = |c: usize| {
        let col = q + c;
        (0..q)
            .filter(move |&i| i < p || i + p >= q)
            .map(move |i| (i, a(i, col)))
    };
    let mut x_cols = Vec::with_capacity(p);
    for c in 0..p {
        let mut col = vec![0.0; q];
        for (i, v) in border_rows(c) {
            col[i] = v;
        }
        fac.solve_in_place(&mut col);
        x_cols.push(col);
    }
    let mut s = vec![0.0; p * p];
    for r in 0..p {
        for c in 0..p {
            let mut v = a(q + r, q + c);
            for (i, air) in border_rows(r) {
                v -= air * x_cols[c][i];
            }
            s[r * p + c] = v;
        }
    }
    let mut z = rhs[..q].to_vec();
    fac.solve_in_place(&mut z);
    let rb: Vec<f64> = (0..p)
        .map(|r| {
            let mut v = rhs[q + r];
            for (i, air) in border_rows(r) {
                v -= air * z[i];
            }
            v
        })
        .collect();
    let xb = dense_ldlt_solve(p, &|i, j| s[i * p + j], &rb).map_err(|e| NotPositiveDefinite {
        pivot: q + e.pivot,
        value: e.value,
    })?;
    let mut x = z;
    for c in 0..p {
        for i in 0..q {
            x[i] -= x_cols[c][i] * xb[c];
        }
    }
    x.extend_from_slice(&xb);
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Random periodic "stiffness" matrix: Σ k (e_i - e_j)(e_i - e_j)ᵀ for
    /// cyclic neighbours within distance p, plus a small diagonal.
    fn random_stiffness(n: usize, p: usize, rng: &mut ChaCha8Rng, diag: f64) -> SymCyclicBand {
        let mut a = SymCyclicBand::new(n, p);
        for i in 0..n {
            for d in 1..=p.min(n - 1) {
                let j = (i + d) % n;
                let k: f64 = rng.gen_range(0.5..2.0);
                a.add(i, i, k);
                a.add(j, j, k);
                a.add(i, j, -k);
            }
            a.add(i, i, diag);
        }
        a
    }

    #[test]
    fn pinned_solve_matches_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3, 4, 5, 6, 7, 8, 9, 13, 40, 101] {
            for pin in [0, n / 2, n - 1] {
                let a = random_stiffness(n, 2, &mut rng, 0.0);
                let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let x = a.solve_pinned(&b, pin).unwrap();
                assert_eq!(x[pin], 0.0);
                let ax = a.matvec(&x);
                for i in (0..n).filter(|&i| i != pin) {
                    assert!((ax[i] - b[i]).abs() < 1e-9, "n={n} pin={pin} row {i}");
                }
            }
        }
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_stiffness(11, 2, &mut rng, 0.3);
        let d = a.to_dense();
        let x: Vec<f64> = (0..11).map(|i| (i as f64).sin()).collect();
        let y = a.matvec(&x);
        for i in 0..11 {
            let yi: f64 = (0..11).map(|j| d[i][j] * x[j]).sum();
            assert!((y[i] - yi).abs() < 1e-13);
            for j in 0..11 {
                assert_eq!(d[i][j], d[j][i]);
            }
        }
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let mut a = SymCyclicBand::new(10, 2);
        for i in 0..10 {
            a.add(i, i, -1.0);
        }
        assert!(a.solve_pinned(&vec![1.0; 10], 0).is_err());
    }
}
