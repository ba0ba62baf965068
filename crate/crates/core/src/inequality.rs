//! Discrete Poincaré / Friedrichs inequalities and an interpolation-error
//! bound on non-uniform weights.
//!
//! Vectors are indexed `1..=L` in the formulas and `0..L` in code. For
//! `g ∈ ℝ^L` and positive weights `ε⁰, ε¹, ε²`:
//! `g'_i = (g_i - g_{i-1})/ε¹_i` for `i = 2..L` and
//! `g''_i = (g'_{i+1} - g'_i)/ε²_i` for `i = 2..L-1`.
//!
//! The constants are the ones the proofs actually deliver (the max-weight
//! terms are taken over every index a proof touches). Each check returns
//! both sides so callers can test or report them.

use crate::error::{QcError, Result};
use crate::field::{weighted_norm, Norm};

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedVector {
    values: Vec<f64>,
    eps0: Vec<f64>,
    eps1: Vec<f64>,
    eps2: Option<Vec<f64>>,
}

fn check_weights(name: &str, w: &[f64], len: usize) -> Result<()> {
    if w.len() != len {
        return Err(QcError::param(format!("{name} has {} entries, expected {len}", w.len())));
    }
    if let Some(v) = w.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(QcError::param(format!("{name} must be positive, found {v}")));
    }
    Ok(())
}

impl WeightedVector {
    /// `eps1[0]` is unused but must be positive, like the others.
    pub fn new(values: Vec<f64>, eps0: Vec<f64>, eps1: Vec<f64>) -> Result<Self> {
        let l = values.len();
        if l < 2 {
            return Err(QcError::param("need at least two entries"));
        }
        check_weights("ε⁰", &eps0, l)?;
        check_weights("ε¹", &eps1, l)?;
        Ok(Self {
            values,
            eps0,
            eps1,
            eps2: None,
        })
    }

    pub fn with_eps2(mut self, eps2: Vec<f64>) -> Result<Self> {
        check_weights("ε²", &eps2, self.values.len())?;
        self.eps2 = Some(eps2);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `g'` stored at positions `1..L` (position 0 is zero).
    pub fn derivative(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.len()];
        for i in 1..self.len() {
            d[i] = (self.values[i] - self.values[i - 1]) / self.eps1[i];
        }
        d
    }

    /// `g''` stored at positions `1..L-1`.
    fn second_derivative(&self, eps2: &[f64]) -> Vec<f64> {
        let d = self.derivative();
        let mut s = vec![0.0; self.len()];
        for i in 1..self.len() - 1 {
            s[i] = (d[i + 1] - d[i]) / eps2[i];
        }
        s
    }
}

/// Both sides of an inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
}

impl Sides {
    /// True up to rounding of the two sides.
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-14
    }
}

fn supported(p: Norm) -> Result<()> {
    // p ∈ {1, ∞} follow from the proofs, p = 2 by interpolation between them.
    match p {
        Norm::L1 | Norm::L2 | Norm::LInf => Ok(()),
    }
}

fn max_of(w: &[f64], range: std::ops::Range<usize>) -> f64 {
    w[range].iter().copied().fold(0.0, f64::max)
}

/// Pointwise bound `|g_i| ≤ (1/h) Σ_{k=2}^L ε¹_k |g'_k| φ_{i,k}` for every `i`,
/// `h = Σ ε⁰`. Requires `Σ ε⁰_i g_i = 0`.
pub fn pre_poincare_bounds(v: &WeightedVector) -> Result<Vec<Sides>> {
    check_mean(v)?;
    let l = v.len();
    let h: f64 = v.eps0.iter().sum();
    let d = v.derivative();
    // prefix[k] = Σ_{ℓ<k} ε⁰_ℓ (0-based)
    let mut prefix = vec![0.0; l + 1];
    for i in 0..l {
        prefix[i + 1] = prefix[i] + v.eps0[i];
    }
    Ok((0..l)
        .map(|i| {
            let rhs: f64 = (1..l)
                .map(|k| {
                    let phi = if k <= i { prefix[k] } else { h - prefix[k] };
                    v.eps1[k] * d[k].abs() * phi
                })
                .sum::<f64>()
                / h;
            Sides {
                lhs: v.values[i].abs(),
                rhs,
            }
        })
        .collect())
}

fn check_mean(v: &WeightedVector) -> Result<()> {
    let m: f64 = v.values.iter().zip(&v.eps0).map(|(g, w)| g * w).sum();
    let scale: f64 = v.values.iter().zip(&v.eps0).map(|(g, w)| (g * w).abs()).sum();
    if m.abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(QcError::param(format!("weighted mean Σ ε⁰ g = {m:e} is not zero")));
    }
    Ok(())
}

/// Poincaré constant `½ L² max{max ε⁰, max_{2..L} ε¹}² / h`.
pub fn poincare_constant(eps0: &[f64], eps1: &[f64]) -> f64 {
    let l = eps0.len();
    let h: f64 = eps0.iter().sum();
    let m = max_of(eps0, 0..l).max(max_of(eps1, 1..l));
    0.5 * (l * l) as f64 * m * m / h
}

/// `‖g‖_{ℓᵖ_{ε⁰}} ≤ C ‖g'‖_{ℓᵖ_{ε¹}}` for zero-mean `g`.
pub fn poincare_bound(v: &WeightedVector, p: Norm) -> Result<Sides> {
    supported(p)?;
    check_mean(v)?;
    let l = v.len();
    let lhs = weighted_norm(&v.values, &v.eps0, p, 0..l)?;
    let rhs = poincare_constant(&v.eps0, &v.eps1) * weighted_norm(&v.derivative(), &v.eps1, p, 1..l)?;
    Ok(Sides { lhs, rhs })
}

/// Friedrichs constant `½ (L-1) max{max_{2..L-1} ε⁰, max_{2..L} ε¹}`.
pub fn friedrichs_constant(eps0: &[f64], eps1: &[f64]) -> f64 {
    let l = eps0.len();
    let m = max_of(eps0, 1..l - 1).max(max_of(eps1, 1..l));
    0.5 * (l - 1) as f64 * m
}

/// `‖f‖_{ℓᵖ_{ε⁰}} ≤ C ‖f'‖_{ℓᵖ_{ε¹}}` for `f_1 = f_L = 0`.
pub fn friedrichs_bound(v: &WeightedVector, p: Norm) -> Result<Sides> {
    supported(p)?;
    let l = v.len();
    if v.values[0] != 0.0 || v.values[l - 1] != 0.0 {
        return Err(QcError::param("Friedrichs inequality needs f_1 = f_L = 0"));
    }
    let lhs = weighted_norm(&v.values, &v.eps0, p, 0..l)?;
    let rhs = friedrichs_constant(&v.eps0, &v.eps1) * weighted_norm(&v.derivative(), &v.eps1, p, 1..l)?;
    Ok(Sides { lhs, rhs })
}

/// `F_i = f_1 + (Σ_{j=2}^i ε¹_j / Σ_{j=2}^L ε¹_j)(f_L - f_1)`: linear in the
/// cumulative ε¹ coordinate, so that `F'' = 0`.
pub fn weighted_interpolant(v: &WeightedVector) -> Vec<f64> {
    let l = v.len();
    let total: f64 = v.eps1[1..].iter().sum();
    let (f1, fl) = (v.values[0], v.values[l - 1]);
    let mut acc = 0.0;
    (0..l)
        .map(|i| {
            if i > 0 {
                acc += v.eps1[i];
            }
            if i == l - 1 {
                fl
            } else {
                f1 + acc / total * (fl - f1)
            }
        })
        .collect()
}

/// `‖f - F‖_{ℓᵖ_{ε⁰}} ≤ C_F C_P ‖f''‖_{ℓᵖ_{ε²}}` with the Friedrichs constant
/// `C_F` and the Poincaré constant `C_P` of `(f - F)'` (weights ε¹, ε²).
pub fn interpolation_error_bound(v: &WeightedVector, p: Norm) -> Result<Sides> {
    supported(p)?;
    let l = v.len();
    if l < 3 {
        return Err(QcError::param("interpolation bound needs L ≥ 3"));
    }
    let eps2 = v
        .eps2
        .as_ref()
        .ok_or_else(|| QcError::param("interpolation bound needs ε² weights"))?;
    let big_f = weighted_interpolant(v);
    let diff: Vec<f64> = v.values.iter().zip(&big_f).map(|(a, b)| a - b).collect();
    let lhs = weighted_norm(&diff, &v.eps0, p, 0..l)?;
    let c_f = friedrichs_constant(&v.eps0, &v.eps1);
    let m = max_of(&v.eps1, 1..l).max(max_of(eps2, 1..l - 1));
    let h1: f64 = v.eps1[1..].iter().sum();
    let c_p = 0.5 * ((l - 1) * (l - 1)) as f64 * m * m / h1;
    let rhs = c_f * c_p * weighted_norm(&v.second_derivative(eps2), eps2, p, 1..l - 1)?;
    Ok(Sides { lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn uniform(values: Vec<f64>) -> WeightedVector {
        let l = values.len();
        WeightedVector::new(values, vec![1.0; l], vec![1.0; l]).unwrap()
    }

    #[test]
    fn zero_vectors() {
        let z = uniform(vec![0.0; 4]);
        assert_eq!(poincare_bound(&z, Norm::L1).unwrap(), Sides { lhs: 0.0, rhs: 0.0 });
        assert_eq!(friedrichs_bound(&z, Norm::LInf).unwrap(), Sides { lhs: 0.0, rhs: 0.0 });
    }

    #[test]
    fn alternating_and_hat() {
        let alt = uniform(vec![1.0, -1.0, 1.0, -1.0]);
        for p in [Norm::L1, Norm::LInf] {
            assert!(poincare_bound(&alt, p).unwrap().holds());
        }
        let hat = uniform(vec![0.0, 1.0, 0.0]);
        let s = friedrichs_bound(&hat, Norm::LInf).unwrap();
        assert_eq!(s.lhs, 1.0);
        assert!(s.holds());
    }

    #[test]
    fn preconditions_are_enforced() {
        assert!(poincare_bound(&uniform(vec![1.0, 1.0]), Norm::L1).is_err());
        assert!(friedrichs_bound(&uniform(vec![1.0, 0.0, 0.0]), Norm::L1).is_err());
        assert!(WeightedVector::new(vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn interior_only_friedrichs_constant_is_too_small() {
        // A large last ε¹ makes f' tiny there; the interior-only maximum
        // then underestimates the constant.
        let v = WeightedVector::new(vec![0.0, 0.1, 0.2, 0.3, 0.0], vec![1.0; 5], vec![1.0, 1.0, 1.0, 1.0, 100.0]).unwrap();
        let interior = 0.5 * 4.0 * 1.0;
        let d = v.derivative();
        let max_d = d[1..].iter().map(|x| x.abs()).fold(0.0, f64::max);
        assert!(0.3 > interior * max_d);
        assert!(friedrichs_bound(&v, Norm::LInf).unwrap().holds());
    }

    #[test]
    fn interpolant_is_exact_on_its_linear_family() {
        let eps1 = vec![1.0, 0.5, 2.0, 0.7, 1.1];
        let mut acc = 0.0;
        let values: Vec<f64> = eps1
            .iter()
            .enumerate()
            .map(|(i, w)| {
                if i > 0 {
                    acc += w;
                }
                3.0 - 2.0 * acc
            })
            .collect();
        let v = WeightedVector::new(values, vec![1.0; 5], eps1).unwrap().with_eps2(vec![0.9; 5]).unwrap();
        let s = interpolation_error_bound(&v, Norm::L1).unwrap();
        assert!(s.lhs < 1e-14);
        let q = uniform((0..5).map(|i| (i * i) as f64).collect()).with_eps2(vec![1.0; 5]).unwrap();
        assert!(interpolation_error_bound(&q, Norm::LInf).unwrap().holds());
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (2usize..12).prop_flat_map(|l| {
            (
                prop::collection::vec(-1.0f64..1.0, l),
                prop::collection::vec(0.1f64..2.0, l),
                prop::collection::vec(0.1f64..2.0, l),
                prop::collection::vec(0.1f64..2.0, l),
            )
        })
    }

    proptest! {
        #[test]
        fn poincare_and_pointwise_hold((g, e0, e1, _e2) in instance()) {
            let h: f64 = e0.iter().sum();
            let m: f64 = g.iter().zip(&e0).map(|(a, b)| a * b).sum::<f64>() / h;
            let g: Vec<f64> = g.iter().map(|v| v - m).collect();
            let v = WeightedVector::new(g, e0, e1).unwrap();
            for s in pre_poincare_bounds(&v).unwrap() {
                prop_assert!(s.holds());
            }
            for p in [Norm::L1, Norm::L2, Norm::LInf] {
                prop_assert!(poincare_bound(&v, p).unwrap().holds());
            }
        }

        #[test]
        fn friedrichs_and_interpolation_hold((mut g, e0, e1, e2) in instance()) {
            let l = g.len();
            g[0] = 0.0;
            g[l - 1] = 0.0;
            let v = WeightedVector::new(g, e0, e1).unwrap().with_eps2(e2).unwrap();
            for p in [Norm::L1, Norm::L2, Norm::LInf] {
                prop_assert!(friedrichs_bound(&v, p).unwrap().holds());
                if l >= 3 {
                    prop_assert!(interpolation_error_bound(&v, p).unwrap().holds());
                }
            }
        }
    }
}
