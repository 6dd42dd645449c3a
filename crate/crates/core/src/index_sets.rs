//! Anisotropic index sets, their surfaces and the signed pairs of the
//! combination technique.
//!
//! Multi-indices are 1-based as in the usual sparse grid notation: level 1 is
//! the coarsest level of a direction. All enumerations are returned in
//! lexicographic order; precomputed models key their caches off this order.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Multi-index of direction levels, each component `>= 1`.
pub type MultiIndex = Vec<usize>;

/// Positive direction weights `omega`, kept in the caller's order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    omega: Vec<f64>,
    omega_min: f64,
    ascending: bool,
}

impl WeightVector {
    pub fn new(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(Error::InvalidArgument("weight vector must not be empty".into()));
        }
        if let Some(w) = omega.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument(alloc::format!(
                "weights must be positive and finite, got {w}"
            )));
        }
        let omega_min = omega.iter().copied().fold(f64::INFINITY, f64::min);
        let ascending = omega.windows(2).all(|w| w[0] <= w[1]);
        Ok(WeightVector {
            omega,
            omega_min,
            ascending,
        })
    }

    pub fn isotropic(d: usize) -> Self {
        Self::new(vec![1.0; d]).expect("d must be positive")
    }

    pub fn d(&self) -> usize {
        self.omega.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.omega
    }

    pub fn omega_min(&self) -> f64 {
        self.omega_min
    }

    pub fn l1(&self) -> f64 {
        self.omega.iter().sum()
    }

    /// Whether `omega_1 <= ... <= omega_d`. Only the error theory needs it.
    pub fn ascending_ok(&self) -> bool {
        self.ascending
    }

    /// Weighted level sum `sum_j (lambda_j - 1) omega_j`.
    pub fn weighted_sum(&self, lambda: &[usize]) -> f64 {
        lambda
            .iter()
            .zip(&self.omega)
            .map(|(&l, &w)| (l as f64 - 1.0) * w)
            .sum()
    }

    /// Membership in the index set at a real-valued threshold.
    pub fn contains_at(&self, lambda: &[usize], threshold: f64) -> bool {
        threshold >= 0.0
            && lambda.len() == self.d()
            && lambda.iter().all(|&l| l >= 1)
            && self.weighted_sum(lambda) <= threshold * self.omega_min
    }
}

/// `{ lambda >= 1 : sum_j (lambda_j - 1) omega_j <= threshold * omega_min }`,
/// empty for negative thresholds.
pub fn index_set_at(omega: &WeightVector, threshold: f64) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    if !(threshold >= 0.0) {
        return out;
    }
    let bound = threshold * omega.omega_min();
    let mut current = vec![1usize; omega.d()];
    // depth-first, components filled left to right, partial sums pruned
    fn walk(j: usize, partial: f64, bound: f64, omega: &[f64], current: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
        if j == omega.len() {
            out.push(current.clone());
            return;
        }
        let mut l = 1usize;
        loop {
            // terms are accumulated in the same order as `weighted_sum`
            let s = partial + (l as f64 - 1.0) * omega[j];
            if s > bound {
                break;
            }
            current[j] = l;
            walk(j + 1, s, bound, omega, current, out);
            l += 1;
        }
        current[j] = 1;
    }
    walk(0, 0.0, bound, omega.as_slice(), &mut current, &mut out);
    out
}

/// The anisotropic index set `I_omega(ell, d)`.
pub fn enumerate_index_set(omega: &WeightVector, ell: i64) -> Vec<MultiIndex> {
    index_set_at(omega, ell as f64)
}

/// Threshold of the inner set removed when forming the surface.
pub fn surface_inner_threshold(omega: &WeightVector, ell: i64) -> f64 {
    ell as f64 - omega.l1() / omega.omega_min()
}

/// The surface `J = I(ell) \ I(ell - |omega|_1 / omega_min)`.
pub fn enumerate_surface(omega: &WeightVector, ell: i64) -> Vec<MultiIndex> {
    let inner = surface_inner_threshold(omega, ell);
    enumerate_index_set(omega, ell)
        .into_iter()
        .filter(|l| !omega.contains_at(l, inner))
        .collect()
}

/// `floor(ell * omega_min / omega_j) + 1` for the 1-based direction `j`.
pub fn lambda_max(omega: &WeightVector, ell: i64, j: usize) -> Result<usize> {
    if j == 0 || j > omega.d() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: omega.d(),
        });
    }
    if ell < 0 {
        return Ok(0);
    }
    let w = omega.as_slice()[j - 1];
    let bound = ell as f64 * omega.omega_min();
    // the quotient may round across an integer; settle on the membership test
    let mut q = libm::floor(bound / w) as usize;
    while q > 0 && q as f64 * w > bound {
        q -= 1;
    }
    while (q + 1) as f64 * w <= bound {
        q += 1;
    }
    Ok(q + 1)
}

/// One signed term `(-1)^{|beta|_1} (A_{lambda_1} x ... x A_{lambda_d})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationPair {
    pub lambda: MultiIndex,
    pub beta: Vec<u8>,
    pub sign: i8,
}

/// All `(lambda, beta)` with `lambda` in the surface, `beta in {0,1}^d` and
/// `lambda + beta` in the index set; `lambda` then `beta` lexicographic.
pub fn combination_pairs(omega: &WeightVector, ell: i64) -> Vec<CombinationPair> {
    let d = omega.d();
    let threshold = ell as f64;
    let mut out = Vec::new();
    for lambda in enumerate_surface(omega, ell) {
        for mask in 0..(1usize << d) {
            // lexicographic order on beta: component 0 is the most significant bit
            let beta: Vec<u8> = (0..d).map(|j| ((mask >> (d - 1 - j)) & 1) as u8).collect();
            let shifted: Vec<usize> = lambda.iter().zip(&beta).map(|(&l, &b)| l + b as usize).collect();
            if omega.contains_at(&shifted, threshold) {
                let ones = beta.iter().filter(|&&b| b == 1).count();
                out.push(CombinationPair {
                    lambda: lambda.clone(),
                    beta,
                    sign: if ones % 2 == 0 { 1 } else { -1 },
                });
            }
        }
    }
    out
}

/// Sums the signs of the pairs sharing a `lambda`; returns the surface
/// indices with their net combination coefficient (zeros kept).
pub fn combination_coefficients(pairs: &[CombinationPair]) -> Vec<(MultiIndex, i64)> {
    let mut out: Vec<(MultiIndex, i64)> = Vec::new();
    for p in pairs {
        match out.last_mut() {
            Some((l, c)) if *l == p.lambda => *c += i64::from(p.sign),
            _ => out.push((p.lambda.clone(), i64::from(p.sign))),
        }
    }
    out
}

/// Componentwise maximum over a set of multi-indices.
pub fn max_levels(set: &[MultiIndex], d: usize) -> Vec<usize> {
    let mut m = vec![0usize; d];
    for l in set {
        for (mj, &lj) in m.iter_mut().zip(l) {
            *mj = (*mj).max(lj);
        }
    }
    m
}
