//! Compactly supported Wendland kernels and level-scaled evaluation vectors.
//!
//! All families are normalized to `phi(0) = 1` and vanish for `r >= 1`.
//! `phi_{d,k}` is positive definite on `R^n` for `n <= d`; this is documented,
//! not enforced.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::points::dist;
use crate::sites::LevelSites;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KernelFamily {
    /// `(1-r)^3_+ (3r+1)`
    Wendland11,
    /// `(1-r)^5_+ (8r^2+5r+1)`
    Wendland12,
    /// `(1-r)^4_+ (4r+1)`
    Wendland31,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 3] = [
        KernelFamily::Wendland11,
        KernelFamily::Wendland12,
        KernelFamily::Wendland31,
    ];

    pub fn eval(self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::NegativeDistance(r));
        }
        Ok(self.eval_unchecked(r))
    }

    /// Kernel value for `r >= 0`; callers guarantee the sign.
    #[inline]
    pub fn eval_unchecked(self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let t = 1.0 - r;
        match self {
            KernelFamily::Wendland11 => t * t * t * (3.0 * r + 1.0),
            KernelFamily::Wendland12 => {
                let t2 = t * t;
                t2 * t2 * t * ((8.0 * r + 5.0) * r + 1.0)
            }
            KernelFamily::Wendland31 => {
                let t2 = t * t;
                t2 * t2 * (4.0 * r + 1.0)
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Wendland11 => "wendland_1_1",
            KernelFamily::Wendland12 => "wendland_1_2",
            KernelFamily::Wendland31 => "wendland_3_1",
        }
    }

    /// Stable numeric tag used in model files.
    pub fn code(self) -> u64 {
        match self {
            KernelFamily::Wendland11 => 11,
            KernelFamily::Wendland12 => 12,
            KernelFamily::Wendland31 => 31,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code() == code)
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown kernel family `{s}`")))
    }
}

/// A kernel family scaled to support radius `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledKernel {
    pub family: KernelFamily,
    pub epsilon: f64,
}

impl ScaledKernel {
    pub fn new(family: KernelFamily, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "support radius must be positive and finite, got {epsilon}"
            )));
        }
        Ok(ScaledKernel { family, epsilon })
    }

    /// `phi(|x - y| / epsilon)`, exactly zero outside the support.
    #[inline]
    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.value_at_distance(dist(x, y))
    }

    #[inline]
    pub fn value_at_distance(&self, d: f64) -> f64 {
        if d < self.epsilon {
            self.family.eval_unchecked(d / self.epsilon)
        } else {
            0.0
        }
    }
}

/// Nonzero entries of the kernel evaluation vector `r_i(x)` of one level.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseEvalVector {
    len: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseEvalVector {
    /// Builds from `(index, value)` pairs in strictly increasing index order;
    /// zero values are dropped.
    pub fn from_sorted(len: usize, entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (k, v) in entries {
            debug_assert!(k < len && indices.last().is_none_or(|&l| l < k));
            if v != 0.0 {
                indices.push(k);
                values.push(v);
            }
        }
        SparseEvalVector { len, indices, values }
    }

    pub fn empty(len: usize) -> Self {
        SparseEvalVector {
            len,
            ..Default::default()
        }
    }

    /// Full length `N_i` of the dense vector.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(k, v)| v * dense[k]).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.len];
        for (k, v) in self.iter() {
            out[k] = v;
        }
        out
    }
}

/// Evaluation vector `r_i(x) = (Phi_i(x - x_{i,k}))_k` with the level's
/// support radius. Entry `k` is present iff `|x - x_{i,k}| < epsilon`.
pub fn eval_r_vector(level: &LevelSites, family: KernelFamily, x: &[f64]) -> Result<SparseEvalVector> {
    if x.len() != level.dim() {
        return Err(Error::Shape {
            expected: level.dim(),
            found: x.len(),
        });
    }
    Ok(level.r_vector_unchecked(family, x))
}
