use alloc::vec::Vec;

use crate::error::{Error, Result};

/// An ordered list of points in `R^dim`, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("point dimension must be positive".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::Shape {
                expected: dim * (coords.len() / dim + 1),
                found: coords.len(),
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("point coordinates must be finite".into()));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(dim: usize, points: &[P]) -> Result<Self> {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    found: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    /// One-dimensional point set from scalar coordinates.
    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(1, values.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    /// Subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> PointSet {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &k in indices {
            coords.extend_from_slice(self.point(k));
        }
        PointSet { dim: self.dim, coords }
    }

    /// Exact bit-pattern key of point `k`.
    pub fn key(&self, k: usize) -> Vec<u64> {
        point_key(self.point(k))
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = alloc::vec![0.0; self.dim];
        for p in self.iter() {
            for (ci, &x) in c.iter_mut().zip(p) {
                *ci += x;
            }
        }
        let n = self.len().max(1) as f64;
        c.iter_mut().for_each(|ci| *ci /= n);
        c
    }

    /// Axis-aligned bounding box as `(lower, upper)`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = alloc::vec![f64::INFINITY; self.dim];
        let mut hi = alloc::vec![f64::NEG_INFINITY; self.dim];
        for p in self.iter() {
            for c in 0..self.dim {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        }
        (lo, hi)
    }
}

/// Bit patterns of the coordinates; `-0.0` is folded onto `0.0`.
pub fn point_key(p: &[f64]) -> Vec<u64> {
    p.iter().map(|&c| (c + 0.0).to_bits()).collect()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(dist_sq(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checks() {
        assert!(PointSet::new(2, alloc::vec![0.0, 1.0, 2.0]).is_err());
        assert!(PointSet::new(0, alloc::vec![]).is_err());
        assert!(PointSet::new(1, alloc::vec![f64::NAN]).is_err());
        let p = PointSet::from_points(2, &[[0.0, 1.0], [2.0, 3.0]]).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.point(1), &[2.0, 3.0]);
        assert_eq!(p.centroid(), alloc::vec![1.0, 2.0]);
    }

    #[test]
    fn negative_zero_shares_key() {
        assert_eq!(point_key(&[-0.0]), point_key(&[0.0]));
    }
}
