//! Exact fixed-radius neighbor queries over a static point set.

use alloc::vec::Vec;

use crate::points::{dist_sq, PointSet};

const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Kd-tree over the points of a [`PointSet`]; indices refer to that set.
#[derive(Debug, Clone)]
pub struct KdTree {
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl KdTree {
    pub fn build(points: &PointSet) -> Self {
        let mut tree = KdTree {
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(points, 0, points.len());
        }
        tree
    }

    fn build_node(&mut self, points: &PointSet, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split along the widest axis at the median
        let dim = points.dim();
        let mut axis = 0;
        let mut widest = -1.0;
        for a in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &k in &self.order[start..end] {
                let c = points.point(k)[a];
                lo = lo.min(c);
                hi = hi.max(c);
            }
            if hi - lo > widest {
                widest = hi - lo;
                axis = a;
            }
        }
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&i, &j| {
            points.point(i)[axis].total_cmp(&points.point(j)[axis])
        });
        let value = points.point(self.order[mid])[axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(points, start, mid);
        let right = self.build_node(points, mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Indices `k` with `|x - p_k| < radius`, sorted ascending.
    pub fn within(&self, points: &PointSet, x: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() {
            self.collect(points, 0, x, radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn collect(&self, points: &PointSet, node: usize, x: &[f64], radius: f64, out: &mut Vec<usize>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &k in &self.order[start..end] {
                    if within_radius(points.point(k), x, radius) {
                        out.push(k);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = x[axis] - value;
                // left holds coordinates <= value, right holds >= value; the
                // slack keeps pruning conservative under rounding of the norm
                let reach = radius * (1.0 + 1e-12);
                if diff < reach {
                    self.collect(points, left, x, radius, out);
                }
                if -diff < reach {
                    self.collect(points, right, x, radius, out);
                }
            }
        }
    }
}

/// The single distance predicate shared by the tree and the linear scan.
#[inline]
pub fn within_radius(p: &[f64], x: &[f64], radius: f64) -> bool {
    libm::sqrt(dist_sq(p, x)) < radius
}

/// Linear-scan reference for [`KdTree::within`].
pub fn within_scan(points: &PointSet, x: &[f64], radius: f64) -> Vec<usize> {
    (0..points.len())
        .filter(|&k| within_radius(points.point(k), x, radius))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn tree_query_equals_scan(
            coords in proptest::collection::vec(-1.0f64..1.0, 3..900),
            x in proptest::collection::vec(-1.2f64..1.2, 3),
            radius in 0.0f64..0.8,
        ) {
            let n = coords.len() / 3;
            let set = PointSet::new(3, coords[..3 * n].to_vec()).unwrap();
            let tree = KdTree::build(&set);
            prop_assert_eq!(tree.within(&set, &x, radius), within_scan(&set, &x, radius));
        }
    }

    #[test]
    fn lattice_with_ties() {
        // many coordinates equal to split values
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push([i as f64 * 0.5, j as f64 * 0.5]);
            }
        }
        let set = PointSet::from_points(2, &pts).unwrap();
        let tree = KdTree::build(&set);
        for q in [[2.5, 2.5], [0.0, 0.0], [9.5, 3.0], [4.25, 4.75]] {
            for r in [0.5, 0.5000001, 1.0, 2.3] {
                assert_eq!(tree.within(&set, &q, r), within_scan(&set, &q, r));
            }
        }
    }
}
