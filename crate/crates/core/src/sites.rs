//! Per-direction site hierarchies: level sets with separation distances and
//! support radii, equidistant nested families, maximin thinning, and the
//! first-occurrence maps of nested families.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, SparseEvalVector};
use crate::neighbors::{within_scan, KdTree};
use crate::points::{dist, PointSet};

/// Point count above which kernel vectors use the kd-tree instead of a scan.
pub const DEFAULT_NEIGHBOR_THRESHOLD: usize = 32;

/// Sites of one level with their separation distance `q` and support radius.
#[derive(Debug, Clone)]
pub struct LevelSites {
    points: PointSet,
    q: f64,
    epsilon: f64,
    tree: Option<KdTree>,
    neighbor_threshold: usize,
}

impl PartialEq for LevelSites {
    fn eq(&self, other: &Self) -> bool {
        self.points == other.points && self.q == other.q && self.epsilon == other.epsilon
    }
}

impl LevelSites {
    /// Computes `q` and sets `epsilon = coupling * q`.
    pub fn new(points: PointSet, coupling: f64) -> Result<Self> {
        if !(coupling > 0.0 && coupling.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "coupling constant must be positive, got {coupling}"
            )));
        }
        let q = separation_distance(&points)?;
        Self::build(points, q, coupling * q)
    }

    /// Explicit separation distance and support radius (e.g. single-site
    /// levels or loaded models). Points must still be distinct.
    pub fn with_support(points: PointSet, q: f64, epsilon: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::TooFewPoints { needed: 1, found: 0 });
        }
        if points.len() >= 2 {
            separation_distance(&points)?;
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) || !(q > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "separation {q} and support radius {epsilon} must be positive"
            )));
        }
        Self::build(points, q, epsilon)
    }

    fn build(points: PointSet, q: f64, epsilon: f64) -> Result<Self> {
        let mut level = LevelSites {
            points,
            q,
            epsilon,
            tree: None,
            neighbor_threshold: DEFAULT_NEIGHBOR_THRESHOLD,
        };
        level.rebuild_index();
        Ok(level)
    }

    pub fn with_neighbor_threshold(mut self, threshold: usize) -> Self {
        self.neighbor_threshold = threshold;
        self.rebuild_index();
        self
    }

    fn rebuild_index(&mut self) {
        self.tree = (self.points.len() > self.neighbor_threshold).then(|| KdTree::build(&self.points));
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Sites strictly closer than `radius` to `x`, ascending.
    pub fn within(&self, x: &[f64], radius: f64) -> Vec<usize> {
        match &self.tree {
            Some(tree) => tree.within(&self.points, x, radius),
            None => within_scan(&self.points, x, radius),
        }
    }

    /// Kernel vector `r_i(x)`; `x` must have the level's dimension.
    pub fn r_vector_unchecked(&self, family: KernelFamily, x: &[f64]) -> SparseEvalVector {
        let eps = self.epsilon;
        let hits = self.within(x, eps);
        SparseEvalVector::from_sorted(
            self.len(),
            hits.into_iter()
                .map(|k| (k, family.eval_unchecked(dist(self.points.point(k), x) / eps))),
        )
    }
}

/// Half the minimal pairwise distance, computed by a sorted sweep.
pub fn separation_distance(points: &PointSet) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints { needed: 2, found: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points.point(a)[0].total_cmp(&points.point(b)[0]));
    let mut best = f64::INFINITY;
    let mut pair = (0, 0);
    for (i, &a) in order.iter().enumerate() {
        let pa = points.point(a);
        for &b in &order[i + 1..] {
            let pb = points.point(b);
            if pb[0] - pa[0] >= best {
                break;
            }
            let d = dist(pa, pb);
            if d < best {
                best = d;
                pair = (a.min(b), a.max(b));
            }
        }
    }
    if best == 0.0 {
        return Err(Error::DuplicatePoints {
            first: pair.0,
            second: pair.1,
        });
    }
    Ok(0.5 * best)
}

/// `2^level + 1` equidistant points on `[a, b]` including both endpoints.
///
/// Coordinates are `a (1 - t) + b t` with dyadic `t`, so the sets are nested
/// with bit-identical coordinates across levels.
pub fn equidistant_1d(a: f64, b: f64, level: usize) -> Result<PointSet> {
    PointSet::from_scalars(&equidistant_values(a, b, level)?)
}

fn equidistant_values(a: f64, b: f64, level: usize) -> Result<Vec<f64>> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidArgument(alloc::format!("invalid interval [{a}, {b}]")));
    }
    if level == 0 || level > 30 {
        return Err(Error::InvalidArgument(alloc::format!(
            "equidistant level must be in 1..=30, got {level}"
        )));
    }
    let m = 1usize << level;
    let h = m as f64;
    Ok((0..=m)
        .map(|k| {
            let t = k as f64 / h;
            a * (1.0 - t) + b * t
        })
        .collect())
}

/// Tensor lattice of [`equidistant_1d`] on `[a, b]^dim`, row-major with the
/// last coordinate fastest.
pub fn equidistant_lattice(a: f64, b: f64, dim: usize, level: usize) -> Result<PointSet> {
    let axis = equidistant_values(a, b, level)?;
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let n = axis.len().pow(dim as u32);
    let mut coords = Vec::with_capacity(n * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..n {
        coords.extend(idx.iter().map(|&i| axis[i]));
        for c in (0..dim).rev() {
            idx[c] += 1;
            if idx[c] < axis.len() {
                break;
            }
            idx[c] = 0;
        }
    }
    PointSet::new(dim, coords)
}

/// Greedy farthest-point (maximin) ordering.
///
/// Starts at the point farthest from the centroid (lowest index on ties) and
/// repeatedly appends the point farthest from the chosen ones. Returns the
/// order and each point's insertion radius (`inf` for the first).
pub fn maximin_order(points: &PointSet) -> (Vec<usize>, Vec<f64>) {
    let n = points.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let c = points.centroid();
    let mut start = 0;
    let mut far = -1.0;
    for k in 0..n {
        let d = dist(points.point(k), &c);
        if d > far {
            far = d;
            start = k;
        }
    }
    let mut mind = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut radii = Vec::with_capacity(n);
    let mut next = start;
    let mut radius = f64::INFINITY;
    for _ in 0..n {
        taken[next] = true;
        order.push(next);
        radii.push(radius);
        let p = points.point(next).to_vec();
        let mut best = -1.0;
        let mut best_k = usize::MAX;
        for k in 0..n {
            if taken[k] {
                continue;
            }
            let d = dist(points.point(k), &p);
            if d < mind[k] {
                mind[k] = d;
            }
            if mind[k] > best {
                best = mind[k];
                best_k = k;
            }
        }
        next = best_k;
        radius = best;
    }
    (order, radii)
}

/// Nested levels produced by [`thin_to_hierarchy`].
#[derive(Debug, Clone)]
pub struct ThinningResult {
    /// Coarse to fine; each level is a prefix of the next.
    pub levels: Vec<PointSet>,
    pub target_q: Vec<f64>,
    pub achieved_q: Vec<f64>,
    /// `false` where the target separation could not be met; those levels
    /// fall back to the two most separated points.
    pub reached: Vec<bool>,
}

impl ThinningResult {
    pub fn all_reached(&self) -> bool {
        self.reached.iter().all(|&r| r)
    }
}

/// Thins a point cloud into `num_levels` nested levels with
/// `q_i ~ q_{i+1} / ratio`.
///
/// The finest level is the cloud (or its first `cap` maximin points). Each
/// coarser level is the longest maximin prefix whose separation stays at or
/// above the level's target. Levels are stored in maximin order, so a point
/// keeps its index across all levels containing it.
pub fn thin_to_hierarchy(
    cloud: &PointSet,
    num_levels: usize,
    ratio: f64,
    cap: Option<usize>,
) -> Result<ThinningResult> {
    if num_levels == 0 {
        return Err(Error::InvalidArgument("need at least one level".into()));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "thinning ratio must lie in (0, 1), got {ratio}"
        )));
    }
    let n_cloud = cloud.len();
    if n_cloud < 2 {
        return Err(Error::TooFewPoints {
            needed: 2,
            found: n_cloud,
        });
    }
    separation_distance(cloud)?;
    let (order, radii) = maximin_order(cloud);
    let n_fine = cap.map_or(n_cloud, |c| c.clamp(2, n_cloud));
    let finest = cloud.select(&order[..n_fine]);
    let q_fine = separation_distance(&finest)?;

    let mut sizes = vec![n_fine; num_levels];
    let mut target_q = vec![q_fine; num_levels];
    let mut reached = vec![true; num_levels];
    for i in (0..num_levels - 1).rev() {
        let target = target_q[i + 1] / ratio;
        target_q[i] = target;
        let upper = sizes[i + 1];
        // radii are non-increasing, so the admissible prefixes form a range
        let mut n = 1;
        while n < upper && 0.5 * radii[n] >= target {
            n += 1;
        }
        if n < 2 {
            n = 2.min(upper);
            reached[i] = false;
        }
        sizes[i] = n;
    }
    let levels: Vec<PointSet> = sizes.iter().map(|&s| cloud.select(&order[..s])).collect();
    let achieved_q = levels.iter().map(separation_distance).collect::<Result<Vec<_>>>()?;
    Ok(ThinningResult {
        levels,
        target_q,
        achieved_q,
        reached,
    })
}

/// First-occurrence levels and positions of a nested hierarchy, keyed by the
/// index of a point in the finest level.
#[derive(Debug, Clone, PartialEq)]
pub struct NestingMaps {
    first_level: Vec<usize>,
    /// `positions[i][k]`: index of finest point `k` in level `i + 1`, or
    /// `usize::MAX` when absent.
    positions: Vec<Vec<usize>>,
    /// `to_finest[i][m]`: finest index of point `m` of level `i + 1`.
    to_finest: Vec<Vec<usize>>,
}

impl NestingMaps {
    pub fn num_levels(&self) -> usize {
        self.positions.len()
    }

    pub fn finest_len(&self) -> usize {
        self.first_level.len()
    }

    /// `u(x)`: 1-based level where finest point `k` first occurs.
    pub fn first_level(&self, k: usize) -> usize {
        self.first_level[k]
    }

    pub fn first_levels(&self) -> &[usize] {
        &self.first_level
    }

    /// `k(x, i)`: position of finest point `k` in the 1-based level `i`.
    pub fn position(&self, k: usize, level: usize) -> Option<usize> {
        let p = self.positions[level - 1][k];
        (p != usize::MAX).then_some(p)
    }

    pub fn finest_index(&self, level: usize, m: usize) -> usize {
        self.to_finest[level - 1][m]
    }
}

/// Site levels of one direction together with its kernel family.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionHierarchy {
    kernel: KernelFamily,
    levels: Vec<LevelSites>,
}

impl DirectionHierarchy {
    pub fn new(kernel: KernelFamily, levels: Vec<LevelSites>) -> Result<Self> {
        let first = levels
            .first()
            .ok_or(Error::InvalidArgument("a hierarchy needs at least one level".into()))?;
        let dim = first.dim();
        if let Some(l) = levels.iter().find(|l| l.dim() != dim) {
            return Err(Error::Shape {
                expected: dim,
                found: l.dim(),
            });
        }
        Ok(DirectionHierarchy { kernel, levels })
    }

    /// Levels with `epsilon_i = coupling * q_i`.
    pub fn from_point_sets(kernel: KernelFamily, coupling: f64, sets: Vec<PointSet>) -> Result<Self> {
        let levels = sets
            .into_iter()
            .map(|s| LevelSites::new(s, coupling))
            .collect::<Result<Vec<_>>>()?;
        Self::new(kernel, levels)
    }

    /// Equidistant lattice levels `1..=max_level` on `[a, b]^dim`.
    pub fn equidistant(
        kernel: KernelFamily,
        coupling: f64,
        (a, b): (f64, f64),
        dim: usize,
        max_level: usize,
    ) -> Result<Self> {
        let sets = (1..=max_level)
            .map(|i| equidistant_lattice(a, b, dim, i))
            .collect::<Result<Vec<_>>>()?;
        Self::from_point_sets(kernel, coupling, sets)
    }

    pub fn from_thinning(kernel: KernelFamily, coupling: f64, thinned: ThinningResult) -> Result<Self> {
        Self::from_point_sets(kernel, coupling, thinned.levels)
    }

    pub fn kernel(&self) -> KernelFamily {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.levels[0].dim()
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    /// 1-based level access.
    pub fn level(&self, i: usize) -> &LevelSites {
        &self.levels[i - 1]
    }

    pub fn levels(&self) -> &[LevelSites] {
        &self.levels
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.levels.iter().map(LevelSites::len).collect()
    }

    /// The first `depth` levels.
    pub fn truncated(&self, depth: usize) -> Result<Self> {
        if depth == 0 || depth > self.depth() {
            return Err(Error::LevelOutOfRange {
                level: depth,
                max: self.depth(),
            });
        }
        Ok(DirectionHierarchy {
            kernel: self.kernel,
            levels: self.levels[..depth].to_vec(),
        })
    }

    pub fn with_neighbor_threshold(mut self, threshold: usize) -> Self {
        self.levels = self
            .levels
            .into_iter()
            .map(|l| l.with_neighbor_threshold(threshold))
            .collect();
        self
    }

    /// Whether every level is contained in the next one (exact coordinates).
    pub fn is_nested(&self) -> bool {
        self.levels.windows(2).all(|w| {
            let next: BTreeMap<Vec<u64>, usize> = (0..w[1].len()).map(|k| (w[1].points().key(k), k)).collect();
            (0..w[0].len()).all(|k| next.contains_key(&w[0].points().key(k)))
        })
    }

    /// First-occurrence level `u` and positions `k(x, i)` for every point of
    /// the finest level.
    pub fn nesting(&self) -> Result<NestingMaps> {
        if !self.is_nested() {
            return Err(Error::NotNested("first-occurrence maps"));
        }
        let finest = self.levels.last().expect("non-empty");
        let n = finest.len();
        let keys: BTreeMap<Vec<u64>, usize> = (0..n).map(|k| (finest.points().key(k), k)).collect();
        let mut first_level = vec![usize::MAX; n];
        let mut positions = Vec::with_capacity(self.depth());
        let mut to_finest = Vec::with_capacity(self.depth());
        for (li, level) in self.levels.iter().enumerate() {
            let mut pos = vec![usize::MAX; n];
            let mut fin = Vec::with_capacity(level.len());
            for m in 0..level.len() {
                let k = keys[&level.points().key(m)];
                pos[k] = m;
                fin.push(k);
                if first_level[k] == usize::MAX {
                    first_level[k] = li + 1;
                }
            }
            positions.push(pos);
            to_finest.push(fin);
        }
        Ok(NestingMaps {
            first_level,
            positions,
            to_finest,
        })
    }
}
