//! Tensor product multilevel operator: sparse grid, sample table and the
//! naive, precomputed and nodal representations.
//!
//! With direction-wise multilevel operators `A^{(j)}_i` the approximant is
//!
//! ```text
//! A f = sum_{lambda in J} sum_{beta} (-1)^{|beta|} (A^{(1)}_{lambda_1} x ... x A^{(d)}_{lambda_d}) f
//! ```
//!
//! over the combination pairs of the anisotropic index set. All three
//! representations evaluate the same operator; they differ in what is
//! precomputed and how the sample values are accessed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::hash::Fingerprint;
use crate::index_sets::{
    combination_coefficients, combination_pairs, enumerate_index_set, enumerate_surface, lambda_max, CombinationPair,
    MultiIndex, WeightVector,
};
use crate::lagrange::{eval_lagrange, FitMode, SolveMethod, SolverOptions};
use crate::linalg::Matrix;
use crate::multilevel::{DirectionBasis, DirectionOperator, NodalTable};
use crate::points::{point_key, PointSet};
use crate::sites::DirectionHierarchy;

/// Default bound on the number of terms the naive evaluator may sum.
pub const DEFAULT_COST_BOUND: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    Naive,
    Efficient,
    Nodal,
}

impl Representation {
    pub const ALL: [Representation; 3] = [Representation::Naive, Representation::Efficient, Representation::Nodal];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Naive => "naive",
            Representation::Efficient => "efficient",
            Representation::Nodal => "nodal",
        }
    }

    pub fn code(self) -> u64 {
        match self {
            Representation::Naive => 0,
            Representation::Efficient => 1,
            Representation::Nodal => 2,
        }
    }

    pub fn from_code(code: u64) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }
}

impl core::str::FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidArgument(alloc::format!("unknown representation `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionConfig {
    pub hierarchy: DirectionHierarchy,
    pub mode: FitMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TpmlConfig {
    pub directions: Vec<DirectionConfig>,
    pub weights: WeightVector,
    pub ell: i64,
    pub representation: Representation,
    pub solver: SolverOptions,
    pub cost_bound: f64,
}

impl TpmlConfig {
    /// Efficient representation, default solver options and cost bound.
    pub fn new(directions: Vec<DirectionConfig>, weights: WeightVector, ell: i64) -> Result<Self> {
        let config = TpmlConfig {
            directions,
            weights,
            ell,
            representation: Representation::Efficient,
            solver: SolverOptions::default(),
            cost_bound: DEFAULT_COST_BOUND,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn with_representation(mut self, representation: Representation) -> Self {
        self.representation = representation;
        self
    }

    pub fn with_cost_bound(mut self, bound: f64) -> Self {
        self.cost_bound = bound;
        self
    }

    pub fn d(&self) -> usize {
        self.directions.len()
    }

    /// `lambda_{j,max}` for every direction.
    pub fn lambda_max(&self) -> Vec<usize> {
        (1..=self.d())
            .map(|j| lambda_max(&self.weights, self.ell, j).expect("validated"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.directions.len() != self.weights.d() {
            return Err(Error::Shape {
                expected: self.weights.d(),
                found: self.directions.len(),
            });
        }
        if self.ell < 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "threshold must be non-negative, got {}",
                self.ell
            )));
        }
        if !(self.cost_bound >= 0.0) {
            return Err(Error::InvalidArgument("cost bound must be non-negative".into()));
        }
        for (j, dir) in self.directions.iter().enumerate() {
            let need = lambda_max(&self.weights, self.ell, j + 1)?;
            if dir.hierarchy.depth() < need {
                return Err(Error::LevelOutOfRange {
                    level: need,
                    max: dir.hierarchy.depth(),
                });
            }
            for level in 1..=need {
                dir.mode.regularization(level)?;
            }
        }
        if self.representation == Representation::Nodal {
            let lm = self.lambda_max();
            for (dir, &l) in self.directions.iter().zip(&lm) {
                if !dir.hierarchy.truncated(l)?.is_nested() {
                    return Err(Error::NotNested("the nodal representation"));
                }
            }
        }
        Ok(())
    }

    /// Content hash of everything that determines a fitted model, apart from
    /// the sample values.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fingerprint::new();
        h.u64(self.d() as u64);
        for dir in &self.directions {
            let hier = &dir.hierarchy;
            h.u64(hier.kernel().code())
                .u64(hier.dim() as u64)
                .u64(hier.depth() as u64);
            for level in hier.levels() {
                h.u64(level.len() as u64).f64(level.q()).f64(level.epsilon());
                for &c in level.points().coords() {
                    h.f64(c);
                }
            }
            match &dir.mode {
                FitMode::Interpolation => {
                    h.u64(0);
                }
                FitMode::PenalizedLeastSquares(l) => {
                    h.u64(1).u64(l.len() as u64);
                    for &v in l {
                        h.f64(v);
                    }
                }
            }
        }
        for &w in self.weights.as_slice() {
            h.f64(w);
        }
        h.u64(self.ell as u64)
            .u64(self.representation.code())
            .f64(self.solver.cg_tolerance)
            .u64(self.solver.cg_max_factor as u64)
            .u64(u64::from(self.solver.force_cg))
            .f64(self.cost_bound);
        h.finish()
    }
}

/// Union of the tensor grids `X_{lambda_1} x ... x X_{lambda_d}` over the
/// index set, deduplicated by exact coordinates.
///
/// Every direction keeps a registry of its distinct sites, numbered in order
/// of first appearance from the coarsest level on. A grid point is the tuple
/// of its direction ids; points are ordered lexicographically by that tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrid {
    dir_points: Vec<PointSet>,
    /// `level_ids[j][i - 1][k]`: id of site `k` of level `i` in direction `j`.
    level_ids: Vec<Vec<Vec<usize>>>,
    points: Vec<Vec<usize>>,
    lookup: BTreeMap<Vec<usize>, usize>,
}

impl SparseGrid {
    pub fn new(hierarchies: &[&DirectionHierarchy], index_set: &[MultiIndex]) -> Result<Self> {
        let d = hierarchies.len();
        let depth = crate::index_sets::max_levels(index_set, d);
        let mut dir_points = Vec::with_capacity(d);
        let mut level_ids = Vec::with_capacity(d);
        for (h, &top) in hierarchies.iter().zip(&depth) {
            if top > h.depth() {
                return Err(Error::LevelOutOfRange {
                    level: top,
                    max: h.depth(),
                });
            }
            let mut registry: BTreeMap<Vec<u64>, usize> = BTreeMap::new();
            let mut coords = Vec::new();
            let mut ids = Vec::with_capacity(top);
            for level in &h.levels()[..top] {
                let pts = level.points();
                let lvl_ids: Vec<usize> = (0..pts.len())
                    .map(|k| {
                        let next = registry.len();
                        *registry.entry(pts.key(k)).or_insert_with(|| {
                            coords.extend_from_slice(pts.point(k));
                            next
                        })
                    })
                    .collect();
                ids.push(lvl_ids);
            }
            dir_points.push(PointSet::new(h.dim(), coords)?);
            level_ids.push(ids);
        }
        let mut set = BTreeSet::new();
        for lambda in index_set {
            let levels: Vec<&[usize]> = (0..d).map(|j| level_ids[j][lambda[j] - 1].as_slice()).collect();
            for_each_tensor(&levels, |ids| {
                set.insert(ids.to_vec());
            });
        }
        let points: Vec<Vec<usize>> = set.into_iter().collect();
        let lookup = points.iter().enumerate().map(|(g, p)| (p.clone(), g)).collect();
        Ok(SparseGrid {
            dir_points,
            level_ids,
            points,
            lookup,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn d(&self) -> usize {
        self.dir_points.len()
    }

    /// Spatial dimension of every direction.
    pub fn dims(&self) -> Vec<usize> {
        self.dir_points.iter().map(PointSet::dim).collect()
    }

    /// Total number of coordinates of a grid point.
    pub fn total_dim(&self) -> usize {
        self.dir_points.iter().map(PointSet::dim).sum()
    }

    pub fn direction_points(&self, j: usize) -> &PointSet {
        &self.dir_points[j]
    }

    /// Id of site `k` of the 1-based `level` in direction `j`.
    pub fn level_id(&self, j: usize, level: usize, k: usize) -> usize {
        self.level_ids[j][level - 1][k]
    }

    pub fn level_ids(&self, j: usize, level: usize) -> &[usize] {
        &self.level_ids[j][level - 1]
    }

    pub fn ids(&self, g: usize) -> &[usize] {
        &self.points[g]
    }

    pub fn find(&self, ids: &[usize]) -> Option<usize> {
        self.lookup.get(ids).copied()
    }

    /// Concatenated coordinates of grid point `g`.
    pub fn coords(&self, g: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_dim());
        for (j, &id) in self.points[g].iter().enumerate() {
            out.extend_from_slice(self.dir_points[j].point(id));
        }
        out
    }

    /// Grid indices of the tensor grid `X_{lambda}`, row-major with the last
    /// direction fastest.
    pub fn tensor_indices(&self, lambda: &[usize]) -> Result<Vec<usize>> {
        let levels: Vec<&[usize]> = (0..self.d()).map(|j| self.level_ids(j, lambda[j])).collect();
        let mut out = Vec::new();
        let mut missing = false;
        for_each_tensor(&levels, |ids| match self.find(ids) {
            Some(g) => out.push(g),
            None => missing = true,
        });
        if missing {
            return Err(Error::InvalidArgument(alloc::format!(
                "tensor grid {lambda:?} is not part of the sparse grid"
            )));
        }
        Ok(out)
    }

    /// Map from exact coordinate keys to grid indices.
    pub fn key_index(&self) -> BTreeMap<Vec<u64>, usize> {
        (0..self.len()).map(|g| (point_key(&self.coords(g)), g)).collect()
    }
}

/// Calls `f` with every element of `levels[0] x ... x levels[d-1]`, last
/// factor fastest.
fn for_each_tensor(levels: &[&[usize]], mut f: impl FnMut(&[usize])) {
    if levels.iter().any(|l| l.is_empty()) {
        return;
    }
    let d = levels.len();
    let mut pos = vec![0usize; d];
    let mut cur: Vec<usize> = levels.iter().map(|l| l[0]).collect();
    loop {
        f(&cur);
        let mut j = d;
        loop {
            if j == 0 {
                return;
            }
            j -= 1;
            pos[j] += 1;
            if pos[j] < levels[j].len() {
                cur[j] = levels[j][pos[j]];
                break;
            }
            pos[j] = 0;
            cur[j] = levels[j][0];
        }
    }
}

/// Sample values aligned with the sparse grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleTable {
    values: Vec<f64>,
}

impl SampleTable {
    pub fn from_fn(grid: &SparseGrid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        SampleTable {
            values: (0..grid.len()).map(|g| f(&grid.coords(g))).collect(),
        }
    }

    pub fn from_values(grid: &SparseGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(SampleTable { values })
    }

    /// Values keyed by exact coordinates; entries off the grid are ignored.
    pub fn from_keyed(grid: &SparseGrid, samples: &BTreeMap<Vec<u64>, f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        let mut missing = Vec::new();
        for g in 0..grid.len() {
            match samples.get(&point_key(&grid.coords(g))) {
                Some(&v) => values.push(v),
                None => {
                    missing.push(g);
                    values.push(0.0);
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::MissingSamples { missing });
        }
        Ok(SampleTable { values })
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

    pub fn get(&self, g: usize) -> f64 {
        self.values[g]
    }
}

/// Index set, surface and combination pairs for `(omega, ell)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Combination {
    pub index_set: Vec<MultiIndex>,
    pub surface: Vec<MultiIndex>,
    pub pairs: Vec<CombinationPair>,
    /// Surface indices with their net coefficient `sum_beta (-1)^{|beta|}`.
    pub coefficients: Vec<(MultiIndex, i64)>,
}

impl Combination {
    pub fn new(weights: &WeightVector, ell: i64) -> Self {
        let pairs = combination_pairs(weights, ell);
        let coefficients = combination_coefficients(&pairs);
        Combination {
            index_set: enumerate_index_set(weights, ell),
            surface: enumerate_surface(weights, ell),
            pairs,
            coefficients,
        }
    }

    /// Surface indices with non-zero coefficient times `(-1)^d`.
    fn signed_terms(&self, d: usize) -> Vec<(MultiIndex, f64)> {
        let sign = if d.is_multiple_of(2) { 1.0 } else { -1.0 };
        self.coefficients
            .iter()
            .filter(|(_, c)| *c != 0)
            .map(|(l, c)| (l.clone(), sign * *c as f64))
            .collect()
    }
}

/// Fit diagnostics for one level of one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDiagnostics {
    pub direction: usize,
    pub level: usize,
    pub n: usize,
    pub q: f64,
    pub epsilon: f64,
    pub regularization: f64,
    pub method: SolveMethod,
    pub residual: f64,
}

fn diagnostics_of(bases: &[&DirectionBasis]) -> Vec<LevelDiagnostics> {
    let mut out = Vec::new();
    for (j, b) in bases.iter().enumerate() {
        for (i, block) in b.blocks().iter().enumerate() {
            let lvl = b.hierarchy().level(i + 1);
            out.push(LevelDiagnostics {
                direction: j,
                level: i + 1,
                n: lvl.len(),
                q: lvl.q(),
                epsilon: lvl.epsilon(),
                regularization: block.regularization,
                method: block.method,
                residual: block.residual,
            });
        }
    }
    out
}

/// A fitted approximant of `f` on the product domain.
pub trait Approximant {
    /// Total number of coordinates of an evaluation point.
    fn input_dim(&self) -> usize;

    /// Evaluates at `x`, reporting the grid index of every sample read.
    fn eval_observed(&self, x: &[f64], observer: &mut dyn FnMut(usize)) -> Result<f64>;

    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.eval_observed(x, &mut |_| {})
    }

    /// Evaluates at consecutive points of a flat coordinate buffer.
    fn eval_batch(&self, coords: &[f64]) -> Result<Vec<f64>> {
        let n = self.input_dim();
        if n == 0 || !coords.len().is_multiple_of(n) {
            return Err(Error::Shape {
                expected: n,
                found: coords.len(),
            });
        }
        coords.chunks_exact(n).map(|x| self.eval(x)).collect()
    }
}

fn check_input(grid: &SparseGrid, x: &[f64]) -> Result<()> {
    if x.len() != grid.total_dim() {
        return Err(Error::Shape {
            expected: grid.total_dim(),
            found: x.len(),
        });
    }
    Ok(())
}

/// Splits `x` into its direction components.
fn split<'a>(dims: &[usize], x: &'a [f64]) -> Vec<&'a [f64]> {
    let mut out = Vec::with_capacity(dims.len());
    let mut start = 0;
    for &n in dims {
        out.push(&x[start..start + n]);
        start += n;
    }
    out
}

/// Configuration together with its combination structure and sparse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Tpml {
    config: TpmlConfig,
    combination: Combination,
    lambda_max: Vec<usize>,
    grid: SparseGrid,
}

impl Tpml {
    pub fn new(config: TpmlConfig) -> Result<Self> {
        config.validate()?;
        let combination = Combination::new(&config.weights, config.ell);
        let lambda_max = config.lambda_max();
        let hierarchies: Vec<&DirectionHierarchy> = config.directions.iter().map(|d| &d.hierarchy).collect();
        let grid = SparseGrid::new(&hierarchies, &combination.index_set)?;
        Ok(Tpml {
            config,
            combination,
            lambda_max,
            grid,
        })
    }

    pub fn config(&self) -> &TpmlConfig {
        &self.config
    }

    pub fn combination(&self) -> &Combination {
        &self.combination
    }

    pub fn lambda_max(&self) -> &[usize] {
        &self.lambda_max
    }

    /// The sparse grid where the target has to be sampled.
    pub fn required_samples(&self) -> &SparseGrid {
        &self.grid
    }

    /// Per-direction Lagrange blocks up to `lambda_{j,max}`.
    pub fn fit_bases(&self) -> Result<Vec<DirectionBasis>> {
        self.config
            .directions
            .iter()
            .zip(&self.lambda_max)
            .map(|(dir, &l)| DirectionBasis::fit(dir.hierarchy.truncated(l)?, &dir.mode, &self.config.solver))
            .collect()
    }

    fn check_samples(&self, samples: &SampleTable) -> Result<()> {
        if samples.len() != self.grid.len() {
            return Err(Error::Shape {
                expected: self.grid.len(),
                found: samples.len(),
            });
        }
        Ok(())
    }

    /// Fits the representation named in the configuration.
    pub fn fit(&self, samples: SampleTable) -> Result<Model> {
        Ok(match self.config.representation {
            Representation::Naive => Model::Naive(self.naive(samples)?),
            Representation::Efficient => Model::Efficient(self.fit_efficient(samples)?),
            Representation::Nodal => Model::Nodal(self.fit_nodal(samples)?),
        })
    }

    pub fn fit_efficient(&self, samples: SampleTable) -> Result<PrecomputedModel> {
        self.check_samples(&samples)?;
        let ops = self
            .fit_bases()?
            .into_iter()
            .map(DirectionOperator::build)
            .collect::<Result<Vec<_>>>()?;
        self.efficient_from_parts(samples, ops)
    }

    pub fn efficient_from_parts(&self, samples: SampleTable, ops: Vec<DirectionOperator>) -> Result<PrecomputedModel> {
        self.check_samples(&samples)?;
        self.check_parts(ops.iter().map(|o| o.basis()))?;
        let d = self.config.d();
        let terms = self.combination.signed_terms(d);
        let mut blocks = Vec::new();
        for u1 in &self.combination.index_set {
            let lambdas: Vec<usize> = terms
                .iter()
                .enumerate()
                .filter(|(_, (l, _))| l.iter().zip(u1).all(|(a, b)| a >= b))
                .map(|(t, _)| t)
                .collect();
            if lambdas.is_empty() {
                continue;
            }
            blocks.push(CoarseBlock {
                shape: (0..d).map(|j| ops[j].basis().size(u1[j])).collect(),
                indices: self.grid.tensor_indices(u1)?,
                u1: u1.clone(),
                terms: lambdas,
            });
        }
        Ok(PrecomputedModel {
            fingerprint: self.config.fingerprint(),
            dims: self.grid.dims(),
            grid: self.grid.clone(),
            samples,
            ops,
            pairs: self.combination.pairs.clone(),
            terms,
            blocks,
        })
    }

    pub fn fit_nodal(&self, samples: SampleTable) -> Result<NodalModel> {
        self.check_samples(&samples)?;
        let bases = self.fit_bases()?;
        let mut tables = Vec::with_capacity(bases.len());
        for b in &bases {
            let op = DirectionOperator::build(b.clone())?;
            tables.push(op.nodal_table()?);
        }
        self.nodal_from_parts(samples, bases, tables)
    }

    pub fn nodal_from_parts(
        &self,
        samples: SampleTable,
        bases: Vec<DirectionBasis>,
        tables: Vec<NodalTable>,
    ) -> Result<NodalModel> {
        self.check_samples(&samples)?;
        self.check_parts(bases.iter())?;
        let d = self.config.d();
        if tables.len() != d {
            return Err(Error::Shape {
                expected: d,
                found: tables.len(),
            });
        }
        // direction id -> finest index of each direction
        let mut id_to_finest = Vec::with_capacity(d);
        for j in 0..d {
            let top = self.lambda_max[j];
            let nesting = tables[j].nesting();
            if nesting.num_levels() != top || nesting.finest_len() != bases[j].size(top) {
                return Err(Error::InvalidArgument(
                    "nodal table does not match the hierarchy".into(),
                ));
            }
            let mut map = vec![usize::MAX; self.grid.direction_points(j).len()];
            for (k, &id) in self.grid.level_ids(j, top).iter().enumerate() {
                map[id] = k;
            }
            if map.contains(&usize::MAX) {
                return Err(Error::NotNested("the nodal representation"));
            }
            id_to_finest.push(map);
        }
        let terms = self.combination.signed_terms(0);
        let mut finest = Vec::with_capacity(self.grid.len() * d);
        let mut offsets = Vec::with_capacity(self.grid.len() + 1);
        let mut point_terms = Vec::new();
        offsets.push(0);
        for g in 0..self.grid.len() {
            let ids = self.grid.ids(g);
            let fin: Vec<usize> = (0..d).map(|j| id_to_finest[j][ids[j]]).collect();
            let u: Vec<usize> = (0..d).map(|j| tables[j].nesting().first_level(fin[j])).collect();
            for (t, (lambda, _)) in terms.iter().enumerate() {
                if lambda.iter().zip(&u).all(|(l, uj)| l >= uj) {
                    point_terms.push(t);
                }
            }
            offsets.push(point_terms.len());
            finest.extend(fin);
        }
        Ok(NodalModel {
            fingerprint: self.config.fingerprint(),
            dims: self.grid.dims(),
            grid: self.grid.clone(),
            samples,
            bases,
            tables,
            terms,
            finest,
            offsets,
            point_terms,
        })
    }

    /// Literal-sum evaluator, refused when its term count exceeds the
    /// configured cost bound.
    pub fn naive(&self, samples: SampleTable) -> Result<NaiveEvaluator> {
        self.check_samples(&samples)?;
        let bases = self.fit_bases()?;
        self.naive_from_parts(samples, bases)
    }

    pub fn naive_from_parts(&self, samples: SampleTable, bases: Vec<DirectionBasis>) -> Result<NaiveEvaluator> {
        self.check_samples(&samples)?;
        self.check_parts(bases.iter())?;
        let estimate = naive_cost(&bases, &self.combination.pairs);
        if estimate > self.config.cost_bound {
            return Err(Error::CostGuard {
                estimate,
                bound: self.config.cost_bound,
            });
        }
        // chi[j][b-1][a-1]: row m holds chi_{a,k}(x_{b,m}) for a < b
        let chi = bases
            .iter()
            .map(|basis| {
                (1..=basis.depth())
                    .map(|b| {
                        let fine = basis.hierarchy().level(b).points();
                        (1..b)
                            .map(|a| {
                                let block = basis.block(a);
                                Matrix::from_fn(fine.len(), basis.size(a), |m, k| {
                                    let r = basis.r_vector(a, fine.point(m));
                                    eval_lagrange(block, k, &r).expect("shapes match")
                                })
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(NaiveEvaluator {
            dims: self.grid.dims(),
            grid: self.grid.clone(),
            samples,
            bases,
            pairs: self.combination.pairs.clone(),
            chi,
        })
    }

    fn check_parts<'a>(&self, bases: impl ExactSizeIterator<Item = &'a DirectionBasis>) -> Result<()> {
        if bases.len() != self.config.d() {
            return Err(Error::Shape {
                expected: self.config.d(),
                found: bases.len(),
            });
        }
        for ((b, dir), &l) in bases.zip(&self.config.directions).zip(&self.lambda_max) {
            if *b.hierarchy() != dir.hierarchy.truncated(l)? {
                return Err(Error::InvalidArgument(
                    "direction blocks do not match the configuration".into(),
                ));
            }
        }
        Ok(())
    }
}

/// `sum_pairs prod_j (prod_{i <= lambda_j} (1 + N_i) - 1)`: number of
/// products the naive evaluator forms per point.
pub fn naive_cost(bases: &[DirectionBasis], pairs: &[CombinationPair]) -> f64 {
    let chains: Vec<Vec<f64>> = bases
        .iter()
        .map(|b| {
            let mut acc = 1.0;
            (1..=b.depth())
                .map(|i| {
                    acc *= 1.0 + b.size(i) as f64;
                    acc - 1.0
                })
                .collect()
        })
        .collect();
    pairs
        .iter()
        .map(|p| {
            p.lambda
                .iter()
                .enumerate()
                .map(|(j, &l)| chains[j][l - 1])
                .product::<f64>()
        })
        .sum()
}

/// Sample-tensor block on the coarse grid `X_{u1}` with the surface terms
/// `lambda >= u1` it contributes to.
#[derive(Debug, Clone, PartialEq)]
struct CoarseBlock {
    u1: MultiIndex,
    shape: Vec<usize>,
    indices: Vec<usize>,
    terms: Vec<usize>,
}

/// Contracts a row-major tensor with one vector per axis, last axis first.
/// `buf` holds the tensor on entry and is used as scratch.
fn contract(buf: &mut [f64], shape: &[usize], vecs: &[&[f64]]) -> f64 {
    let mut len = buf.len();
    for (axis, v) in shape.iter().zip(vecs).rev() {
        let n = *axis;
        let rest = len / n;
        for i in 0..rest {
            let row = &buf[i * n..(i + 1) * n];
            let s = crate::linalg::dot(row, v);
            buf[i] = s;
        }
        len = rest;
    }
    buf[0]
}

/// Offline transfer and summed blocks per direction; evaluation needs only the
/// sparse kernel vectors at the point and reads data on coarse tensor grids.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecomputedModel {
    fingerprint: u64,
    dims: Vec<usize>,
    grid: SparseGrid,
    samples: SampleTable,
    ops: Vec<DirectionOperator>,
    pairs: Vec<CombinationPair>,
    /// Surface indices with signed coefficients `(-1)^d c_lambda`.
    terms: Vec<(MultiIndex, f64)>,
    blocks: Vec<CoarseBlock>,
}

impl PrecomputedModel {
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn grid(&self) -> &SparseGrid {
        &self.grid
    }

    pub fn samples(&self) -> &SampleTable {
        &self.samples
    }

    pub fn operators(&self) -> &[DirectionOperator] {
        &self.ops
    }

    pub fn pairs(&self) -> &[CombinationPair] {
        &self.pairs
    }

    /// First levels `u1` whose coarse tensor grids are read during evaluation.
    pub fn coarse_levels(&self) -> impl Iterator<Item = &MultiIndex> + '_ {
        self.blocks.iter().map(|b| &b.u1)
    }

    pub fn diagnostics(&self) -> Vec<LevelDiagnostics> {
        diagnostics_of(&self.ops.iter().map(|o| o.basis()).collect::<Vec<_>>())
    }

    /// Whether `x` lies outside the bounding box of some direction's sites.
    pub fn extrapolates(&self, x: &[f64]) -> bool {
        extrapolates(&self.grid, x)
    }
}

impl Approximant for PrecomputedModel {
    fn input_dim(&self) -> usize {
        self.grid.total_dim()
    }

    fn eval_observed(&self, x: &[f64], observer: &mut dyn FnMut(usize)) -> Result<f64> {
        check_input(&self.grid, x)?;
        let parts = split(&self.dims, x);
        // xi[j][u1 - 1][top - u1]
        let xi: Vec<Vec<Vec<Vec<f64>>>> = self.ops.iter().zip(&parts).map(|(op, xj)| op.xi_rows_all(xj)).collect();
        let mut buf = Vec::new();
        let mut total = 0.0;
        for block in &self.blocks {
            buf.clear();
            for &g in &block.indices {
                observer(g);
                buf.push(self.samples.get(g));
            }
            let mut scratch = buf.clone();
            for &t in &block.terms {
                let (lambda, c) = &self.terms[t];
                let vecs: Vec<&[f64]> = (0..self.dims.len())
                    .map(|j| xi[j][block.u1[j] - 1][lambda[j] - block.u1[j]].as_slice())
                    .collect();
                scratch.copy_from_slice(&buf);
                total += c * contract(&mut scratch, &block.shape, &vecs);
            }
        }
        Ok(total)
    }
}

fn extrapolates(grid: &SparseGrid, x: &[f64]) -> bool {
    let parts = split(&grid.dims(), x);
    (0..grid.d()).any(|j| {
        let (lo, hi) = grid.direction_points(j).bounds();
        parts[j]
            .iter()
            .zip(lo.iter().zip(&hi))
            .any(|(v, (a, b))| v < a || v > b)
    })
}

/// Sum over sparse grid points of `f(y)` times a tensorized weight; each
/// sample is read once per evaluation. Requires nested hierarchies.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalModel {
    fingerprint: u64,
    dims: Vec<usize>,
    grid: SparseGrid,
    samples: SampleTable,
    bases: Vec<DirectionBasis>,
    tables: Vec<NodalTable>,
    /// Surface indices with net coefficients `c_lambda`; the direction
    /// weights already carry the sign of the multilevel operators.
    terms: Vec<(MultiIndex, f64)>,
    /// `finest[g * d + j]`: index of the direction-`j` site of `g` in the
    /// finest level of that direction.
    finest: Vec<usize>,
    /// Surface terms with `lambda >= u(y)` per grid point (CSR).
    offsets: Vec<usize>,
    point_terms: Vec<usize>,
}

impl NodalModel {
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn grid(&self) -> &SparseGrid {
        &self.grid
    }

    pub fn samples(&self) -> &SampleTable {
        &self.samples
    }

    pub fn bases(&self) -> &[DirectionBasis] {
        &self.bases
    }

    pub fn tables(&self) -> &[NodalTable] {
        &self.tables
    }

    pub fn diagnostics(&self) -> Vec<LevelDiagnostics> {
        diagnostics_of(&self.bases.iter().collect::<Vec<_>>())
    }

    pub fn extrapolates(&self, x: &[f64]) -> bool {
        extrapolates(&self.grid, x)
    }

    /// Weight of grid point `g` at `x`, so that the approximant is
    /// `sum_g f(y_g) weight(g, x)`.
    pub fn weight(&self, g: usize, x: &[f64]) -> Result<f64> {
        check_input(&self.grid, x)?;
        let w = self.direction_weights(x);
        Ok(self.weight_from(&w, g))
    }

    fn direction_weights(&self, x: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let parts = split(&self.dims, x);
        self.tables
            .iter()
            .zip(&self.bases)
            .zip(&parts)
            .map(|((t, b), xj)| t.eval_all(b, xj))
            .collect()
    }

    fn weight_from(&self, w: &[Vec<Vec<f64>>], g: usize) -> f64 {
        let d = self.dims.len();
        let fin = &self.finest[g * d..(g + 1) * d];
        self.point_terms[self.offsets[g]..self.offsets[g + 1]]
            .iter()
            .map(|&t| {
                let (lambda, c) = &self.terms[t];
                let mut prod = *c;
                for j in 0..d {
                    prod *= w[j][lambda[j] - 1][fin[j]];
                }
                prod
            })
            .sum()
    }
}

impl Approximant for NodalModel {
    fn input_dim(&self) -> usize {
        self.grid.total_dim()
    }

    fn eval_observed(&self, x: &[f64], observer: &mut dyn FnMut(usize)) -> Result<f64> {
        check_input(&self.grid, x)?;
        let w = self.direction_weights(x);
        let mut total = 0.0;
        for g in 0..self.grid.len() {
            observer(g);
            let f = self.samples.get(g);
            total += f * self.weight_from(&w, g);
        }
        Ok(total)
    }
}

/// Literal sum over combination pairs, ordered level sets and index chains,
/// with chain factors `a(u, k)` built from Lagrange values at the sites.
#[derive(Debug, Clone, PartialEq)]
pub struct NaiveEvaluator {
    dims: Vec<usize>,
    grid: SparseGrid,
    samples: SampleTable,
    bases: Vec<DirectionBasis>,
    pairs: Vec<CombinationPair>,
    chi: Vec<Vec<Vec<Matrix>>>,
}

impl NaiveEvaluator {
    pub fn grid(&self) -> &SparseGrid {
        &self.grid
    }

    pub fn samples(&self) -> &SampleTable {
        &self.samples
    }

    pub fn bases(&self) -> &[DirectionBasis] {
        &self.bases
    }

    pub fn estimated_terms(&self) -> f64 {
        naive_cost(&self.bases, &self.pairs)
    }

    /// Terms `(site id of x_{u_1,k_1}, (-1)^{#u+1} a(u, k) chi_{u_m,k_m}(x))`
    /// of the direction-`j` multilevel operator with top level `top`.
    fn direction_terms(&self, j: usize, top: usize, chi_x: &[Vec<f64>]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        for u1 in 1..=top {
            for k1 in 0..self.bases[j].size(u1) {
                let id = self.grid.level_id(j, u1, k1);
                self.extend_chain(j, top, chi_x, id, u1, k1, 1.0, 1, &mut out);
            }
        }
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn extend_chain(
        &self,
        j: usize,
        top: usize,
        chi_x: &[Vec<f64>],
        id: usize,
        level: usize,
        k: usize,
        a: f64,
        len: usize,
        out: &mut Vec<(usize, f64)>,
    ) {
        let sign = if len % 2 == 1 { 1.0 } else { -1.0 };
        out.push((id, sign * a * chi_x[level - 1][k]));
        for next in level + 1..=top {
            let table = &self.chi[j][next - 1][level - 1];
            for m in 0..table.rows() {
                self.extend_chain(j, top, chi_x, id, next, m, a * table.get(m, k), len + 1, out);
            }
        }
    }
}

impl Approximant for NaiveEvaluator {
    fn input_dim(&self) -> usize {
        self.grid.total_dim()
    }

    fn eval_observed(&self, x: &[f64], observer: &mut dyn FnMut(usize)) -> Result<f64> {
        check_input(&self.grid, x)?;
        let d = self.dims.len();
        let parts = split(&self.dims, x);
        let chi_x: Vec<Vec<Vec<f64>>> = self
            .bases
            .iter()
            .zip(&parts)
            .map(|(b, xj)| {
                (1..=b.depth())
                    .map(|i| {
                        let r = b.r_vector(i, xj);
                        (0..b.size(i))
                            .map(|k| eval_lagrange(b.block(i), k, &r).expect("shapes match"))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let mut cache: BTreeMap<(usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
        let mut total = 0.0;
        let mut ids = vec![0usize; d];
        for pair in &self.pairs {
            for (j, chi_j) in chi_x.iter().enumerate() {
                cache
                    .entry((j, pair.lambda[j]))
                    .or_insert_with(|| self.direction_terms(j, pair.lambda[j], chi_j));
            }
            let lists: Vec<&Vec<(usize, f64)>> = (0..d).map(|j| &cache[&(j, pair.lambda[j])]).collect();
            let sign = f64::from(pair.sign);
            let mut pos = vec![0usize; d];
            if lists.iter().any(|l| l.is_empty()) {
                continue;
            }
            loop {
                let mut prod = sign;
                for j in 0..d {
                    let (id, w) = lists[j][pos[j]];
                    ids[j] = id;
                    prod *= w;
                }
                let g = self
                    .grid
                    .find(&ids)
                    .expect("coarse tensor points lie on the sparse grid");
                observer(g);
                total += prod * self.samples.get(g);
                let mut j = d;
                loop {
                    if j == 0 {
                        break;
                    }
                    j -= 1;
                    pos[j] += 1;
                    if pos[j] < lists[j].len() {
                        break;
                    }
                    pos[j] = 0;
                }
                if j == 0 && pos[0] == 0 {
                    break;
                }
            }
        }
        Ok(total)
    }
}

/// A fitted model of any representation.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Naive(NaiveEvaluator),
    Efficient(PrecomputedModel),
    Nodal(NodalModel),
}

impl Approximant for Model {
    fn input_dim(&self) -> usize {
        match self {
            Model::Naive(m) => m.input_dim(),
            Model::Efficient(m) => m.input_dim(),
            Model::Nodal(m) => m.input_dim(),
        }
    }

    fn eval_observed(&self, x: &[f64], observer: &mut dyn FnMut(usize)) -> Result<f64> {
        match self {
            Model::Naive(m) => m.eval_observed(x, observer),
            Model::Efficient(m) => m.eval_observed(x, observer),
            Model::Nodal(m) => m.eval_observed(x, observer),
        }
    }
}
