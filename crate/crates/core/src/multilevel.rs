//! Direction-wise kernel multilevel operator in matrix form.
//!
//! With `alpha_{i,k}` the Lagrange coefficients and `r_i` the kernel vectors,
//! the combined operator of an ordered level set `u = {u_1 < ... < u_m}` is
//!
//! ```text
//! I_u f(x) = sum_k f(x_{u_1,k}) alpha_{u_1,k}^T P_u r_{u_m}(x),
//! P_u = B_{u_1,u_2} B_{u_2,u_3} ... B_{u_{m-1},u_m},
//! B_{a,b} = sum_k r_a(x_{b,k}) alpha_{b,k}^T            (N_a x N_b)
//! ```
//!
//! and the multilevel operator is `A_L = sum_{u != {}} (-1)^{#u+1} I_u`.
//! Summing `(-1)^{#u} P_u` over all `u` with first element `m` and last
//! element `p` gives `S_{m,p}`, which obeys `S_{p,p} = -I` and
//! `S_{m,p} = -sum_{m<q<=p} B_{m,q} S_{q,p}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lagrange::{fit_level, CoefficientBlock, FitMode, SolverOptions};
use crate::linalg::{axpy, Matrix};
use crate::sites::{DirectionHierarchy, NestingMaps};

/// Storage for per-level-pair matrices `(m, p)` with `1 <= m <= p <= L`
/// (or `m < p` when `strict`).
#[derive(Debug, Clone, PartialEq)]
pub struct LevelPairs {
    levels: usize,
    strict: bool,
    data: Vec<Matrix>,
}

impl LevelPairs {
    fn slot(&self, m: usize, p: usize) -> usize {
        let l = self.levels;
        assert!(
            m >= 1 && p <= l && (m < p || (!self.strict && m == p)),
            "level pair ({m}, {p}) out of range"
        );
        let (m0, p0) = (m - 1, p - 1);
        if self.strict {
            // rows m0 hold pairs (m0, m0+1..l-1)
            m0 * (2 * l - m0 - 1) / 2 + (p0 - m0 - 1)
        } else {
            m0 * (2 * l - m0 + 1) / 2 + (p0 - m0)
        }
    }

    pub fn from_fn(levels: usize, strict: bool, mut f: impl FnMut(usize, usize) -> Matrix) -> Self {
        let mut data = Vec::new();
        for m in 1..=levels {
            let first = if strict { m + 1 } else { m };
            for p in first..=levels {
                data.push(f(m, p));
            }
        }
        LevelPairs { levels, strict, data }
    }

    pub fn try_from_fn(levels: usize, strict: bool, mut f: impl FnMut(usize, usize) -> Result<Matrix>) -> Result<Self> {
        let mut data = Vec::new();
        for m in 1..=levels {
            let first = if strict { m + 1 } else { m };
            for p in first..=levels {
                data.push(f(m, p)?);
            }
        }
        Ok(LevelPairs { levels, strict, data })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, m: usize, p: usize) -> &Matrix {
        &self.data[self.slot(m, p)]
    }

    /// Pairs in storage order with their matrices.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &Matrix)> + '_ {
        let l = self.levels;
        let strict = self.strict;
        (1..=l)
            .flat_map(move |m| (if strict { m + 1 } else { m }..=l).map(move |p| (m, p)))
            .zip(self.data.iter())
    }
}

/// Site hierarchy of a direction with one coefficient block per level.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionBasis {
    hierarchy: DirectionHierarchy,
    blocks: Vec<CoefficientBlock>,
}

impl DirectionBasis {
    pub fn fit(hierarchy: DirectionHierarchy, mode: &FitMode, options: &SolverOptions) -> Result<Self> {
        let blocks = hierarchy
            .levels()
            .iter()
            .enumerate()
            .map(|(i, lvl)| fit_level(lvl, hierarchy.kernel(), i + 1, mode.regularization(i + 1)?, options))
            .collect::<Result<Vec<_>>>()?;
        Ok(DirectionBasis { hierarchy, blocks })
    }

    pub fn from_parts(hierarchy: DirectionHierarchy, blocks: Vec<CoefficientBlock>) -> Result<Self> {
        if blocks.len() != hierarchy.depth() {
            return Err(Error::Shape {
                expected: hierarchy.depth(),
                found: blocks.len(),
            });
        }
        for (lvl, b) in hierarchy.levels().iter().zip(&blocks) {
            if b.alphas.shape() != (lvl.len(), lvl.len()) {
                return Err(Error::Shape {
                    expected: lvl.len(),
                    found: b.alphas.rows(),
                });
            }
        }
        Ok(DirectionBasis { hierarchy, blocks })
    }

    pub fn hierarchy(&self) -> &DirectionHierarchy {
        &self.hierarchy
    }

    pub fn depth(&self) -> usize {
        self.hierarchy.depth()
    }

    /// 1-based.
    pub fn block(&self, level: usize) -> &CoefficientBlock {
        &self.blocks[level - 1]
    }

    pub fn blocks(&self) -> &[CoefficientBlock] {
        &self.blocks
    }

    pub fn size(&self, level: usize) -> usize {
        self.hierarchy.level(level).len()
    }

    pub fn r_vector(&self, level: usize, x: &[f64]) -> crate::kernels::SparseEvalVector {
        self.hierarchy
            .level(level)
            .r_vector_unchecked(self.hierarchy.kernel(), x)
    }

    /// `chi_{level,k}(x)`.
    pub fn lagrange(&self, level: usize, k: usize, x: &[f64]) -> f64 {
        self.r_vector(level, x).dot(self.block(level).alpha(k))
    }

    /// All Lagrange values of `level` at `x`: `A_level r_level(x)`.
    pub fn lagrange_vector(&self, level: usize, x: &[f64]) -> Vec<f64> {
        let r = self.r_vector(level, x);
        let alphas = &self.block(level).alphas;
        (0..alphas.rows()).map(|k| r.dot(alphas.row(k))).collect()
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.hierarchy.dim() {
            return Err(Error::Shape {
                expected: self.hierarchy.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// `B_{a,b} = sum_k r_a(x_{b,k}) alpha_{b,k}^T` for 1-based `a < b`.
pub fn compute_transfer(basis: &DirectionBasis, a: usize, b: usize) -> Result<Matrix> {
    let depth = basis.depth();
    if a == 0 || b > depth || a >= b {
        return Err(Error::LevelOutOfRange {
            level: if a == 0 || a >= b { a } else { b },
            max: depth,
        });
    }
    let fine = basis.hierarchy().level(b);
    let alphas = &basis.block(b).alphas;
    let mut out = Matrix::zeros(basis.size(a), basis.size(b));
    for k in 0..fine.len() {
        let r = basis.r_vector(a, fine.points().point(k));
        let alpha = alphas.row(k);
        for (p, v) in r.iter() {
            axpy(v, alpha, out.row_mut(p));
        }
    }
    Ok(out)
}

/// `P_u`: product of consecutive transfers along the ordered set `u`; the
/// identity of size `N_{u_1}` for singletons.
pub fn compute_p(u: &[usize], transfers: &LevelPairs, sizes: &[usize]) -> Result<Matrix> {
    let first = *u.first().ok_or(Error::InvalidArgument("empty level set".into()))?;
    if u.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Unordered);
    }
    let last = *u.last().expect("non-empty");
    if first == 0 || last > transfers.levels() || last > sizes.len() {
        return Err(Error::LevelOutOfRange {
            level: if first == 0 { 0 } else { last },
            max: transfers.levels(),
        });
    }
    let mut acc = Matrix::identity(sizes[first - 1]);
    for w in u.windows(2) {
        acc = acc.matmul(transfers.get(w[0], w[1]));
    }
    Ok(acc)
}

/// All `S_{m,p}`, `1 <= m <= p <= L`, by the descending recurrence.
pub fn compute_s_blocks(transfers: &LevelPairs, sizes: &[usize]) -> LevelPairs {
    let l = transfers.levels();
    // column-wise: S_{., p} only depends on S_{q, p} with q > m
    let mut cols: Vec<Vec<Matrix>> = Vec::with_capacity(l);
    for p in 1..=l {
        let mut col: Vec<Matrix> = vec![Matrix::zeros(0, 0); p];
        let mut neg_id = Matrix::identity(sizes[p - 1]);
        neg_id.scale(-1.0);
        col[p - 1] = neg_id;
        for m in (1..p).rev() {
            // B_{m,p} S_{p,p} = -B_{m,p}
            let mut s = transfers.get(m, p).clone();
            for q in m + 1..p {
                transfers.get(m, q).matmul_acc(-1.0, &col[q - 1], &mut s);
            }
            col[m - 1] = s;
        }
        cols.push(col);
    }
    LevelPairs::from_fn(l, false, |m, p| {
        core::mem::replace(&mut cols[p - 1][m - 1], Matrix::zeros(0, 0))
    })
}

/// Offline artifacts of one direction: Lagrange blocks, transfers `B`,
/// summed blocks `S` and the products `(A_m S_{m,p})^T` used per evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionOperator {
    basis: DirectionBasis,
    transfers: LevelPairs,
    s_blocks: LevelPairs,
    xi_factors: LevelPairs,
}

impl DirectionOperator {
    pub fn build(basis: DirectionBasis) -> Result<Self> {
        let l = basis.depth();
        let transfers = LevelPairs::try_from_fn(l, true, |a, b| compute_transfer(&basis, a, b))?;
        let sizes = basis.hierarchy().sizes();
        let s_blocks = compute_s_blocks(&transfers, &sizes);
        let xi_factors = LevelPairs::from_fn(l, false, |m, p| {
            let s = s_blocks.get(m, p);
            let g = if m == p {
                let mut a = basis.block(m).alphas.clone();
                a.scale(-1.0);
                a
            } else {
                basis.block(m).alphas.matmul(s)
            };
            g.transpose()
        });
        Ok(DirectionOperator {
            basis,
            transfers,
            s_blocks,
            xi_factors,
        })
    }

    pub fn from_parts(
        basis: DirectionBasis,
        transfers: LevelPairs,
        s_blocks: LevelPairs,
        xi_factors: LevelPairs,
    ) -> Result<Self> {
        let l = basis.depth();
        let sizes = basis.hierarchy().sizes();
        let ok = transfers.levels() == l
            && s_blocks.levels() == l
            && xi_factors.levels() == l
            && transfers.strict
            && !s_blocks.strict
            && !xi_factors.strict
            && transfers
                .iter()
                .all(|((a, b), m)| m.shape() == (sizes[a - 1], sizes[b - 1]))
            && s_blocks
                .iter()
                .all(|((a, b), m)| m.shape() == (sizes[a - 1], sizes[b - 1]))
            && xi_factors
                .iter()
                .all(|((a, b), m)| m.shape() == (sizes[b - 1], sizes[a - 1]));
        if !ok {
            return Err(Error::InvalidArgument("inconsistent direction operator blocks".into()));
        }
        Ok(DirectionOperator {
            basis,
            transfers,
            s_blocks,
            xi_factors,
        })
    }

    pub fn basis(&self) -> &DirectionBasis {
        &self.basis
    }

    pub fn depth(&self) -> usize {
        self.basis.depth()
    }

    pub fn transfers(&self) -> &LevelPairs {
        &self.transfers
    }

    pub fn s_blocks(&self) -> &LevelPairs {
        &self.s_blocks
    }

    pub fn xi_factors(&self) -> &LevelPairs {
        &self.xi_factors
    }

    /// `sum_{p=u1}^{top} A_{u1} S_{u1,p} r_p(x)`, a vector of length `N_{u1}`.
    pub fn xi_row(&self, u1: usize, top: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.basis.check_x(x)?;
        if u1 == 0 || top > self.depth() || u1 > top {
            return Err(Error::LevelOutOfRange {
                level: if u1 == 0 || u1 > top { u1 } else { top },
                max: self.depth(),
            });
        }
        let mut out = vec![0.0; self.basis.size(u1)];
        for p in u1..=top {
            let r = self.basis.r_vector(p, x);
            let g = self.xi_factors.get(u1, p);
            for (m, v) in r.iter() {
                axpy(v, g.row(m), &mut out);
            }
        }
        Ok(out)
    }

    /// All xi rows at once: `rows[u1-1][top-u1]` for `u1 <= top <= L`.
    pub fn xi_rows_all(&self, x: &[f64]) -> Vec<Vec<Vec<f64>>> {
        let l = self.depth();
        let rs: Vec<_> = (1..=l).map(|p| self.basis.r_vector(p, x)).collect();
        (1..=l)
            .map(|u1| {
                let mut acc = vec![0.0; self.basis.size(u1)];
                (u1..=l)
                    .map(|p| {
                        let g = self.xi_factors.get(u1, p);
                        for (m, v) in rs[p - 1].iter() {
                            axpy(v, g.row(m), &mut acc);
                        }
                        acc.clone()
                    })
                    .collect()
            })
            .collect()
    }

    /// `I_u f(x) = f_{u_1}^T A_{u_1} P_u r_{u_last}(x)` with `f_{u_1}` the
    /// samples on level `u_1`.
    pub fn combined_apply(&self, u: &[usize], f_first: &[f64], x: &[f64]) -> Result<f64> {
        self.basis.check_x(x)?;
        let sizes = self.basis.hierarchy().sizes();
        let p = compute_p(u, &self.transfers, &sizes)?;
        if f_first.len() != sizes[u[0] - 1] {
            return Err(Error::MissingLevelSample {
                level: u[0],
                index: f_first.len(),
            });
        }
        let r = self.basis.r_vector(*u.last().expect("non-empty"), x);
        let mut pr = vec![0.0; p.rows()];
        for (i, row) in pr.iter_mut().enumerate() {
            *row = r.dot(p.row(i));
        }
        let coeff = self.basis.block(u[0]).alphas.tr_mul_vec(f_first);
        Ok(crate::linalg::dot(&coeff, &pr))
    }

    /// Multilevel operator `A_L f(x)` as the signed sum of combined operators
    /// over all non-empty ordered subsets of `{1, ..., L}`.
    pub fn multilevel_apply(&self, samples: &[&[f64]], x: &[f64], top: usize) -> Result<f64> {
        self.check_samples(samples, top)?;
        self.basis.check_x(x)?;
        let mut total = 0.0;
        for mask in 1usize..(1 << top) {
            let u: Vec<usize> = (1..=top).filter(|i| mask >> (i - 1) & 1 == 1).collect();
            let sign = if u.len() % 2 == 1 { 1.0 } else { -1.0 };
            total += sign * self.combined_apply(&u, samples[u[0] - 1], x)?;
        }
        Ok(total)
    }

    /// Same operator through the summed blocks:
    /// `A_L f(x) = -sum_{u1} f_{u1} . xi_row(u1, L, x)`.
    pub fn multilevel_apply_summed(&self, samples: &[&[f64]], x: &[f64], top: usize) -> Result<f64> {
        self.check_samples(samples, top)?;
        let mut total = 0.0;
        for u1 in 1..=top {
            let row = self.xi_row(u1, top, x)?;
            total -= crate::linalg::dot(samples[u1 - 1], &row);
        }
        Ok(total)
    }

    fn check_samples(&self, samples: &[&[f64]], top: usize) -> Result<()> {
        if top == 0 || top > self.depth() {
            return Err(Error::LevelOutOfRange {
                level: top,
                max: self.depth(),
            });
        }
        for level in 1..=top {
            let n = self.basis.size(level);
            let have = samples.get(level - 1).map_or(0, |s| s.len());
            if have < n {
                return Err(Error::MissingLevelSample { level, index: have });
            }
        }
        Ok(())
    }

    /// Nodal coefficient table; requires nested sites.
    pub fn nodal_table(&self) -> Result<NodalTable> {
        NodalTable::build(self)
    }
}

/// Direction-wise nodal weight function `A_{{u(y),...,L}} chi_{L,k(y,L)}`,
/// evaluable as `sum_p coeffs[p - u(y)] . r_p(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalWeightFunction {
    pub top: usize,
    pub finest_index: usize,
    pub top_index: usize,
    pub first_level: usize,
    pub coeffs: Vec<Vec<f64>>,
}

impl NodalWeightFunction {
    pub fn eval(&self, basis: &DirectionBasis, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| basis.r_vector(self.first_level + i, x).dot(c))
            .sum()
    }
}

/// Coefficients of all nodal weight functions of a nested direction.
///
/// Column `y` of `levels[p-1]` holds the level-`p` coefficient vector of the
/// finest point `y`:
/// `c_{y,p} = -sum_{u1=u(y)}^{p} S_{u1,p}^T alpha_{u1,k(y,u1)}`
/// (zero for `p < u(y)`). The weight function of `y` with top level `L` is
/// `sum_{p<=L} c_{y,p} . r_p(x)`, so one table serves every `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalTable {
    nesting: NestingMaps,
    /// `levels[p-1]`: `N_p x N_finest`.
    levels: Vec<Matrix>,
}

impl NodalTable {
    fn build(op: &DirectionOperator) -> Result<Self> {
        let nesting = op.basis.hierarchy().nesting()?;
        let l = op.depth();
        let n_fine = nesting.finest_len();
        let mut levels = Vec::with_capacity(l);
        for p in 1..=l {
            let n_p = op.basis.size(p);
            let mut c = Matrix::zeros(n_p, n_fine);
            for y in 0..n_fine {
                let u = nesting.first_level(y);
                for u1 in u..=p {
                    let k = nesting.position(y, u1).expect("nested");
                    // column k of (A_{u1} S_{u1,p})^T is S_{u1,p}^T alpha_{u1,k}
                    let g = op.xi_factors.get(u1, p);
                    for m in 0..n_p {
                        let v = c.get(m, y) - g.get(m, k);
                        c.set(m, y, v);
                    }
                }
            }
            levels.push(c);
        }
        Ok(NodalTable { nesting, levels })
    }

    pub fn from_parts(nesting: NestingMaps, levels: Vec<Matrix>) -> Result<Self> {
        if levels.len() != nesting.num_levels() || levels.iter().any(|m| m.cols() != nesting.finest_len()) {
            return Err(Error::InvalidArgument("inconsistent nodal table".into()));
        }
        Ok(NodalTable { nesting, levels })
    }

    pub fn nesting(&self) -> &NestingMaps {
        &self.nesting
    }

    pub fn levels(&self) -> &[Matrix] {
        &self.levels
    }

    /// Weight functions of the points of level `top`, in level order.
    pub fn weight_functions(&self, top: usize) -> Result<Vec<NodalWeightFunction>> {
        if top == 0 || top > self.levels.len() {
            return Err(Error::LevelOutOfRange {
                level: top,
                max: self.levels.len(),
            });
        }
        let n_top = self.levels[top - 1].rows();
        Ok((0..n_top)
            .map(|m| {
                let y = self.nesting.finest_index(top, m);
                let u = self.nesting.first_level(y);
                NodalWeightFunction {
                    top,
                    finest_index: y,
                    top_index: m,
                    first_level: u,
                    coeffs: (u..=top).map(|p| self.levels[p - 1].col(y)).collect(),
                }
            })
            .collect())
    }

    /// Values of all weight functions at `x`: `out[L-1][y]` for every top
    /// level `L` and finest index `y` (meaningful when `u(y) <= L`).
    pub fn eval_all(&self, basis: &DirectionBasis, x: &[f64]) -> Vec<Vec<f64>> {
        let n_fine = self.nesting.finest_len();
        let mut acc = vec![0.0; n_fine];
        let mut out = Vec::with_capacity(self.levels.len());
        for (p, c) in self.levels.iter().enumerate() {
            let r = basis.r_vector(p + 1, x);
            for (m, v) in r.iter() {
                axpy(v, c.row(m), &mut acc);
            }
            out.push(acc.clone());
        }
        out
    }
}

/// Nodal weight functions for the points of level `top`.
pub fn nodal_weights(op: &DirectionOperator, top: usize) -> Result<Vec<NodalWeightFunction>> {
    op.nodal_table()?.weight_functions(top)
}
