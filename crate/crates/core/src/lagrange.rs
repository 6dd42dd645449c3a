//! Per-level Gramians and Lagrange (cardinal) coefficient blocks.
//!
//! The k-th Lagrange function of a level is `chi_k = alpha_k^T r(.)` where
//! `alpha_k` solves `M alpha = e_k` (interpolation) or
//! `(M + lambda I) alpha = e_k` (penalized least squares).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, SparseEvalVector};
use crate::linalg::{conjugate_gradient, EnvelopeCholesky, Matrix, SparseSymmetric};
use crate::sites::LevelSites;

/// Kernel matrix `M_{k,m} = Phi(x_k - x_m)` of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct Gramian {
    matrix: SparseSymmetric,
}

impl Gramian {
    pub fn matrix(&self) -> &SparseSymmetric {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }
}

/// Gramian with entries exactly where `|x_k - x_m| < epsilon`.
pub fn assemble_gramian(level: &LevelSites, family: KernelFamily) -> Result<Gramian> {
    let rows: Vec<Vec<(usize, f64)>> = (0..level.len())
        .map(|k| {
            let r = level.r_vector_unchecked(family, level.points().point(k));
            r.iter().collect()
        })
        .collect();
    for (k, row) in rows.iter().enumerate() {
        if let Some(&(m, _)) = row.iter().find(|&&(m, v)| m != k && v >= 1.0) {
            return Err(Error::DuplicatePoints {
                first: k.min(m),
                second: k.max(m),
            });
        }
    }
    Ok(Gramian {
        matrix: SparseSymmetric::from_rows(rows),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitMode {
    Interpolation,
    /// One regularization parameter per level, coarse to fine.
    PenalizedLeastSquares(Vec<f64>),
}

impl FitMode {
    pub fn regularization(&self, level: usize) -> Result<f64> {
        match self {
            FitMode::Interpolation => Ok(0.0),
            FitMode::PenalizedLeastSquares(l) => {
                let v = *l.get(level - 1).ok_or(Error::LevelOutOfRange { level, max: l.len() })?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(Error::InvalidArgument(alloc::format!(
                        "regularization on level {level} must be non-negative, got {v}"
                    )));
                }
                Ok(v)
            }
        }
    }

    pub fn is_interpolation(&self) -> bool {
        matches!(self, FitMode::Interpolation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    Cholesky,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub cg_tolerance: f64,
    /// CG iteration limit as a multiple of the system size.
    pub cg_max_factor: usize,
    /// Skip the factorization (testing and diagnostics).
    pub force_cg: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            cg_tolerance: 1e-12,
            cg_max_factor: 10,
            force_cg: false,
        }
    }
}

/// Lagrange coefficients of one level; row `k` of `alphas` is `alpha_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBlock {
    pub level: usize,
    pub alphas: Matrix,
    pub regularization: f64,
    pub method: SolveMethod,
    /// `max |(M + lambda I) A^T - I|` of the computed block.
    pub residual: f64,
}

impl CoefficientBlock {
    pub fn n(&self) -> usize {
        self.alphas.rows()
    }

    pub fn alpha(&self, k: usize) -> &[f64] {
        self.alphas.row(k)
    }

    /// Dense storage size in bytes.
    pub fn memory_bytes(&self) -> usize {
        self.n() * self.n() * core::mem::size_of::<f64>()
    }
}

/// Solves for all `N` coefficient vectors with one factorization.
pub fn solve_coefficients(
    gramian: &Gramian,
    level: usize,
    regularization: f64,
    options: &SolverOptions,
) -> Result<CoefficientBlock> {
    if !(regularization >= 0.0 && regularization.is_finite()) {
        return Err(Error::InvalidArgument(alloc::format!(
            "regularization must be non-negative, got {regularization}"
        )));
    }
    let system = if regularization > 0.0 {
        gramian.matrix.shifted(regularization)
    } else {
        gramian.matrix.clone()
    };
    let n = system.n();
    let mut cols = Matrix::zeros(n, n);
    let mut method = SolveMethod::Cholesky;
    let factor = if options.force_cg {
        Err(f64::NAN)
    } else {
        EnvelopeCholesky::factor(&system)
    };
    let mut e = alloc::vec![0.0; n];
    match factor {
        Ok(chol) => {
            for k in 0..n {
                e[k] = 1.0;
                let x = chol.solve(&e);
                e[k] = 0.0;
                for (i, xi) in x.into_iter().enumerate() {
                    cols.set(i, k, xi);
                }
            }
        }
        Err(pivot) => {
            method = SolveMethod::ConjugateGradient;
            for k in 0..n {
                e[k] = 1.0;
                let (x, stats) =
                    conjugate_gradient(&system, &e, options.cg_tolerance, options.cg_max_factor * n.max(1));
                e[k] = 0.0;
                if !stats.converged {
                    return Err(Error::Numerical {
                        level,
                        reason: "factorization failed and conjugate gradients did not converge",
                        min_pivot: pivot,
                        residual: stats.relative_residual,
                    });
                }
                for (i, xi) in x.into_iter().enumerate() {
                    cols.set(i, k, xi);
                }
            }
        }
    }
    let mut prod = system.mul_dense(&cols);
    prod.add_scaled(-1.0, &Matrix::identity(n));
    let residual = prod.max_abs();
    Ok(CoefficientBlock {
        level,
        alphas: cols.transpose(),
        regularization,
        method,
        residual,
    })
}

/// `chi_k(x) = alpha_k^T r(x)` for a kernel vector of the same level.
pub fn eval_lagrange(block: &CoefficientBlock, k: usize, r: &SparseEvalVector) -> Result<f64> {
    if k >= block.n() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: block.n(),
        });
    }
    if r.len() != block.n() {
        return Err(Error::Shape {
            expected: block.n(),
            found: r.len(),
        });
    }
    Ok(r.dot(block.alpha(k)))
}

/// Assembles and solves one level.
pub fn fit_level(
    level_sites: &LevelSites,
    family: KernelFamily,
    level: usize,
    regularization: f64,
    options: &SolverOptions,
) -> Result<CoefficientBlock> {
    let g = assemble_gramian(level_sites, family)?;
    solve_coefficients(&g, level, regularization, options)
}
