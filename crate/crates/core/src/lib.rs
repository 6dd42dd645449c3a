//! Tensor product multilevel (TPML) approximation of functions on Cartesian
//! products of low-dimensional domains.
//!
//! Each direction carries a hierarchy of scattered site sets and a compactly
//! supported Wendland kernel scaled per level. The direction-wise kernel
//! multilevel operators (residual correction written in a Lagrange basis) are
//! combined over an anisotropic index set with Smolyak's combination
//! technique. Three interchangeable evaluation paths are provided:
//!
//! - [`tpml::NaiveEvaluator`]: the literal sum over combination pairs, ordered
//!   level sets and index chains. Exponential cost, guarded; used as oracle.
//! - [`tpml::PrecomputedModel`]: offline transfer matrices and summed blocks so
//!   that a point evaluation only needs sparse kernel vectors.
//! - [`tpml::NodalModel`]: for nested sites, a sum over the sparse grid that
//!   touches every data value once.
//!
//! ```
//! use tpml_core::tpml::DirectionConfig;
//! use tpml_core::{Approximant, DirectionHierarchy, FitMode, KernelFamily, SampleTable, Tpml, TpmlConfig, WeightVector};
//!
//! # fn main() -> Result<(), tpml_core::Error> {
//! let line = |c| DirectionHierarchy::equidistant(KernelFamily::Wendland11, c, (0.0, 1.0), 1, 4);
//! let dirs = vec![
//!     DirectionConfig { hierarchy: line(4.0)?, mode: FitMode::Interpolation },
//!     DirectionConfig { hierarchy: line(4.0)?, mode: FitMode::Interpolation },
//! ];
//! let tpml = Tpml::new(TpmlConfig::new(dirs, WeightVector::new(vec![1.0, 1.0])?, 3)?)?;
//! let samples = SampleTable::from_fn(tpml.required_samples(), |x| (x[0] + x[1]).sin());
//! let model = tpml.fit_efficient(samples)?;
//! let value = model.eval(&[0.3, 0.7])?;
//! assert!((value - 1.0f64.sin()).abs() < 1e-2);
//! # Ok(())
//! # }
//! ```
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel batch evaluation live in the `tpml` crate.

#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod hash;
pub mod index_sets;
pub mod kernels;
pub mod lagrange;
pub mod linalg;
pub mod multilevel;
pub mod neighbors;
pub mod points;
pub mod sites;
pub mod tpml;

pub use error::{Error, Result};
pub use index_sets::{CombinationPair, MultiIndex, WeightVector};
pub use kernels::{KernelFamily, ScaledKernel, SparseEvalVector};
pub use lagrange::{CoefficientBlock, FitMode, Gramian, SolveMethod};
pub use linalg::Matrix;
pub use multilevel::DirectionOperator;
pub use points::PointSet;
pub use sites::{DirectionHierarchy, LevelSites, NestingMaps};
pub use tpml::{
    Approximant, Model, NaiveEvaluator, NodalModel, PrecomputedModel, Representation, SampleTable, SparseGrid, Tpml,
    TpmlConfig,
};
