//! JSON configuration documents.
//!
//! ```json
//! {
//!   "directions": [
//!     { "dimension": 2, "kernel": "wendland_3_1", "mode": "interpolation",
//!       "coupling": 6.0, "lambdas": null,
//!       "sites": { "equidistant": { "interval": [0.0, 1.0], "max_level": 4 } } },
//!     { "dimension": 1, "kernel": "wendland_1_1", "mode": "penalized",
//!       "coupling": 12.0, "lambdas": [1e-6, 1e-7, 1e-8, 1e-9],
//!       "sites": { "csv": { "path": "time_sites.csv" } } }
//!   ],
//!   "weights": [1.0, 1.0],
//!   "threshold": 3,
//!   "representation": "efficient"
//! }
//! ```
//!
//! Site sources: `equidistant` (lattice with `2^i + 1` points per axis on
//! every level), `csv` (rows `level,c1,...,cn` with 1-based levels) and
//! `thin` (a point cloud `c1,...,cn` thinned by maximin selection).
//! Relative paths are resolved against the directory of the document.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tpml_core::sites::thin_to_hierarchy;
use tpml_core::tpml::{DirectionConfig, Representation, DEFAULT_COST_BOUND};
use tpml_core::{DirectionHierarchy, FitMode, KernelFamily, PointSet, TpmlConfig, WeightVector};

use crate::csvio;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    #[serde(rename = "wendland_1_1")]
    Wendland11,
    #[serde(rename = "wendland_1_2")]
    Wendland12,
    #[serde(rename = "wendland_3_1")]
    Wendland31,
}

impl From<KernelName> for KernelFamily {
    fn from(k: KernelName) -> Self {
        match k {
            KernelName::Wendland11 => KernelFamily::Wendland11,
            KernelName::Wendland12 => KernelFamily::Wendland12,
            KernelName::Wendland31 => KernelFamily::Wendland31,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Interpolation,
    Penalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepresentationName {
    Naive,
    Efficient,
    Nodal,
}

impl From<RepresentationName> for Representation {
    fn from(r: RepresentationName) -> Self {
        match r {
            RepresentationName::Naive => Representation::Naive,
            RepresentationName::Efficient => Representation::Efficient,
            RepresentationName::Nodal => Representation::Nodal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SitesSource {
    Equidistant {
        interval: [f64; 2],
        max_level: usize,
    },
    Csv {
        path: PathBuf,
    },
    Thin {
        path: PathBuf,
        levels: usize,
        #[serde(default = "default_ratio")]
        ratio: f64,
    },
}

fn default_ratio() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionDocument {
    pub dimension: usize,
    pub kernel: KernelName,
    pub mode: ModeName,
    pub coupling: f64,
    #[serde(default)]
    pub lambdas: Option<Vec<f64>>,
    pub sites: SitesSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDocument {
    #[serde(default = "default_cg_tolerance")]
    pub cg_tolerance: f64,
    #[serde(default = "default_cg_max_factor")]
    pub cg_max_factor: usize,
    #[serde(default)]
    pub force_cg: bool,
}

fn default_cg_tolerance() -> f64 {
    1e-12
}

fn default_cg_max_factor() -> usize {
    10
}

impl Default for SolverDocument {
    fn default() -> Self {
        SolverDocument {
            cg_tolerance: default_cg_tolerance(),
            cg_max_factor: default_cg_max_factor(),
            force_cg: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub directions: Vec<DirectionDocument>,
    pub weights: Vec<f64>,
    pub threshold: i64,
    #[serde(default = "default_representation")]
    pub representation: RepresentationName,
    #[serde(default)]
    pub solver: SolverDocument,
    #[serde(default = "default_cost_guard")]
    pub cost_guard: f64,
}

fn default_representation() -> RepresentationName {
    RepresentationName::Efficient
}

fn default_cost_guard() -> f64 {
    DEFAULT_COST_BOUND
}

impl ConfigDocument {
    /// Parses and schema-checks a document; errors name the offending field
    /// and its position.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            CliError::config(format!(
                "field `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let doc = Self::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((doc, base))
    }

    /// Builds site hierarchies and validates the result.
    pub fn build(&self, base: &Path) -> Result<TpmlConfig> {
        if self.directions.is_empty() {
            return Err(CliError::config(
                "field `directions`: at least one direction is required",
            ));
        }
        let mut dirs = Vec::with_capacity(self.directions.len());
        for (j, dir) in self.directions.iter().enumerate() {
            dirs.push(
                build_direction(dir, base)
                    .map_err(|e| CliError::new(e.kind, format!("directions[{j}]: {}", e.message)))?,
            );
        }
        let weights =
            WeightVector::new(self.weights.clone()).map_err(|e| CliError::config(format!("field `weights`: {e}")))?;
        let config = TpmlConfig {
            directions: dirs,
            weights,
            ell: self.threshold,
            representation: self.representation.into(),
            solver: tpml_core::lagrange::SolverOptions {
                cg_tolerance: self.solver.cg_tolerance,
                cg_max_factor: self.solver.cg_max_factor,
                force_cg: self.solver.force_cg,
            },
            cost_bound: self.cost_guard,
        };
        config.validate()?;
        Ok(config)
    }
}

fn build_direction(dir: &DirectionDocument, base: &Path) -> Result<DirectionConfig> {
    if dir.dimension == 0 {
        return Err(CliError::config("field `dimension` must be positive"));
    }
    if !(dir.coupling > 0.0 && dir.coupling.is_finite()) {
        return Err(CliError::config(format!(
            "field `coupling` must be positive, got {}",
            dir.coupling
        )));
    }
    let kernel = KernelFamily::from(dir.kernel);
    let hierarchy = match &dir.sites {
        SitesSource::Equidistant { interval, max_level } => DirectionHierarchy::equidistant(
            kernel,
            dir.coupling,
            (interval[0], interval[1]),
            dir.dimension,
            *max_level,
        )?,
        SitesSource::Csv { path } => {
            let sets = csvio::read_level_sites(&base.join(path), dir.dimension)?;
            DirectionHierarchy::from_point_sets(kernel, dir.coupling, sets)?
        }
        SitesSource::Thin { path, levels, ratio } => {
            let cloud: PointSet = csvio::read_cloud(&base.join(path), dir.dimension)?;
            let thinned = thin_to_hierarchy(&cloud, *levels, *ratio, None)?;
            for (i, ok) in thinned.reached.iter().enumerate() {
                if !ok {
                    eprintln!(
                        "warning: thinning level {} reached q = {:.3e}, target {:.3e}",
                        i + 1,
                        thinned.achieved_q[i],
                        thinned.target_q[i]
                    );
                }
            }
            DirectionHierarchy::from_thinning(kernel, dir.coupling, thinned)?
        }
    };
    let mode = match (dir.mode, &dir.lambdas) {
        (ModeName::Interpolation, None) => FitMode::Interpolation,
        (ModeName::Interpolation, Some(_)) => {
            return Err(CliError::config("field `lambdas` must be null in interpolation mode"))
        }
        (ModeName::Penalized, Some(l)) => FitMode::PenalizedLeastSquares(l.clone()),
        (ModeName::Penalized, None) => return Err(CliError::config("field `lambdas` is required in penalized mode")),
    };
    Ok(DirectionConfig { hierarchy, mode })
}
