//! Convergence studies on analytic targets.
//!
//! Error metrics over a seeded uniform evaluation set `z_1, ..., z_n`:
//! maximum absolute error `max_i |A f(z_i) - f(z_i)|`, maximum relative error
//! (the same divided by `max_i |f(z_i)|`) and the mean absolute error.

use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tpml_core::index_sets::lambda_max;
use tpml_core::tpml::DirectionConfig;
use tpml_core::{DirectionHierarchy, FitMode, KernelFamily, SampleTable, Tpml, TpmlConfig, WeightVector};

use crate::batch::eval_parallel;
use crate::csvio::fmt_f64;
use crate::error::{CliError, Result};

type Target = Box<dyn Fn(&[f64]) -> f64 + Sync>;
type Builder = Box<dyn Fn(i64) -> Result<TpmlConfig>>;

/// A target function with the configuration family used to approximate it.
pub struct Study {
    pub name: String,
    /// `(lo, hi)` per coordinate of the product domain.
    pub domain: Vec<(f64, f64)>,
    target: Target,
    build: Builder,
}

impl std::fmt::Debug for Study {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Study")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .finish()
    }
}

fn equidistant(
    kernel: KernelFamily,
    coupling: f64,
    interval: (f64, f64),
    dim: usize,
    depth: usize,
) -> Result<DirectionConfig> {
    Ok(DirectionConfig {
        hierarchy: DirectionHierarchy::equidistant(kernel, coupling, interval, dim, depth)?,
        mode: FitMode::Interpolation,
    })
}

/// Depth direction `j` (1-based) needs for threshold `ell`.
fn depth_for(weights: &WeightVector, ell: i64, j: usize) -> Result<usize> {
    Ok(lambda_max(weights, ell, j)?.max(1))
}

impl Study {
    pub const NAMES: [&'static str; 2] = ["sinprod3", "aniso7"];

    /// `sin(pi x) sin(pi y) exp(-t)` on `[0,1]^2 x [0,1]`: a 2D lattice
    /// direction with `wendland_3_1`, `eps = 6 q`, and a time direction with
    /// `wendland_1_1`, `eps = 6 dt`.
    pub fn sinprod3() -> Self {
        use std::f64::consts::PI;
        Study {
            name: "sinprod3".into(),
            domain: vec![(0.0, 1.0); 3],
            target: Box::new(|x| (PI * x[0]).sin() * (PI * x[1]).sin() * (-x[2]).exp()),
            build: Box::new(|ell| {
                let weights = WeightVector::new(vec![1.0, 1.0])?;
                let space = equidistant(
                    KernelFamily::Wendland31,
                    6.0,
                    (0.0, 1.0),
                    2,
                    depth_for(&weights, ell, 1)?,
                )?;
                // q is half the time step, so eps = 12 q = 6 dt
                let time = equidistant(
                    KernelFamily::Wendland11,
                    12.0,
                    (0.0, 1.0),
                    1,
                    depth_for(&weights, ell, 2)?,
                )?;
                Ok(TpmlConfig::new(vec![space, time], weights, ell)?)
            }),
        }
    }

    /// `exp(-sum_j j y_j^2 / 7)` on `[-1,1]^7` with seven 1D directions,
    /// `wendland_1_1` and `eps = 4 q`.
    pub fn aniso7() -> Self {
        Study {
            name: "aniso7".into(),
            domain: vec![(-1.0, 1.0); 7],
            target: Box::new(|y| (-y.iter().enumerate().map(|(j, v)| (j + 1) as f64 * v * v).sum::<f64>() / 7.0).exp()),
            build: Box::new(|ell| {
                let weights = WeightVector::new(aniso7_weights())?;
                let dirs = (1..=7)
                    .map(|j| {
                        equidistant(
                            KernelFamily::Wendland11,
                            4.0,
                            (-1.0, 1.0),
                            1,
                            depth_for(&weights, ell, j)?,
                        )
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(TpmlConfig::new(dirs, weights, ell)?)
            }),
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "sinprod3" => Ok(Self::sinprod3()),
            "aniso7" => Ok(Self::aniso7()),
            other => Err(CliError::config(format!(
                "unknown target `{other}`; available: {}",
                Self::NAMES.join(", ")
            ))),
        }
    }

    /// Same configurations with a different target function.
    pub fn with_target(mut self, name: &str, f: impl Fn(&[f64]) -> f64 + Sync + 'static) -> Self {
        self.name = name.into();
        self.target = Box::new(f);
        self
    }

    pub fn target(&self, x: &[f64]) -> f64 {
        (self.target)(x)
    }

    pub fn config(&self, ell: i64) -> Result<TpmlConfig> {
        (self.build)(ell)
    }
}

/// Directions with larger coefficients get smaller weights and thus more
/// levels.
fn aniso7_weights() -> Vec<f64> {
    (1..=7).map(|j| 1.0 + (7 - j) as f64 / 6.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub ell: i64,
    pub grid_points: usize,
    pub eval_points: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub mean_abs: f64,
    /// `log2(e_{ell-1} / e_ell)` of the maximum absolute error.
    pub order: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub target: String,
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    /// Whether the maximum absolute error strictly decreases from row to row.
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].max_abs < w[0].max_abs)
    }

    pub fn strictly_decreasing_relative(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].max_rel < w[0].max_rel)
    }
}

/// Fixed evaluation set: `n` uniform points in the study domain.
pub fn evaluation_points(domain: &[(f64, f64)], n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .flat_map(|_| domain.iter().map(|&(a, b)| rng.gen_range(a..=b)).collect::<Vec<_>>())
        .collect()
}

pub fn run_convergence(
    study: &Study,
    levels: std::ops::RangeInclusive<i64>,
    eval_n: usize,
    seed: u64,
) -> Result<ErrorReport> {
    let dim = study.domain.len();
    let points = evaluation_points(&study.domain, eval_n, seed);
    let exact: Vec<f64> = points.chunks_exact(dim).map(|x| study.target(x)).collect();
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut report = ErrorReport {
        target: study.name.clone(),
        rows: Vec::new(),
    };
    for ell in levels {
        let start = Instant::now();
        let tpml = Tpml::new(study.config(ell)?)?;
        let grid = tpml.required_samples();
        let samples = SampleTable::from_fn(grid, |x| study.target(x));
        let model = tpml.fit_efficient(samples)?;
        let approx = eval_parallel(&model, &points)?;
        let errors: Vec<f64> = approx.iter().zip(&exact).map(|(a, f)| (a - f).abs()).collect();
        let max_abs = errors.iter().fold(0.0f64, |m, &e| m.max(e));
        let mean_abs = if errors.is_empty() {
            0.0
        } else {
            errors.iter().sum::<f64>() / errors.len() as f64
        };
        let order = report
            .rows
            .last()
            .map(|prev: &ErrorRow| (prev.max_abs / max_abs).log2());
        report.rows.push(ErrorRow {
            ell,
            grid_points: grid.len(),
            eval_points: eval_n,
            max_abs,
            max_rel: if scale > 0.0 { max_abs / scale } else { max_abs },
            mean_abs,
            order,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(report)
}

const PLOT_HEADER: [&str; 8] = [
    "ell",
    "grid_points",
    "eval_points",
    "max_abs_error",
    "max_rel_error",
    "mean_abs_error",
    "observed_order",
    "seconds",
];

/// Level-versus-error table for log-scale plotting.
pub fn write_plot_data(report: &ErrorReport, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::data(format!("writing report: {e}"));
    w.write_record(PLOT_HEADER).map_err(err)?;
    for r in &report.rows {
        w.write_record([
            r.ell.to_string(),
            r.grid_points.to_string(),
            r.eval_points.to_string(),
            fmt_f64(r.max_abs),
            fmt_f64(r.max_rel),
            fmt_f64(r.mean_abs),
            r.order.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.seconds),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::data(format!("writing report: {e}")))?;
    Ok(())
}

pub fn emit_plot_data(report: &ErrorReport, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_plot_data(report, file)
}

/// Parses a table written by [`write_plot_data`].
pub fn read_plot_data(reader: impl Read) -> Result<Vec<ErrorRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let bad = |e: &dyn std::fmt::Display| CliError::data(format!("report: {e}"));
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(&e))?;
        if rec.len() != PLOT_HEADER.len() {
            return Err(CliError::shape(format!("report row has {} columns", rec.len())));
        }
        let f = |i: usize| rec[i].parse::<f64>().map_err(|e| bad(&e));
        rows.push(ErrorRow {
            ell: rec[0].parse().map_err(|e| bad(&e))?,
            grid_points: rec[1].parse().map_err(|e| bad(&e))?,
            eval_points: rec[2].parse().map_err(|e| bad(&e))?,
            max_abs: f(3)?,
            max_rel: f(4)?,
            mean_abs: f(5)?,
            order: if rec[6].is_empty() { None } else { Some(f(6)?) },
            seconds: f(7)?,
        });
    }
    Ok(rows)
}
