//! Subcommand implementations behind the `tpml` binary.

use std::io::Write;
use std::path::Path;

use tpml_core::tpml::Model;
use tpml_core::{Approximant, Error as CoreError, Tpml, TpmlConfig};

use crate::batch::eval_parallel;
use crate::config::ConfigDocument;
use crate::csvio;
use crate::error::{CliError, Result};
use crate::experiments::{self, evaluation_points, Study};
use crate::model_file;

/// Pairwise tolerance of `validate`.
pub const VALIDATION_TOLERANCE: f64 = 1e-9;

fn write_err(e: std::io::Error) -> CliError {
    CliError::data(format!("writing output: {e}"))
}

pub fn load_config(path: &Path) -> Result<TpmlConfig> {
    let (doc, base) = ConfigDocument::load(path)?;
    doc.build(&base)
}

/// Writes the samples request for a configuration.
pub fn grid(config: &Path, out: impl Write) -> Result<usize> {
    let tpml = Tpml::new(load_config(config)?)?;
    csvio::write_grid(tpml.required_samples(), out)?;
    Ok(tpml.required_samples().len())
}

fn read_samples(tpml: &Tpml, path: &Path) -> Result<tpml_core::SampleTable> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    csvio::read_samples(file, tpml.required_samples())
}

/// Fits the configured representation and returns the serialized model.
pub fn fit_bytes(config: &Path, samples: &Path, mut log: impl Write) -> Result<(Model, Vec<u8>)> {
    let tpml = Tpml::new(load_config(config)?)?;
    let table = read_samples(&tpml, samples)?;
    let model = tpml.fit(table)?;
    let diagnostics = match &model {
        Model::Efficient(m) => m.diagnostics(),
        Model::Nodal(m) => m.diagnostics(),
        Model::Naive(_) => Vec::new(),
    };
    writeln!(
        log,
        "{} sparse grid points, representation {}, config hash {:016x}",
        tpml.required_samples().len(),
        tpml.config().representation.name(),
        tpml.config().fingerprint()
    )
    .map_err(write_err)?;
    if !diagnostics.is_empty() {
        writeln!(log, "direction,level,points,q,epsilon,regularization,solver,residual").map_err(write_err)?;
    }
    for d in diagnostics {
        writeln!(
            log,
            "{},{},{},{:.6e},{:.6e},{:.3e},{:?},{:.3e}",
            d.direction + 1,
            d.level,
            d.n,
            d.q,
            d.epsilon,
            d.regularization,
            d.method,
            d.residual
        )
        .map_err(write_err)?;
    }
    let bytes = model_file::save_model(tpml.config(), &model);
    Ok((model, bytes))
}

pub fn fit(config: &Path, samples: &Path, out: &Path, log: impl Write) -> Result<()> {
    let (_, bytes) = fit_bytes(config, samples, log)?;
    std::fs::write(out, bytes).map_err(|e| CliError::io(out, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(model_file::load_model(&bytes)?.1)
}

/// Evaluates a model file at the points of a CSV file.
pub fn eval(model: &Path, points: &Path, out: impl Write) -> Result<usize> {
    let model = load_model(model)?;
    let file = std::fs::File::open(points).map_err(|e| CliError::io(points, e))?;
    let (ids, coords) = csvio::read_points(file, model.input_dim())?;
    let values = eval_parallel(&model, &coords)?;
    csvio::write_values(&ids, &values, out)?;
    Ok(values.len())
}

/// Norm-wise relative difference `max|a-b| / max(max|a|, max|b|)`.
pub fn relative_difference(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub evaluated: Vec<&'static str>,
    pub skipped: Vec<(&'static str, String)>,
    pub pairs: Vec<(&'static str, &'static str, f64)>,
}

impl ValidationReport {
    pub fn max_difference(&self) -> f64 {
        self.pairs.iter().map(|p| p.2).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_difference() <= VALIDATION_TOLERANCE
    }
}

/// Compares every available representation at `reps` random points drawn
/// from the bounding boxes of the direction sites.
pub fn validate_config(
    tpml: &Tpml,
    samples: tpml_core::SampleTable,
    reps: usize,
    seed: u64,
) -> Result<ValidationReport> {
    let grid = tpml.required_samples();
    let mut domain = Vec::new();
    for j in 0..grid.d() {
        let (lo, hi) = grid.direction_points(j).bounds();
        domain.extend(lo.into_iter().zip(hi));
    }
    let points = evaluation_points(&domain, reps, seed);
    let mut results: Vec<(&'static str, Vec<f64>)> = Vec::new();
    let mut skipped = Vec::new();
    let efficient = tpml.fit_efficient(samples.clone())?;
    results.push(("efficient", eval_parallel(&efficient, &points)?));
    match tpml.fit_nodal(samples.clone()) {
        Ok(m) => results.push(("nodal", eval_parallel(&m, &points)?)),
        Err(e @ CoreError::NotNested(_)) => skipped.push(("nodal", e.to_string())),
        Err(e) => return Err(e.into()),
    }
    match tpml.naive(samples) {
        Ok(m) => results.push(("naive", eval_parallel(&m, &points)?)),
        Err(e @ CoreError::CostGuard { .. }) => skipped.push(("naive", e.to_string())),
        Err(e) => return Err(e.into()),
    }
    let mut pairs = Vec::new();
    for i in 0..results.len() {
        for k in i + 1..results.len() {
            pairs.push((
                results[i].0,
                results[k].0,
                relative_difference(&results[i].1, &results[k].1),
            ));
        }
    }
    Ok(ValidationReport {
        evaluated: results.iter().map(|r| r.0).collect(),
        skipped,
        pairs,
    })
}

/// Runs the cross-representation check and prints the report. Returns
/// whether all pairwise differences are within tolerance.
pub fn validate(
    config: &Path,
    samples: &Path,
    reps: usize,
    seed: u64,
    cost_guard: Option<f64>,
    mut out: impl Write,
) -> Result<bool> {
    let mut cfg = load_config(config)?;
    if let Some(bound) = cost_guard {
        cfg.cost_bound = bound;
    }
    let tpml = Tpml::new(cfg)?;
    let table = read_samples(&tpml, samples)?;
    let report = validate_config(&tpml, table, reps, seed)?;
    writeln!(out, "points: {reps} (seed {seed})").map_err(write_err)?;
    writeln!(out, "representations: {}", report.evaluated.join(", ")).map_err(write_err)?;
    for (name, why) in &report.skipped {
        writeln!(out, "skipped {name}: {why}").map_err(write_err)?;
    }
    for (a, b, diff) in &report.pairs {
        writeln!(out, "{a} vs {b}: max relative difference {diff:.3e}").map_err(write_err)?;
    }
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    writeln!(
        out,
        "max pairwise relative difference {:.3e} (tolerance {VALIDATION_TOLERANCE:.0e}): {verdict}",
        report.max_difference()
    )
    .map_err(write_err)?;
    Ok(report.passed())
}

/// Parses `a..b`, `a..=b` or a single level.
pub fn parse_levels(s: &str) -> Result<std::ops::RangeInclusive<i64>> {
    let bad = || CliError::config(format!("--levels: expected `a..b` or a single level, got `{s}`"));
    let (lo, hi) = if let Some((a, b)) = s.split_once("..=") {
        (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        )
    } else if let Some((a, b)) = s.split_once("..") {
        (
            a.trim().parse().map_err(|_| bad())?,
            b.trim().parse().map_err(|_| bad())?,
        )
    } else {
        let v = s.trim().parse().map_err(|_| bad())?;
        (v, v)
    };
    if lo < 0 || hi < lo {
        return Err(bad());
    }
    Ok(lo..=hi)
}

pub fn convergence(
    target: &str,
    levels: &str,
    eval_n: usize,
    seed: u64,
    out: Option<&Path>,
    mut log: impl Write,
) -> Result<experiments::ErrorReport> {
    let study = Study::named(target)?;
    let report = experiments::run_convergence(&study, parse_levels(levels)?, eval_n, seed)?;
    writeln!(
        log,
        "target {} ({} evaluation points, seed {seed})",
        report.target, eval_n
    )
    .map_err(write_err)?;
    writeln!(
        log,
        "ell  grid points  max abs err  max rel err  mean abs err  order  seconds"
    )
    .map_err(write_err)?;
    for r in &report.rows {
        let order = r.order.map_or("-".to_string(), |o| format!("{o:.2}"));
        writeln!(
            log,
            "{:>3}  {:>11}  {:>11.3e}  {:>11.3e}  {:>12.3e}  {:>5}  {:>7.2}",
            r.ell, r.grid_points, r.max_abs, r.max_rel, r.mean_abs, order, r.seconds
        )
        .map_err(write_err)?;
    }
    match out {
        Some(p) => experiments::emit_plot_data(&report, p)?,
        None => experiments::write_plot_data(&report, std::io::stdout().lock())?,
    }
    Ok(report)
}
