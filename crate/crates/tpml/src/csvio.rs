//! CSV formats: sites, sparse grid requests, samples, evaluation points and
//! values. Coordinates are written with 17 significant digits so that they
//! parse back to the same bits.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use tpml_core::points::point_key;
use tpml_core::{PointSet, SampleTable, SparseGrid};

use crate::error::{CliError, Result};

/// Scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(field: &str, row: usize, col: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| CliError::data(format!("row {row}, column {}: `{field}` is not a number", col + 1)))
}

/// Optional header and data rows.
type Rows = (Option<Vec<String>>, Vec<Vec<String>>);

/// Rows of a CSV source; a first row with a non-numeric field is returned
/// separately as the header.
fn read_rows(reader: impl Read) -> Result<Rows> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::data(format!("malformed CSV: {e}")))?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        rows.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let header = match rows.first() {
        Some(first) if first.iter().any(|f| f.parse::<f64>().is_err()) => Some(rows.remove(0)),
        _ => None,
    };
    Ok((header, rows))
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| CliError::io(path, e))
}

/// Level sites from rows `level,c1,...,cn`; levels are 1-based and contiguous.
pub fn read_level_sites(path: &Path, dim: usize) -> Result<Vec<PointSet>> {
    let (_, rows) = read_rows(open(path)?)?;
    let mut levels: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != dim + 1 {
            return Err(CliError::shape(format!(
                "{}: row {} has {} columns, expected level plus {dim} coordinates",
                path.display(),
                r + 1,
                row.len()
            )));
        }
        let level: usize = row[0]
            .parse()
            .ok()
            .filter(|&l| l >= 1)
            .ok_or_else(|| CliError::data(format!("{}: row {}: bad level `{}`", path.display(), r + 1, row[0])))?;
        let coords = levels.entry(level).or_default();
        for (c, f) in row[1..].iter().enumerate() {
            coords.push(parse_f64(f, r + 1, c + 1)?);
        }
    }
    if levels.is_empty() {
        return Err(CliError::data(format!("{}: no sites", path.display())));
    }
    let mut out = Vec::with_capacity(levels.len());
    for (i, (level, coords)) in levels.into_iter().enumerate() {
        if level != i + 1 {
            return Err(CliError::data(format!(
                "{}: level {} is missing",
                path.display(),
                i + 1
            )));
        }
        out.push(PointSet::new(dim, coords)?);
    }
    Ok(out)
}

/// A point cloud with rows `c1,...,cn`.
pub fn read_cloud(path: &Path, dim: usize) -> Result<PointSet> {
    let (_, rows) = read_rows(open(path)?)?;
    let mut coords = Vec::with_capacity(rows.len() * dim);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != dim {
            return Err(CliError::shape(format!(
                "{}: row {} has {} columns, expected {dim}",
                path.display(),
                r + 1,
                row.len()
            )));
        }
        for (c, f) in row.iter().enumerate() {
            coords.push(parse_f64(f, r + 1, c)?);
        }
    }
    Ok(PointSet::new(dim, coords)?)
}

fn grid_header(grid: &SparseGrid) -> Vec<String> {
    let mut h = vec!["point_id".to_string()];
    for (j, n) in grid.dims().into_iter().enumerate() {
        h.extend((1..=n).map(|c| format!("dir{}_c{c}", j + 1)));
    }
    h
}

/// The samples request: one row per sparse grid point.
pub fn write_grid(grid: &SparseGrid, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::data(format!("writing grid: {e}"));
    w.write_record(grid_header(grid)).map_err(err)?;
    for g in 0..grid.len() {
        let mut row = vec![g.to_string()];
        row.extend(grid.coords(g).into_iter().map(fmt_f64));
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::data(format!("writing grid: {e}")))?;
    Ok(())
}

/// Grid request rows parsed back into coordinates.
pub fn read_grid(reader: impl Read, total_dim: usize) -> Result<Vec<Vec<f64>>> {
    let (_, rows) = read_rows(reader)?;
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            if row.len() != total_dim + 1 {
                return Err(CliError::shape(format!(
                    "row {}: expected {} columns",
                    r + 1,
                    total_dim + 1
                )));
            }
            row[1..]
                .iter()
                .enumerate()
                .map(|(c, f)| parse_f64(f, r + 1, c + 1))
                .collect()
        })
        .collect()
}

/// Samples as `point_id,value` (ids from the grid request) or as coordinates
/// followed by the value, with or without a leading `point_id` column.
pub fn read_samples(reader: impl Read, grid: &SparseGrid) -> Result<SampleTable> {
    let (header, rows) = read_rows(reader)?;
    let n = grid.total_dim();
    let by_id = match &header {
        Some(h) => h.len() == 2 && h[0] == "point_id",
        None => rows.first().is_some_and(|r| r.len() == 2) && n != 1,
    };
    let mut values: Vec<Option<f64>> = vec![None; grid.len()];
    let mut extra = Vec::new();
    let mut duplicate = Vec::new();
    if by_id {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != 2 {
                return Err(CliError::shape(format!(
                    "samples row {}: expected point_id,value",
                    r + 1
                )));
            }
            let v = parse_f64(&row[1], r + 1, 1)?;
            match row[0].parse::<usize>().ok().filter(|&g| g < grid.len()) {
                Some(g) if values[g].is_some() => duplicate.push(row[0].clone()),
                Some(g) => values[g] = Some(v),
                None => extra.push(row[0].clone()),
            }
        }
    } else {
        let keys = grid.key_index();
        let with_id = header
            .as_ref()
            .is_some_and(|h| h.first().is_some_and(|c| c == "point_id"))
            || rows.first().is_some_and(|r| r.len() == n + 2);
        let skip = usize::from(with_id);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n + 1 + skip {
                return Err(CliError::shape(format!(
                    "samples row {}: {} columns, expected {}",
                    r + 1,
                    row.len(),
                    n + 1 + skip
                )));
            }
            let coords: Vec<f64> = row[skip..skip + n]
                .iter()
                .enumerate()
                .map(|(c, f)| parse_f64(f, r + 1, c + skip))
                .collect::<Result<_>>()?;
            let v = parse_f64(&row[n + skip], r + 1, n + skip)?;
            match keys.get(&point_key(&coords)) {
                Some(&g) if values[g].is_some() => duplicate.push(format!("row {}", r + 1)),
                Some(&g) => values[g] = Some(v),
                None => extra.push(format!("row {}", r + 1)),
            }
        }
    }
    let missing: Vec<usize> = (0..grid.len()).filter(|&g| values[g].is_none()).collect();
    if !missing.is_empty() || !extra.is_empty() || !duplicate.is_empty() {
        let mut msg = Vec::new();
        if !missing.is_empty() {
            msg.push(format!("{} missing point ids: {}", missing.len(), list(&missing)));
        }
        if !extra.is_empty() {
            msg.push(format!(
                "{} points not on the sparse grid: {}",
                extra.len(),
                list(&extra)
            ));
        }
        if !duplicate.is_empty() {
            msg.push(format!("{} duplicated points: {}", duplicate.len(), list(&duplicate)));
        }
        return Err(CliError::data(msg.join("; ")));
    }
    Ok(SampleTable::from_values(
        grid,
        values.into_iter().map(|v| v.expect("complete")).collect(),
    )?)
}

fn list<T: std::fmt::Display>(items: &[T]) -> String {
    let shown: Vec<String> = items.iter().take(20).map(|i| i.to_string()).collect();
    if items.len() > 20 {
        format!("{}, ...", shown.join(", "))
    } else {
        shown.join(", ")
    }
}

/// Evaluation points: optional header, optional leading `point_id` column
/// (taken from the header), then `total_dim` coordinates. Ids default to
/// the row number.
pub fn read_points(reader: impl Read, total_dim: usize) -> Result<(Vec<String>, Vec<f64>)> {
    let (header, rows) = read_rows(reader)?;
    let with_id = header
        .as_ref()
        .is_some_and(|h| h.first().is_some_and(|c| c == "point_id"));
    let width = total_dim + usize::from(with_id);
    if let Some(h) = &header {
        if h.len() != width {
            return Err(CliError::shape(format!(
                "points header has {} coordinate columns, the model expects {total_dim}",
                h.len() - usize::from(with_id)
            )));
        }
    }
    let mut ids = Vec::with_capacity(rows.len());
    let mut coords = Vec::with_capacity(rows.len() * total_dim);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(CliError::shape(format!(
                "points row {}: {} coordinate columns, the model expects {total_dim}",
                r + 1,
                row.len() - usize::from(with_id)
            )));
        }
        ids.push(if with_id { row[0].clone() } else { r.to_string() });
        for (c, f) in row[usize::from(with_id)..].iter().enumerate() {
            coords.push(parse_f64(f, r + 1, c)?);
        }
    }
    Ok((ids, coords))
}

pub fn write_points(coords: &[f64], total_dim: usize, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::data(format!("writing points: {e}"));
    let mut header = vec!["point_id".to_string()];
    header.extend((1..=total_dim).map(|c| format!("c{c}")));
    w.write_record(header).map_err(err)?;
    for (i, x) in coords.chunks_exact(total_dim).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(x.iter().map(|&v| fmt_f64(v)));
        w.write_record(row).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::data(format!("writing points: {e}")))?;
    Ok(())
}

pub fn write_values(ids: &[String], values: &[f64], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| CliError::data(format!("writing values: {e}"));
    w.write_record(["point_id", "value"]).map_err(err)?;
    for (id, v) in ids.iter().zip(values) {
        w.write_record([id.as_str(), fmt_f64(*v).as_str()]).map_err(err)?;
    }
    w.flush().map_err(|e| CliError::data(format!("writing values: {e}")))?;
    Ok(())
}

/// `point_id,value` rows.
pub fn read_values(reader: impl Read) -> Result<Vec<(String, f64)>> {
    let (_, rows) = read_rows(reader)?;
    rows.iter()
        .enumerate()
        .map(|(r, row)| {
            if row.len() != 2 {
                return Err(CliError::shape(format!(
                    "values row {}: expected point_id,value",
                    r + 1
                )));
            }
            Ok((row[0].clone(), parse_f64(&row[1], r + 1, 1)?))
        })
        .collect()
}
