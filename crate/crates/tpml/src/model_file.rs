//! Binary model files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic        8 bytes  "TPMLMDL1"
//! version      u32
//! config hash  u64
//! entries      u32
//! per entry    name length u32, name (UTF-8), rank u32, dims u64 x rank, offset u64
//! arrays       f64 data at the recorded absolute offsets
//! checksum     SHA-256 of everything before it
//! ```
//!
//! Every array, including integer metadata, is stored as `f64`. Loading
//! rebuilds the configuration from the stored sites and checks its hash, so
//! a damaged or inconsistent file is rejected instead of evaluated.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use tpml_core::lagrange::{CoefficientBlock, FitMode, SolveMethod, SolverOptions};
use tpml_core::multilevel::{DirectionBasis, LevelPairs, NodalTable};
use tpml_core::tpml::{DirectionConfig, Model, Representation};
use tpml_core::{
    DirectionHierarchy, DirectionOperator, KernelFamily, LevelSites, Matrix, PointSet, SampleTable, Tpml, TpmlConfig,
    WeightVector,
};

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 8] = b"TPMLMDL1";
pub const VERSION: u32 = 1;

/// Named `f64` arrays with shapes, plus the configuration hash.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub config_hash: u64,
    pub arrays: Vec<(String, Vec<usize>, Vec<f64>)>,
}

fn corrupt(what: impl Into<String>) -> CliError {
    CliError::data(format!("invalid model file: {}", what.into()))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt("truncated table of contents"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl Container {
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.push((name.into(), shape, data));
    }

    pub fn push_matrix(&mut self, name: impl Into<String>, m: &Matrix) {
        self.push(name, vec![m.rows(), m.cols()], m.data().to_vec());
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut toc_len = 8 + 4 + 8 + 4;
        for (name, shape, _) in &self.arrays {
            toc_len += 4 + name.len() + 4 + 8 * shape.len() + 8;
        }
        let mut out = Vec::with_capacity(toc_len + self.arrays.iter().map(|a| 8 * a.2.len()).sum::<usize>() + 32);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.config_hash.to_le_bytes());
        out.extend_from_slice(&(self.arrays.len() as u32).to_le_bytes());
        let mut offset = toc_len as u64;
        for (name, shape, data) in &self.arrays {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            out.extend_from_slice(&offset.to_le_bytes());
            offset += 8 * data.len() as u64;
        }
        for (_, _, data) in &self.arrays {
            for v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 + 4 + 8 + 4 + 32 {
            return Err(corrupt("file too short"));
        }
        if &bytes[..8] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let (body, digest) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != digest {
            return Err(corrupt("checksum mismatch"));
        }
        let mut cur = Cursor { bytes: body, pos: 8 };
        let version = cur.u32()?;
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let config_hash = cur.u64()?;
        let n = cur.u32()? as usize;
        let mut toc = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let len = cur.u32()? as usize;
            let name = std::str::from_utf8(cur.take(len)?)
                .map_err(|_| corrupt("array name is not UTF-8"))?
                .to_string();
            let rank = cur.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(usize::try_from(cur.u64()?).map_err(|_| corrupt("dimension overflow"))?);
            }
            let offset = usize::try_from(cur.u64()?).map_err(|_| corrupt("offset overflow"))?;
            toc.push((name, shape, offset));
        }
        let data_start = cur.pos;
        let mut arrays = Vec::with_capacity(toc.len());
        let mut expected = data_start;
        for (name, shape, offset) in toc {
            let count = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| corrupt(format!("array `{name}` too large")))?;
            let bytes_len = count
                .checked_mul(8)
                .ok_or_else(|| corrupt(format!("array `{name}` too large")))?;
            if offset != expected || offset.checked_add(bytes_len).is_none_or(|e| e > body.len()) {
                return Err(corrupt(format!("array `{name}` lies outside the data section")));
            }
            let data = body[offset..offset + bytes_len]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            expected = offset + bytes_len;
            arrays.push((name, shape, data));
        }
        if expected != body.len() {
            return Err(corrupt("trailing bytes after the data section"));
        }
        Ok(Container { config_hash, arrays })
    }
}

/// Lookup over a loaded container.
struct Arrays<'a> {
    map: BTreeMap<&'a str, (&'a [usize], &'a [f64])>,
}

impl<'a> Arrays<'a> {
    fn new(c: &'a Container) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (name, shape, data) in &c.arrays {
            if map.insert(name.as_str(), (shape.as_slice(), data.as_slice())).is_some() {
                return Err(corrupt(format!("duplicate array `{name}`")));
            }
        }
        Ok(Arrays { map })
    }

    fn get(&self, name: &str) -> Result<(&'a [usize], &'a [f64])> {
        self.map
            .get(name)
            .copied()
            .ok_or_else(|| corrupt(format!("missing array `{name}`")))
    }

    fn vector(&self, name: &str, len: Option<usize>) -> Result<&'a [f64]> {
        let (shape, data) = self.get(name)?;
        if shape.len() != 1 || len.is_some_and(|l| l != data.len()) {
            return Err(corrupt(format!("array `{name}` has shape {shape:?}")));
        }
        Ok(data)
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Matrix> {
        let (shape, data) = self.get(name)?;
        if shape != [rows, cols] {
            return Err(corrupt(format!(
                "array `{name}` has shape {shape:?}, expected [{rows}, {cols}]"
            )));
        }
        Ok(Matrix::from_row_major(rows, cols, data.to_vec())?)
    }
}

fn count(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
        Ok(v as usize)
    } else {
        Err(corrupt(format!("{what} is not a count: {v}")))
    }
}

fn push_config(c: &mut Container, config: &TpmlConfig) {
    c.push(
        "config",
        vec![7],
        vec![
            config.d() as f64,
            config.ell as f64,
            config.representation.code() as f64,
            config.cost_bound,
            config.solver.cg_tolerance,
            config.solver.cg_max_factor as f64,
            f64::from(u8::from(config.solver.force_cg)),
        ],
    );
    c.push("weights", vec![config.d()], config.weights.as_slice().to_vec());
    for (j, dir) in config.directions.iter().enumerate() {
        let h = &dir.hierarchy;
        let mode = match &dir.mode {
            FitMode::Interpolation => 0.0,
            FitMode::PenalizedLeastSquares(_) => 1.0,
        };
        c.push(
            format!("dir{j}"),
            vec![4],
            vec![h.kernel().code() as f64, h.dim() as f64, h.depth() as f64, mode],
        );
        if let FitMode::PenalizedLeastSquares(l) = &dir.mode {
            c.push(format!("dir{j}.lambdas"), vec![l.len()], l.clone());
        }
        for (i, level) in h.levels().iter().enumerate() {
            let i = i + 1;
            c.push(
                format!("dir{j}.level{i}.points"),
                vec![level.len(), level.dim()],
                level.points().coords().to_vec(),
            );
            c.push(
                format!("dir{j}.level{i}.support"),
                vec![2],
                vec![level.q(), level.epsilon()],
            );
        }
    }
}

fn read_config(a: &Arrays) -> Result<TpmlConfig> {
    let meta = a.vector("config", Some(7))?;
    let d = count(meta[0], "direction count")?;
    let ell = meta[1];
    if ell.fract() != 0.0 || ell.abs() > 1e9 {
        return Err(corrupt("threshold is not an integer"));
    }
    let representation = Representation::from_code(count(meta[2], "representation")? as u64)
        .ok_or_else(|| corrupt("unknown representation"))?;
    let weights = WeightVector::new(a.vector("weights", Some(d))?.to_vec())?;
    let mut directions = Vec::with_capacity(d);
    for j in 0..d {
        let info = a.vector(&format!("dir{j}"), Some(4))?;
        let kernel =
            KernelFamily::from_code(count(info[0], "kernel")? as u64).ok_or_else(|| corrupt("unknown kernel"))?;
        let dim = count(info[1], "dimension")?;
        let depth = count(info[2], "depth")?;
        let mode = match info[3] {
            0.0 => FitMode::Interpolation,
            1.0 => FitMode::PenalizedLeastSquares(a.vector(&format!("dir{j}.lambdas"), None)?.to_vec()),
            _ => return Err(corrupt("unknown fit mode")),
        };
        let mut levels = Vec::with_capacity(depth);
        for i in 1..=depth {
            let (shape, coords) = a.get(&format!("dir{j}.level{i}.points"))?;
            if shape.len() != 2 || shape[1] != dim {
                return Err(corrupt(format!(
                    "sites of direction {j}, level {i} have shape {shape:?}"
                )));
            }
            let support = a.vector(&format!("dir{j}.level{i}.support"), Some(2))?;
            let points = PointSet::new(dim, coords.to_vec())?;
            levels.push(LevelSites::with_support(points, support[0], support[1])?);
        }
        directions.push(DirectionConfig {
            hierarchy: DirectionHierarchy::new(kernel, levels)?,
            mode,
        });
    }
    let config = TpmlConfig {
        directions,
        weights,
        ell: ell as i64,
        representation,
        solver: SolverOptions {
            cg_tolerance: meta[4],
            cg_max_factor: count(meta[5], "iteration factor")?,
            force_cg: meta[6] != 0.0,
        },
        cost_bound: meta[3],
    };
    config.validate()?;
    Ok(config)
}

fn push_basis(c: &mut Container, j: usize, basis: &DirectionBasis) {
    for block in basis.blocks() {
        let i = block.level;
        c.push_matrix(format!("dir{j}.block{i}"), &block.alphas);
        let method = match block.method {
            SolveMethod::Cholesky => 0.0,
            SolveMethod::ConjugateGradient => 1.0,
        };
        c.push(
            format!("dir{j}.block{i}.info"),
            vec![3],
            vec![block.regularization, method, block.residual],
        );
    }
}

fn read_basis(a: &Arrays, j: usize, hierarchy: DirectionHierarchy) -> Result<DirectionBasis> {
    let mut blocks = Vec::with_capacity(hierarchy.depth());
    for i in 1..=hierarchy.depth() {
        let n = hierarchy.level(i).len();
        let alphas = a.matrix(&format!("dir{j}.block{i}"), n, n)?;
        let info = a.vector(&format!("dir{j}.block{i}.info"), Some(3))?;
        let method = match info[1] {
            0.0 => SolveMethod::Cholesky,
            1.0 => SolveMethod::ConjugateGradient,
            _ => return Err(corrupt("unknown solve method")),
        };
        blocks.push(CoefficientBlock {
            level: i,
            alphas,
            regularization: info[0],
            method,
            residual: info[2],
        });
    }
    Ok(DirectionBasis::from_parts(hierarchy, blocks)?)
}

fn push_pairs(c: &mut Container, name: &str, pairs: &LevelPairs) {
    for ((m, p), mat) in pairs.iter() {
        c.push_matrix(format!("{name}{m}_{p}"), mat);
    }
}

fn read_pairs(
    a: &Arrays,
    name: &str,
    levels: usize,
    strict: bool,
    shape: impl Fn(usize, usize) -> (usize, usize),
) -> Result<LevelPairs> {
    LevelPairs::try_from_fn(levels, strict, |m, p| {
        let (r, c) = shape(m, p);
        a.matrix(&format!("{name}{m}_{p}"), r, c)
            .map_err(|e| tpml_core::Error::InvalidArgument(e.message))
    })
    .map_err(|e| corrupt(e.to_string()))
}

/// Serializes a fitted model together with its configuration.
pub fn save_model(config: &TpmlConfig, model: &Model) -> Vec<u8> {
    let mut c = Container {
        config_hash: config.fingerprint(),
        arrays: Vec::new(),
    };
    push_config(&mut c, config);
    let samples = match model {
        Model::Naive(m) => {
            for (j, b) in m.bases().iter().enumerate() {
                push_basis(&mut c, j, b);
            }
            m.samples()
        }
        Model::Efficient(m) => {
            for (j, op) in m.operators().iter().enumerate() {
                push_basis(&mut c, j, op.basis());
                push_pairs(&mut c, &format!("dir{j}.transfer"), op.transfers());
                push_pairs(&mut c, &format!("dir{j}.summed"), op.s_blocks());
                push_pairs(&mut c, &format!("dir{j}.xi"), op.xi_factors());
            }
            m.samples()
        }
        Model::Nodal(m) => {
            for (j, (b, t)) in m.bases().iter().zip(m.tables()).enumerate() {
                push_basis(&mut c, j, b);
                for (p, mat) in t.levels().iter().enumerate() {
                    c.push_matrix(format!("dir{j}.nodal{}", p + 1), mat);
                }
            }
            m.samples()
        }
    };
    c.push("samples", vec![samples.len()], samples.values().to_vec());
    c.to_bytes()
}

/// Inverse of [`save_model`].
pub fn load_model(bytes: &[u8]) -> Result<(Tpml, Model)> {
    let c = Container::from_bytes(bytes)?;
    let a = Arrays::new(&c)?;
    let config = read_config(&a).map_err(|e| corrupt(e.message))?;
    if config.fingerprint() != c.config_hash {
        return Err(corrupt("configuration hash mismatch"));
    }
    let tpml = Tpml::new(config)?;
    let grid = tpml.required_samples();
    let samples = SampleTable::from_values(grid, a.vector("samples", Some(grid.len()))?.to_vec())?;
    let mut bases = Vec::new();
    for (j, (dir, &l)) in tpml.config().directions.iter().zip(tpml.lambda_max()).enumerate() {
        bases.push(read_basis(&a, j, dir.hierarchy.truncated(l)?)?);
    }
    let model = match tpml.config().representation {
        Representation::Naive => Model::Naive(tpml.naive_from_parts(samples, bases)?),
        Representation::Efficient => {
            let mut ops = Vec::with_capacity(bases.len());
            for (j, basis) in bases.into_iter().enumerate() {
                let sizes = basis.hierarchy().sizes();
                let l = basis.depth();
                let transfers = read_pairs(&a, &format!("dir{j}.transfer"), l, true, |m, p| {
                    (sizes[m - 1], sizes[p - 1])
                })?;
                let summed = read_pairs(&a, &format!("dir{j}.summed"), l, false, |m, p| {
                    (sizes[m - 1], sizes[p - 1])
                })?;
                let xi = read_pairs(&a, &format!("dir{j}.xi"), l, false, |m, p| (sizes[p - 1], sizes[m - 1]))?;
                ops.push(DirectionOperator::from_parts(basis, transfers, summed, xi)?);
            }
            Model::Efficient(tpml.efficient_from_parts(samples, ops)?)
        }
        Representation::Nodal => {
            let mut tables = Vec::with_capacity(bases.len());
            for (j, basis) in bases.iter().enumerate() {
                let nesting = basis.hierarchy().nesting()?;
                let n_fine = nesting.finest_len();
                let levels = (1..=basis.depth())
                    .map(|p| a.matrix(&format!("dir{j}.nodal{p}"), basis.size(p), n_fine))
                    .collect::<Result<Vec<_>>>()?;
                tables.push(NodalTable::from_parts(nesting, levels)?);
            }
            Model::Nodal(tpml.nodal_from_parts(samples, bases, tables)?)
        }
    };
    Ok((tpml, model))
}
