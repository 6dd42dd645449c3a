//! Parallel batch evaluation. Points are independent, so the results are
//! bitwise identical to a sequential loop and keep the input order.

use rayon::prelude::*;
use tpml_core::Approximant;

use crate::error::{CliError, Result};

pub fn eval_parallel<A: Approximant + Sync + ?Sized>(model: &A, coords: &[f64]) -> Result<Vec<f64>> {
    let n = model.input_dim();
    if n == 0 || !coords.len().is_multiple_of(n) {
        return Err(CliError::shape(format!(
            "{} coordinates do not form points of dimension {n}",
            coords.len()
        )));
    }
    Ok(coords
        .par_chunks_exact(n)
        .map(|x| model.eval(x))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Installs the global worker count; `None` keeps rayon's default.
pub fn set_threads(threads: Option<usize>) -> Result<()> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(format!("--threads: {e}")))?;
    }
    Ok(())
}
