//! Non-intrusive uncertainty propagation: Hermite chaos expansions fitted
//! by least squares at sparse-grid collocation nodes, with Sobol indices
//! and response surfaces derived from the fitted coefficients.

mod grid;
mod hermite;
mod pce;

pub use grid::{latin_hypercube, smolyak_nodes, InputDistribution, SparseGrid};
pub use hermite::{gauss_hermite, hermite_eval, hermite_norm_sq};
pub use pce::{
    basis_eval, fit_pce, multi_indices, normalized_rms_error, response_surface, PceModel, ResponseSurface, SobolIndices,
};

use std::io::{Read, Write};

#[derive(Debug, thiserror::Error)]
pub enum UqError {
    #[error("invalid input distribution: {0}")]
    InvalidDistribution(String),
    #[error("sparse grid needs dims >= 1 and level >= 1, got dims {dims}, level {level}")]
    InvalidGrid { dims: usize, level: usize },
    #[error("expected length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("{samples} samples cannot determine {basis} coefficients")]
    TooFewSamples { samples: usize, basis: usize },
    #[error("Vandermonde matrix has rank {rank} < {basis}")]
    RankDeficient { rank: usize, basis: usize },
    #[error("output has zero variance; Sobol indices are undefined")]
    ZeroVariance,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl UqError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Self::Parse { line, msg: msg.into() }
    }
}

/// Writes collocation samples as CSV: node index, standardized
/// coordinates `xi_k`, then physical coordinates `x_k`.
pub fn write_samples_csv(w: impl Write, nodes: &[Vec<f64>], dist: &InputDistribution) -> Result<(), UqError> {
    let d = dist.dims();
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["node".to_string()];
    header.extend((0..d).map(|k| format!("xi_{k}")));
    header.extend((0..d).map(|k| format!("x_{k}")));
    out.write_record(&header)?;
    for (i, xi) in nodes.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(xi.iter().map(|v| v.to_string()));
        row.extend(dist.physical(xi).iter().map(|v| v.to_string()));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the standardized coordinates back from a sample CSV.
pub fn read_samples_csv(r: impl Read) -> Result<Vec<Vec<f64>>, UqError> {
    let mut rdr = csv::Reader::from_reader(r);
    let d = rdr.headers()?.iter().filter(|h| h.starts_with("xi_")).count();
    let mut nodes = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let xi: Result<Vec<f64>, _> = rec.iter().skip(1).take(d).map(str::parse).collect();
        nodes.push(xi.map_err(|_| UqError::parse(i + 2, "bad coordinate"))?);
    }
    Ok(nodes)
}
