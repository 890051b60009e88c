//! Configuration, output writers, and drivers for deterministic runs and
//! uncertainty campaigns.

mod campaign;
mod config;
mod output;
mod run;
pub mod units;

pub use campaign::{run_campaign, run_campaign_with, CampaignResult, Evaluator};
pub use config::{CampaignConfig, Functional, MeshSource, RunConfig, StochasticInput};
pub use output::{write_probes, write_vtk, ProbeTraces, VTK_UNDEFINED};
pub use run::{courant_number, run_deterministic, RunResult};

use std::path::PathBuf;

use crate::mesh::MeshError;
use crate::solidify::SolidifyError;
use crate::uq::UqError;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("configuration syntax: {0}")]
    Syntax(String),
    #[error("missing `{0}`")]
    Missing(String),
    #[error("`{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("boundary patch `{name}` is not in the mesh (patches: {known})")]
    UnknownPatch { name: String, known: String },
}

#[derive(Debug, thiserror::Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solidify(#[from] SolidifyError),
    #[error(transparent)]
    Uq(#[from] UqError),
    #[error("step {step} (t = {time} s) failed: {source}")]
    Step { step: usize, time: f64, source: SolidifyError },
    #[error("step {step}: Courant number {courant:.3} exceeds {limit}; reduce `time.dt`")]
    Courant { step: usize, courant: f64, limit: f64 },
    #[error("field `{name}` has {got} values, expected {expected}")]
    FieldLength { name: String, expected: usize, got: usize },
    #[error("probe {probe} at {point:?} lies outside the mesh")]
    ProbeOutside { probe: usize, point: [f64; 3] },
    #[error("{kind} sample {index} failed (configuration saved to {}): {source}", snapshot.display())]
    Sample { kind: String, index: usize, snapshot: PathBuf, source: Box<AppError> },
    #[error("output `{output}` is not finite at sample {sample}")]
    NonFinite { output: String, sample: usize },
    #[error("{}: {}", .0.display(), .1)]
    Io(PathBuf, std::io::Error),
}
