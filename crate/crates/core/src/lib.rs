//! Analysis toolkit for labeled speech-model embeddings.
//!
//! The pipeline reads a [`dataset::Dataset`] (per-layer frame matrices plus
//! a segment table), pools frames over labeled segments, and then
//!
//! * trains linear probes for phones, tones and speakers layer by layer
//!   ([`probing`]),
//! * fits class-centroid subspaces and measures their pairwise orthogonality
//!   with cumulative residual variance ([`geometry`]),
//! * computes tone/phone adjusted mutual information and representation
//!   magnitude statistics ([`infostats`]).
//!
//! [`synthgen`] writes datasets with planted factor structure whose expected
//! metrics are known in closed form, and [`report`] runs whole analyses and
//! writes the CSV tables.

pub mod aggregation;
pub mod dataset;
pub mod geometry;
pub mod infostats;
pub mod matrix;
pub mod probing;
pub mod report;
pub mod seed;
pub mod synthgen;

use thiserror::Error;

pub use aggregation::{PooledSample, SampleSet, SamplingConfig};
pub use dataset::{Dataset, LabelKind, SegmentRecord, SyllableRole};
pub use geometry::{CrvReport, Subspace};
pub use infostats::{AmiReport, ContingencyTable, MagnitudeStats};
pub use matrix::FrameMatrix;
pub use probing::{EvalReport, LinearProbe, ProbeConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Matrix(#[from] matrix::MatrixError),
    #[error(transparent)]
    Dataset(#[from] dataset::DatasetError),
    #[error(transparent)]
    Aggregation(#[from] aggregation::AggregationError),
    #[error(transparent)]
    Probe(#[from] probing::ProbeError),
    #[error(transparent)]
    Geometry(#[from] geometry::GeometryError),
    #[error(transparent)]
    Info(#[from] infostats::InfoError),
    #[error(transparent)]
    Synth(#[from] synthgen::SynthError),
    #[error("dataset `{dataset}` has no tone labels; {what} needs them")]
    MissingTones { dataset: String, what: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
