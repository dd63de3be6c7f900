use std::io;

use thiserror::Error;

/// Errors raised anywhere in the pipeline.
///
/// Every variant has a stable [`Error::name`] so command-line front ends can
/// report a structured error kind.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid depth {0}: depth must be positive and finite")]
    InvalidDepth(f64),
    #[error("out of bounds: {0}")]
    OutOfBounds(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("scene generation failed: {0}")]
    GenerationFailed(String),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("no data: {0}")]
    NoData(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("batch too small: contrastive loss needs at least 2 rows, got {0}")]
    BatchTooSmall(usize),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("corrupt feature cloud: {0}")]
    CorruptCloud(String),
    #[error("undefined embedding: field output is the zero vector")]
    UndefinedEmbedding,
    #[error("no samples to localize against")]
    NoSamples,
    #[error("missing embedding for {0}")]
    MissingEmbedding(String),
    #[error("invalid bounds: {0}")]
    InvalidBounds(String),
    #[error("schema error: {0}")]
    SchemaError(String),
    #[error("no candidate vertices: {0}")]
    NoCandidates(String),
    #[error("no path found from vertex {start} to vertex {goal}")]
    NoPathFound { start: u32, goal: u32 },
    #[error("unknown vertex id {0}")]
    UnknownVertex(u32),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable identifier of the error kind.
    pub fn name(&self) -> &'static str {
        match self {
            Error::InvalidDepth(_) => "InvalidDepth",
            Error::OutOfBounds(_) => "OutOfBounds",
            Error::InvalidGeometry(_) => "InvalidGeometry",
            Error::GenerationFailed(_) => "GenerationFailed",
            Error::InvalidLabel(_) => "InvalidLabel",
            Error::NoData(_) => "NoData",
            Error::DimMismatch(_) => "DimMismatch",
            Error::InvalidInput(_) => "InvalidInput",
            Error::BatchTooSmall(_) => "BatchTooSmall",
            Error::CorruptCheckpoint(_) => "CorruptCheckpoint",
            Error::CorruptCloud(_) => "CorruptCloud",
            Error::UndefinedEmbedding => "UndefinedEmbedding",
            Error::NoSamples => "NoSamples",
            Error::MissingEmbedding(_) => "MissingEmbedding",
            Error::InvalidBounds(_) => "InvalidBounds",
            Error::SchemaError(_) => "SchemaError",
            Error::NoCandidates(_) => "NoCandidates",
            Error::NoPathFound { .. } => "NoPathFound",
            Error::UnknownVertex(_) => "UnknownVertex",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
