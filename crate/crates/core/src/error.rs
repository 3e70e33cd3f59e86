//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Runtime,
}

#[derive(Debug, Error)]
pub enum Error {
    // --- mesh ingestion / connectivity ---
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("line {line}: face has {count} vertices, only triangles are supported")]
    NonTriangleFace { line: usize, count: usize },
    #[error("vertex index {index} out of range (mesh has {vertex_count} vertices)")]
    VertexIndexOutOfRange { index: i64, vertex_count: usize },
    #[error("mesh has no vertices or no faces")]
    EmptyMesh,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("edge ({0}, {1}) has more than two incident faces")]
    NonManifoldEdge(usize, usize),
    #[error("face {0} repeats a vertex")]
    DegenerateFace(usize),
    #[error("faces {0} and {1} share the same three vertices")]
    DuplicateFace(usize, usize),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("label count {labels} does not match edge count {edges}")]
    LabelCountMismatch { labels: usize, edges: usize },

    // --- tensor shapes ---
    #[error("channel mismatch: expected {expected}, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("edge count mismatch: expected {expected}, got {got}")]
    EdgeCountMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix dimension mismatch: matrix has {cols} columns, input has {edges} edges")]
    DimensionMismatch { cols: usize, edges: usize },
    #[error("invalid sparse matrix: {0}")]
    InvalidSparse(String),

    // --- pooling ---
    #[error("pool target {target} is not below the current edge count {current}")]
    TargetNotBelowCurrent { target: usize, current: usize },
    #[error("pool target {target} unreachable: stopped at {achieved} edges")]
    PoolTargetUnreachable { target: usize, achieved: usize },
    #[error("pool history mismatch: history expects {expected} pooled edges, got {got}")]
    HistoryMismatch { expected: usize, got: usize },

    // --- network / training ---
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("mask selects no edges")]
    EmptyMask,
    #[error("loss became non-finite at epoch {epoch}, batch {batch}: {value}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        value: f64,
    },
    #[error("augmentation produced degenerate geometry after {0} attempts")]
    DegenerateAfterAugment(usize),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    // --- metrics ---
    #[error("length mismatch: {0} predictions vs {1} ground-truth labels")]
    LengthMismatch(usize, usize),
    #[error("no edges were evaluated")]
    EmptyEvaluation,

    // --- rescale ---
    #[error("k-d tree needs at least one point")]
    EmptyPointSet,
    #[error("point {0} has a non-finite coordinate")]
    NonFinitePoint(usize),
    #[error("source mesh has no labeled edges")]
    EmptySource,

    // --- synth ---
    #[error("synthetic spec infeasible: {0}")]
    SpecInfeasible(String),

    // --- plumbing ---
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable identifier, used in machine-parsable CLI error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingFile(_) => "MissingFile",
            Error::NonTriangleFace { .. } => "NonTriangleFace",
            Error::VertexIndexOutOfRange { .. } => "VertexIndexOutOfRange",
            Error::EmptyMesh => "EmptyMesh",
            Error::Parse { .. } => "Parse",
            Error::NonManifoldEdge(..) => "NonManifoldEdge",
            Error::DegenerateFace(_) => "DegenerateFace",
            Error::DuplicateFace(..) => "DuplicateFace",
            Error::DegenerateGeometry(_) => "DegenerateGeometry",
            Error::LabelCountMismatch { .. } => "LabelCountMismatch",
            Error::ChannelMismatch { .. } => "ChannelMismatch",
            Error::EdgeCountMismatch { .. } => "EdgeCountMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidSparse(_) => "InvalidSparse",
            Error::TargetNotBelowCurrent { .. } => "TargetNotBelowCurrent",
            Error::PoolTargetUnreachable { .. } => "PoolTargetUnreachable",
            Error::HistoryMismatch { .. } => "HistoryMismatch",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::LabelOutOfRange { .. } => "LabelOutOfRange",
            Error::EmptyMask => "EmptyMask",
            Error::NonFiniteLoss { .. } => "NonFiniteLoss",
            Error::DegenerateAfterAugment(_) => "DegenerateAfterAugment",
            Error::Checkpoint(_) => "Checkpoint",
            Error::LengthMismatch(..) => "LengthMismatch",
            Error::EmptyEvaluation => "EmptyEvaluation",
            Error::EmptyPointSet => "EmptyPointSet",
            Error::NonFinitePoint(_) => "NonFinitePoint",
            Error::EmptySource => "EmptySource",
            Error::SpecInfeasible(_) => "SpecInfeasible",
            Error::Config(_) => "ConfigError",
            Error::Io { .. } => "IoError",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidConfig(_) | Error::Config(_) | Error::SpecInfeasible(_) => {
                ErrorClass::Config
            }
            Error::NonFiniteLoss { .. }
            | Error::PoolTargetUnreachable { .. }
            | Error::TargetNotBelowCurrent { .. }
            | Error::DegenerateAfterAugment(_)
            | Error::ChannelMismatch { .. }
            | Error::ShapeMismatch(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidSparse(_)
            | Error::HistoryMismatch { .. } => ErrorClass::Runtime,
            _ => ErrorClass::Data,
        }
    }
}
