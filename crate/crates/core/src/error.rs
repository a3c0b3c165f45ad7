use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by mesh loading, constraint validation and the solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("mesh is empty or too small ({vertices} vertices, {faces} faces)")]
    EmptyMesh { vertices: usize, faces: usize },

    #[error("face {face} references vertex {vertex}, but the mesh has {count} vertices")]
    VertexOutOfRange {
        face: usize,
        vertex: usize,
        count: usize,
    },

    #[error("face {face} repeats a vertex index")]
    RepeatedVertex { face: usize },

    #[error("face {face} is degenerate: |area| = {area:e} below threshold {threshold:e}")]
    DegenerateFace {
        face: usize,
        area: f64,
        threshold: f64,
    },

    #[error("vertex {vertex} is not referenced by any face")]
    UnreferencedVertex { vertex: usize },

    #[error("edge ({a}, {b}) is non-manifold: {count} incident faces")]
    NonManifoldEdge { a: usize, b: usize, count: usize },

    #[error("edge ({a}, {b}) is traversed in the same direction by two faces")]
    InconsistentOrientation { a: usize, b: usize },

    #[error("boundary vertex {vertex} is non-manifold")]
    NonManifoldBoundary { vertex: usize },

    #[error("invalid constraint: {0}")]
    Constraint(String),

    #[error("length mismatch for {what}: expected {expected}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("face {face}: |f_z| = {modulus:e} vanishes (folded or degenerate face)")]
    DegenerateDerivative { face: usize, modulus: f64 },

    #[error("face {face}: Beltrami modulus {modulus} is not admissible (must be < 1)")]
    Inadmissible { face: usize, modulus: f64 },

    #[error("Beltrami field does not have constant modulus (std {std:e})")]
    NonConstantModulus { std: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("{folded} of {faces} faces folded, exceeding the tolerated fraction")]
    TooManyFolds { folded: usize, faces: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("map does not match the mesh: {0}")]
    Connectivity(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
