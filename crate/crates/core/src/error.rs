use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("schema error at {path}: {reason}")]
    Schema { path: String, reason: String },

    #[error("grammar error in unit `{unit_id}`: op `{op}` is not in the closed primitive grammar")]
    Grammar { unit_id: String, op: String },

    #[error("mesh has no triangles")]
    EmptyMesh,

    #[error("mesh is not a valid solid: {0}")]
    InvalidSolid(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("occupancy grids have different frames or dimensions")]
    FrameMismatch,

    #[error("list is empty")]
    EmptyList,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular stiffness system: {mode}")]
    SingularSystem { mode: String },

    #[error("unknown load case `{0}`")]
    UnknownLoadCase(String),

    #[error("eigen iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("model has {dofs} degrees of freedom, above the dense-solver cap of {cap}")]
    DofCap { dofs: usize, cap: usize },

    #[error("ambiguous binding for `{key}` from {sources:?}")]
    AmbiguousBinding { key: String, sources: Vec<String> },

    #[error("alias `{alias}` maps to both `{first}` and `{second}`")]
    AliasConflict {
        alias: String,
        first: String,
        second: String,
    },

    #[error("agent could not be launched: {0}")]
    AgentLaunch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn schema(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn parse(line: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            line,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
