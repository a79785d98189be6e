use std::path::PathBuf;

/// Error type shared by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("no points")]
    NoPoints,

    #[error("array length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("trim flag must be 0 or 1, got {value} at index {index}")]
    BadTrimFlag { value: u32, index: usize },

    #[error("light index {index} does not fit a {bits}-bit hash field")]
    LightIndexRange { index: u32, bits: u32 },

    #[error("hash layout does not fit 32 bits: {0}")]
    HashLayout(String),

    #[error("scene has {count} lights; at most {max} fit the hash light field")]
    TooManyLights { count: usize, max: usize },

    #[error("node id {0} exceeds the 18-bit hit-pair field")]
    NodeIdRange(u32),

    #[error("triangle id {0} exceeds the 14-bit hit-pair field")]
    TriangleIdRange(u32),

    #[error("triangle batch of {size} exceeds {max} triangles; subdivide into smaller batches")]
    BatchTooLarge { size: usize, max: usize },

    #[error("hierarchy of {nodes} leaf-level nodes exceeds the 18-bit node id; subdivide the ray batch")]
    NodeCountOverflow { nodes: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Malformed { path: PathBuf, msg: String },

    #[error("invalid scene: {0}")]
    InvalidScene(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn malformed(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Malformed { path: path.into(), msg: msg.into() }
    }

    /// True for errors caused by exceeding a fixed encoding limit
    /// (hash fields, hit-pair fields, batch sizes) rather than by I/O.
    pub fn is_limit(&self) -> bool {
        matches!(
            self,
            Error::LightIndexRange { .. }
                | Error::HashLayout(_)
                | Error::TooManyLights { .. }
                | Error::NodeIdRange(_)
                | Error::TriangleIdRange(_)
                | Error::BatchTooLarge { .. }
                | Error::NodeCountOverflow { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
