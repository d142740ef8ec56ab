use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("PLY: {0}")]
    Ply(String),

    #[error("{0}")]
    InvalidCloud(String),

    #[error("latent file: {0}")]
    LatentFormat(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("CSV: {0}")]
    Csv(String),

    #[error("config: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric: {0}")]
    Numeric(String),

    #[error("no parent feature for child voxel {child:?} (expected parent {parent:?})")]
    OrphanChild { child: [u32; 3], parent: [u32; 3] },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code for the command-line tool.
    ///
    /// 2 parse, 3 config, 4 numeric, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Ply(_) | Error::InvalidCloud(_) | Error::LatentFormat(_) | Error::Checkpoint(_) | Error::Csv(_) => 2,
            Error::Config(_) => 3,
            Error::Shape(_) | Error::Numeric(_) | Error::OrphanChild { .. } => 4,
            Error::Io { .. } => 5,
        }
    }
}
