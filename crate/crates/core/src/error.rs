//! Top-level error and its process exit code.

use thiserror::Error;

use crate::conformal::ConformalError;
use crate::dynamics::DynamicsError;
use crate::mesh::MeshError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_TOPOLOGY: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_COLLISION: i32 = 4;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("mesh rejected: {0}")]
    Topology(String),
    #[error(transparent)]
    Conformal(ConformalError),
    #[error("vortex collision: {0}")]
    Collision(DynamicsError),
    #[error(transparent)]
    Dynamics(DynamicsError),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Io { .. } | Error::Dynamics(_) => EXIT_CONFIG,
            Error::Topology(_) => EXIT_TOPOLOGY,
            Error::Conformal(e) => match e {
                ConformalError::NotConverged { .. } | ConformalError::Solve { .. } => {
                    EXIT_NOT_CONVERGED
                }
                ConformalError::Topology(_)
                | ConformalError::Mesh(MeshError::DegenerateTriangle(_))
                | ConformalError::DegenerateLength(_)
                | ConformalError::IsolatedVertex(_) => EXIT_TOPOLOGY,
                _ => EXIT_CONFIG,
            },
            Error::Collision(_) => EXIT_COLLISION,
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

impl From<ConformalError> for Error {
    fn from(e: ConformalError) -> Self {
        match e {
            ConformalError::Mesh(MeshError::Io(source)) => Error::Io {
                path: String::from("<mesh>"),
                source,
            },
            ConformalError::Mesh(m @ (MeshError::Parse { .. } | MeshError::FaceIndex { .. })) => {
                Error::Config(m.to_string())
            }
            other => Error::Conformal(other),
        }
    }
}

impl From<MeshError> for Error {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::DegenerateTriangle(_) => Error::Topology(e.to_string()),
            other => Error::Config(other.to_string()),
        }
    }
}

impl From<DynamicsError> for Error {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Collision { .. } | DynamicsError::FieldSingularity { .. } => {
                Error::Collision(e)
            }
            other => Error::Dynamics(other),
        }
    }
}
