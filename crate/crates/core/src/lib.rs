//! Point-vortex dynamics on the plane, the unit sphere and closed
//! genus-zero triangle meshes.
//!
//! Mesh dynamics run on the sphere image of a discrete conformal map; see
//! [`conformal`] and [`pipeline`].

pub mod conformal;
pub mod dynamics;
pub mod error;
pub mod geom;
pub mod integrator;
pub mod kernels;
pub mod mesh;
pub mod pipeline;
pub mod scenario;
pub mod shapes;
pub mod sparse;
pub mod transport;

pub use error::Error;
