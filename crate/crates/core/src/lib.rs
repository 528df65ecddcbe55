//! Decentralized cyclic-pursuit formation control for regular polygon and
//! polyhedron formations of robots in 3D.

pub mod cyclic;
pub mod error;
pub mod extensions;
pub mod linalg;
pub mod polyhedron;
pub mod quad;
pub mod report;
pub mod shapes;
pub mod sim;
pub mod subspace;

pub use error::{Error, Result};
