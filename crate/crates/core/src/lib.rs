//! Finite-element laboratory for nonlinear Neumann problems on irregular
//! planar domains: rasterized geometry, slit meshes, P1 fields, a
//! regularized p-Laplacian solver, domain-perturbation experiments, optimal
//! membrane cuts and numerical checks of the density constructions.

pub mod cutting;
pub mod density;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod rng;
pub mod solver;

pub use error::{Error, Result};
pub use fem::{EdgeFlux, NodalField};
pub use geometry::{BoundingBox, CompactSet, ComponentLabeling, PixelDomain};
pub use mesh::{CrackMesh, CutPath};
pub use solver::{ProblemSpec, SolveReport};
