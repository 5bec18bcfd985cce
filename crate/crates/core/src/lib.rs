//! Dyadic cubes, adjacent systems and Haar analysis on finite metric spaces.
//!
//! The building blocks, coarse to fine:
//!
//! - [`metric`]: point clouds, measures, separated sets and nested nets;
//! - [`cubes`]: dyadic systems built from nested nets, or shifted arcs on a torus grid;
//! - [`adjacent`]: families of systems that jointly host every ball;
//! - [`sparse`]: sparse families of cubes for a cube map `τ`;
//! - [`haar`]: Haar functions, expansions and conditional expectations;
//! - [`norms`]: Bochner and Rademacher-randomized norms;
//! - [`shift`]: the shift `h_Q ↦ h_{τ(Q)}` and its norm growth;
//! - [`pipeline`]: config-driven batch runs writing JSON/CSV artifacts.

pub mod adjacent;
pub mod cubes;
pub mod error;
pub mod haar;
pub mod io;
pub mod metric;
pub mod norms;
pub mod pipeline;
pub mod shift;
pub mod sparse;

pub use cubes::{build_dyadic_system, Cube, CubeId, DyadicSystem, TorusLayout};
pub use error::{Error, Result};
pub use haar::{NormedSpace, VectorFunction};
pub use metric::{build_nested_nets, Measure, NestedNets, PointCloud, Topology};
