//! Cycle structure of bond percolation on the torus `T_r^d`.
//!
//! Geometry and sampling live in [`lattice`] and [`percolation`]; [`cycles`]
//! decides long-cycle questions under explicit work budgets; [`surgery`] runs the
//! two-stage depth-first exploration; [`coupling`] couples torus and lattice
//! clusters; [`estimators`] aggregates replicas; [`oracle`] is brute force for tests.

pub mod cluster;
pub mod coupling;
pub mod cycles;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod oracle;
pub mod percolation;
pub mod surgery;

pub use error::{Error, Result};
pub use lattice::{BoxGeometry, EdgeId, EdgeModel, Lattice, TorusGeometry, VertexId};
pub use percolation::{BondConfig, EdgeStates};
