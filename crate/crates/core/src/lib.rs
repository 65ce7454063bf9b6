//! Combinatorics of copies of the Rado graph, computed on a lazily represented
//! ambient graph and verified at finite depth.
//!
//! The modules follow the dependency order: [`ambient`] (adjacency, orbits,
//! copy handles), [`orbits`] (orbit calculus), [`labeling`], [`treeorder`],
//! [`copies`] (constructions inside copies), [`fusion`] (oracle-driven
//! refinement, read-off, slaloms) and [`ramsey`] (strong subtrees).

pub mod ambient;
pub mod copies;
pub mod error;
pub mod finset;
pub mod fusion;
pub mod labeling;
pub mod orbits;
pub mod ramsey;
pub mod treeorder;

pub use ambient::{adjacent, CopyHandle, OrbitType, VertexPredicate, DEFAULT_SEARCH_BOUND};
pub use error::{Error, Result};
pub use finset::{FinSet, Vertex};
pub use labeling::Labeling;
pub use treeorder::TreeNode;
