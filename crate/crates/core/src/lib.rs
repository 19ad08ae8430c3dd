//! Probabilistic and logical circuits with exact inference, f-divergences,
//! hardness constructions, edge-bound pruning, and brute-force oracles for
//! checking all of them at small sizes.

pub mod assignment;
pub mod circuit;
pub mod constructions;
pub mod distribution;
pub mod divergence;
pub mod error;
pub mod experiment;
pub mod format;
pub mod inference;
pub mod numeric;
pub mod oracle;
pub mod pruning;

pub use assignment::Assignment;
pub use circuit::{Circuit, CircuitBuilder, Determinism, Flavor, Literal, Node, NodeId, PropertyReport};
pub use distribution::{DenseDistribution, ExactDistribution};
pub use divergence::Divergence;
pub use error::{Error, Result};
