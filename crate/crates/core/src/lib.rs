//! Classical and concurrence percolation on hierarchical flower networks and
//! on arbitrary edge-list topologies.
//!
//! Every observable is available in two calculi selected by [`Calculus`]:
//! the classical one composes success probabilities, the quantum one
//! composes concurrences through the fidelity-domain parallel rule.

pub mod asymptotics;
mod bisect;
pub mod connectivity;
pub mod detour;
pub mod error;
pub mod fit;
pub mod flower;
pub mod reduction;
pub mod strength;
pub mod weights;

pub use connectivity::{ensemble_crossing, para, seri, Calculus, PathEnsemble};
pub use error::{Error, Result};
pub use fit::ScalingFit;
pub use reduction::{reduce_two_terminal, TwoTerminalNetwork, WeightedGraph};
pub use weights::LinkWeight;
