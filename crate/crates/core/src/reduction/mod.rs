//! Two-terminal reduction of weighted graphs beyond series-parallel structure.

mod broyden;
mod network;
mod transform;

pub use broyden::{broyden_solve, BroydenOptions, BroydenSolution, EPS};
pub use network::{
    reduce_two_terminal, reduce_two_terminal_detailed, reduce_two_terminal_with, EliminationOrder, Reduction,
    TwoTerminalNetwork, WeightedGraph,
};
pub use transform::{
    cross_weight, mesh_to_star, star_to_mesh, MeshGraph, Solved, StarGraph, MAX_STAR_LEGS, TRANSFORM_TOL,
};
