//! Discounted calculus on MDP transition graphs: gradients, line integrals,
//! curl, divergence and Laplacian, the divergence-free decomposition of
//! reward functions, and checks for conservativeness and optimality
//! preservation.

pub mod analysis;
pub mod cli;
pub mod decompose;
pub mod error;
pub mod fields;
pub mod graph;
pub mod io;
pub mod operators;

pub use decompose::{
    canonicalize, decompose, shaping_distance, Decomposer, Decomposition, Normalization,
};
pub use error::{Error, Result};
pub use fields::{Potential, Reward, Tolerance};
pub use graph::{GraphSpec, LassoTrajectory, Trajectory, TransitionGraph};
