//! Reinforcement-learning synthesis of permutation, linear-function and
//! Clifford circuits on restricted connectivity, plus learned qubit routing.

pub mod agent;
pub mod bench;
pub mod bitmatrix;
pub mod checkpoint;
pub mod config;
pub mod circuit;
pub mod decode;
pub mod env;
pub mod error;
pub mod nn;
pub mod operators;
pub mod oracles;
pub mod ppo;
pub mod routing;
pub mod synth;
pub mod topology;
pub mod train;

pub use circuit::{Circuit, Gate, GateKind};
pub use error::{Error, Result};
pub use operators::{CliffordOp, LinearOp, Observation, Operator, OperatorKind, PermutationOp};
pub use topology::{topology, CouplingMap, Layout};
