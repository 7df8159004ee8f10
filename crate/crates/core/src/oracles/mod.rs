//! Exact reference implementations used to check the learned engines.

mod bfs;
mod dense;

pub use bfs::{bfs_optimal, inversion_count, BfsTable, CostKey, Searchable};
pub use dense::{
    clifford_from_unitary, dense_simulate, linear_from_unitary, permutation_from_unitary, DenseUnitary,
    MAX_DENSE_QUBITS,
};
