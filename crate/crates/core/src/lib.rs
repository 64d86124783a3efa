//! Variational TSP solving with a compact permutation encoding.
//!
//! A five-block circuit topology is found by simulated annealing on one
//! training instance, frozen, and reused on new instances where only its
//! rotation angles are re-optimized with Powell's method.

pub mod anneal;
pub mod ansatz;
pub mod energy;
pub mod error;
pub mod perm;
pub mod pipeline;
pub mod powell;
pub mod search;
pub mod seed;
pub mod sim;
pub mod tsp;

pub use ansatz::{AnsatzSpec, ParamVector};
pub use error::{Error, ErrorClass, Result};
pub use pipeline::{FrozenModel, RunRecord};
pub use search::SaConfig;
pub use tsp::{Tour, TspInstance};
