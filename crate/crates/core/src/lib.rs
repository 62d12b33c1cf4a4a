//! Dense simulation of adiabatic quantum linear-system solvers: the
//! discrete quantum-walk method and the randomized evolution method, plus
//! the filter-cost planning model.

pub mod error;
pub mod filtercost;
pub mod hamiltonian;
pub mod linalg;
pub mod mtx;
pub mod problemgen;
pub mod qwalk;
pub mod randomized;
pub mod seeds;

pub use error::{Error, Result};
pub use hamiltonian::{build_family, HamiltonianFamily, Schedule};
pub use problemgen::{Kind, ProblemInstance};
