//! LP-based local solvers for the standard pooling problem.

pub mod algorithms;
pub mod bench;
pub mod error;
pub mod instance;
pub mod formulations;
pub mod lp;
pub mod oracle;
pub mod subproblems;
