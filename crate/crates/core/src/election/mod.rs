//! Exact leader election: the H1 procedure and the election built on it.

mod h1;
mod qle;

pub use h1::{h1_success, BankSplit, H1Algorithm, H1Oracle, H1Run, H1Table};
pub use qle::{
    a_gate, prepare, qle, qle_upper_bound, success_probability, ElectionBranch, ElectionResult,
    PreparedElection, Status,
};
