//! Simulator for anonymous synchronous quantum networks: exact leader
//! election, what a unique leader makes possible, and GHZ-state sharing.

pub mod amplify;
pub mod election;
pub mod error;
pub mod ghz;
pub mod postelect;
pub mod qsim;
pub mod runtime;
pub mod subroutines;
pub mod topology;
pub mod verify;

pub use error::{Error, Result};
