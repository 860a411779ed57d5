//! Classical, measurement-free distributed subroutines with input-oblivious
//! communication, meant to be applied coherently per basis component.

mod consistency;
mod flooding;
mod views;

pub use consistency::ConsistencyCheck;
pub use flooding::H0Flooding;
pub use views::{view, FkViews, ViewEdge, ViewMessage, ViewNode, ViewTree};

/// Symbol encodings shared by subroutine outputs and flag registers. The
/// fiducial value of every flag register is 0.
pub mod flags {
    pub const TRUE: u32 = 0;
    pub const FALSE: u32 = 1;
    pub const CONSISTENT: u32 = 0;
    pub const INCONSISTENT: u32 = 1;
    pub const UNMARKED: u32 = 0;
    pub const MARKED: u32 = 1;
}

/// A subroutine whose per-party input is a tuple of register symbols and
/// whose per-party output is one symbol.
pub trait SymbolProgram: crate::runtime::PartyProgram<Input = Vec<u32>, Output = u32> {}

impl<P> SymbolProgram for P where P: crate::runtime::PartyProgram<Input = Vec<u32>, Output = u32> {}
