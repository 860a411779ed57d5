use crate::error::Result;
use crate::runtime::{GlobalInfo, Inbox, Outbox, PartyProgram, Symbols};

use super::flags;

/// Decides `H0(x) = (|x| = 0)` by OR-flooding for a fixed number of rounds.
///
/// Every round each party sends its current bit on every port, then ORs in
/// whatever it received. With `delta` at least the diameter, every party ends
/// with the OR of all inputs. `delta = None` uses the global `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct H0Flooding {
    pub delta: Option<usize>,
}

impl H0Flooding {
    pub fn new(delta: usize) -> Self {
        H0Flooding { delta: Some(delta) }
    }

    pub fn with_global_bound() -> Self {
        H0Flooding { delta: None }
    }
}

#[derive(Debug, Clone)]
pub struct FloodState {
    bit: bool,
    degree: usize,
}

impl PartyProgram for H0Flooding {
    type Input = Vec<u32>;
    type State = FloodState;
    type Msg = Symbols;
    type Output = u32;

    fn name(&self) -> String {
        "h0-flooding".into()
    }

    fn round_bound(&self, global: &GlobalInfo) -> usize {
        self.delta.unwrap_or(global.n)
    }

    fn init(&self, input: &Vec<u32>, degree: usize, _: &GlobalInfo) -> FloodState {
        FloodState {
            bit: input.first().copied().unwrap_or(0) != 0,
            degree,
        }
    }

    fn emit(&self, state: &mut FloodState, _: usize) -> Outbox<Symbols> {
        (1..=state.degree)
            .map(|p| (p, Symbols::bit(state.bit)))
            .collect()
    }

    fn absorb(&self, state: &mut FloodState, _: usize, inbox: Inbox<Symbols>) {
        state.bit |= inbox.iter().flatten().any(|m| m.values[0] != 0);
    }

    fn output(&self, state: &FloodState) -> Result<u32> {
        Ok(if state.bit { flags::FALSE } else { flags::TRUE })
    }
}
