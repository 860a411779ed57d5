use crate::error::Result;
use crate::runtime::{GlobalInfo, Inbox, Outbox, Pair, PartyProgram};

use super::{flags, SymbolProgram};

/// Decides whether all marked parties hold the same bit, with two parallel
/// runs of an `H0` program.
///
/// Per-party input is `[r, z]` with `z` in {UNMARKED, MARKED}. Run A sees `r`
/// at marked parties and 0 elsewhere ("no marked 1"); run B sees `1 - r` at
/// marked parties and 0 elsewhere ("no marked 0"). The output is CONSISTENT
/// iff either run reports TRUE, which also covers an empty marked set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConsistencyCheck<H> {
    pub h0: H,
}

impl<H> ConsistencyCheck<H> {
    pub fn new(h0: H) -> Self {
        ConsistencyCheck { h0 }
    }
}

impl<H: SymbolProgram> PartyProgram for ConsistencyCheck<H> {
    type Input = Vec<u32>;
    type State = (H::State, H::State);
    type Msg = Pair<H::Msg, H::Msg>;
    type Output = u32;

    fn name(&self) -> String {
        format!("consistency({})", self.h0.name())
    }

    fn round_bound(&self, global: &GlobalInfo) -> usize {
        self.h0.round_bound(global)
    }

    fn init(&self, input: &Vec<u32>, degree: usize, global: &GlobalInfo) -> Self::State {
        let r = input[0] != 0;
        let marked = input[1] == flags::MARKED;
        let ones = (marked && r) as u32;
        let zeros = (marked && !r) as u32;
        (
            self.h0.init(&vec![ones], degree, global),
            self.h0.init(&vec![zeros], degree, global),
        )
    }

    fn emit(&self, state: &mut Self::State, round: usize) -> Outbox<Self::Msg> {
        let a = self.h0.emit(&mut state.0, round);
        let b = self.h0.emit(&mut state.1, round);
        let mut ports: Vec<usize> = a.iter().chain(&b).map(|(p, _)| *p).collect();
        ports.sort_unstable();
        ports.dedup();
        ports
            .into_iter()
            .map(|p| {
                let pick = |side: &Outbox<H::Msg>| {
                    side.iter().find(|(q, _)| *q == p).map(|(_, m)| m.clone())
                };
                (p, Pair(pick(&a), pick(&b)))
            })
            .collect()
    }

    fn absorb(&self, state: &mut Self::State, round: usize, inbox: Inbox<Self::Msg>) {
        let (a, b): (Vec<_>, Vec<_>) = inbox
            .into_iter()
            .map(|m| match m {
                Some(Pair(x, y)) => (x, y),
                None => (None, None),
            })
            .unzip();
        self.h0.absorb(&mut state.0, round, a);
        self.h0.absorb(&mut state.1, round, b);
    }

    fn output(&self, state: &Self::State) -> Result<u32> {
        let no_marked_one = self.h0.output(&state.0)? == flags::TRUE;
        let no_marked_zero = self.h0.output(&state.1)? == flags::TRUE;
        Ok(if no_marked_one || no_marked_zero {
            flags::CONSISTENT
        } else {
            flags::INCONSISTENT
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runtime::run_classical;
    use crate::subroutines::H0Flooding;
    use crate::topology::{catalog, CatalogGraph};

    fn check(r: &[u32], marked: &[bool]) -> Vec<u32> {
        let g = catalog(CatalogGraph::Ring, r.len()).unwrap();
        let inputs: Vec<Vec<u32>> = r
            .iter()
            .zip(marked)
            .map(|(&x, &m)| vec![x, if m { flags::MARKED } else { flags::UNMARKED }])
            .collect();
        let cs = ConsistencyCheck::new(H0Flooding::with_global_bound());
        run_classical(&g, &cs, &inputs, &GlobalInfo { n: r.len() })
            .unwrap()
            .outputs
    }

    #[test]
    fn all_marked_triangle() {
        assert!(check(&[1, 1, 1], &[true; 3])
            .iter()
            .all(|&o| o == flags::CONSISTENT));
        assert!(check(&[1, 0, 1], &[true; 3])
            .iter()
            .all(|&o| o == flags::INCONSISTENT));
    }

    #[test]
    fn empty_marked_set_is_consistent() {
        for r in [[0, 0, 0], [1, 0, 1], [1, 1, 1]] {
            assert!(check(&r, &[false; 3])
                .iter()
                .all(|&o| o == flags::CONSISTENT));
        }
    }

    #[test]
    fn unmarked_values_are_ignored() {
        assert!(check(&[1, 0, 1, 1], &[true, false, true, false])
            .iter()
            .all(|&o| o == flags::CONSISTENT));
    }

    #[test]
    fn doubles_h0_cost_in_same_rounds() {
        let g = catalog(CatalogGraph::Star, 4).unwrap();
        let global = GlobalInfo { n: 4 };
        let h0 = H0Flooding::with_global_bound();
        let h0_cost = run_classical(&g, &h0, &vec![vec![0]; 4], &global)
            .unwrap()
            .cost;
        let cs_cost = run_classical(
            &g,
            &ConsistencyCheck::new(h0),
            &vec![vec![1, 1]; 4],
            &global,
        )
        .unwrap()
        .cost;
        assert_eq!(cs_cost.rounds, h0_cost.rounds);
        assert_eq!(cs_cost.qubits_sent, 2 * h0_cost.qubits_sent);
        assert_eq!(cs_cost.bits_sent, 2 * h0_cost.bits_sent);
    }
}
