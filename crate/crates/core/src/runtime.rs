//! Synchronous execution of anonymous party programs with exact metering.
//!
//! One round: every party emits messages on chosen ports, all messages are
//! delivered, then every party absorbs its inbox. A transmitted `d`-level
//! symbol counts as one qudit and as `ceil(log2 d)` bits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topology::{Automorphism, Port, Topology};

/// The only information shared by all parties: the party count or an upper
/// bound on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalInfo {
    pub n: usize,
}

/// Bits needed for one symbol of a `levels`-letter alphabet.
pub fn bits_for_levels(levels: u32) -> usize {
    if levels <= 1 {
        0
    } else {
        (u32::BITS - (levels - 1).leading_zeros()) as usize
    }
}

/// Anything that can travel over a link.
pub trait Payload: Clone {
    /// Number of transmitted symbols (qudits).
    fn symbol_count(&self) -> usize;
    fn bit_count(&self) -> usize;
    /// Structural content hash, stable across runs.
    fn fingerprint(&self) -> u64;
    /// Explicit symbol values, when the message is small enough to log.
    fn values(&self) -> Option<Vec<u32>> {
        None
    }
}

/// A flat message over one alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Symbols {
    pub values: Vec<u32>,
    pub levels: u32,
}

impl Symbols {
    pub fn new(values: Vec<u32>, levels: u32) -> Self {
        debug_assert!(values.iter().all(|&v| v < levels));
        Symbols { values, levels }
    }

    pub fn bit(b: bool) -> Self {
        Symbols {
            values: vec![b as u32],
            levels: 2,
        }
    }
}

impl Payload for Symbols {
    fn symbol_count(&self) -> usize {
        self.values.len()
    }

    fn bit_count(&self) -> usize {
        self.values.len() * bits_for_levels(self.levels)
    }

    fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.levels as u64);
        for &v in &self.values {
            h.write_u64(v as u64);
        }
        h.finish()
    }

    fn values(&self) -> Option<Vec<u32>> {
        Some(self.values.clone())
    }
}

/// Two messages that share a link in the same round (parallel composition).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair<A, B>(pub Option<A>, pub Option<B>);

impl<A: Payload, B: Payload> Payload for Pair<A, B> {
    fn symbol_count(&self) -> usize {
        self.0.as_ref().map_or(0, Payload::symbol_count)
            + self.1.as_ref().map_or(0, Payload::symbol_count)
    }

    fn bit_count(&self) -> usize {
        self.0.as_ref().map_or(0, Payload::bit_count)
            + self.1.as_ref().map_or(0, Payload::bit_count)
    }

    fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.0.as_ref().map_or(0, Payload::fingerprint));
        h.write_u64(self.1.as_ref().map_or(0, Payload::fingerprint));
        h.finish()
    }

    fn values(&self) -> Option<Vec<u32>> {
        let mut out = Vec::new();
        for part in [
            self.0.as_ref().map(Payload::values),
            self.1.as_ref().map(Payload::values),
        ]
        .into_iter()
        .flatten()
        {
            out.extend(part?);
        }
        Some(out)
    }
}

/// 64-bit FNV-1a, used for deterministic content fingerprints.
#[derive(Debug, Clone, Copy)]
pub struct Fnv(u64);

impl Fnv {
    pub fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub fn write_u64(&mut self, x: u64) {
        for byte in x.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

impl Default for Fnv {
    fn default() -> Self {
        Self::new()
    }
}

pub type Outbox<M> = Vec<(Port, M)>;
/// `inbox[p - 1]` holds what arrived on port `p` this round.
pub type Inbox<M> = Vec<Option<M>>;

/// A distributed program run identically by every party.
///
/// A party sees only its own input, its degree, the global information and
/// what arrives on its ports.
pub trait PartyProgram {
    type Input: Clone;
    type State: Clone;
    type Msg: Payload;
    type Output: Clone + PartialEq + std::fmt::Debug;

    fn name(&self) -> String;
    fn round_bound(&self, global: &GlobalInfo) -> usize;
    fn init(&self, input: &Self::Input, degree: usize, global: &GlobalInfo) -> Self::State;
    fn emit(&self, state: &mut Self::State, round: usize) -> Outbox<Self::Msg>;
    fn absorb(&self, state: &mut Self::State, round: usize, inbox: Inbox<Self::Msg>);
    fn output(&self, state: &Self::State) -> Result<Self::Output>;

    /// Checked once the round bound is reached.
    fn is_finished(&self, _state: &Self::State) -> bool {
        true
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostReport {
    pub rounds: usize,
    /// Transmitted symbols (qubits or qudits) over all links and rounds.
    pub qubits_sent: usize,
    pub bits_sent: usize,
    /// Symbols per round.
    pub per_round: Vec<usize>,
}

impl CostReport {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Silent rounds.
    pub fn idle(rounds: usize) -> Self {
        CostReport {
            rounds,
            qubits_sent: 0,
            bits_sent: 0,
            per_round: vec![0; rounds],
        }
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &CostReport) -> CostReport {
        let mut per_round = self.per_round.clone();
        per_round.extend_from_slice(&next.per_round);
        CostReport {
            rounds: self.rounds + next.rounds,
            qubits_sent: self.qubits_sent + next.qubits_sent,
            bits_sent: self.bits_sent + next.bits_sent,
            per_round,
        }
    }

    /// `self` and `other` running side by side from the same round.
    pub fn alongside(&self, other: &CostReport) -> CostReport {
        let rounds = self.rounds.max(other.rounds);
        let per_round = (0..rounds)
            .map(|r| self.per_round.get(r).unwrap_or(&0) + other.per_round.get(r).unwrap_or(&0))
            .collect();
        CostReport {
            rounds,
            qubits_sent: self.qubits_sent + other.qubits_sent,
            bits_sent: self.bits_sent + other.bits_sent,
            per_round,
        }
    }

    pub fn sequence<'a>(parts: impl IntoIterator<Item = &'a CostReport>) -> CostReport {
        parts
            .into_iter()
            .fold(CostReport::zero(), |acc, c| acc.then(c))
    }

    pub fn parallel<'a>(parts: impl IntoIterator<Item = &'a CostReport>) -> CostReport {
        parts
            .into_iter()
            .fold(CostReport::zero(), |acc, c| acc.alongside(c))
    }

    pub fn times(&self, k: usize) -> CostReport {
        CostReport::sequence(std::iter::repeat_n(self, k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// From the lower node index to the higher one.
    Forward,
    Backward,
}

/// One message on one link in one direction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TraceEntry {
    pub round: usize,
    pub edge: [usize; 2],
    pub direction: Direction,
    pub symbols: usize,
    pub bits: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<u32>>,
    pub fingerprint: u64,
}

impl TraceEntry {
    pub fn from_to(&self) -> (usize, usize) {
        match self.direction {
            Direction::Forward => (self.edge[0], self.edge[1]),
            Direction::Backward => (self.edge[1], self.edge[0]),
        }
    }

    fn relabeled(&self, aut: &Automorphism) -> TraceEntry {
        let (from, to) = self.from_to();
        let (a, b) = (aut.apply(from), aut.apply(to));
        TraceEntry {
            edge: [a.min(b), a.max(b)],
            direction: if a < b {
                Direction::Forward
            } else {
                Direction::Backward
            },
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
}

/// Per round, the sorted `(from, to, symbols, bits)` of every message.
pub type CommPattern = Vec<Vec<(usize, usize, usize, usize)>>;

impl Trace {
    pub fn pattern(&self, rounds: usize) -> CommPattern {
        let mut pattern = vec![Vec::new(); rounds];
        for e in &self.entries {
            let (from, to) = e.from_to();
            pattern[e.round - 1].push((from, to, e.symbols, e.bits));
        }
        for round in &mut pattern {
            round.sort_unstable();
        }
        pattern
    }

    /// Recomputes the cost the trace implies.
    pub fn cost(&self, rounds: usize) -> CostReport {
        let mut per_round = vec![0; rounds];
        let mut bits = 0;
        for e in &self.entries {
            per_round[e.round - 1] += e.symbols;
            bits += e.bits;
        }
        CostReport {
            rounds,
            qubits_sent: per_round.iter().sum(),
            bits_sent: bits,
            per_round,
        }
    }

    fn relabeled(&self, aut: &Automorphism) -> Trace {
        let mut entries: Vec<_> = self.entries.iter().map(|e| e.relabeled(aut)).collect();
        entries.sort();
        Trace { entries }
    }

    fn sorted(&self) -> Trace {
        let mut entries = self.entries.clone();
        entries.sort();
        Trace { entries }
    }
}

#[derive(Debug, Clone)]
pub struct Execution<O> {
    pub outputs: Vec<O>,
    pub cost: CostReport,
    pub trace: Trace,
}

/// Runs `program` on every party for exactly its round bound.
pub fn run_classical<P: PartyProgram>(
    topology: &Topology,
    program: &P,
    inputs: &[P::Input],
    global: &GlobalInfo,
) -> Result<Execution<P::Output>> {
    let n = topology.n();
    if inputs.len() != n {
        return Err(Error::InputLength {
            expected: n,
            got: inputs.len(),
        });
    }
    let rounds = program.round_bound(global);
    let mut states: Vec<P::State> = (0..n)
        .map(|v| program.init(&inputs[v], topology.degree(v), global))
        .collect();
    let mut trace = Trace::default();
    for round in 1..=rounds {
        let mut inboxes: Vec<Inbox<P::Msg>> =
            (0..n).map(|v| vec![None; topology.degree(v)]).collect();
        for (v, state) in states.iter_mut().enumerate() {
            let degree = topology.degree(v);
            for (port, msg) in program.emit(state, round) {
                let link = topology
                    .link(v, port)
                    .ok_or_else(|| Error::PortOutOfRange {
                        program: program.name(),
                        node: v,
                        port,
                        degree,
                    })?;
                let slot = &mut inboxes[link.neighbor][link.remote_port - 1];
                if slot.is_some() {
                    return Err(Error::DuplicatePort {
                        program: program.name(),
                        node: v,
                        port,
                    });
                }
                let w = link.neighbor;
                trace.entries.push(TraceEntry {
                    round,
                    edge: [v.min(w), v.max(w)],
                    direction: if v < w {
                        Direction::Forward
                    } else {
                        Direction::Backward
                    },
                    symbols: msg.symbol_count(),
                    bits: msg.bit_count(),
                    values: msg.values(),
                    fingerprint: msg.fingerprint(),
                });
                *slot = Some(msg);
            }
        }
        for (state, inbox) in states.iter_mut().zip(inboxes) {
            program.absorb(state, round, inbox);
        }
    }
    if !states.iter().all(|s| program.is_finished(s)) {
        return Err(Error::RoundBoundExceeded {
            program: program.name(),
            bound: rounds,
        });
    }
    let outputs = states
        .iter()
        .map(|s| program.output(s))
        .collect::<Result<Vec<_>>>()?;
    let cost = trace.cost(rounds);
    Ok(Execution {
        outputs,
        cost,
        trace,
    })
}

/// Runs `inputs` and the inputs relabeled by `aut`, and checks that outputs,
/// costs and traces correspond under `aut`.
pub fn verify_anonymity<P: PartyProgram>(
    topology: &Topology,
    program: &P,
    inputs: &[P::Input],
    global: &GlobalInfo,
    aut: &Automorphism,
) -> Result<bool> {
    let aut = Automorphism::new(topology, aut.as_slice().to_vec())?;
    let n = topology.n();
    if inputs.len() != n {
        return Err(Error::InputLength {
            expected: n,
            got: inputs.len(),
        });
    }
    // party aut(v) receives what party v had
    let mut moved = inputs.to_vec();
    for (v, x) in inputs.iter().enumerate() {
        moved[aut.apply(v)] = x.clone();
    }
    let base = run_classical(topology, program, inputs, global)?;
    let image = run_classical(topology, program, &moved, global)?;
    let outputs_match = (0..n).all(|v| base.outputs[v] == image.outputs[aut.apply(v)]);
    Ok(outputs_match
        && base.cost == image.cost
        && base.trace.relabeled(&aut) == image.trace.sorted())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{catalog, CatalogGraph};

    /// Every party sends its bit once on every port and outputs what it heard.
    struct Echo;

    impl PartyProgram for Echo {
        type Input = u32;
        type State = (u32, usize, Vec<u32>);
        type Msg = Symbols;
        type Output = Vec<u32>;

        fn name(&self) -> String {
            "echo".into()
        }
        fn round_bound(&self, _: &GlobalInfo) -> usize {
            1
        }
        fn init(&self, input: &u32, degree: usize, _: &GlobalInfo) -> Self::State {
            (*input, degree, Vec::new())
        }
        fn emit(&self, state: &mut Self::State, _: usize) -> Outbox<Symbols> {
            (1..=state.1)
                .map(|p| (p, Symbols::new(vec![state.0], 2)))
                .collect()
        }
        fn absorb(&self, state: &mut Self::State, _: usize, inbox: Inbox<Symbols>) {
            state.2 = inbox
                .into_iter()
                .map(|m| m.map_or(9, |m| m.values[0]))
                .collect();
        }
        fn output(&self, state: &Self::State) -> Result<Vec<u32>> {
            Ok(state.2.clone())
        }
    }

    struct Silent;

    impl PartyProgram for Silent {
        type Input = ();
        type State = ();
        type Msg = Symbols;
        type Output = ();

        fn name(&self) -> String {
            "silent".into()
        }
        fn round_bound(&self, _: &GlobalInfo) -> usize {
            0
        }
        fn init(&self, _: &(), _: usize, _: &GlobalInfo) {}
        fn emit(&self, _: &mut (), _: usize) -> Outbox<Symbols> {
            Vec::new()
        }
        fn absorb(&self, _: &mut (), _: usize, _: Inbox<Symbols>) {}
        fn output(&self, _: &()) -> Result<()> {
            Ok(())
        }
    }

    struct WrongPort;

    impl PartyProgram for WrongPort {
        type Input = ();
        type State = usize;
        type Msg = Symbols;
        type Output = ();

        fn name(&self) -> String {
            "wrong-port".into()
        }
        fn round_bound(&self, _: &GlobalInfo) -> usize {
            1
        }
        fn init(&self, _: &(), degree: usize, _: &GlobalInfo) -> usize {
            degree
        }
        fn emit(&self, degree: &mut usize, _: usize) -> Outbox<Symbols> {
            vec![(*degree + 1, Symbols::bit(true))]
        }
        fn absorb(&self, _: &mut usize, _: usize, _: Inbox<Symbols>) {}
        fn output(&self, _: &usize) -> Result<()> {
            Ok(())
        }
    }

    #[test]
    fn k2_echo_sends_two_messages() {
        let k2 = catalog(CatalogGraph::Complete, 2).unwrap();
        let g = GlobalInfo { n: 2 };
        let run = run_classical(&k2, &Echo, &[1, 0], &g).unwrap();
        assert_eq!(run.cost.rounds, 1);
        assert_eq!(run.cost.qubits_sent, 2);
        assert_eq!(run.cost.bits_sent, 2);
        assert_eq!(run.outputs, vec![vec![0], vec![1]]);
        assert_eq!(run.trace.entries.len(), 2);
    }

    #[test]
    fn zero_round_program_is_silent() {
        let c4 = catalog(CatalogGraph::Ring, 4).unwrap();
        let run = run_classical(&c4, &Silent, &[(); 4], &GlobalInfo { n: 4 }).unwrap();
        assert_eq!(run.cost, CostReport::zero());
        assert!(run.trace.entries.is_empty());
    }

    #[test]
    fn rejects_nonexistent_port_and_bad_inputs() {
        let c4 = catalog(CatalogGraph::Ring, 4).unwrap();
        let g = GlobalInfo { n: 4 };
        assert!(matches!(
            run_classical(&c4, &WrongPort, &[(); 4], &g),
            Err(Error::PortOutOfRange { port: 3, .. })
        ));
        assert!(matches!(
            run_classical(&c4, &Echo, &[0, 1], &g),
            Err(Error::InputLength {
                expected: 4,
                got: 2
            })
        ));
    }

    #[test]
    fn bits_per_level() {
        assert_eq!(bits_for_levels(1), 0);
        assert_eq!(bits_for_levels(2), 1);
        assert_eq!(bits_for_levels(3), 2);
        assert_eq!(bits_for_levels(4), 2);
        assert_eq!(bits_for_levels(5), 3);
    }

    #[test]
    fn cost_composition() {
        let a = CostReport {
            rounds: 2,
            qubits_sent: 3,
            bits_sent: 3,
            per_round: vec![1, 2],
        };
        let b = CostReport {
            rounds: 1,
            qubits_sent: 4,
            bits_sent: 8,
            per_round: vec![4],
        };
        let seq = a.then(&b);
        assert_eq!(seq.rounds, 3);
        assert_eq!(seq.per_round, vec![1, 2, 4]);
        let par = a.alongside(&b);
        assert_eq!(par.rounds, 2);
        assert_eq!(par.per_round, vec![5, 2]);
        assert_eq!(par.qubits_sent, par.per_round.iter().sum::<usize>());
        assert_eq!(a.times(3).qubits_sent, 9);
    }

    #[test]
    fn echo_is_equivariant_under_rotation() {
        let c4 = catalog(CatalogGraph::Ring, 4).unwrap();
        let rot = Automorphism::new(&c4, vec![1, 2, 3, 0]).unwrap();
        let g = GlobalInfo { n: 4 };
        assert!(verify_anonymity(&c4, &Echo, &[1, 0, 0, 0], &g, &rot).unwrap());
        assert!(verify_anonymity(&c4, &Echo, &[1, 1, 1, 1], &g, &rot).unwrap());
        let reflection = Automorphism::unchecked(vec![0, 2, 1, 3]);
        assert!(matches!(
            verify_anonymity(&c4, &Echo, &[1, 0, 0, 0], &g, &reflection),
            Err(Error::InvalidAutomorphism)
        ));
    }
}
