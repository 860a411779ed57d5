//! What a unique leader makes possible: a spanning tree with unique IDs,
//! recognition of the whole graph, arbitrary computable functions, and
//! routing a joint quantum state through the leader.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::election::{qle, ElectionResult};
use crate::error::{Error, Result};
use crate::qsim::{Gate, Mode, SparseState};
use crate::runtime::{
    bits_for_levels, run_classical, CostReport, GlobalInfo, Inbox, Outbox, PartyProgram, Symbols,
};
use crate::topology::{Port, Topology};

const VISITED: u32 = 0;
const TOKEN: u32 = 1;
const RETURN: u32 = 2;

/// A party's local view of the tree: its parent port and child ports.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeLinks {
    pub parent: Option<Port>,
    pub children: Vec<Port>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Idle,
    Notify,
    Advance,
    Wait,
    Done,
}

/// Depth-first token traversal from the leader, children visited in port
/// order. A newly visited party first tells all neighbors, so a token is
/// never sent to a visited party.
#[derive(Debug, Clone, Copy)]
pub struct DfsTree;

#[derive(Debug, Clone)]
pub struct DfsState {
    links: TreeLinks,
    seen: Vec<bool>,
    step: Step,
}

impl PartyProgram for DfsTree {
    type Input = bool;
    type State = DfsState;
    type Msg = Symbols;
    type Output = TreeLinks;

    fn name(&self) -> String {
        "dfs-tree".into()
    }

    fn round_bound(&self, global: &GlobalInfo) -> usize {
        3 * global.n
    }

    fn init(&self, leader: &bool, degree: usize, _: &GlobalInfo) -> DfsState {
        DfsState {
            links: TreeLinks::default(),
            seen: vec![false; degree],
            step: if *leader { Step::Notify } else { Step::Idle },
        }
    }

    fn emit(&self, state: &mut DfsState, _: usize) -> Outbox<Symbols> {
        match state.step {
            Step::Notify => {
                state.step = Step::Advance;
                (1..=state.seen.len())
                    .filter(|&p| Some(p) != state.links.parent)
                    .map(|p| (p, Symbols::new(vec![VISITED], 3)))
                    .collect()
            }
            Step::Advance => match state.seen.iter().position(|s| !s) {
                Some(i) => {
                    state.seen[i] = true;
                    state.links.children.push(i + 1);
                    state.step = Step::Wait;
                    vec![(i + 1, Symbols::new(vec![TOKEN], 3))]
                }
                None => {
                    state.step = Step::Done;
                    state
                        .links
                        .parent
                        .map(|p| (p, Symbols::new(vec![RETURN], 3)))
                        .into_iter()
                        .collect()
                }
            },
            _ => Vec::new(),
        }
    }

    fn absorb(&self, state: &mut DfsState, _: usize, inbox: Inbox<Symbols>) {
        for (i, m) in inbox.into_iter().enumerate() {
            let Some(m) = m else { continue };
            match m.values[0] {
                VISITED => state.seen[i] = true,
                TOKEN => {
                    state.seen[i] = true;
                    state.links.parent = Some(i + 1);
                    state.step = Step::Notify;
                }
                _ => state.step = Step::Advance,
            }
        }
    }

    fn output(&self, state: &DfsState) -> Result<TreeLinks> {
        Ok(state.links.clone())
    }

    fn is_finished(&self, state: &DfsState) -> bool {
        state.step == Step::Done
    }
}

/// Preorder numbering along the tree: a counter travels down to each child
/// in turn and comes back up. The leader gets 1.
#[derive(Debug, Clone, Copy)]
pub struct IdAssignment;

#[derive(Debug, Clone)]
pub struct IdState {
    links: TreeLinks,
    id: Option<u32>,
    counter: u32,
    next: usize,
    levels: u32,
    step: Step,
}

impl PartyProgram for IdAssignment {
    type Input = (bool, TreeLinks);
    type State = IdState;
    type Msg = Symbols;
    type Output = u32;

    fn name(&self) -> String {
        "id-assignment".into()
    }

    fn round_bound(&self, global: &GlobalInfo) -> usize {
        2 * global.n
    }

    fn init(&self, input: &(bool, TreeLinks), _: usize, global: &GlobalInfo) -> IdState {
        let (leader, links) = input.clone();
        IdState {
            links,
            id: leader.then_some(1),
            counter: 2,
            next: 0,
            levels: global.n as u32 + 2,
            step: if leader { Step::Advance } else { Step::Idle },
        }
    }

    fn emit(&self, state: &mut IdState, _: usize) -> Outbox<Symbols> {
        if state.step != Step::Advance {
            return Vec::new();
        }
        let msg = Symbols::new(vec![state.counter], state.levels);
        if let Some(&child) = state.links.children.get(state.next) {
            state.next += 1;
            state.step = Step::Wait;
            vec![(child, msg)]
        } else {
            state.step = Step::Done;
            state.links.parent.map(|p| (p, msg)).into_iter().collect()
        }
    }

    fn absorb(&self, state: &mut IdState, _: usize, inbox: Inbox<Symbols>) {
        for (i, m) in inbox.into_iter().enumerate() {
            let Some(m) = m else { continue };
            if Some(i + 1) == state.links.parent {
                state.id = Some(m.values[0]);
                state.counter = m.values[0] + 1;
            } else {
                state.counter = m.values[0];
            }
            state.step = Step::Advance;
        }
    }

    fn output(&self, state: &IdState) -> Result<u32> {
        state.id.ok_or_else(|| Error::ProgramFault {
            program: self.name(),
            msg: "party never received an ID".into(),
        })
    }

    fn is_finished(&self, state: &IdState) -> bool {
        state.step == Step::Done
    }
}

/// One round: every party learns its neighbors' IDs, by port.
#[derive(Debug, Clone, Copy)]
pub struct NeighborIds;

impl PartyProgram for NeighborIds {
    type Input = u32;
    type State = (u32, Vec<u32>, u32);
    type Msg = Symbols;
    type Output = Vec<u32>;

    fn name(&self) -> String {
        "neighbor-ids".into()
    }

    fn round_bound(&self, _: &GlobalInfo) -> usize {
        1
    }

    fn init(&self, id: &u32, degree: usize, global: &GlobalInfo) -> Self::State {
        (*id, vec![0; degree], global.n as u32 + 1)
    }

    fn emit(&self, state: &mut Self::State, _: usize) -> Outbox<Symbols> {
        (1..=state.1.len())
            .map(|p| (p, Symbols::new(vec![state.0], state.2)))
            .collect()
    }

    fn absorb(&self, state: &mut Self::State, _: usize, inbox: Inbox<Symbols>) {
        for (i, m) in inbox.into_iter().enumerate() {
            if let Some(m) = m {
                state.1[i] = m.values[0];
            }
        }
    }

    fn output(&self, state: &Self::State) -> Result<Vec<u32>> {
        Ok(state.1.clone())
    }
}

/// Merges fixed-length vectors (entrywise max) up the tree; the root
/// outputs the result.
#[derive(Debug, Clone, Copy)]
pub struct Convergecast {
    pub levels: u32,
}

#[derive(Debug, Clone)]
pub struct CastState {
    links: TreeLinks,
    acc: Vec<u32>,
    waiting: usize,
    sent: bool,
}

impl PartyProgram for Convergecast {
    type Input = (TreeLinks, Vec<u32>);
    type State = CastState;
    type Msg = Symbols;
    type Output = Option<Vec<u32>>;

    fn name(&self) -> String {
        "convergecast".into()
    }

    fn round_bound(&self, global: &GlobalInfo) -> usize {
        global.n
    }

    fn init(&self, input: &(TreeLinks, Vec<u32>), _: usize, _: &GlobalInfo) -> CastState {
        CastState {
            waiting: input.0.children.len(),
            links: input.0.clone(),
            acc: input.1.clone(),
            sent: false,
        }
    }

    fn emit(&self, state: &mut CastState, _: usize) -> Outbox<Symbols> {
        match state.links.parent {
            Some(p) if state.waiting == 0 && !state.sent => {
                state.sent = true;
                vec![(p, Symbols::new(state.acc.clone(), self.levels))]
            }
            _ => Vec::new(),
        }
    }

    fn absorb(&self, state: &mut CastState, _: usize, inbox: Inbox<Symbols>) {
        for m in inbox.into_iter().flatten() {
            for (a, v) in state.acc.iter_mut().zip(m.values) {
                *a = (*a).max(v);
            }
            state.waiting -= 1;
        }
    }

    fn output(&self, state: &CastState) -> Result<Option<Vec<u32>>> {
        Ok(state.links.parent.is_none().then(|| state.acc.clone()))
    }

    fn is_finished(&self, state: &CastState) -> bool {
        state.waiting == 0 && (state.sent || state.links.parent.is_none())
    }
}

/// Sends the root's vector down the tree.
#[derive(Debug, Clone, Copy)]
pub struct Broadcast {
    pub levels: u32,
}

impl PartyProgram for Broadcast {
    type Input = (TreeLinks, Option<Vec<u32>>);
    type State = (TreeLinks, Option<Vec<u32>>, bool);
    type Msg = Symbols;
    type Output = Vec<u32>;

    fn name(&self) -> String {
        "broadcast".into()
    }

    fn round_bound(&self, global: &GlobalInfo) -> usize {
        global.n
    }

    fn init(&self, input: &Self::Input, _: usize, _: &GlobalInfo) -> Self::State {
        (input.0.clone(), input.1.clone(), false)
    }

    fn emit(&self, state: &mut Self::State, _: usize) -> Outbox<Symbols> {
        match &state.1 {
            Some(v) if !state.2 => {
                state.2 = true;
                state
                    .0
                    .children
                    .iter()
                    .map(|&c| (c, Symbols::new(v.clone(), self.levels)))
                    .collect()
            }
            _ => Vec::new(),
        }
    }

    fn absorb(&self, state: &mut Self::State, _: usize, inbox: Inbox<Symbols>) {
        for m in inbox.into_iter().flatten() {
            state.1 = Some(m.values);
        }
    }

    fn output(&self, state: &Self::State) -> Result<Vec<u32>> {
        state.1.clone().ok_or_else(|| Error::ProgramFault {
            program: self.name(),
            msg: "value never arrived".into(),
        })
    }

    fn is_finished(&self, state: &Self::State) -> bool {
        state.1.is_some()
    }
}

/// The traversal tree as seen by the harness.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanningTree {
    pub leader: usize,
    pub links: Vec<TreeLinks>,
    /// Parent node, by node.
    pub parent: Vec<Option<usize>>,
    /// Hops to the leader, by node.
    pub depth: Vec<usize>,
    /// ID in `1..=n`, by node.
    pub ids: Vec<u32>,
}

impl SpanningTree {
    /// The node holding `id`.
    pub fn node_of(&self, id: u32) -> Option<usize> {
        self.ids.iter().position(|&i| i == id)
    }

    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }
}

/// Builds the DFS tree from `leader` and numbers the parties along it.
pub fn spanning_tree(topology: &Topology, leader: usize) -> Result<(SpanningTree, CostReport)> {
    let n = topology.n();
    if leader >= n {
        return Err(Error::OutOfRange(format!(
            "leader {leader} is not a node of an {n}-node graph"
        )));
    }
    let global = GlobalInfo { n };
    let flags: Vec<bool> = (0..n).map(|v| v == leader).collect();
    let dfs = run_classical(topology, &DfsTree, &flags, &global)?;
    let links = dfs.outputs;
    let inputs: Vec<(bool, TreeLinks)> = flags.iter().copied().zip(links.iter().cloned()).collect();
    let ids = run_classical(topology, &IdAssignment, &inputs, &global)?;
    let parent: Vec<Option<usize>> = (0..n)
        .map(|v| {
            links[v]
                .parent
                .map(|p| topology.link(v, p).expect("parent port exists").neighbor)
        })
        .collect();
    let mut depth = vec![0; n];
    for (v, d) in depth.iter_mut().enumerate() {
        let mut u = v;
        while let Some(p) = parent[u] {
            *d += 1;
            u = p;
        }
    }
    let tree = SpanningTree {
        leader,
        links,
        parent,
        depth,
        ids: ids.outputs,
    };
    Ok((tree, dfs.cost.then(&ids.cost)))
}

/// The adjacency matrix every party ends up holding, indexed by `ID - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recognition {
    pub adjacency: Vec<Vec<bool>>,
    pub cost: CostReport,
}

/// Neighbor-ID exchange, convergecast of the rows to the leader, broadcast
/// of the full matrix.
pub fn recognize_graph(topology: &Topology, tree: &SpanningTree) -> Result<Recognition> {
    let n = topology.n();
    let global = GlobalInfo { n };
    let neighbors = run_classical(topology, &NeighborIds, &tree.ids, &global)?;
    let rows: Vec<(TreeLinks, Vec<u32>)> = (0..n)
        .map(|v| {
            let mut m = vec![0; n * n];
            let me = tree.ids[v] as usize - 1;
            for &w in &neighbors.outputs[v] {
                m[me * n + w as usize - 1] = 1;
                m[(w as usize - 1) * n + me] = 1;
            }
            (tree.links[v].clone(), m)
        })
        .collect();
    let up = run_classical(topology, &Convergecast { levels: 2 }, &rows, &global)?;
    let root = up.outputs[tree.leader].clone();
    let down_in: Vec<_> = (0..n)
        .map(|v| {
            (
                tree.links[v].clone(),
                if v == tree.leader { root.clone() } else { None },
            )
        })
        .collect();
    let down = run_classical(topology, &Broadcast { levels: 2 }, &down_in, &global)?;
    let first = &down.outputs[tree.leader];
    if down.outputs.iter().any(|m| m != first) {
        return Err(Error::ProgramFault {
            program: "broadcast".into(),
            msg: "parties hold different matrices".into(),
        });
    }
    let adjacency = (0..n)
        .map(|i| (0..n).map(|j| first[i * n + j] == 1).collect())
        .collect();
    Ok(Recognition {
        adjacency,
        cost: neighbors.cost.then(&up.cost).then(&down.cost),
    })
}

/// Built-in functions of (graph, labels), all invariant under relabeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Majority,
    Parity,
    AllEqual,
    LabeledCycle,
}

impl Builtin {
    pub const ALL: [Builtin; 4] = [
        Builtin::Majority,
        Builtin::Parity,
        Builtin::AllEqual,
        Builtin::LabeledCycle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Majority => "majority",
            Builtin::Parity => "parity",
            Builtin::AllEqual => "all-equal",
            Builtin::LabeledCycle => "labeled-cycle",
        }
    }

    /// 1 for true, 0 for false.
    pub fn eval(self, adjacency: &[Vec<bool>], labels: &[u32]) -> u32 {
        let ones = labels.iter().filter(|&&x| x == 1).count();
        let b = match self {
            Builtin::Majority => 2 * ones > labels.len(),
            Builtin::Parity => ones % 2 == 1,
            Builtin::AllEqual => labels.windows(2).all(|w| w[0] == w[1]),
            Builtin::LabeledCycle => {
                // an induced subgraph has a cycle iff some edge closes a loop
                let n = labels.len();
                let mut root: Vec<usize> = (0..n).collect();
                fn find(root: &mut [usize], mut v: usize) -> usize {
                    while root[v] != v {
                        root[v] = root[root[v]];
                        v = root[v];
                    }
                    v
                }
                let mut cycle = false;
                for i in 0..n {
                    for j in i + 1..n {
                        if adjacency[i][j] && labels[i] == 1 && labels[j] == 1 {
                            let (a, b) = (find(&mut root, i), find(&mut root, j));
                            if a == b {
                                cycle = true;
                            }
                            root[a] = b;
                        }
                    }
                }
                cycle
            }
        };
        b as u32
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::OutOfRange(format!("unknown function `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionResult {
    /// The value every party outputs, by node.
    pub values: Vec<u32>,
    pub leader: usize,
    pub tree: SpanningTree,
    pub cost: CostReport,
}

/// Everything after the election: tree, IDs, recognition, label gathering,
/// evaluation at the leader, and a broadcast of the value.
pub fn compute_with_leader<F>(
    topology: &Topology,
    leader: usize,
    labels: &[u32],
    label_levels: u32,
    f: F,
) -> Result<FunctionResult>
where
    F: Fn(&[Vec<bool>], &[u32]) -> u32,
{
    let n = topology.n();
    if labels.len() != n {
        return Err(Error::InputLength {
            expected: n,
            got: labels.len(),
        });
    }
    let global = GlobalInfo { n };
    let (tree, tree_cost) = spanning_tree(topology, leader)?;
    let recognition = recognize_graph(topology, &tree)?;
    let slots: Vec<(TreeLinks, Vec<u32>)> = (0..n)
        .map(|v| {
            let mut s = vec![0; n];
            s[tree.ids[v] as usize - 1] = labels[v];
            (tree.links[v].clone(), s)
        })
        .collect();
    let up = run_classical(
        topology,
        &Convergecast {
            levels: label_levels,
        },
        &slots,
        &global,
    )?;
    let gathered = up.outputs[leader]
        .clone()
        .ok_or_else(|| Error::ProgramFault {
            program: "convergecast".into(),
            msg: "leader holds no labels".into(),
        })?;
    let value = f(&recognition.adjacency, &gathered);
    let down_in: Vec<_> = (0..n)
        .map(|v| (tree.links[v].clone(), (v == leader).then(|| vec![value])))
        .collect();
    let down = run_classical(topology, &Broadcast { levels: 2 }, &down_in, &global)?;
    let values = down.outputs.into_iter().map(|v| v[0]).collect();
    let cost = tree_cost
        .then(&recognition.cost)
        .then(&up.cost)
        .then(&down.cost);
    Ok(FunctionResult {
        values,
        leader,
        tree,
        cost,
    })
}

/// Elects a leader (sampled with `seed`) and evaluates `f` on the graph and
/// labels. The election's cost is included.
pub fn compute_function<F>(
    topology: &Topology,
    labels: &[u32],
    f: F,
    seed: u64,
) -> Result<FunctionResult>
where
    F: Fn(&[Vec<bool>], &[u32]) -> u32,
{
    let election: ElectionResult = qle(topology, topology.n(), Mode::Sample(seed))?;
    let leader = election.branches[0]
        .leader_party
        .ok_or_else(|| Error::NotExact("election produced no unique leader".into()))?;
    let levels = labels.iter().copied().max().unwrap_or(0).max(1) + 1;
    let mut result = compute_with_leader(topology, leader, labels, levels, f)?;
    result.cost = election.cost.then(&result.cost);
    Ok(result)
}

/// Routes register `Q` of every party to the leader (as `Q1..Qn` in ID
/// order), applies `transform` there, and sends qudit `i` back to the party
/// with ID `i`.
///
/// Ownership changes are register moves; each qudit is metered once per
/// tree edge it crosses, in each direction.
pub fn gather_scatter_state(
    topology: &Topology,
    tree: &SpanningTree,
    state: &SparseState,
    transform: &Gate,
) -> Result<(SparseState, CostReport)> {
    let n = topology.n();
    let mut state = state.clone();
    let dim = state.spec(0, "Q")?.dim;
    let bits = bits_for_levels(dim);
    for v in 0..n {
        state.move_register(v, "Q", tree.leader, &format!("Q{}#", tree.ids[v]))?;
    }
    for id in 1..=n {
        state.move_register(
            tree.leader,
            &format!("Q{id}#"),
            tree.leader,
            &format!("Q{id}"),
        )?;
    }
    let names: Vec<String> = (1..=n).map(|i| format!("Q{i}")).collect();
    let regs: Vec<(usize, &str)> = names.iter().map(|s| (tree.leader, s.as_str())).collect();
    state.apply_dense(&regs, transform)?;
    for id in 1..=n as u32 {
        let v = tree
            .node_of(id)
            .ok_or_else(|| Error::OutOfRange(format!("no party holds ID {id}")))?;
        state.move_register(tree.leader, &format!("Q{id}"), v, "Q")?;
    }
    let height = tree.height();
    let per_round: Vec<usize> = (1..=height)
        .map(|r| tree.depth.iter().filter(|&&d| d >= r).count())
        .collect();
    let qubits: usize = tree.depth.iter().sum();
    let gather = CostReport {
        rounds: height,
        qubits_sent: qubits,
        bits_sent: qubits * bits,
        per_round: per_round.clone(),
    };
    let scatter = CostReport {
        per_round: per_round.into_iter().rev().collect(),
        ..gather.clone()
    };
    Ok((state, gather.then(&scatter)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{catalog, CatalogGraph};

    #[test]
    fn star_tree_from_center() {
        let g = catalog(CatalogGraph::Star, 4).unwrap();
        let (tree, cost) = spanning_tree(&g, 0).unwrap();
        assert_eq!(tree.parent, vec![None, Some(0), Some(0), Some(0)]);
        assert_eq!(tree.ids, vec![1, 2, 3, 4]);
        assert!(cost.rounds <= 5 * 4);
    }

    #[test]
    fn ring_tree_is_a_path() {
        let g = catalog(CatalogGraph::Ring, 4).unwrap();
        let (tree, _) = spanning_tree(&g, 0).unwrap();
        assert_eq!(tree.height(), 3);
        let mut ids = tree.ids.clone();
        ids.sort();
        assert_eq!(ids, vec![1, 2, 3, 4]);
    }

    #[test]
    fn recognition_of_k4_and_p3() {
        let k4 = catalog(CatalogGraph::Complete, 4).unwrap();
        let (tree, _) = spanning_tree(&k4, 2).unwrap();
        let r = recognize_graph(&k4, &tree).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(r.adjacency[i][j], i != j);
            }
        }
        let p3 = catalog(CatalogGraph::Path, 3).unwrap();
        let (tree, _) = spanning_tree(&p3, 2).unwrap();
        let r = recognize_graph(&p3, &tree).unwrap();
        let mut degrees: Vec<usize> = r
            .adjacency
            .iter()
            .map(|row| row.iter().filter(|&&b| b).count())
            .collect();
        degrees.sort();
        assert_eq!(degrees, vec![1, 1, 2]);
    }

    #[test]
    fn builtin_examples() {
        let c5 = catalog(CatalogGraph::Ring, 5).unwrap();
        let r = compute_with_leader(&c5, 0, &[1, 1, 1, 0, 0], 2, |a, x| {
            Builtin::Majority.eval(a, x)
        })
        .unwrap();
        assert_eq!(r.values, vec![1; 5]);
        let k3 = catalog(CatalogGraph::Complete, 3).unwrap();
        let r = compute_with_leader(&k3, 1, &[1, 1, 0], 2, |a, x| Builtin::AllEqual.eval(a, x))
            .unwrap();
        assert_eq!(r.values, vec![0; 3]);
        let c4 = catalog(CatalogGraph::Ring, 4).unwrap();
        let r = compute_with_leader(&c4, 3, &[1; 4], 2, |a, x| Builtin::LabeledCycle.eval(a, x))
            .unwrap();
        assert_eq!(r.values, vec![1; 4]);
        let r = compute_with_leader(&c4, 3, &[1, 1, 1, 0], 2, |a, x| {
            Builtin::LabeledCycle.eval(a, x)
        })
        .unwrap();
        assert_eq!(r.values, vec![0; 4]);
        assert_eq!(
            "labeled-cycle".parse::<Builtin>().unwrap(),
            Builtin::LabeledCycle
        );
    }

    #[test]
    fn identity_round_trip_costs_twice_the_distances() {
        let g = catalog(CatalogGraph::Path, 4).unwrap();
        let (tree, _) = spanning_tree(&g, 1).unwrap();
        let mut xi = SparseState::new(4);
        xi.add_register_all("Q", 2, 0).unwrap();
        xi.apply_local(3, "Q", &Gate::hadamard()).unwrap();
        let id = Gate::identity(16);
        let (out, cost) = gather_scatter_state(&g, &tree, &xi, &id).unwrap();
        assert!(out.distance(&xi).unwrap() < 1e-15);
        let distances = [1, 0, 1, 2];
        assert_eq!(cost.qubits_sent, 2 * distances.iter().sum::<usize>());
        assert_eq!(cost.rounds, 4);
    }

    #[test]
    fn swap_exchanges_two_qubits() {
        let g = catalog(CatalogGraph::Complete, 2).unwrap();
        let (tree, _) = spanning_tree(&g, 0).unwrap();
        let mut xi = SparseState::new(2);
        xi.add_register_all("Q", 2, 0).unwrap();
        xi.apply_local(0, "Q", &Gate::pauli_x()).unwrap();
        let swap = Gate::real(
            "swap",
            &[
                vec![1.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
        )
        .unwrap();
        let (out, _) = gather_scatter_state(&g, &tree, &xi, &swap).unwrap();
        assert!((out.amplitude(&[0, 1]).norm() - 1.0).abs() < 1e-15);
    }
}
