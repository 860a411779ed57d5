//! Views (truncated universal covers) and the view-based `F_k` engine.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::runtime::{bits_for_levels, Fnv, GlobalInfo, Inbox, Outbox, PartyProgram, Payload};
use crate::topology::Topology;

pub type ViewTree = Arc<ViewNode>;

/// One node of a view: the party's `(input, degree)` label and one child per
/// port, each edge labeled `(exit port, entry port)`.
#[derive(Debug)]
pub struct ViewNode {
    pub input: u32,
    pub degree: u32,
    pub children: Vec<ViewEdge>,
    depth: u32,
    nodes: u64,
    hash: u64,
}

#[derive(Debug, Clone)]
pub struct ViewEdge {
    pub exit_port: u32,
    pub entry_port: u32,
    pub child: ViewTree,
}

impl ViewNode {
    pub fn leaf(input: u32, degree: u32) -> ViewTree {
        Self::branch(input, degree, Vec::new(), 0)
    }

    /// `children` must be listed by exit port; `depth` is the depth of the
    /// new tree (children have depth `depth - 1`).
    pub fn branch(input: u32, degree: u32, children: Vec<ViewEdge>, depth: u32) -> ViewTree {
        let mut h = Fnv::new();
        h.write_u64(input as u64);
        h.write_u64(degree as u64);
        h.write_u64(depth as u64);
        let mut nodes = 1;
        for c in &children {
            h.write_u64(c.exit_port as u64);
            h.write_u64(c.entry_port as u64);
            h.write_u64(c.child.hash);
            nodes += c.child.nodes;
        }
        Arc::new(ViewNode {
            input,
            degree,
            children,
            depth,
            nodes,
            hash: h.finish(),
        })
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn node_count(&self) -> u64 {
        self.nodes
    }

    pub fn fingerprint(&self) -> u64 {
        self.hash
    }

    /// Symbols in the serialized tree: two labels per node, two port labels
    /// per edge.
    pub fn symbol_count(&self) -> u64 {
        4 * self.nodes - 2
    }
}

impl PartialEq for ViewNode {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self, other)
            || (self.hash == other.hash
                && self.input == other.input
                && self.degree == other.degree
                && self.depth == other.depth
                && self.children.len() == other.children.len()
                && self.children.iter().zip(&other.children).all(|(a, b)| {
                    a.exit_port == b.exit_port && a.entry_port == b.entry_port && a.child == b.child
                }))
    }
}

impl Eq for ViewNode {}

/// The depth-`depth` view of node `v` under per-node `inputs`.
pub fn view(topology: &Topology, inputs: &[u32], v: usize, depth: u32) -> ViewTree {
    fn build(
        topology: &Topology,
        inputs: &[u32],
        v: usize,
        depth: u32,
        memo: &mut HashMap<(usize, u32), ViewTree>,
    ) -> ViewTree {
        if let Some(t) = memo.get(&(v, depth)) {
            return t.clone();
        }
        let degree = topology.degree(v) as u32;
        let tree = if depth == 0 {
            ViewNode::leaf(inputs[v], degree)
        } else {
            let children = topology
                .links(v)
                .iter()
                .enumerate()
                .map(|(i, l)| ViewEdge {
                    exit_port: i as u32 + 1,
                    entry_port: l.remote_port as u32,
                    child: build(topology, inputs, l.neighbor, depth - 1, memo),
                })
                .collect();
            ViewNode::branch(inputs[v], degree, children, depth)
        };
        memo.insert((v, depth), tree.clone());
        tree
    }
    build(topology, inputs, v, depth, &mut HashMap::new())
}

/// Input, degree, and (exit port, entry port, child class) per edge.
type ClassKey = (u32, u32, Vec<(u32, u32, usize)>);

/// Assigns equal ids to equal truncations of views.
#[derive(Default)]
struct ClassTable {
    ids: HashMap<ClassKey, usize>,
    memo: HashMap<(*const ViewNode, u32), usize>,
}

impl ClassTable {
    fn class_of(&mut self, tree: &ViewTree, depth: u32) -> usize {
        let key = (Arc::as_ptr(tree), depth);
        if let Some(&id) = self.memo.get(&key) {
            return id;
        }
        let children = if depth == 0 {
            Vec::new()
        } else {
            tree.children
                .iter()
                .map(|c| {
                    (
                        c.exit_port,
                        c.entry_port,
                        self.class_of(&c.child, depth - 1),
                    )
                })
                .collect()
        };
        let next = self.ids.len();
        let id = *self
            .ids
            .entry((tree.input, tree.degree, children))
            .or_insert(next);
        self.memo.insert(key, id);
        id
    }
}

/// A view sent through one port.
#[derive(Debug, Clone)]
pub struct ViewMessage {
    pub view: ViewTree,
    pub exit_port: u32,
    input_bits: usize,
    port_bits: usize,
}

impl Payload for ViewMessage {
    fn symbol_count(&self) -> usize {
        self.view.symbol_count() as usize + 1
    }

    fn bit_count(&self) -> usize {
        let nodes = self.view.node_count() as usize;
        nodes * (self.input_bits + self.port_bits)
            + (nodes - 1) * 2 * self.port_bits
            + self.port_bits
    }

    fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.view.fingerprint());
        h.write_u64(self.exit_port as u64);
        h.finish()
    }
}

/// Computes `F_k(x) = Σ x_i mod k` from views.
///
/// Parties exchange their current views for `depth` rounds (default
/// `2(n - 1)`). Each party then collects the distinct depth-`(n - 1)` views
/// occurring within `n - 1` hops of its own root, which covers every party.
/// View classes all have `n / c` members, so `Σ x = (n / c) Σ_class x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FkViews {
    pub k: u32,
    pub depth: Option<usize>,
}

impl FkViews {
    pub fn new(k: u32) -> Self {
        FkViews { k, depth: None }
    }

    pub fn with_depth(k: u32, depth: usize) -> Self {
        FkViews {
            k,
            depth: Some(depth),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FkState {
    input: u32,
    degree: u32,
    n: usize,
    view: ViewTree,
}

impl PartyProgram for FkViews {
    type Input = Vec<u32>;
    type State = FkState;
    type Msg = ViewMessage;
    type Output = u32;

    fn name(&self) -> String {
        format!("f{}-views", self.k)
    }

    fn round_bound(&self, global: &GlobalInfo) -> usize {
        self.depth.unwrap_or(2 * global.n.saturating_sub(1))
    }

    fn init(&self, input: &Vec<u32>, degree: usize, global: &GlobalInfo) -> FkState {
        let x = input[0] % self.k;
        FkState {
            input: x,
            degree: degree as u32,
            n: global.n,
            view: ViewNode::leaf(x, degree as u32),
        }
    }

    fn emit(&self, state: &mut FkState, _: usize) -> Outbox<ViewMessage> {
        let input_bits = bits_for_levels(self.k);
        let port_bits = bits_for_levels(state.n as u32);
        (1..=state.degree)
            .map(|p| {
                (
                    p as usize,
                    ViewMessage {
                        view: state.view.clone(),
                        exit_port: p,
                        input_bits,
                        port_bits,
                    },
                )
            })
            .collect()
    }

    fn absorb(&self, state: &mut FkState, _: usize, inbox: Inbox<ViewMessage>) {
        let children = inbox
            .into_iter()
            .enumerate()
            .filter_map(|(i, m)| {
                m.map(|m| ViewEdge {
                    exit_port: i as u32 + 1,
                    entry_port: m.exit_port,
                    child: m.view,
                })
            })
            .collect();
        state.view = ViewNode::branch(state.input, state.degree, children, state.view.depth() + 1);
    }

    fn output(&self, state: &FkState) -> Result<u32> {
        let class_depth = (state.n.saturating_sub(1) as u32).min(state.view.depth());
        let reach = state.view.depth() - class_depth;
        let mut table = ClassTable::default();
        let mut classes: HashMap<usize, u32> = HashMap::new();
        let mut visited: HashSet<(*const ViewNode, u32)> = HashSet::new();
        let mut stack = vec![(state.view.clone(), 0u32)];
        while let Some((tree, level)) = stack.pop() {
            if !visited.insert((Arc::as_ptr(&tree), level)) {
                continue;
            }
            let id = table.class_of(&tree, class_depth);
            classes.insert(id, tree.input);
            if level < reach {
                for c in &tree.children {
                    stack.push((c.child.clone(), level + 1));
                }
            }
        }
        let c = classes.len();
        if !state.n.is_multiple_of(c) {
            return Err(Error::ProgramFault {
                program: self.name(),
                msg: format!("{c} view classes do not divide n = {}", state.n),
            });
        }
        let class_sum: u64 = classes.values().map(|&x| x as u64).sum();
        Ok(((state.n / c) as u64 * class_sum % self.k as u64) as u32)
    }
}
