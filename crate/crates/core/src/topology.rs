//! Port-numbered undirected graphs: the substrate of an anonymous network.
//!
//! Node indices `0..n` exist only on the harness side. Party programs see
//! nothing but their own degree and the port numbers `1..=deg(v)` of their
//! incident links.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A port number, `1..=deg(v)`.
pub type Port = usize;

/// Exhaustive automorphism search is refused above this size.
pub const MAX_AUTOMORPHISM_NODES: usize = 8;

/// The far side of one port.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Link {
    pub neighbor: usize,
    /// Index into [`Topology::edges`].
    pub edge: usize,
    /// Port number of this edge at `neighbor`.
    pub remote_port: Port,
}

/// One explicit port assignment: node `node` reaches edge `edge` through `port`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortAssignment {
    pub node: usize,
    pub edge: usize,
    pub port: Port,
}

/// A connected simple graph together with a port numbering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
    // links[v][p - 1] is what port p of v leads to
    links: Vec<Vec<Link>>,
}

impl Topology {
    /// Validates a graph and its port numbering. Without `ports`, each node
    /// numbers its incident edges by ascending neighbor index.
    pub fn build(
        n: usize,
        edges: &[(usize, usize)],
        ports: Option<&[PortAssignment]>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        let mut seen = BTreeSet::new();
        for &(u, v) in edges {
            for node in [u, v] {
                if node >= n {
                    return Err(Error::EndpointOutOfRange { node, n });
                }
            }
            if u == v {
                return Err(Error::SelfLoop(u));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::DuplicateEdge(u.min(v), u.max(v)));
            }
        }

        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (e, &(u, v)) in edges.iter().enumerate() {
            incident[u].push(e);
            incident[v].push(e);
        }
        let other = |e: usize, v: usize| {
            let (a, b) = edges[e];
            if a == v {
                b
            } else {
                a
            }
        };

        // port_of[v][i] = port of incident[v][i]
        let mut port_of: Vec<Vec<Port>> = incident.iter().map(|inc| vec![0; inc.len()]).collect();
        match ports {
            None => {
                for v in 0..n {
                    let mut order: Vec<usize> = (0..incident[v].len()).collect();
                    order.sort_by_key(|&i| other(incident[v][i], v));
                    for (rank, i) in order.into_iter().enumerate() {
                        port_of[v][i] = rank + 1;
                    }
                }
            }
            Some(table) => {
                for a in table {
                    if a.node >= n {
                        return Err(Error::InvalidPorts(format!("node {} out of range", a.node)));
                    }
                    let Some(i) = incident[a.node].iter().position(|&e| e == a.edge) else {
                        return Err(Error::InvalidPorts(format!(
                            "edge {} is not incident to node {}",
                            a.edge, a.node
                        )));
                    };
                    if port_of[a.node][i] != 0 {
                        return Err(Error::InvalidPorts(format!(
                            "edge {} assigned twice at node {}",
                            a.edge, a.node
                        )));
                    }
                    port_of[a.node][i] = a.port;
                }
                for v in 0..n {
                    let deg = incident[v].len();
                    let mut used = vec![false; deg + 1];
                    for &p in &port_of[v] {
                        if p == 0 {
                            return Err(Error::InvalidPorts(format!(
                                "node {v} has an unnumbered edge"
                            )));
                        }
                        if p > deg || used[p] {
                            return Err(Error::InvalidPorts(format!(
                                "ports at node {v} are not a bijection onto 1..={deg}"
                            )));
                        }
                        used[p] = true;
                    }
                }
            }
        }

        let mut links: Vec<Vec<Option<Link>>> =
            incident.iter().map(|inc| vec![None; inc.len()]).collect();
        for v in 0..n {
            for (i, &e) in incident[v].iter().enumerate() {
                let w = other(e, v);
                let j = incident[w]
                    .iter()
                    .position(|&f| f == e)
                    .expect("edge is incident to both ends");
                links[v][port_of[v][i] - 1] = Some(Link {
                    neighbor: w,
                    edge: e,
                    remote_port: port_of[w][j],
                });
            }
        }
        let topology = Topology {
            n,
            edges: edges.to_vec(),
            links: links
                .into_iter()
                .map(|row| {
                    row.into_iter()
                        .map(|l| l.expect("ports form a bijection"))
                        .collect()
                })
                .collect(),
        };
        if !topology.is_connected() {
            return Err(Error::Disconnected);
        }
        Ok(topology)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, v: usize) -> usize {
        self.links[v].len()
    }

    pub fn link(&self, v: usize, port: Port) -> Option<Link> {
        port.checked_sub(1)
            .and_then(|i| self.links[v].get(i))
            .copied()
    }

    pub fn links(&self, v: usize) -> &[Link] {
        &self.links[v]
    }

    /// Port at `v` of the edge with index `edge`.
    pub fn port_of_edge(&self, v: usize, edge: usize) -> Option<Port> {
        self.links[v]
            .iter()
            .position(|l| l.edge == edge)
            .map(|i| i + 1)
    }

    pub fn adjacent(&self, u: usize, v: usize) -> bool {
        self.links[u].iter().any(|l| l.neighbor == v)
    }

    pub fn adjacency_matrix(&self) -> Vec<Vec<bool>> {
        let mut a = vec![vec![false; self.n]; self.n];
        for &(u, v) in &self.edges {
            a[u][v] = true;
            a[v][u] = true;
        }
        a
    }

    /// Hop distances from `source`.
    pub fn distances_from(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            for l in &self.links[v] {
                if dist[l.neighbor] == usize::MAX {
                    dist[l.neighbor] = dist[v] + 1;
                    queue.push_back(l.neighbor);
                }
            }
        }
        dist
    }

    pub fn diameter(&self) -> usize {
        (0..self.n)
            .map(|v| self.distances_from(v).into_iter().max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    fn is_connected(&self) -> bool {
        self.distances_from(0).iter().all(|&d| d != usize::MAX)
    }

    /// All explicit port assignments, in edge order.
    pub fn port_table(&self) -> Vec<PortAssignment> {
        let mut table = Vec::with_capacity(2 * self.m());
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            for node in [u, v] {
                let port = self.port_of_edge(node, e).expect("edge incident");
                table.push(PortAssignment {
                    node,
                    edge: e,
                    port,
                });
            }
        }
        table
    }

    /// Parses the plain edge-list format: `n <count>`, then `e <u> <v>` and
    /// optional `p <v> <edge-index> <port>` lines. Blank lines and lines
    /// starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut n = None;
        let mut edges = Vec::new();
        let mut ports = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let tag = fields.next().unwrap_or_default();
            let nums: Vec<usize> = fields
                .map(|f| {
                    f.parse::<usize>().map_err(|_| Error::Parse {
                        line,
                        msg: format!("`{f}` is not a non-negative integer"),
                    })
                })
                .collect::<Result<_>>()?;
            let want = |count: usize| {
                if nums.len() == count {
                    Ok(())
                } else {
                    Err(Error::Parse {
                        line,
                        msg: format!("`{tag}` expects {count} integers, found {}", nums.len()),
                    })
                }
            };
            match tag {
                "n" => {
                    want(1)?;
                    if n.is_some() {
                        return Err(Error::Parse {
                            line,
                            msg: "duplicate `n` line".into(),
                        });
                    }
                    n = Some(nums[0]);
                }
                "e" => {
                    want(2)?;
                    edges.push((nums[0], nums[1]));
                }
                "p" => {
                    want(3)?;
                    ports.push(PortAssignment {
                        node: nums[0],
                        edge: nums[1],
                        port: nums[2],
                    });
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        msg: format!("unknown record `{other}`"),
                    });
                }
            }
        }
        let n = n.ok_or(Error::Parse {
            line: 0,
            msg: "missing `n` line".into(),
        })?;
        let ports = (!ports.is_empty()).then_some(ports.as_slice());
        Topology::build(n, &edges, ports)
    }

    /// Serializes to the edge-list format with an explicit ports section.
    pub fn to_file_string(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for &(u, v) in &self.edges {
            out.push_str(&format!("e {u} {v}\n"));
        }
        for a in self.port_table() {
            out.push_str(&format!("p {} {} {}\n", a.node, a.edge, a.port));
        }
        out
    }
}

/// Graph families used as test networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogGraph {
    Ring,
    Path,
    Complete,
    Star,
    Torus2d,
}

impl CatalogGraph {
    pub const ALL: [CatalogGraph; 5] = [
        CatalogGraph::Ring,
        CatalogGraph::Path,
        CatalogGraph::Complete,
        CatalogGraph::Star,
        CatalogGraph::Torus2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CatalogGraph::Ring => "ring",
            CatalogGraph::Path => "path",
            CatalogGraph::Complete => "complete",
            CatalogGraph::Star => "star",
            CatalogGraph::Torus2d => "torus2d",
        }
    }
}

impl fmt::Display for CatalogGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CatalogGraph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CatalogGraph::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::UnknownCatalog(s.to_string()))
    }
}

/// Builds a catalog graph with deterministic ports.
///
/// Rings number port 1 towards `v + 1` and port 2 towards `v - 1`, and
/// complete graphs send port `p` of `v` to `(v + p) mod n`, so rotations are
/// port-preserving automorphisms. `ring` with `n = 2` collapses to a single
/// edge. Paths and stars use the default numbering; tori use
/// `+x, -x, +y, -y` with wrap-around duplicates merged.
pub fn catalog(graph: CatalogGraph, n: usize) -> Result<Topology> {
    let mismatch = || Error::CatalogMismatch {
        name: graph.name().to_string(),
        n,
    };
    match graph {
        CatalogGraph::Ring => {
            if n < 2 {
                return Err(mismatch());
            }
            if n == 2 {
                return Topology::build(2, &[(0, 1)], None);
            }
            let edges: Vec<_> = (0..n).map(|v| (v, (v + 1) % n)).collect();
            let mut ports = Vec::new();
            for (e, &(u, v)) in edges.iter().enumerate() {
                ports.push(PortAssignment {
                    node: u,
                    edge: e,
                    port: 1,
                });
                ports.push(PortAssignment {
                    node: v,
                    edge: e,
                    port: 2,
                });
            }
            Topology::build(n, &edges, Some(&ports))
        }
        CatalogGraph::Path => {
            let edges: Vec<_> = (1..n).map(|v| (v - 1, v)).collect();
            Topology::build(n, &edges, None)
        }
        CatalogGraph::Complete => {
            let mut edges = Vec::new();
            let mut ports = Vec::new();
            for u in 0..n {
                for v in u + 1..n {
                    let e = edges.len();
                    edges.push((u, v));
                    ports.push(PortAssignment {
                        node: u,
                        edge: e,
                        port: v - u,
                    });
                    ports.push(PortAssignment {
                        node: v,
                        edge: e,
                        port: n + u - v,
                    });
                }
            }
            Topology::build(n, &edges, Some(&ports))
        }
        CatalogGraph::Star => {
            let edges: Vec<_> = (1..n).map(|v| (0, v)).collect();
            Topology::build(n, &edges, None)
        }
        CatalogGraph::Torus2d => {
            let rows = (2..=n)
                .filter(|a| a * a <= n && n.is_multiple_of(*a))
                .max()
                .ok_or_else(mismatch)?;
            let cols = n / rows;
            let id = |r: usize, c: usize| r * cols + c;
            let mut edges: Vec<(usize, usize)> = Vec::new();
            let mut edge_index = BTreeMap::new();
            let mut ports = Vec::new();
            for r in 0..rows {
                for c in 0..cols {
                    let v = id(r, c);
                    let steps = [
                        id(r, (c + 1) % cols),
                        id(r, (c + cols - 1) % cols),
                        id((r + 1) % rows, c),
                        id((r + rows - 1) % rows, c),
                    ];
                    let mut neighbors: Vec<usize> = Vec::new();
                    for w in steps {
                        if w != v && !neighbors.contains(&w) {
                            neighbors.push(w);
                        }
                    }
                    for (i, w) in neighbors.into_iter().enumerate() {
                        let key = (v.min(w), v.max(w));
                        let e = *edge_index.entry(key).or_insert_with(|| {
                            edges.push(key);
                            edges.len() - 1
                        });
                        ports.push(PortAssignment {
                            node: v,
                            edge: e,
                            port: i + 1,
                        });
                    }
                }
            }
            Topology::build(n, &edges, Some(&ports))
        }
    }
}

/// A node permutation that preserves adjacency and port labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Automorphism(Vec<usize>);

impl Automorphism {
    pub fn identity(n: usize) -> Self {
        Automorphism((0..n).collect())
    }

    /// Checks `perm` against `topology`.
    pub fn new(topology: &Topology, perm: Vec<usize>) -> Result<Self> {
        if is_port_automorphism(topology, &perm) {
            Ok(Automorphism(perm))
        } else {
            Err(Error::InvalidAutomorphism)
        }
    }

    /// Wraps a permutation without checking it against any graph; consumers
    /// such as [`crate::runtime::verify_anonymity`] re-validate.
    pub fn unchecked(perm: Vec<usize>) -> Self {
        Automorphism(perm)
    }

    pub fn apply(&self, v: usize) -> usize {
        self.0[v]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// `(self ∘ other)(v) = self(other(v))`.
    pub fn compose(&self, other: &Automorphism) -> Automorphism {
        Automorphism(other.0.iter().map(|&v| self.0[v]).collect())
    }

    pub fn inverse(&self) -> Automorphism {
        let mut inv = vec![0; self.0.len()];
        for (v, &w) in self.0.iter().enumerate() {
            inv[w] = v;
        }
        Automorphism(inv)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(v, &w)| v == w)
    }
}

fn is_port_automorphism(topology: &Topology, perm: &[usize]) -> bool {
    let n = topology.n();
    if perm.len() != n {
        return false;
    }
    let mut hit = vec![false; n];
    for &w in perm {
        if w >= n || hit[w] {
            return false;
        }
        hit[w] = true;
    }
    (0..n).all(|v| node_maps_consistently(topology, perm, v))
}

fn node_maps_consistently(topology: &Topology, perm: &[usize], v: usize) -> bool {
    let image = perm[v];
    topology.degree(v) == topology.degree(image)
        && topology
            .links(v)
            .iter()
            .zip(topology.links(image))
            .all(|(a, b)| b.neighbor == perm[a.neighbor] && b.remote_port == a.remote_port)
}

/// Every port-preserving automorphism, identity first. Brute force with
/// pruning, so limited to [`MAX_AUTOMORPHISM_NODES`] nodes.
pub fn automorphisms(topology: &Topology) -> Result<Vec<Automorphism>> {
    let n = topology.n();
    if n > MAX_AUTOMORPHISM_NODES {
        return Err(Error::TooLarge {
            n,
            max: MAX_AUTOMORPHISM_NODES,
        });
    }
    let mut found = Vec::new();
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    extend_partial(topology, 0, &mut perm, &mut used, &mut found);
    found.sort();
    Ok(found.into_iter().map(Automorphism).collect())
}

fn extend_partial(
    topology: &Topology,
    v: usize,
    perm: &mut Vec<usize>,
    used: &mut Vec<bool>,
    found: &mut Vec<Vec<usize>>,
) {
    let n = topology.n();
    if v == n {
        if (0..n).all(|u| node_maps_consistently(topology, perm, u)) {
            found.push(perm.clone());
        }
        return;
    }
    for image in 0..n {
        if used[image] || topology.degree(image) != topology.degree(v) {
            continue;
        }
        perm[v] = image;
        // every already-placed neighbor must land on the right port
        let consistent = topology.links(v).iter().enumerate().all(|(i, l)| {
            l.neighbor > v || {
                let target = topology.links(image)[i];
                target.neighbor == perm[l.neighbor] && target.remote_port == l.remote_port
            }
        });
        if consistent {
            used[image] = true;
            extend_partial(topology, v + 1, perm, used, found);
            used[image] = false;
        }
    }
    perm[v] = usize::MAX;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangle_and_ring() {
        let k3 = Topology::build(3, &[(0, 1), (1, 2), (2, 0)], None).unwrap();
        assert_eq!(k3.m(), 3);
        assert!((0..3).all(|v| k3.degree(v) == 2));
        let c4 = Topology::build(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], None).unwrap();
        assert_eq!(c4.m(), 4);
        assert_eq!(c4.diameter(), 2);
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            Topology::build(3, &[(0, 1)], None),
            Err(Error::Disconnected)
        ));
        assert!(matches!(
            Topology::build(2, &[(0, 0)], None),
            Err(Error::SelfLoop(0))
        ));
        assert!(matches!(
            Topology::build(2, &[(0, 1), (1, 0)], None),
            Err(Error::DuplicateEdge(0, 1))
        ));
        assert!(matches!(
            Topology::build(2, &[(0, 2)], None),
            Err(Error::EndpointOutOfRange { node: 2, n: 2 })
        ));
        let bad = [
            PortAssignment {
                node: 0,
                edge: 0,
                port: 1,
            },
            PortAssignment {
                node: 1,
                edge: 0,
                port: 2,
            },
        ];
        assert!(matches!(
            Topology::build(2, &[(0, 1)], Some(&bad)),
            Err(Error::InvalidPorts(_))
        ));
    }

    #[test]
    fn default_ports_sort_by_neighbor() {
        let g = Topology::build(3, &[(0, 2), (0, 1)], None).unwrap();
        assert_eq!(g.link(0, 1).unwrap().neighbor, 1);
        assert_eq!(g.link(0, 2).unwrap().neighbor, 2);
        assert_eq!(g.link(2, 1).unwrap().remote_port, 2);
    }

    #[test]
    fn catalog_shapes() {
        let c5 = catalog(CatalogGraph::Ring, 5).unwrap();
        assert_eq!(c5.m(), 5);
        assert_eq!(catalog(CatalogGraph::Complete, 4).unwrap().m(), 6);
        let star = catalog(CatalogGraph::Star, 4).unwrap();
        assert_eq!(star.degree(0), 3);
        assert!((1..4).all(|v| star.degree(v) == 1));
        let torus = catalog(CatalogGraph::Torus2d, 9).unwrap();
        assert!((0..9).all(|v| torus.degree(v) == 4));
        assert_eq!(torus.m(), 18);
        let small = catalog(CatalogGraph::Torus2d, 4).unwrap();
        assert!((0..4).all(|v| small.degree(v) == 2));
        assert!(catalog(CatalogGraph::Torus2d, 7).is_err());
        assert!(catalog(CatalogGraph::Ring, 1).is_err());
    }

    #[test]
    fn k2_has_both_permutations() {
        let k2 = catalog(CatalogGraph::Complete, 2).unwrap();
        let auts = automorphisms(&k2).unwrap();
        assert_eq!(auts.len(), 2);
        assert!(auts[0].is_identity());
    }

    #[test]
    fn ring_rotations_survive() {
        let c4 = catalog(CatalogGraph::Ring, 4).unwrap();
        let auts = automorphisms(&c4).unwrap();
        assert!(auts.contains(&Automorphism(vec![1, 2, 3, 0])));
        assert!(auts.iter().any(|a| a.is_identity()));
    }

    #[test]
    fn rejects_non_automorphism() {
        let c4 = catalog(CatalogGraph::Ring, 4).unwrap();
        assert!(Automorphism::new(&c4, vec![0, 2, 1, 3]).is_err());
        assert!(Automorphism::new(&c4, vec![0, 0, 1, 2]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let g = catalog(CatalogGraph::Ring, 5).unwrap();
        let back = Topology::parse(&g.to_file_string()).unwrap();
        assert_eq!(back, g);
        let plain = Topology::parse("n 3\n# comment\ne 0 1\ne 1 2\n").unwrap();
        assert_eq!(plain.m(), 2);
        assert!(matches!(
            Topology::parse("n 2\nx 0 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
