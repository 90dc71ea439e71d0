//! Undirected simple graphs in compressed adjacency form, plus the
//! neighborhood, distance and centrality utilities the inference code needs.

mod centrality;
pub mod generate;
mod io;

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use centrality::{eigencentrality, median_eigencentral_node};
pub use io::{load_edge_list, parse_node_list, read_edge_list, write_edge_list, LabelMap};

/// Dense node identifier in `0..n`.
pub type NodeId = u32;

/// Distance reported by [`bfs_distances`] for nodes that cannot be reached.
pub const UNREACHABLE: u32 = u32::MAX;

/// Immutable undirected simple graph.
///
/// Adjacency is stored as one sorted neighbor slice per node. Every directed
/// half-edge `u -> v` has a stable index in `0..2|E|`, and `reverse_edge`
/// maps it to the index of `v -> u`; the diffusion sampler uses these
/// indices to keep its boundary set addressable.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
    reverse: Vec<usize>,
}

impl Graph {
    /// Builds a graph over `0..node_count`. Duplicate edges are collapsed;
    /// self-loops and out-of-range endpoints are rejected.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if node_count > NodeId::MAX as usize {
            return Err(Error::SizeOverflow);
        }
        let mut pairs = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::SelfLoop { line: 0, node: u });
            }
            for x in [u, v] {
                if x as usize >= node_count {
                    return Err(Error::NodeOutOfRange(x));
                }
            }
            pairs.push((u, v));
            pairs.push((v, u));
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut offsets = vec![0usize; node_count + 1];
        for &(u, _) in &pairs {
            offsets[u as usize + 1] += 1;
        }
        for i in 0..node_count {
            offsets[i + 1] += offsets[i];
        }
        let targets: Vec<NodeId> = pairs.iter().map(|&(_, v)| v).collect();

        let mut graph = Graph {
            offsets,
            targets,
            reverse: Vec::new(),
        };
        let reverse = (0..graph.targets.len())
            .map(|e| {
                let u = graph.source_of(e);
                let v = graph.targets[e];
                let range = graph.edge_range(v);
                let pos = graph.targets[range.clone()]
                    .binary_search(&u)
                    .expect("adjacency is symmetric");
                range.start + pos
            })
            .collect();
        graph.reverse = reverse;
        Ok(graph)
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count() as NodeId
    }

    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.targets[self.edge_range(v)]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        let v = v as usize;
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        (v as usize) < self.node_count()
    }

    /// Half-edge indices leaving `v`.
    pub fn edge_range(&self, v: NodeId) -> std::ops::Range<usize> {
        self.offsets[v as usize]..self.offsets[v as usize + 1]
    }

    /// Head of half-edge `e`.
    #[inline]
    pub fn target(&self, e: usize) -> NodeId {
        self.targets[e]
    }

    /// Index of the half-edge pointing the other way.
    #[inline]
    pub fn reverse_edge(&self, e: usize) -> usize {
        self.reverse[e]
    }

    fn source_of(&self, e: usize) -> NodeId {
        // partition_point returns the first offset strictly greater than e.
        (self.offsets.partition_point(|&o| o <= e) - 1) as NodeId
    }

    /// Undirected edges with `u < v`, in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes().flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn is_connected(&self) -> bool {
        if self.node_count() == 0 {
            return true;
        }
        bfs_distances(self, 0, None)
            .iter()
            .all(|&d| d != UNREACHABLE)
    }

    /// Whether `set` induces a connected subgraph. The empty set counts as
    /// disconnected.
    pub fn induces_connected(&self, set: &NodeSet) -> bool {
        match set.first() {
            None => false,
            Some(start) => bfs_distances(self, start, Some(set))
                .iter()
                .filter(|&&d| d != UNREACHABLE)
                .count()
                == set.len(),
        }
    }

    /// Checks every structural invariant. Used by tests over generator output.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for u in self.nodes() {
            let adj = self.neighbors(u);
            if adj.windows(2).any(|w| w[0] >= w[1]) {
                return Err(format!("adjacency of {u} not strictly sorted"));
            }
            for &v in adj {
                if v == u {
                    return Err(format!("self-loop at {u}"));
                }
                if !self.contains(v) || !self.has_edge(v, u) {
                    return Err(format!("edge {u}-{v} not symmetric"));
                }
            }
            if self.degree(u) != adj.len() {
                return Err(format!("degree mismatch at {u}"));
            }
        }
        for e in 0..self.targets.len() {
            let r = self.reverse[e];
            if self.reverse[r] != e || self.targets[r] != self.source_of(e) {
                return Err(format!("reverse index broken at half-edge {e}"));
            }
        }
        Ok(())
    }

    /// Stable 64-bit FNV-1a digest of the edge structure, hex encoded.
    pub fn digest(&self) -> String {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: u64| {
            for b in x.to_le_bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x0100_0000_01b3);
            }
        };
        feed(self.node_count() as u64);
        for (u, v) in self.edges() {
            feed(((u as u64) << 32) | v as u64);
        }
        format!("{hash:016x}")
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("nodes", &self.node_count())
            .field("edges", &self.edge_count())
            .finish()
    }
}

/// Sorted, deduplicated set of node ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeSet(Vec<NodeId>);

impl NodeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.0
    }

    pub fn first(&self) -> Option<NodeId> {
        self.0.first().copied()
    }

    pub fn into_vec(self) -> Vec<NodeId> {
        self.0
    }

    pub fn union(&self, other: &NodeSet) -> NodeSet {
        self.iter().chain(other.iter()).collect()
    }

    pub fn difference(&self, other: &NodeSet) -> NodeSet {
        NodeSet(self.iter().filter(|&v| !other.contains(v)).collect())
    }
}

impl FromIterator<NodeId> for NodeSet {
    fn from_iter<I: IntoIterator<Item = NodeId>>(iter: I) -> Self {
        let mut nodes: Vec<NodeId> = iter.into_iter().collect();
        nodes.sort_unstable();
        nodes.dedup();
        NodeSet(nodes)
    }
}

impl From<Vec<NodeId>> for NodeSet {
    fn from(nodes: Vec<NodeId>) -> Self {
        nodes.into_iter().collect()
    }
}

impl<const N: usize> From<[NodeId; N]> for NodeSet {
    fn from(nodes: [NodeId; N]) -> Self {
        nodes.into_iter().collect()
    }
}

/// Hop distances from `source`, optionally restricted to the subgraph induced
/// by `restrict`. Nodes that are not reached get [`UNREACHABLE`].
pub fn bfs_distances(g: &Graph, source: NodeId, restrict: Option<&NodeSet>) -> Vec<u32> {
    let mut dist = vec![UNREACHABLE; g.node_count()];
    let allowed = |v: NodeId| restrict.is_none_or(|set| set.contains(v));
    if !allowed(source) {
        return dist;
    }
    dist[source as usize] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let next = dist[u as usize] + 1;
        for &v in g.neighbors(u) {
            if dist[v as usize] == UNREACHABLE && allowed(v) {
                dist[v as usize] = next;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Nodes exactly `k` hops from `v`. `k = 0` yields `{v}`.
pub fn neighborhood(g: &Graph, v: NodeId, k: u32) -> NodeSet {
    layers(g, v, k).into_iter().nth(k as usize).unwrap_or_default()
}

/// Nodes between 1 and `k` hops from `v`.
pub fn neighborhood_within(g: &Graph, v: NodeId, k: u32) -> NodeSet {
    layers(g, v, k)
        .into_iter()
        .skip(1)
        .flat_map(NodeSet::into_vec)
        .collect()
}

// BFS layers 0..=k around v, stopping early once a layer is empty.
fn layers(g: &Graph, v: NodeId, k: u32) -> Vec<NodeSet> {
    let mut seen = std::collections::HashSet::from([v]);
    let mut out = vec![NodeSet::from([v])];
    for _ in 0..k {
        let frontier = out.last().expect("nonempty");
        let next: NodeSet = frontier
            .iter()
            .flat_map(|u| g.neighbors(u).iter().copied())
            .filter(|w| !seen.contains(w))
            .collect();
        if next.is_empty() {
            break;
        }
        seen.extend(next.iter());
        out.push(next);
    }
    out
}
