//! SI diffusion: path sampling with per-step boundary bookkeeping, snapshots,
//! and exact path probabilities.

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, NodeSet};
use crate::rng::Rng;

/// An infection sequence `[v0, v1, ..., vT]` with, for each infection
/// `k = 1..=T`, the number of boundary edges `n_k` just before it and the
/// number `c_k` of those edges that point at the chosen node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathTrace {
    nodes: Vec<NodeId>,
    boundary_counts: Vec<u32>,
    pick_counts: Vec<u32>,
}

impl PathTrace {
    /// Assembles a trace from recorded parts. Callers are responsible for the
    /// counts describing `nodes` on some graph.
    pub fn from_parts(nodes: Vec<NodeId>, boundary_counts: Vec<u32>, pick_counts: Vec<u32>) -> Self {
        assert!(!nodes.is_empty(), "trace needs a source");
        assert_eq!(boundary_counts.len() + 1, nodes.len());
        assert_eq!(pick_counts.len() + 1, nodes.len());
        PathTrace {
            nodes,
            boundary_counts,
            pick_counts,
        }
    }

    /// Replays `nodes` on `g` and records the bookkeeping.
    pub fn replay(g: &Graph, nodes: &[NodeId]) -> Result<Self> {
        let (boundary_counts, pick_counts) = replay_counts(g, nodes)?;
        Ok(PathTrace {
            nodes: nodes.to_vec(),
            boundary_counts,
            pick_counts,
        })
    }

    pub fn source(&self) -> NodeId {
        self.nodes[0]
    }

    /// Number of infections `T`.
    pub fn steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn boundary_counts(&self) -> &[u32] {
        &self.boundary_counts
    }

    pub fn pick_counts(&self) -> &[u32] {
        &self.pick_counts
    }

    /// `Σ log(c_k / n_k)` from the recorded bookkeeping.
    pub fn log_prob(&self) -> f64 {
        self.boundary_counts
            .iter()
            .zip(&self.pick_counts)
            .map(|(&n, &c)| (c as f64 / n as f64).ln())
            .sum()
    }

    /// 0-based position of `v` in the infection order.
    pub fn position(&self, v: NodeId) -> Option<usize> {
        self.nodes.iter().position(|&x| x == v)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot(self.nodes.iter().copied().collect())
    }

    /// CSV dump with columns `step,node,boundary_count,pick_count`. The source
    /// row (step 0) leaves the counts empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,node,boundary_count,pick_count")?;
        writeln!(out, "0,{},,", self.nodes[0])?;
        for k in 1..self.nodes.len() {
            writeln!(
                out,
                "{k},{},{},{}",
                self.nodes[k],
                self.boundary_counts[k - 1],
                self.pick_counts[k - 1]
            )?;
        }
        Ok(())
    }
}

/// Observed infected node set. Constructed through [`Snapshot::new`] it is
/// guaranteed to induce a connected subgraph.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Snapshot(NodeSet);

impl Snapshot {
    pub fn new(g: &Graph, infected: NodeSet) -> Result<Self> {
        if let Some(bad) = infected.iter().find(|&v| !g.contains(v)) {
            return Err(Error::NodeOutOfRange(bad));
        }
        if !g.induces_connected(&infected) {
            return Err(Error::SnapshotNotConnected);
        }
        Ok(Snapshot(infected))
    }

    pub fn nodes(&self) -> &NodeSet {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.0.contains(v)
    }

    /// Number of infections `T = |y| - 1` that produce a snapshot this size.
    pub fn steps(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for v in self.0.iter() {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }
}

/// The unordered node set of a path.
pub fn snapshot(path: &PathTrace) -> Snapshot {
    path.snapshot()
}

const NOT_INFECTED: u32 = 0;

/// Reusable SI sampler over one graph.
///
/// The boundary is a vector of half-edge ids `infected -> susceptible`;
/// `slot[e]` records where half-edge `e` sits in that vector so it can be
/// swap-removed in O(1) once its head gets infected. Drawing is a uniform
/// index into the vector.
pub struct Sampler<'g> {
    graph: &'g Graph,
    stamp: Vec<u32>,
    generation: u32,
    boundary: Vec<usize>,
    slot: Vec<u32>,
}

impl<'g> Sampler<'g> {
    pub fn new(graph: &'g Graph) -> Self {
        Sampler {
            graph,
            stamp: vec![NOT_INFECTED; graph.node_count()],
            generation: NOT_INFECTED,
            boundary: Vec::new(),
            slot: vec![0; 2 * graph.edge_count()],
        }
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    /// Samples `steps` SI infections starting at `source`.
    pub fn simulate(&mut self, source: NodeId, steps: usize, rng: &mut Rng) -> Result<PathTrace> {
        if !self.graph.contains(source) {
            return Err(Error::NodeOutOfRange(source));
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == NOT_INFECTED {
            self.stamp.fill(NOT_INFECTED);
            self.generation = 1;
        }
        self.boundary.clear();

        let mut nodes = Vec::with_capacity(steps + 1);
        let mut boundary_counts = Vec::with_capacity(steps);
        let mut pick_counts = Vec::with_capacity(steps);
        nodes.push(source);
        self.infect(source);
        for _ in 0..steps {
            let n = self.boundary.len();
            if n == 0 {
                return Err(Error::ComponentTooSmall {
                    source_node: source,
                    steps,
                });
            }
            let e = self.boundary[rng.gen_range(0..n as u32) as usize];
            let next = self.graph.target(e);
            boundary_counts.push(n as u32);
            pick_counts.push(self.infect(next));
            nodes.push(next);
        }
        Ok(PathTrace {
            nodes,
            boundary_counts,
            pick_counts,
        })
    }

    // Marks v infected, updates the boundary and returns how many boundary
    // edges pointed at v.
    fn infect(&mut self, v: NodeId) -> u32 {
        let g = self.graph;
        self.stamp[v as usize] = self.generation;
        let mut incoming = 0;
        for e in g.edge_range(v) {
            let w = g.target(e);
            if self.stamp[w as usize] == self.generation {
                incoming += 1;
                let r = g.reverse_edge(e);
                let at = self.slot[r] as usize;
                let last = self.boundary.pop().expect("edge is on the boundary");
                if last != r {
                    self.boundary[at] = last;
                    self.slot[last] = at as u32;
                }
            } else {
                self.slot[e] = self.boundary.len() as u32;
                self.boundary.push(e);
            }
        }
        incoming
    }
}

/// Samples one diffusion path with a fresh sampler.
pub fn simulate_path(g: &Graph, source: NodeId, steps: usize, rng: &mut Rng) -> Result<PathTrace> {
    Sampler::new(g).simulate(source, steps, rng)
}

/// Exact `log p(path | path[0])`, recomputed by replaying the infection and
/// counting boundary edges from scratch at every step.
pub fn path_log_prob(g: &Graph, nodes: &[NodeId]) -> Result<f64> {
    let (n, c) = replay_counts(g, nodes)?;
    Ok(n.iter()
        .zip(&c)
        .map(|(&n, &c)| (c as f64 / n as f64).ln())
        .sum())
}

fn replay_counts(g: &Graph, nodes: &[NodeId]) -> Result<(Vec<u32>, Vec<u32>)> {
    let Some(&source) = nodes.first() else {
        return Err(Error::InvalidParameter("empty path".into()));
    };
    let mut infected = vec![false; g.node_count()];
    if !g.contains(source) {
        return Err(Error::NodeOutOfRange(source));
    }
    infected[source as usize] = true;
    let mut boundary = Vec::with_capacity(nodes.len());
    let mut picks = Vec::with_capacity(nodes.len());
    for (position, &v) in nodes.iter().enumerate().skip(1) {
        if !g.contains(v) {
            return Err(Error::NodeOutOfRange(v));
        }
        let total: usize = g
            .nodes()
            .filter(|&u| infected[u as usize])
            .map(|u| {
                g.neighbors(u)
                    .iter()
                    .filter(|&&w| !infected[w as usize])
                    .count()
            })
            .sum();
        let into_v = g
            .neighbors(v)
            .iter()
            .filter(|&&w| infected[w as usize])
            .count();
        if infected[v as usize] || into_v == 0 {
            return Err(Error::InvalidPath { position, node: v });
        }
        boundary.push(total as u32);
        picks.push(into_v as u32);
        infected[v as usize] = true;
    }
    Ok((boundary, picks))
}
