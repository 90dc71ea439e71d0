//! First-order isomorphic pairs and the groups that share Monte Carlo
//! samples through them.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::Serialize;

use crate::diffusion::{PathTrace, Snapshot};
use crate::error::{Error, Result};
use crate::graph::{neighborhood, neighborhood_within, Graph, NodeId, NodeSet};

// Expansion budget for one pair's backtracking search. Pairs that exhaust it
// are reported as non-isomorphic, which only forgoes sample sharing.
const SEARCH_BUDGET: usize = 200_000;

/// Node permutation stored by its moved points; everything else is fixed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Permutation {
    moved: Vec<(NodeId, NodeId)>,
}

impl Permutation {
    pub fn identity() -> Self {
        Self::default()
    }

    /// Builds a permutation from `(from, to)` pairs, dropping fixed points.
    /// Returns `None` unless the pairs form a bijection on their support.
    pub fn from_pairs<I: IntoIterator<Item = (NodeId, NodeId)>>(pairs: I) -> Option<Self> {
        let mut moved: Vec<(NodeId, NodeId)> = pairs.into_iter().filter(|(a, b)| a != b).collect();
        moved.sort_unstable();
        if moved.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        let mut from: Vec<NodeId> = moved.iter().map(|p| p.0).collect();
        let mut to: Vec<NodeId> = moved.iter().map(|p| p.1).collect();
        from.sort_unstable();
        to.sort_unstable();
        (from == to).then_some(Permutation { moved })
    }

    #[inline]
    pub fn apply(&self, v: NodeId) -> NodeId {
        match self.moved.binary_search_by_key(&v, |p| p.0) {
            Ok(i) => self.moved[i].1,
            Err(_) => v,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.moved.is_empty()
    }

    /// Points that are not fixed, ascending.
    pub fn support(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.moved.iter().map(|p| p.0)
    }

    pub fn inverse(&self) -> Self {
        let mut moved: Vec<_> = self.moved.iter().map(|&(a, b)| (b, a)).collect();
        moved.sort_unstable();
        Permutation { moved }
    }

    /// `other ∘ self`: apply `self` first, then `other`.
    pub fn then(&self, other: &Permutation) -> Self {
        let support: NodeSet = self.support().chain(other.support()).collect();
        Permutation::from_pairs(support.iter().map(|v| (v, other.apply(self.apply(v)))))
            .expect("composition of bijections")
    }

    /// Whether the permutation preserves adjacency (`A = A_{π,π}`).
    pub fn is_automorphism(&self, g: &Graph) -> bool {
        self.moved.iter().all(|&(x, y)| {
            g.contains(x)
                && g.contains(y)
                && g.degree(x) == g.degree(y)
                && g.neighbors(x).iter().all(|&w| g.has_edge(y, self.apply(w)))
        })
    }

    /// Cycles of length at least two, each starting at its smallest element.
    pub fn cycles(&self) -> Vec<Vec<NodeId>> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for start in self.support() {
            if !seen.insert(start) {
                continue;
            }
            let mut cycle = vec![start];
            let mut x = self.apply(start);
            while x != start {
                seen.insert(x);
                cycle.push(x);
                x = self.apply(x);
            }
            out.push(cycle);
        }
        out
    }
}

/// An isomorphic pair `u < v` and a permutation with `π(u) = v`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsoPair {
    pub u: NodeId,
    pub v: NodeId,
    pub perm: Permutation,
}

/// All first-order isomorphic pairs among `candidates`.
///
/// Each pair is screened in order: `v` within four hops of `u`, equal degree,
/// equal multiset of neighbor degrees, and equal reduced two-hop sets
/// `N₂(x) − N₁(u) − N₁(v) − {u, v}`. Survivors go to a backtracking search
/// for the permutation.
pub fn find_isomorphic_pairs(g: &Graph, candidates: &NodeSet) -> Vec<IsoPair> {
    use rayon::prelude::*;
    let per_node: Vec<Vec<IsoPair>> = candidates
        .as_slice()
        .par_iter()
        .map(|&u| {
            neighborhood_within(g, u, 4)
                .iter()
                .filter(|&v| v > u && candidates.contains(v))
                .filter(|&v| passes_screens(g, u, v))
                .filter_map(|v| find_permutation(g, u, v).map(|perm| IsoPair { u, v, perm }))
                .collect()
        })
        .collect();
    per_node.into_iter().flatten().collect()
}

fn neighbor_degrees(g: &Graph, u: NodeId) -> Vec<usize> {
    let mut d: Vec<usize> = g.neighbors(u).iter().map(|&w| g.degree(w)).collect();
    d.sort_unstable();
    d
}

/// The necessary conditions checked before the exhaustive search.
pub fn passes_screens(g: &Graph, u: NodeId, v: NodeId) -> bool {
    if g.degree(u) != g.degree(v) || neighbor_degrees(g, u) != neighbor_degrees(g, v) {
        return false;
    }
    let n1u = neighborhood(g, u, 1);
    let n1v = neighborhood(g, v, 1);
    let removed = n1u.union(&n1v).union(&NodeSet::from([u, v]));
    let reduced = |x| neighborhood(g, x, 2).difference(&removed);
    reduced(u) == reduced(v)
}

/// Searches for an automorphism with `π(u) = v` that fixes every node outside
/// `{u, v} ∪ N₁(u) ∪ N₁(v)`.
pub fn find_permutation(g: &Graph, u: NodeId, v: NodeId) -> Option<Permutation> {
    if u == v {
        return Some(Permutation::identity());
    }
    let scope: NodeSet = [u, v]
        .into_iter()
        .chain(g.neighbors(u).iter().copied())
        .chain(g.neighbors(v).iter().copied())
        .collect();
    let idx = |x: NodeId| scope.as_slice().binary_search(&x).ok();
    // Neighbors outside the scope stay fixed, so x may only map to x' when
    // they agree on them.
    let outside: Vec<Vec<NodeId>> = scope
        .iter()
        .map(|x| g.neighbors(x).iter().copied().filter(|&w| idx(w).is_none()).collect())
        .collect();

    let by_degree = |a: &NodeId, b: &NodeId| g.degree(*a).cmp(&g.degree(*b)).then(a.cmp(b));
    let mut head: Vec<NodeId> = g.neighbors(u).to_vec();
    head.sort_by(by_degree);
    let mut head_images: Vec<NodeId> = g.neighbors(v).to_vec();
    head_images.sort_by(by_degree);
    let in_ball = |x: NodeId, c: NodeId, n: &[NodeId]| x == c || n.contains(&x);
    let mut tail: Vec<NodeId> = scope
        .iter()
        .filter(|&x| !in_ball(x, u, g.neighbors(u)))
        .collect();
    tail.sort_by(by_degree);
    let mut tail_images: Vec<NodeId> = scope
        .iter()
        .filter(|&x| !in_ball(x, v, g.neighbors(v)))
        .collect();
    tail_images.sort_by(by_degree);

    // Variables in assignment order with their admissible image pools.
    let mut vars: Vec<(NodeId, &[NodeId])> = Vec::with_capacity(scope.len());
    let first = [v];
    vars.push((u, &first));
    vars.extend(head.iter().map(|&x| (x, head_images.as_slice())));
    vars.extend(tail.iter().map(|&x| (x, tail_images.as_slice())));

    let mut search = Search {
        g,
        scope: &scope,
        outside: &outside,
        vars: &vars,
        image: vec![None; scope.len()],
        used: vec![false; scope.len()],
        budget: SEARCH_BUDGET,
    };
    if search.assign(0) {
        let pairs = vars
            .iter()
            .map(|&(x, _)| (x, search.image[idx(x).expect("in scope")].expect("assigned")));
        let perm = Permutation::from_pairs(pairs).expect("search yields a bijection");
        debug_assert!(perm.is_automorphism(g));
        Some(perm)
    } else {
        None
    }
}

struct Search<'a> {
    g: &'a Graph,
    scope: &'a NodeSet,
    outside: &'a [Vec<NodeId>],
    vars: &'a [(NodeId, &'a [NodeId])],
    image: Vec<Option<NodeId>>,
    used: Vec<bool>,
    budget: usize,
}

impl Search<'_> {
    fn idx(&self, x: NodeId) -> usize {
        self.scope.as_slice().binary_search(&x).expect("in scope")
    }

    fn assign(&mut self, depth: usize) -> bool {
        if depth == self.vars.len() {
            return true;
        }
        let (x, pool) = self.vars[depth];
        let xi = self.idx(x);
        for &cand in pool {
            if self.budget == 0 {
                return false;
            }
            self.budget -= 1;
            let ci = self.idx(cand);
            if self.used[ci] || !self.compatible(x, xi, cand, ci, depth) {
                continue;
            }
            self.used[ci] = true;
            self.image[xi] = Some(cand);
            if self.assign(depth + 1) {
                return true;
            }
            self.used[ci] = false;
            self.image[xi] = None;
        }
        false
    }

    fn compatible(&self, x: NodeId, xi: usize, cand: NodeId, ci: usize, depth: usize) -> bool {
        let g = self.g;
        if g.degree(x) != g.degree(cand) || self.outside[xi] != self.outside[ci] {
            return false;
        }
        self.vars[..depth].iter().all(|&(y, _)| {
            let py = self.image[self.idx(y)].expect("assigned earlier");
            g.has_edge(x, y) == g.has_edge(cand, py)
        })
    }
}

/// Relabels a path by `perm`, failing if the result is not a valid diffusion
/// path on `g`.
pub fn permute_path(g: &Graph, path: &PathTrace, perm: &Permutation) -> Result<PathTrace> {
    let out = permute_unchecked(path, perm);
    let nodes = out.nodes();
    for (position, &x) in nodes.iter().enumerate().skip(1) {
        let earlier = &nodes[..position];
        if earlier.contains(&x) || !g.neighbors(x).iter().any(|w| earlier.contains(w)) {
            return Err(Error::InvalidPath { position, node: x });
        }
    }
    Ok(out)
}

/// Relabels without validation. Boundary counts carry over unchanged because
/// `perm` is an automorphism.
pub(crate) fn permute_unchecked(path: &PathTrace, perm: &Permutation) -> PathTrace {
    PathTrace::from_parts(
        path.nodes().iter().map(|&x| perm.apply(x)).collect(),
        path.boundary_counts().to_vec(),
        path.pick_counts().to_vec(),
    )
}

/// A member `node` reached from the group representative by `perm`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupMember {
    pub node: NodeId,
    pub perm: Permutation,
}

/// A single-degree infected node and its (infected) neighbor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Satellite {
    pub node: NodeId,
    pub neighbor: NodeId,
}

/// Infected nodes of degree at least two that share one sample bank, plus the
/// single-degree nodes hanging off them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IsoGroup {
    pub rep: NodeId,
    /// Members other than the representative, ascending.
    pub members: Vec<GroupMember>,
    pub satellites: Vec<Satellite>,
}

impl IsoGroup {
    /// The representative followed by the other members.
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::once(self.rep).chain(self.members.iter().map(|m| m.node))
    }
}

/// Groups the infected degree-≥2 nodes by the isomorphism pairs and attaches
/// infected single-degree nodes to the group of their neighbor.
///
/// The representative is the smallest id. Member permutations are composed
/// along a breadth-first walk over the pairs from the representative; a
/// composition of automorphisms is again one, and maps the representative to
/// the member. Single-degree nodes whose neighbor is also single-degree are
/// left out; callers sample those directly.
pub fn isomorphic_groups(pairs: &[IsoPair], y: &Snapshot, g: &Graph) -> Result<Vec<IsoGroup>> {
    let core: Vec<NodeId> = y.nodes().iter().filter(|&v| g.degree(v) >= 2).collect();
    let mut adjacency: HashMap<NodeId, Vec<(NodeId, Permutation)>> = HashMap::new();
    let mut uf = UnionFind::new(&core);
    for p in pairs {
        if !(uf.contains(p.u) && uf.contains(p.v)) {
            continue;
        }
        uf.union(p.u, p.v);
        adjacency.entry(p.u).or_default().push((p.v, p.perm.clone()));
        adjacency.entry(p.v).or_default().push((p.u, p.perm.inverse()));
    }
    for list in adjacency.values_mut() {
        list.sort_by_key(|e| e.0);
    }

    let mut by_root: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &v in &core {
        by_root.entry(uf.find(v)).or_default().push(v);
    }
    let mut groups: Vec<IsoGroup> = Vec::with_capacity(by_root.len());
    for nodes in by_root.into_values() {
        let rep = *nodes.iter().min().expect("nonempty class");
        let mut perms: BTreeMap<NodeId, Permutation> = BTreeMap::from([(rep, Permutation::identity())]);
        let mut queue = VecDeque::from([rep]);
        while let Some(a) = queue.pop_front() {
            let to_a = perms[&a].clone();
            for (b, step) in adjacency.get(&a).into_iter().flatten() {
                if !perms.contains_key(b) {
                    perms.insert(*b, to_a.then(step));
                    queue.push_back(*b);
                }
            }
        }
        groups.push(IsoGroup {
            rep,
            members: perms
                .into_iter()
                .filter(|(node, _)| *node != rep)
                .map(|(node, perm)| GroupMember { node, perm })
                .collect(),
            satellites: Vec::new(),
        });
    }
    groups.sort_by_key(|grp| grp.rep);
    let group_of: HashMap<NodeId, usize> = groups
        .iter()
        .enumerate()
        .flat_map(|(i, grp)| grp.nodes().map(move |v| (v, i)))
        .collect();

    for u in y.nodes().iter().filter(|&v| g.degree(v) == 1) {
        let neighbor = g.neighbors(u)[0];
        if !y.contains(neighbor) {
            return Err(Error::SnapshotNotConnected);
        }
        if let Some(&i) = group_of.get(&neighbor) {
            groups[i].satellites.push(Satellite { node: u, neighbor });
        }
    }
    Ok(groups)
}

struct UnionFind {
    index: HashMap<NodeId, usize>,
    nodes: Vec<NodeId>,
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(nodes: &[NodeId]) -> Self {
        UnionFind {
            index: nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect(),
            nodes: nodes.to_vec(),
            parent: (0..nodes.len()).collect(),
        }
    }

    fn contains(&self, v: NodeId) -> bool {
        self.index.contains_key(&v)
    }

    fn root(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    fn find(&mut self, v: NodeId) -> NodeId {
        let i = self.root(self.index[&v]);
        self.nodes[i]
    }

    fn union(&mut self, a: NodeId, b: NodeId) {
        let ra = self.root(self.index[&a]);
        let rb = self.root(self.index[&b]);
        if ra != rb {
            // Keep the smaller node id as root for stable output.
            let (lo, hi) = if self.nodes[ra] < self.nodes[rb] { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}
