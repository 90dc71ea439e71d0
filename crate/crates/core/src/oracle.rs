//! Exact reference computations for tiny graphs: exhaustive path enumeration,
//! exact statistics and p-values, and brute-force automorphism search.
//!
//! Exact quantities are computed over infected-set bitmasks, so graphs are
//! limited to 64 nodes and, in practice, to a handful of infection steps.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::diffusion::Snapshot;
use crate::discrepancy::Loss;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, NodeSet};
use crate::pooling::Permutation;

/// Paths explored before [`enumerate_paths`] gives up.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// Every diffusion path of a given length from one source, with its exact
/// probability.
#[derive(Clone, Debug, PartialEq)]
pub struct PathDistribution {
    pub source: NodeId,
    pub steps: usize,
    pub paths: Vec<(Vec<NodeId>, f64)>,
}

impl PathDistribution {
    pub fn total_probability(&self) -> f64 {
        self.paths.iter().map(|(_, p)| p).sum()
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Depth-first expansion of all boundary choices from `source`.
pub fn enumerate_paths(g: &Graph, source: NodeId, steps: usize) -> Result<PathDistribution> {
    check_source(g, source)?;
    let mut out = Vec::new();
    let mut infected = vec![false; g.node_count()];
    let mut prefix = vec![source];
    infected[source as usize] = true;
    expand(g, steps, &mut prefix, &mut infected, 1.0, &mut out)?;
    Ok(PathDistribution {
        source,
        steps,
        paths: out,
    })
}

fn expand(
    g: &Graph,
    steps: usize,
    prefix: &mut Vec<NodeId>,
    infected: &mut [bool],
    prob: f64,
    out: &mut Vec<(Vec<NodeId>, f64)>,
) -> Result<()> {
    if prefix.len() == steps + 1 {
        if out.len() >= ENUMERATION_LIMIT {
            return Err(Error::EnumerationGuard(ENUMERATION_LIMIT));
        }
        out.push((prefix.clone(), prob));
        return Ok(());
    }
    // Count edges into each susceptible node once, in ascending node order.
    let mut picks: BTreeMap<NodeId, u32> = BTreeMap::new();
    for &a in prefix.iter() {
        for &b in g.neighbors(a) {
            if !infected[b as usize] {
                *picks.entry(b).or_insert(0) += 1;
            }
        }
    }
    let boundary: u32 = picks.values().sum();
    if boundary == 0 {
        return Err(Error::ComponentTooSmall {
            source_node: prefix[0],
            steps,
        });
    }
    for (v, c) in picks {
        infected[v as usize] = true;
        prefix.push(v);
        let r = expand(g, steps, prefix, infected, prob * f64::from(c) / f64::from(boundary), out);
        prefix.pop();
        infected[v as usize] = false;
        r?;
    }
    Ok(())
}

fn check_source(g: &Graph, source: NodeId) -> Result<()> {
    if g.node_count() > 64 {
        return Err(Error::InvalidParameter(format!(
            "exact computations support at most 64 nodes (got {})",
            g.node_count()
        )));
    }
    if !g.contains(source) {
        return Err(Error::NodeOutOfRange(source));
    }
    Ok(())
}

fn mask_of(nodes: impl IntoIterator<Item = NodeId>) -> u64 {
    nodes.into_iter().fold(0, |m, v| m | 1u64 << v)
}

fn nodes_of(mask: u64) -> NodeSet {
    (0..64u32).filter(|v| mask >> v & 1 == 1).collect()
}

/// Forward chain over infected sets. Calls `visit(order, node, mass)` for
/// every transition that infects `node` at 1-indexed `order`, and returns the
/// distribution of the final infected set.
fn propagate<F>(g: &Graph, source: NodeId, steps: usize, mut visit: F) -> Result<HashMap<u64, f64>>
where
    F: FnMut(usize, NodeId, f64),
{
    check_source(g, source)?;
    visit(1, source, 1.0);
    let mut layer: HashMap<u64, f64> = HashMap::from([(mask_of([source]), 1.0)]);
    for k in 1..=steps {
        let mut states: Vec<(u64, f64)> = layer.into_iter().collect();
        states.sort_unstable_by_key(|s| s.0);
        let mut next: HashMap<u64, f64> = HashMap::new();
        for (mask, p) in states {
            let mut picks: BTreeMap<NodeId, u32> = BTreeMap::new();
            for a in nodes_of(mask).iter() {
                for &b in g.neighbors(a) {
                    if mask >> b & 1 == 0 {
                        *picks.entry(b).or_insert(0) += 1;
                    }
                }
            }
            let boundary: u32 = picks.values().sum();
            if boundary == 0 {
                return Err(Error::ComponentTooSmall {
                    source_node: source,
                    steps,
                });
            }
            for (v, c) in picks {
                let q = p * f64::from(c) / f64::from(boundary);
                visit(k + 1, v, q);
                *next.entry(mask | 1u64 << v).or_insert(0.0) += q;
            }
        }
        layer = next;
    }
    Ok(layer)
}

/// `P[v][k]`: probability that `v` is infected at order `k` (index 0 unused).
pub fn hit_probabilities(g: &Graph, source: NodeId, steps: usize) -> Result<Vec<Vec<f64>>> {
    let mut p = vec![vec![0.0; steps + 2]; g.node_count()];
    propagate(g, source, steps, |k, v, q| p[v as usize][k] += q)?;
    Ok(p)
}

/// Distribution of the snapshot `ζ(Z)` for paths from `source`, sorted by set.
pub fn snapshot_distribution(g: &Graph, source: NodeId, steps: usize) -> Result<Vec<(NodeSet, f64)>> {
    let dist = propagate(g, source, steps, |_, _, _| {})?;
    let mut out: Vec<(NodeSet, f64)> = dist.into_iter().map(|(m, p)| (nodes_of(m), p)).collect();
    out.sort_by(|a, b| a.0.as_slice().cmp(b.0.as_slice()));
    Ok(out)
}

/// Exact statistics `T_s(·)` for one source and loss.
pub struct ExactStatistic {
    loss: Loss,
    /// `Σ_k P[v][k] h(k)` per node, for canonical losses.
    per_node: Vec<f64>,
    /// Snapshot probabilities, for the rumor-center loss.
    snapshots: HashMap<Vec<NodeId>, f64>,
    steps: usize,
}

impl ExactStatistic {
    pub fn new(g: &Graph, source: NodeId, steps: usize, loss: &Loss) -> Result<Self> {
        let (per_node, snapshots) = match loss {
            Loss::Canonical(h) => {
                let p = hit_probabilities(g, source, steps)?;
                let per_node = p
                    .iter()
                    .map(|row| (1..row.len()).map(|k| row[k] * h.eval(k)).sum())
                    .collect();
                (per_node, HashMap::new())
            }
            Loss::RumorCenter => {
                let snaps = snapshot_distribution(g, source, steps)?
                    .into_iter()
                    .map(|(s, p)| (s.into_vec(), p))
                    .collect();
                (Vec::new(), snaps)
            }
        };
        Ok(ExactStatistic {
            loss: loss.clone(),
            per_node,
            snapshots,
            steps,
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `T_s(y)` for a snapshot given as a node set.
    pub fn eval(&self, y: &NodeSet) -> f64 {
        match self.loss {
            Loss::Canonical(_) => -y
                .iter()
                .map(|v| self.per_node.get(v as usize).copied().unwrap_or(0.0))
                .sum::<f64>(),
            Loss::RumorCenter => 1.0 - self.snapshots.get(y.as_slice()).copied().unwrap_or(0.0),
        }
    }
}

/// `T_s(y) = Σ_z p(z|s) ℓ(y, z)`.
pub fn exact_statistic(g: &Graph, source: NodeId, y: &Snapshot, loss: &Loss) -> Result<f64> {
    Ok(ExactStatistic::new(g, source, y.steps(), loss)?.eval(y.nodes()))
}

/// Relative tolerance under which two statistics count as tied, both here
/// and in the Monte Carlo p-values.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `ψ_s(y) = P_s(T_s(ζ(Z)) ≥ T_s(y))`. Statistics within a relative
/// [`TIE_TOLERANCE`] of `T_s(y)` count as ties.
pub fn exact_pvalue(g: &Graph, source: NodeId, y: &Snapshot, loss: &Loss) -> Result<f64> {
    let stat = ExactStatistic::new(g, source, y.steps(), loss)?;
    let observed = stat.eval(y.nodes());
    let slack = TIE_TOLERANCE * (1.0 + observed.abs());
    let dist = snapshot_distribution(g, source, y.steps())?;
    Ok(dist
        .iter()
        .filter(|(s, _)| stat.eval(s) >= observed - slack)
        .map(|(_, p)| p)
        .sum::<f64>()
        .min(1.0))
}

/// Smallest `|T_s(y') - T_s(y)|` over sources `s ∈ y` and snapshots `y' ≠ y`
/// reachable from `s`. A large gap means Monte Carlo noise cannot flip the
/// ordering of any snapshot relative to `y`.
pub fn statistic_gap(g: &Graph, y: &Snapshot, loss: &Loss) -> Result<f64> {
    let mut gap = f64::INFINITY;
    for s in y.nodes().iter() {
        let stat = ExactStatistic::new(g, s, y.steps(), loss)?;
        let observed = stat.eval(y.nodes());
        for (other, _) in snapshot_distribution(g, s, y.steps())? {
            if &other != y.nodes() {
                gap = gap.min((stat.eval(&other) - observed).abs());
            }
        }
    }
    Ok(gap)
}

/// Every automorphism of `g`, found by trying all `n!` permutations.
pub fn automorphisms(g: &Graph) -> Vec<Vec<NodeId>> {
    let n = g.node_count();
    assert!(n <= 10, "brute-force automorphism search is limited to 10 nodes");
    let edges: Vec<(NodeId, NodeId)> = g.edges().collect();
    let mut out = Vec::new();
    let mut perm: Vec<NodeId> = (0..n as NodeId).collect();
    heap_permutations(&mut perm, n, &mut |p| {
        if edges.iter().all(|&(a, b)| g.has_edge(p[a as usize], p[b as usize])) {
            out.push(p.to_vec());
        }
    });
    out.sort();
    out
}

fn heap_permutations<F: FnMut(&[NodeId])>(perm: &mut [NodeId], k: usize, visit: &mut F) {
    if k <= 1 {
        visit(perm);
        return;
    }
    for i in 0..k - 1 {
        heap_permutations(perm, k - 1, visit);
        if k.is_multiple_of(2) {
            perm.swap(i, k - 1);
        } else {
            perm.swap(0, k - 1);
        }
    }
    heap_permutations(perm, k - 1, visit);
}

/// All first-order isomorphic pairs `u < v` by checking every automorphism
/// directly against the definition: `π(u) = v` and `π` fixes every node
/// outside `{u, v} ∪ N₁(u) ∪ N₁(v)`. Returns one witness per pair.
pub fn brute_force_isomorphic_pairs(g: &Graph) -> Vec<(NodeId, NodeId, Permutation)> {
    let mut found: BTreeMap<(NodeId, NodeId), Permutation> = BTreeMap::new();
    for p in automorphisms(g) {
        for u in g.nodes() {
            let v = p[u as usize];
            if v <= u || found.contains_key(&(u, v)) {
                continue;
            }
            let local = |x: NodeId| x == u || x == v || g.has_edge(x, u) || g.has_edge(x, v);
            if g.nodes().all(|x| local(x) || p[x as usize] == x) {
                let perm = Permutation::from_pairs(g.nodes().map(|x| (x, p[x as usize])))
                    .expect("automorphisms are bijections");
                found.insert((u, v), perm);
            }
        }
    }
    found.into_iter().map(|((u, v), p)| (u, v, p)).collect()
}

/// A small graph with a fixed snapshot, used for exact-versus-Monte-Carlo
/// comparisons.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusCase {
    pub name: String,
    pub nodes: usize,
    pub edges: Vec<(NodeId, NodeId)>,
    pub snapshot: Vec<NodeId>,
}

impl CorpusCase {
    fn new(name: &str, nodes: usize, edges: &[(NodeId, NodeId)], snapshot: &[NodeId]) -> Self {
        CorpusCase {
            name: name.to_string(),
            nodes,
            edges: edges.to_vec(),
            snapshot: snapshot.to_vec(),
        }
    }

    pub fn graph(&self) -> Graph {
        Graph::from_edges(self.nodes, self.edges.iter().copied()).expect("corpus graphs are valid")
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot::new(&self.graph(), self.snapshot.iter().copied().collect())
            .expect("corpus snapshots are connected")
    }
}

/// Ten small cases for exact-versus-Monte-Carlo checks.
///
/// Each snapshot was chosen so that, for every infected candidate, no other
/// reachable snapshot has an exact statistic within 0.03 of the observed
/// one under ADiT or `h ≡ 2`. Where two snapshots tie exactly, the Monte
/// Carlo indicator is a coin flip and `ψ̂` need not converge to `ψ`.
pub fn corpus() -> Vec<CorpusCase> {
    vec![
        CorpusCase::new("diamond_pendant", 5, &[(0, 1), (0, 2), (0, 3), (2, 4), (3, 4)], &[0, 2, 3, 4]),
        CorpusCase::new("spider6", 6, &[(0, 1), (0, 2), (1, 5), (2, 3), (3, 4)], &[0, 1, 2, 3, 5]),
        CorpusCase::new("caterpillar7", 7, &[(0, 1), (1, 2), (1, 6), (2, 3), (2, 4), (4, 5)], &[1, 2, 3, 4]),
        CorpusCase::new("kite5", 5, &[(0, 1), (0, 3), (1, 2), (1, 4), (2, 4)], &[0, 1, 2, 4]),
        CorpusCase::new(
            "double_star8",
            8,
            &[(0, 1), (0, 5), (1, 2), (1, 3), (1, 4), (5, 6), (5, 7)],
            &[0, 1, 2, 3, 4],
        ),
        CorpusCase::new(
            "tree8",
            8,
            &[(0, 1), (0, 4), (1, 2), (1, 6), (2, 3), (4, 5), (6, 7)],
            &[0, 1, 2, 4, 5, 6],
        ),
        CorpusCase::new(
            "hub8",
            8,
            &[(0, 1), (0, 3), (0, 4), (0, 6), (0, 7), (1, 2), (1, 5), (4, 6), (6, 7)],
            &[0, 1, 2, 5],
        ),
        CorpusCase::new(
            "fan6",
            6,
            &[(0, 1), (0, 2), (0, 3), (0, 4), (3, 5), (4, 5)],
            &[0, 1, 2, 3, 4],
        ),
        CorpusCase::new(
            "triangle_tail6",
            6,
            &[(0, 1), (1, 2), (1, 3), (1, 5), (2, 3), (3, 4)],
            &[0, 1, 3, 4, 5],
        ),
        CorpusCase::new(
            "dense7",
            7,
            &[(0, 1), (1, 2), (1, 4), (2, 3), (2, 4), (2, 6), (3, 4), (3, 5)],
            &[1, 2, 3, 4],
        ),
    ]
}

/// Exact p-value and statistic of one candidate under one loss.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenValue {
    pub loss: String,
    pub node: NodeId,
    pub statistic: f64,
    pub pvalue: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    #[serde(flatten)]
    pub case: CorpusCase,
    pub values: Vec<GoldenValue>,
}

/// Exact values for every infected candidate of every case, under each loss.
pub fn golden_values(cases: &[CorpusCase], losses: &[Loss]) -> Result<Vec<GoldenCase>> {
    cases
        .iter()
        .map(|case| {
            let g = case.graph();
            let y = case.snapshot();
            let mut values = Vec::new();
            for loss in losses {
                for s in y.nodes().iter() {
                    values.push(GoldenValue {
                        loss: loss.to_string(),
                        node: s,
                        statistic: exact_statistic(&g, s, &y, loss)?,
                        pvalue: exact_pvalue(&g, s, &y, loss)?,
                    });
                }
            }
            Ok(GoldenCase {
                case: case.clone(),
                values,
            })
        })
        .collect()
}
