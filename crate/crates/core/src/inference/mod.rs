//! Monte Carlo p-values, confidence sets and single-point estimators.
//!
//! For each candidate source `s` a [`SampleBank`] holds `2m` diffusion paths
//! from `s`. The second half estimates `T_s(·) = E_s ℓ(·, Z)` through its hit
//! counts; the snapshots of the first half are scored against that same
//! estimate, and the p-value is the fraction scoring at least as high as the
//! observed snapshot.

pub(crate) mod engine;
pub(crate) mod scoring;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::diffusion::{PathTrace, Sampler, Snapshot};
use crate::discrepancy::{fast_statistic, HitCountBuilder, HitCountMatrix, Loss};
use crate::error::{Error, Result};
use crate::graph::{bfs_distances, Graph, LabelMap, NodeId, UNREACHABLE};
use crate::pooling::{iso::permute_unchecked, Permutation, Pooling};
use crate::rng::{self, Rng};

pub use engine::{
    pvalue_table, run_in_pool, CandidateResult, InferenceSettings, PValueTable, PhaseTimings, Route,
};
use scoring::{point_statistic, weighted_pvalue, Scorer};

/// `2m` paths from one source: `z_1..z_m` are test draws, `z_{m+1}..z_{2m}`
/// expectation draws.
#[derive(Clone, Debug)]
pub struct SampleBank {
    source: NodeId,
    steps: usize,
    m: usize,
    traces: Vec<PathTrace>,
    /// Node set of each trace, sorted, in trace order.
    sorted: Vec<Vec<NodeId>>,
    hits: HitCountMatrix,
}

impl SampleBank {
    pub fn generate(g: &Graph, source: NodeId, steps: usize, m: usize, rng: &mut Rng) -> Result<Self> {
        Self::generate_with(&mut Sampler::new(g), source, steps, m, rng)
    }

    /// Draws the test half first, then the expectation half, from one stream.
    pub fn generate_with(
        sampler: &mut Sampler<'_>,
        source: NodeId,
        steps: usize,
        m: usize,
        rng: &mut Rng,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("m must be at least 1".into()));
        }
        let traces = (0..2 * m)
            .map(|_| sampler.simulate(source, steps, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_traces(traces)
    }

    /// Wraps `2m` traces sharing one source and length.
    pub fn from_traces(traces: Vec<PathTrace>) -> Result<Self> {
        if traces.is_empty() || !traces.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "a bank needs an even, nonzero number of traces (got {})",
                traces.len()
            )));
        }
        let source = traces[0].source();
        let steps = traces[0].steps();
        if traces.iter().any(|t| t.source() != source || t.steps() != steps) {
            return Err(Error::InvalidParameter(
                "bank traces must share source and length".into(),
            ));
        }
        let m = traces.len() / 2;
        let mut builder = HitCountBuilder::new();
        for z in &traces[m..] {
            builder.add_path(z.nodes(), 1.0);
        }
        let sorted = traces
            .iter()
            .map(|t| {
                let mut nodes = t.nodes().to_vec();
                nodes.sort_unstable();
                nodes
            })
            .collect();
        Ok(SampleBank {
            source,
            steps,
            m,
            hits: builder.finish(),
            traces,
            sorted,
        })
    }

    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn test_half(&self) -> &[PathTrace] {
        &self.traces[..self.m]
    }

    pub fn expectation_half(&self) -> &[PathTrace] {
        &self.traces[self.m..]
    }

    /// Hit counts of the expectation half.
    pub fn hits(&self) -> &HitCountMatrix {
        &self.hits
    }

    /// The bank relabeled by an automorphism: a bank for `perm(source)`.
    pub fn permuted(&self, perm: &Permutation) -> SampleBank {
        let traces = self
            .traces
            .iter()
            .map(|t| permute_unchecked(t, perm))
            .collect();
        Self::from_traces(traces).expect("relabeling preserves shape")
    }

    fn check_size(&self, y: &Snapshot) -> Result<()> {
        if y.len() != self.steps + 1 {
            return Err(Error::SizeMismatch {
                snapshot: y.len(),
                path: self.steps + 1,
            });
        }
        Ok(())
    }

    /// Sorted node sets of the test half, each with weight 1.
    pub(crate) fn test_sets(&self) -> impl Iterator<Item = (&[NodeId], f64)> + '_ {
        self.sorted[..self.m].iter().map(|s| (s.as_slice(), 1.0))
    }

    /// Sorted node sets of the expectation half, each with weight 1.
    pub(crate) fn expectation_sets(&self) -> impl Iterator<Item = (&[NodeId], f64)> + '_ {
        self.sorted[self.m..].iter().map(|s| (s.as_slice(), 1.0))
    }

    pub(crate) fn sorted_sets(&self) -> &[Vec<NodeId>] {
        &self.sorted
    }

    pub(crate) fn scorer(&self, loss: &Loss, include_source_term: bool) -> Scorer<'_> {
        Scorer::new(loss, &self.hits, self.expectation_sets(), self.m, include_source_term)
    }

    /// `T̂_s(y)` under `loss`, for a snapshot given as a sorted node list.
    pub(crate) fn point_statistic(&self, loss: &Loss, y_sorted: &[NodeId]) -> f64 {
        point_statistic(loss, &self.hits, self.expectation_sets(), self.m, y_sorted)
    }

    /// `(T̂_s(y), ψ̂_s(y))` for this bank's source.
    pub(crate) fn direct_scores(&self, y: &Snapshot, loss: &Loss, include_source_term: bool) -> Result<(f64, f64)> {
        self.check_size(y)?;
        let scorer = self.scorer(loss, include_source_term);
        Ok(weighted_pvalue(&scorer, y.nodes().as_slice(), self.test_sets(), self.m))
    }
}

/// `T̂_s(y)` averaged over the expectation half of `bank`.
pub fn estimate_statistic(y: &Snapshot, bank: &SampleBank, loss: &Loss) -> Result<f64> {
    bank.check_size(y)?;
    Ok(match loss {
        Loss::Canonical(h) => fast_statistic(y, bank.hits(), h),
        Loss::RumorCenter => bank.point_statistic(loss, y.nodes().as_slice()),
    })
}

/// `ψ̂_s(y)`: the fraction of test-half snapshots whose statistic is at least
/// the observed one.
pub fn estimate_pvalue(y: &Snapshot, bank: &SampleBank, loss: &Loss) -> Result<f64> {
    estimate_pvalue_with(y, bank, loss, true)
}

/// [`estimate_pvalue`] with the order-1 (source) term optionally left out of
/// every canonical statistic. The term is the same constant for all samples
/// of one source, so the p-value does not change.
pub fn estimate_pvalue_with(
    y: &Snapshot,
    bank: &SampleBank,
    loss: &Loss,
    include_source_term: bool,
) -> Result<f64> {
    bank.direct_scores(y, loss, include_source_term).map(|r| r.1)
}

/// p-value of one candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodePValue {
    pub node: NodeId,
    pub pvalue: f64,
}

/// Settings a confidence set was computed under.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub m: usize,
    pub loss: String,
    pub pooling: Pooling,
    pub seed: u64,
    pub graph_digest: String,
    /// Whether any importance-weighted p-value was clamped into `[0, 1]`.
    pub clamped: bool,
}

/// `{s : ψ̂_s > α}` with every candidate's p-value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceSet {
    pub alpha: f64,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub pvalues: Vec<NodePValue>,
    pub set: Vec<NodeId>,
}

impl ConfidenceSet {
    pub fn from_pvalues(alpha: f64, pvalues: Vec<NodePValue>, provenance: Provenance) -> Self {
        let set = pvalues
            .iter()
            .filter(|p| p.pvalue > alpha)
            .map(|p| p.node)
            .collect();
        ConfidenceSet {
            alpha,
            provenance,
            pvalues,
            set,
        }
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.set.contains(&v)
    }

    /// JSON object; node ids are replaced by labels when a map is given.
    pub fn to_json(&self, labels: Option<&LabelMap>) -> serde_json::Value {
        let node = |v: NodeId| match labels {
            Some(map) => serde_json::Value::from(map.label(v)),
            None => serde_json::Value::from(v),
        };
        serde_json::json!({
            "alpha": self.alpha,
            "m": self.provenance.m,
            "loss": self.provenance.loss,
            "pooling": self.provenance.pooling,
            "seed": self.provenance.seed,
            "graph_digest": self.provenance.graph_digest,
            "clamped": self.provenance.clamped,
            "pvalues": self.pvalues.iter()
                .map(|p| serde_json::json!({"node": node(p.node), "pvalue": p.pvalue}))
                .collect::<Vec<_>>(),
            "set": self.set.iter().map(|&v| node(v)).collect::<Vec<_>>(),
        })
    }

    /// CSV with header `node,pvalue,in_set`.
    pub fn write_csv<W: Write>(&self, mut out: W, labels: Option<&LabelMap>) -> Result<()> {
        writeln!(out, "node,pvalue,in_set")?;
        for p in &self.pvalues {
            let name = labels.map_or_else(|| p.node.to_string(), |m| m.label(p.node));
            writeln!(out, "{name},{},{}", p.pvalue, self.contains(p.node))?;
        }
        Ok(())
    }
}

/// Level `1 - α` confidence set for the source of `y`.
pub fn confidence_set(g: &Graph, y: &Snapshot, alpha: f64, settings: &InferenceSettings) -> Result<ConfidenceSet> {
    Ok(pvalue_table(g, y, settings)?.confidence_set(alpha))
}

/// Candidate minimizing `T̂_s(y)`, ties to the smallest id. Each candidate's
/// bank comes from the same stream the confidence-set engine uses, so the
/// estimates agree with an unpooled [`pvalue_table`] under the same seed.
pub fn single_point_estimate(g: &Graph, y: &Snapshot, m: usize, loss: &Loss, seed: u64) -> Result<NodeId> {
    let mut sampler = Sampler::new(g);
    let mut best: Option<(f64, NodeId)> = None;
    for s in y.nodes().iter() {
        let mut rng = rng::stream(seed, &[s as u64]);
        let bank = SampleBank::generate_with(&mut sampler, s, y.steps(), m, &mut rng)?;
        let stat = estimate_statistic(y, &bank, loss)?;
        if best.is_none_or(|(b, _)| stat < b) {
            best = Some((stat, s));
        }
    }
    best.map(|(_, s)| s).ok_or(Error::SnapshotNotConnected)
}

/// Infected node minimizing the summed hop distance to all infected nodes
/// within the infected subgraph; ties to the smallest id.
pub fn distance_center(g: &Graph, y: &Snapshot) -> NodeId {
    y.nodes()
        .iter()
        .map(|s| {
            let d = bfs_distances(g, s, Some(y.nodes()));
            let total: u64 = y
                .nodes()
                .iter()
                .map(|v| match d[v as usize] {
                    UNREACHABLE => u64::from(u32::MAX),
                    x => u64::from(x),
                })
                .sum();
            (total, s)
        })
        .min()
        .map(|(_, s)| s)
        .expect("snapshots are nonempty")
}

/// Smallest `m` with `2 √(α(1-α)/m) ≤ target`. The comparison allows a
/// relative slack of 1e-12 so that exact decimal inputs land where expected.
pub fn recommend_m(alpha: f64, target_error: f64) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0 && target_error > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "recommend_m needs 0 < alpha < 1 and a positive target (alpha={alpha}, target={target_error})"
        )));
    }
    let var = alpha * (1.0 - alpha);
    let ok = |m: usize| 2.0 * (var / m as f64).sqrt() <= target_error * (1.0 + 1e-12);
    let mut m = (4.0 * var / (target_error * target_error)).ceil().max(1.0) as usize;
    while m > 1 && ok(m - 1) {
        m -= 1;
    }
    while !ok(m) {
        m += 1;
    }
    Ok(m)
}
