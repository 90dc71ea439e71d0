//! The per-candidate p-value table, with optional pooling.
//!
//! Work is split into independent tasks: one per directly sampled candidate
//! and one per isomorphism group. A group task draws a single bank for its
//! representative, reuses it (relabeled) for every member, and serves the
//! group's single-degree satellites by importance sampling from the bank of
//! their neighbor. Each task owns the stream `stream(seed, [node])` of the
//! node whose bank it draws, so the output never depends on scheduling.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ConfidenceSet, NodePValue, Provenance, SampleBank};
use crate::diffusion::{Sampler, Snapshot};
use crate::discrepancy::Loss;
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, NodeSet};
use crate::pooling::importance::importance_scores;
use crate::pooling::{find_isomorphic_pairs, isomorphic_groups, IsoGroup, Pooling};
use crate::rng;

/// Everything besides the graph and snapshot that fixes a p-value table.
#[derive(Clone, Debug, PartialEq)]
pub struct InferenceSettings {
    pub m: usize,
    pub loss: Loss,
    pub pooling: Pooling,
    pub seed: u64,
    /// Worker threads; 0 uses the ambient pool.
    pub workers: usize,
    /// Extra losses whose statistics `T̂_s(y)` are recorded per candidate
    /// (for single-point estimates).
    pub point_losses: Vec<Loss>,
}

impl InferenceSettings {
    pub fn new(m: usize, loss: Loss, pooling: Pooling, seed: u64) -> Self {
        InferenceSettings {
            m,
            loss,
            pooling,
            seed,
            workers: 0,
            point_losses: Vec::new(),
        }
    }
}

/// How a candidate's p-value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Route {
    Direct,
    /// Relabeled samples of the group representative `rep`.
    Permuted { rep: NodeId },
    /// Importance sampling from the bank of `neighbor`.
    Importance { neighbor: NodeId },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub node: NodeId,
    pub pvalue: f64,
    pub statistic: f64,
    pub route: Route,
    /// `T̂_s(y)` under each of the settings' point losses, in order.
    pub point_statistics: Vec<f64>,
    pub clamped: bool,
}

/// Time spent per phase, summed over tasks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub pooling: Duration,
    pub sampling: Duration,
    pub scoring: Duration,
    pub wall: Duration,
}

impl PhaseTimings {
    pub fn add(&mut self, other: &PhaseTimings) {
        self.pooling += other.pooling;
        self.sampling += other.sampling;
        self.scoring += other.scoring;
        self.wall += other.wall;
    }
}

/// p-values of every infected candidate, ascending by node.
#[derive(Clone, Debug)]
pub struct PValueTable {
    pub candidates: Vec<CandidateResult>,
    pub provenance: Provenance,
    pub timing: PhaseTimings,
}

impl PValueTable {
    pub fn confidence_set(&self, alpha: f64) -> ConfidenceSet {
        let pvalues = self
            .candidates
            .iter()
            .map(|c| NodePValue {
                node: c.node,
                pvalue: c.pvalue,
            })
            .collect();
        ConfidenceSet::from_pvalues(alpha, pvalues, self.provenance.clone())
    }

    pub fn pvalue(&self, v: NodeId) -> Option<f64> {
        self.candidates
            .binary_search_by_key(&v, |c| c.node)
            .ok()
            .map(|i| self.candidates[i].pvalue)
    }

    /// Candidate minimizing the `i`-th point statistic, ties to the smallest id.
    pub fn point_estimate(&self, i: usize) -> Option<NodeId> {
        let mut best: Option<(f64, NodeId)> = None;
        for c in &self.candidates {
            let t = *c.point_statistics.get(i)?;
            if best.is_none_or(|(b, _)| t < b) {
                best = Some((t, c.node));
            }
        }
        best.map(|(_, v)| v)
    }
}

/// Runs `f` on a pool of `workers` threads, or inline when `workers` is 0.
pub fn run_in_pool<T, F>(workers: usize, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// p-values for every infected node of `y`.
pub fn pvalue_table(g: &Graph, y: &Snapshot, settings: &InferenceSettings) -> Result<PValueTable> {
    run_in_pool(settings.workers, || table_in_current_pool(g, y, settings))?
}

enum Task {
    Direct(NodeId),
    Group(IsoGroup),
}

struct TaskOutput {
    results: Vec<CandidateResult>,
    sampling: Duration,
    scoring: Duration,
}

pub(crate) fn table_in_current_pool(g: &Graph, y: &Snapshot, settings: &InferenceSettings) -> Result<PValueTable> {
    if settings.m == 0 {
        return Err(Error::InvalidParameter("m must be at least 1".into()));
    }
    if !g.induces_connected(y.nodes()) || y.nodes().iter().any(|v| !g.contains(v)) {
        return Err(Error::SnapshotNotConnected);
    }
    let start = Instant::now();
    let tasks = plan(g, y, settings.pooling)?;
    let pooling_time = start.elapsed();

    let outputs: Vec<Result<TaskOutput>> = tasks
        .par_iter()
        .map(|task| run_task(g, y, settings, task))
        .collect();
    let mut timing = PhaseTimings {
        pooling: pooling_time,
        ..PhaseTimings::default()
    };
    let mut candidates = Vec::with_capacity(y.len());
    for out in outputs {
        let out = out?;
        timing.sampling += out.sampling;
        timing.scoring += out.scoring;
        candidates.extend(out.results);
    }
    candidates.sort_by_key(|c| c.node);
    timing.wall = start.elapsed();
    let provenance = Provenance {
        m: settings.m,
        loss: settings.loss.to_string(),
        pooling: settings.pooling,
        seed: settings.seed,
        graph_digest: g.digest(),
        clamped: candidates.iter().any(|c| c.clamped),
    };
    Ok(PValueTable {
        candidates,
        provenance,
        timing,
    })
}

fn plan(g: &Graph, y: &Snapshot, pooling: Pooling) -> Result<Vec<Task>> {
    // A lone infected node has no boundary history to pool over.
    if pooling == Pooling::None || y.steps() == 0 {
        return Ok(y.nodes().iter().map(Task::Direct).collect());
    }
    let pairs = if pooling.uses_isomorphism() {
        let core: NodeSet = y.nodes().iter().filter(|&v| g.degree(v) >= 2).collect();
        find_isomorphic_pairs(g, &core)
    } else {
        Vec::new()
    };
    let mut groups = isomorphic_groups(&pairs, y, g)?;
    if !pooling.uses_importance() {
        for grp in &mut groups {
            grp.satellites.clear();
        }
    }
    let mut covered = vec![false; g.node_count()];
    for grp in &groups {
        for v in grp.nodes().chain(grp.satellites.iter().map(|s| s.node)) {
            covered[v as usize] = true;
        }
    }
    let mut tasks: Vec<Task> = y
        .nodes()
        .iter()
        .filter(|&v| !covered[v as usize])
        .map(Task::Direct)
        .collect();
    tasks.extend(groups.into_iter().map(Task::Group));
    Ok(tasks)
}

/// Sampling time is everything a task spends outside scoring: drawing and
/// relabeling banks, and releasing them.
fn run_task(g: &Graph, y: &Snapshot, settings: &InferenceSettings, task: &Task) -> Result<TaskOutput> {
    let t0 = Instant::now();
    let mut scoring = Duration::ZERO;
    let results = task_results(g, y, settings, task, &mut scoring)?;
    Ok(TaskOutput {
        results,
        sampling: t0.elapsed().saturating_sub(scoring),
        scoring,
    })
}

fn task_results(
    g: &Graph,
    y: &Snapshot,
    settings: &InferenceSettings,
    task: &Task,
    scoring: &mut Duration,
) -> Result<Vec<CandidateResult>> {
    let mut sampler = Sampler::new(g);
    let root = match task {
        Task::Direct(v) => *v,
        Task::Group(grp) => grp.rep,
    };
    let mut rng = rng::stream(settings.seed, &[root as u64]);
    let bank = SampleBank::generate_with(&mut sampler, root, y.steps(), settings.m, &mut rng)?;

    let t = Instant::now();
    let mut results = vec![direct_result(y, &bank, settings, Route::Direct)?];
    *scoring += t.elapsed();
    let Task::Group(grp) = task else {
        return Ok(results);
    };

    let mut member_banks: Vec<(NodeId, SampleBank)> = Vec::with_capacity(grp.members.len());
    for member in &grp.members {
        let permuted = bank.permuted(&member.perm);
        let t = Instant::now();
        results.push(direct_result(y, &permuted, settings, Route::Permuted { rep: grp.rep })?);
        *scoring += t.elapsed();
        member_banks.push((member.node, permuted));
    }
    for sat in &grp.satellites {
        let t = Instant::now();
        let source_bank = if sat.neighbor == grp.rep {
            &bank
        } else {
            &member_banks
                .iter()
                .find(|(v, _)| *v == sat.neighbor)
                .expect("satellite neighbors belong to the group")
                .1
        };
        let (statistic, pvalue, clamped, point_statistics) =
            importance_scores(g, sat.node, source_bank, y, &settings.loss, &settings.point_losses)?;
        results.push(CandidateResult {
            node: sat.node,
            pvalue,
            statistic,
            route: Route::Importance {
                neighbor: sat.neighbor,
            },
            point_statistics,
            clamped,
        });
        *scoring += t.elapsed();
    }
    Ok(results)
}

fn direct_result(y: &Snapshot, bank: &SampleBank, settings: &InferenceSettings, route: Route) -> Result<CandidateResult> {
    let (statistic, pvalue) = bank.direct_scores(y, &settings.loss, true)?;
    let point_statistics = settings
        .point_losses
        .iter()
        .map(|l| bank.point_statistic(l, y.nodes().as_slice()))
        .collect();
    Ok(CandidateResult {
        node: bank.source(),
        pvalue,
        statistic,
        route,
        point_statistics,
        clamped: false,
    })
}
