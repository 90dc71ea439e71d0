//! Monte Carlo statistics over a batch of expectation samples, shared by the
//! direct, permuted and importance-weighted routes.

use std::collections::HashMap;

use crate::discrepancy::{HitCountMatrix, Loss};
use crate::graph::NodeId;
use crate::oracle::TIE_TOLERANCE;

/// Evaluates `T̂(y')` for arbitrary snapshots `y'` given as sorted node lists.
pub(crate) enum Scorer<'a> {
    /// `-(1/m) Σ_{v ∈ y'} ĥ(v)` with `ĥ(v) = Σ_k M[v][k] h(k)` precomputed.
    Canonical { totals: Vec<f64>, m: f64 },
    /// `(W - Σ_i w_i 1(ζ(z_i) = y')) / m` where `W` is the total weight.
    Rumor {
        matches: HashMap<&'a [NodeId], f64>,
        total: f64,
        m: f64,
    },
}

impl<'a> Scorer<'a> {
    /// `expectation_sets` lists the sorted node set and weight of each
    /// expectation sample; it is only consulted for the rumor-center loss.
    pub(crate) fn new<I>(loss: &Loss, hits: &HitCountMatrix, expectation_sets: I, m: usize, include_source_term: bool) -> Self
    where
        I: IntoIterator<Item = (&'a [NodeId], f64)>,
    {
        let m = m as f64;
        match loss {
            Loss::Canonical(h) => {
                let n = hits.nodes().last().map_or(0, |&v| v as usize + 1);
                let min_order = if include_source_term { 1 } else { 2 };
                Scorer::Canonical {
                    totals: hits.dense_totals(n, h, min_order),
                    m,
                }
            }
            Loss::RumorCenter => {
                let mut matches: HashMap<&[NodeId], f64> = HashMap::new();
                for (set, w) in expectation_sets {
                    if w != 0.0 {
                        *matches.entry(set).or_insert(0.0) += w;
                    }
                }
                Scorer::Rumor {
                    matches,
                    total: hits.total_weight(),
                    m,
                }
            }
        }
    }

    /// Statistic of a snapshot given as a sorted node list. Identical sets
    /// always produce bit-identical values.
    pub(crate) fn statistic(&self, sorted_nodes: &[NodeId]) -> f64 {
        match self {
            Scorer::Canonical { totals, m } => {
                let sum: f64 = sorted_nodes
                    .iter()
                    .map(|&v| totals.get(v as usize).copied().unwrap_or(0.0))
                    .sum();
                -sum / m
            }
            Scorer::Rumor { matches, total, m } => {
                (total - matches.get(sorted_nodes).copied().unwrap_or(0.0)) / m
            }
        }
    }
}

/// `T̂(y)` alone, without building a [`Scorer`].
pub(crate) fn point_statistic<'a, I>(loss: &Loss, hits: &HitCountMatrix, expectation_sets: I, m: usize, y_sorted: &[NodeId]) -> f64
where
    I: IntoIterator<Item = (&'a [NodeId], f64)>,
{
    match loss {
        Loss::Canonical(h) => -y_sorted.iter().map(|&v| hits.node_total(v, h)).sum::<f64>() / m as f64,
        Loss::RumorCenter => {
            let hit: f64 = expectation_sets
                .into_iter()
                .filter(|(set, _)| *set == y_sorted)
                .map(|(_, w)| w)
                .sum();
            (hits.total_weight() - hit) / m as f64
        }
    }
}

/// Returns `(T̂(y), (1/m) Σ_j w_j 1(T̂(ζ(z_j)) ≥ T̂(y)))` without clamping.
pub(crate) fn weighted_pvalue<'a, I>(scorer: &Scorer<'_>, y_sorted: &[NodeId], test_sets: I, m: usize) -> (f64, f64)
where
    I: IntoIterator<Item = (&'a [NodeId], f64)>,
{
    let observed = scorer.statistic(y_sorted);
    // Sets that tie exactly can still differ in the last bits, since each
    // sum runs over different terms; the tie rule has to see them as equal.
    let floor = observed - TIE_TOLERANCE * (1.0 + observed.abs());
    let mass: f64 = test_sets
        .into_iter()
        .filter(|(set, _)| scorer.statistic(set) >= floor)
        .map(|(_, w)| w)
        .sum();
    (observed, mass / m as f64)
}
