//! Discrepancy functions and the hit-count machinery behind O(mT) statistic
//! evaluation.
//!
//! Infection orders are 1-indexed: the source has order 1 and the k-th
//! infection has order k + 1. Under this convention inverse-time weights are
//! finite everywhere, and the source term is the same constant for every
//! sample drawn from a given candidate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffusion::{PathTrace, Snapshot};
use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Non-increasing, nonnegative weight `h` over infection orders `1, 2, ...`.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightFunction {
    /// `h(t) = 1 / t`.
    InverseTime,
    Constant(f64),
    /// `h(t) = table[t - 1]`, and 0 past the end of the table.
    Table(Vec<f64>),
}

impl WeightFunction {
    pub fn constant(value: f64) -> Result<Self> {
        if value.is_finite() && value >= 0.0 {
            Ok(WeightFunction::Constant(value))
        } else {
            Err(Error::NonMonotoneWeights)
        }
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        let nonneg = values.iter().all(|v| v.is_finite() && *v >= 0.0);
        let monotone = values.windows(2).all(|w| w[1] <= w[0]);
        if nonneg && monotone {
            Ok(WeightFunction::Table(values))
        } else {
            Err(Error::NonMonotoneWeights)
        }
    }

    /// Weight at a 1-indexed infection order.
    #[inline]
    pub fn eval(&self, order: usize) -> f64 {
        debug_assert!(order >= 1);
        match self {
            WeightFunction::InverseTime => 1.0 / order as f64,
            WeightFunction::Constant(c) => *c,
            WeightFunction::Table(t) => t.get(order - 1).copied().unwrap_or(0.0),
        }
    }
}

/// Test statistic family selectable from the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum Loss {
    /// Canonical negative weighted overlap with weight `h`.
    Canonical(WeightFunction),
    /// `1 - 1(snapshot(z) == y)`.
    RumorCenter,
}

impl Loss {
    /// Inverse-time weights (ADiT).
    pub fn adit() -> Self {
        Loss::Canonical(WeightFunction::InverseTime)
    }

    /// Squared Euclidean distance up to an additive constant: `h ≡ 2`.
    pub fn euclidean() -> Self {
        Loss::Canonical(WeightFunction::Constant(2.0))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Loss::Canonical(WeightFunction::InverseTime) => "adit",
            Loss::Canonical(WeightFunction::Constant(c)) if *c == 2.0 => "euclidean",
            Loss::Canonical(_) => "custom",
            Loss::RumorCenter => "rc",
        }
    }

    /// `ℓ(y, z)` evaluated directly on one path.
    pub fn evaluate(&self, y: &Snapshot, path: &PathTrace) -> f64 {
        match self {
            Loss::Canonical(h) => canonical_discrepancy(y, path, h),
            Loss::RumorCenter => rc_discrepancy(y, path),
        }
    }
}

impl From<WeightFunction> for Loss {
    fn from(h: WeightFunction) -> Self {
        Loss::Canonical(h)
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adit" => Ok(Loss::adit()),
            "euclidean" => Ok(Loss::euclidean()),
            "rc" => Ok(Loss::RumorCenter),
            other => Err(Error::InvalidParameter(format!(
                "unknown loss {other:?} (expected adit, euclidean or rc)"
            ))),
        }
    }
}

/// `-Σ_{v ∈ y} 1(v ∈ z) h(t_z(v))`.
pub fn canonical_discrepancy(y: &Snapshot, path: &PathTrace, h: &WeightFunction) -> f64 {
    -path
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, &v)| y.contains(v))
        .map(|(pos, _)| h.eval(pos + 1))
        .sum::<f64>()
}

/// 0 when the path's node set equals `y`, else 1.
pub fn rc_discrepancy(y: &Snapshot, path: &PathTrace) -> f64 {
    let same = path.nodes().len() == y.len() && path.nodes().iter().all(|&v| y.contains(v));
    if same {
        0.0
    } else {
        1.0
    }
}

/// Sparse per-(node, order) sums over a batch of paths: `M[v][k]` is the
/// number (or total weight) of paths in which `v` has order `k`.
///
/// Stored row-compressed by node: `nodes` is sorted, and the entries of
/// `nodes[i]` are `orders/weights[offsets[i]..offsets[i + 1]]` with orders
/// ascending.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitCountMatrix {
    nodes: Vec<NodeId>,
    offsets: Vec<usize>,
    orders: Vec<u32>,
    weights: Vec<f64>,
    samples: usize,
    total_weight: f64,
    weighted: bool,
}

/// Accumulates `(node, order, weight)` hits and compresses them into a
/// [`HitCountMatrix`].
#[derive(Debug, Default)]
pub struct HitCountBuilder {
    hits: Vec<(NodeId, u32, f64)>,
    samples: usize,
    total_weight: f64,
    weighted: bool,
}

impl HitCountBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn weighted() -> Self {
        HitCountBuilder {
            weighted: true,
            ..Self::default()
        }
    }

    /// Counts one sample. `ordered_nodes[i]` has order `i + 1`. Zero-weight
    /// samples still count toward the sample total.
    pub fn add_path(&mut self, ordered_nodes: &[NodeId], weight: f64) {
        self.samples += 1;
        self.total_weight += weight;
        if weight != 0.0 {
            self.hits.extend(
                ordered_nodes
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (v, i as u32 + 1, weight)),
            );
        }
    }

    /// Counts one sample whose nodes are listed with explicit orders.
    pub fn add_hits<I>(&mut self, hits: I, weight: f64)
    where
        I: IntoIterator<Item = (NodeId, u32)>,
    {
        self.samples += 1;
        self.total_weight += weight;
        if weight != 0.0 {
            self.hits
                .extend(hits.into_iter().map(|(v, k)| (v, k, weight)));
        }
    }

    pub fn finish(self) -> HitCountMatrix {
        let (samples, total_weight, weighted) = (self.samples, self.total_weight, self.weighted);
        let entries = if self.fits_dense() {
            self.merged_dense()
        } else {
            self.merged_sorted()
        };
        let mut m = HitCountMatrix {
            nodes: Vec::new(),
            offsets: vec![0],
            orders: Vec::with_capacity(entries.len()),
            weights: Vec::with_capacity(entries.len()),
            samples,
            total_weight,
            weighted,
        };
        for (v, k, w) in entries {
            if m.nodes.last() != Some(&v) {
                if !m.nodes.is_empty() {
                    m.offsets.push(m.orders.len());
                }
                m.nodes.push(v);
            }
            m.orders.push(k);
            m.weights.push(w);
        }
        if !m.nodes.is_empty() {
            m.offsets.push(m.orders.len());
        }
        m
    }

    fn grid(&self) -> (usize, usize) {
        let rows = self.hits.iter().map(|h| h.0 as usize + 1).max().unwrap_or(0);
        let cols = self.hits.iter().map(|h| h.1 as usize + 1).max().unwrap_or(0);
        (rows, cols)
    }

    /// A dense node-by-order grid pays off when it is not much larger than
    /// the hit list itself.
    fn fits_dense(&self) -> bool {
        let (rows, cols) = self.grid();
        rows.saturating_mul(cols) <= 8 * self.hits.len() + 1024
    }

    // Both merges add each cell's weights in insertion order, so they
    // produce bit-identical sums.
    fn merged_dense(&self) -> Vec<(NodeId, u32, f64)> {
        let (rows, cols) = self.grid();
        let mut sum = vec![0.0; rows * cols];
        let mut seen = vec![false; rows * cols];
        for &(v, k, w) in &self.hits {
            let cell = v as usize * cols + k as usize;
            sum[cell] += w;
            seen[cell] = true;
        }
        (0..rows * cols)
            .filter(|&c| seen[c])
            .map(|c| ((c / cols) as NodeId, (c % cols) as u32, sum[c]))
            .collect()
    }

    #[cfg(test)]
    fn merged_dense_for_test(&self) -> Vec<(NodeId, u32, f64)> {
        if self.fits_dense() {
            self.merged_dense()
        } else {
            // Force the dense path on a compacted copy of the ids.
            let mut ids: Vec<NodeId> = self.hits.iter().map(|h| h.0).collect();
            ids.sort_unstable();
            ids.dedup();
            let compact = HitCountBuilder {
                hits: self
                    .hits
                    .iter()
                    .map(|&(v, k, w)| (ids.binary_search(&v).unwrap() as NodeId, k, w))
                    .collect(),
                ..HitCountBuilder::weighted()
            };
            compact
                .merged_dense()
                .into_iter()
                .map(|(v, k, w)| (ids[v as usize], k, w))
                .collect()
        }
    }

    fn merged_sorted(mut self) -> Vec<(NodeId, u32, f64)> {
        self.hits.sort_by_key(|&(v, k, _)| (v, k));
        let mut out: Vec<(NodeId, u32, f64)> = Vec::new();
        for (v, k, w) in self.hits {
            match out.last_mut() {
                Some(last) if last.0 == v && last.1 == k => last.2 += w,
                _ => out.push((v, k, w)),
            }
        }
        out
    }
}

impl HitCountMatrix {
    /// Number of samples `m` the matrix summarizes.
    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn is_weighted(&self) -> bool {
        self.weighted
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nonzero_entries(&self) -> usize {
        self.orders.len()
    }

    fn row(&self, v: NodeId) -> Option<(&[u32], &[f64])> {
        let i = self.nodes.binary_search(&v).ok()?;
        let range = self.offsets[i]..self.offsets[i + 1];
        Some((&self.orders[range.clone()], &self.weights[range]))
    }

    /// `M[v][k]`, 0 when absent.
    pub fn get(&self, v: NodeId, order: u32) -> f64 {
        self.row(v)
            .and_then(|(orders, weights)| {
                orders.binary_search(&order).ok().map(|i| weights[i])
            })
            .unwrap_or(0.0)
    }

    /// Nonzero entries of row `v` as `(order, weight)`.
    pub fn entries(&self, v: NodeId) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.row(v)
            .into_iter()
            .flat_map(|(o, w)| o.iter().copied().zip(w.iter().copied()))
    }

    /// Nodes with at least one entry.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    /// `Σ_k M[v][k] h(k)` for row `v`, summed in ascending order.
    pub fn node_total(&self, v: NodeId, h: &WeightFunction) -> f64 {
        self.entries(v).map(|(k, w)| w * h.eval(k as usize)).sum()
    }

    /// [`Self::node_total`] for every node, as a dense vector of length `n`.
    /// Orders below `min_order` are skipped.
    pub fn dense_totals(&self, n: usize, h: &WeightFunction, min_order: u32) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for (i, &v) in self.nodes.iter().enumerate() {
            let range = self.offsets[i]..self.offsets[i + 1];
            out[v as usize] = self.orders[range.clone()]
                .iter()
                .zip(&self.weights[range])
                .filter(|(&k, _)| k >= min_order)
                .map(|(&k, &w)| w * h.eval(k as usize))
                .sum();
        }
        out
    }

    /// Entrywise sum of two matrices built from disjoint sample shards.
    pub fn merge(&self, other: &HitCountMatrix) -> HitCountMatrix {
        let mut b = HitCountBuilder {
            hits: Vec::with_capacity(self.orders.len() + other.orders.len()),
            samples: self.samples + other.samples,
            total_weight: self.total_weight + other.total_weight,
            weighted: self.weighted || other.weighted,
        };
        for m in [self, other] {
            for (i, &v) in m.nodes.iter().enumerate() {
                for j in m.offsets[i]..m.offsets[i + 1] {
                    b.hits.push((v, m.orders[j], m.weights[j]));
                }
            }
        }
        b.finish()
    }
}

/// Builds the hit-count matrix of `samples`, optionally weighting each one.
pub fn build_hit_counts(samples: &[PathTrace], weights: Option<&[f64]>) -> Result<HitCountMatrix> {
    let mut builder = match weights {
        Some(w) => {
            if w.len() != samples.len() {
                return Err(Error::WeightCount(w.len(), samples.len()));
            }
            if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidParameter("weights must be nonnegative".into()));
            }
            HitCountBuilder::weighted()
        }
        None => HitCountBuilder::new(),
    };
    for (i, z) in samples.iter().enumerate() {
        builder.add_path(z.nodes(), weights.map_or(1.0, |w| w[i]));
    }
    Ok(builder.finish())
}

/// `-(1/m) Σ_{v ∈ y} Σ_k M[v][k] h(k)`. The divisor is the sample count `m`
/// for weighted matrices too.
pub fn fast_statistic(y: &Snapshot, hits: &HitCountMatrix, h: &WeightFunction) -> f64 {
    let total: f64 = y.nodes().iter().map(|v| hits.node_total(v, h)).sum();
    -total / hits.samples().max(1) as f64
}
