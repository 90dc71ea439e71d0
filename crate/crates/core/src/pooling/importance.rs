//! Surjective importance sampling: reusing paths from `v0` for the p-value of
//! a single-degree neighbor `u`.
//!
//! A path `z = [v0, s1, .., s(K-1), u, s(K+1), .., sT]` maps to the matching
//! path `f_u(z) = [u, v0, s1, .., s(K-1), s(K+1), .., sT]`. Each mapped path
//! has exactly `T` preimages (u can sit at any position after `v0`), so the
//! sample weight is the likelihood ratio divided by `T`.

use crate::diffusion::{PathTrace, Snapshot};
use crate::discrepancy::{HitCountBuilder, Loss};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::inference::scoring::{point_statistic, weighted_pvalue, Scorer};
use crate::inference::SampleBank;

/// A path from `v0` together with its image under `f_u`.
#[derive(Clone, Debug, PartialEq)]
pub struct MappedSample {
    /// Position `K` of `u` in the original path, if present.
    pub position: Option<usize>,
    /// `f_u(z)`, or `None` when `u` is absent.
    pub mapped: Option<Vec<NodeId>>,
    /// `p(f_u(z) | u) / p(z | v0)`, 0 when `u` is absent.
    pub ratio: f64,
    /// `ratio / T`.
    pub weight: f64,
}

fn check_single_degree(g: &Graph, z: &PathTrace, u: NodeId) -> Result<NodeId> {
    if !g.contains(u) || g.degree(u) != 1 {
        return Err(Error::NotSingleDegree(u));
    }
    let neighbor = g.neighbors(u)[0];
    if z.source() != neighbor {
        return Err(Error::WrongSource {
            expected: neighbor,
            found: z.source(),
        });
    }
    Ok(neighbor)
}

/// Maps `z` (a path from the unique neighbor of `u`) to its matching path
/// from `u`.
pub fn matching_path(g: &Graph, z: &PathTrace, u: NodeId) -> Result<MappedSample> {
    check_single_degree(g, z, u)?;
    let Some(k) = z.position(u) else {
        return Ok(MappedSample {
            position: None,
            mapped: None,
            ratio: 0.0,
            weight: 0.0,
        });
    };
    let nodes = z.nodes();
    let mut mapped = Vec::with_capacity(nodes.len());
    mapped.push(u);
    mapped.extend(nodes[..k].iter().copied());
    mapped.extend(nodes[k + 1..].iter().copied());
    let ratio = ratio_at(z, k);
    Ok(MappedSample {
        position: Some(k),
        mapped: Some(mapped),
        ratio,
        weight: ratio / z.steps() as f64,
    })
}

/// `p(f_u(z) | u) / p(z | v0)` from the recorded boundary counts, or 0 when
/// `u` does not appear in `z`.
///
/// Before `u` is infected, every boundary of the `v0` process contains the
/// edge `v0 -> u` in addition to the boundary of the `u` process, so each of
/// those steps contributes `n_k / (n_k - 1)`; the step that infects `u`
/// contributes `n_K`.
pub fn likelihood_ratio(z: &PathTrace, u: NodeId) -> f64 {
    match z.position(u) {
        Some(k) if k >= 1 => ratio_at(z, k),
        _ => 0.0,
    }
}

pub(crate) fn ratio_at(z: &PathTrace, k: usize) -> f64 {
    let n = z.boundary_counts();
    debug_assert!(k >= 1 && k <= n.len());
    let prefix: f64 = n[..k - 1]
        .iter()
        .map(|&nk| nk as f64 / (nk as f64 - 1.0))
        .product();
    n[k - 1] as f64 * prefix
}

/// `(1/m) Σ g(φ(Z_i)) / |φ⁻¹(φ(Z_i))| · p2(φ(Z_i)) / p1(Z_i)` over items
/// `(g value, preimage size, likelihood ratio)`. Items outside the domain of
/// `φ` carry ratio 0. The divisor is the item count, not the weight total.
pub fn surjective_is_estimate<I>(items: I) -> f64
where
    I: IntoIterator<Item = (f64, f64, f64)>,
{
    let mut count = 0usize;
    let mut sum = 0.0;
    for (g, preimage, ratio) in items {
        count += 1;
        if ratio != 0.0 {
            sum += g / preimage * ratio;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Weighted statistic and p-value for single-degree `u` from the bank of its
/// neighbor, as `(T̂_u(y), ψ̂_u)`. The p-value is clamped to `[0, 1]`; the
/// third element reports whether clamping changed it.
pub(crate) fn importance_scores(
    g: &Graph,
    u: NodeId,
    bank: &SampleBank,
    y: &Snapshot,
    loss: &Loss,
    extra: &[Loss],
) -> Result<(f64, f64, bool, Vec<f64>)> {
    let steps = bank.steps();
    if steps == 0 {
        return Err(Error::InvalidParameter(
            "importance sampling needs at least one infection".into(),
        ));
    }
    if y.len() != steps + 1 {
        return Err(Error::SizeMismatch {
            snapshot: y.len(),
            path: steps + 1,
        });
    }
    if g.degree(u) != 1 {
        return Err(Error::NotSingleDegree(u));
    }
    if g.neighbors(u)[0] != bank.source() {
        return Err(Error::WrongSource {
            expected: g.neighbors(u)[0],
            found: bank.source(),
        });
    }
    // f_u(z) has the node set of z, so the bank's sorted sets serve the
    // mapped paths too. Orders shift: u takes order 1 and the nodes before
    // it move back by one.
    let t = steps as f64;
    let weight_of = |z: &PathTrace| z.position(u).map_or(0.0, |k| ratio_at(z, k) / t);
    let test_weights: Vec<f64> = bank.test_half().iter().map(weight_of).collect();
    let mut expectation_weights = Vec::with_capacity(bank.m());
    let mut builder = HitCountBuilder::weighted();
    for z in bank.expectation_half() {
        let w = weight_of(z);
        expectation_weights.push(w);
        match z.position(u) {
            Some(k) => {
                let nodes = z.nodes();
                let before = nodes[..k].iter().enumerate().map(|(i, &v)| (v, i as u32 + 2));
                let after = nodes[k + 1..]
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (v, (k + i) as u32 + 2));
                builder.add_hits(std::iter::once((u, 1)).chain(before).chain(after), w);
            }
            None => builder.add_hits(std::iter::empty(), 0.0),
        }
    }
    let hits = builder.finish();

    let m = bank.m();
    let sets = bank.sorted_sets();
    let expectation = || {
        sets[m..]
            .iter()
            .zip(&expectation_weights)
            .map(|(s, &w)| (s.as_slice(), w))
    };
    let scorer = Scorer::new(loss, &hits, expectation(), m, true);
    let y_sorted = y.nodes().as_slice();
    let test_sets = sets[..m]
        .iter()
        .zip(&test_weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(s, &w)| (s.as_slice(), w));
    let (stat, raw) = weighted_pvalue(&scorer, y_sorted, test_sets, m);
    let clamped = raw.clamp(0.0, 1.0);
    let extras = extra
        .iter()
        .map(|l| point_statistic(l, &hits, expectation(), m, y_sorted))
        .collect();
    Ok((stat, clamped, clamped != raw, extras))
}

/// `ψ̂_u` for single-degree `u` estimated from the bank of its neighbor.
pub fn is_pvalue_single_degree(
    g: &Graph,
    u: NodeId,
    bank: &SampleBank,
    y: &Snapshot,
    loss: &Loss,
) -> Result<f64> {
    importance_scores(g, u, bank, y, loss, &[]).map(|r| r.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::path_log_prob;
    use crate::graph::generate::star;

    /// v0 = 0 linked to a = 1, b = 2, c = 3; b - d and c - d with d = 4.
    fn diamond() -> Graph {
        Graph::from_edges(5, [(0, 1), (0, 2), (0, 3), (2, 4), (3, 4)]).unwrap()
    }

    #[test]
    fn matching_path_shapes() {
        // v0 = 0, a = 1, w = 2 on a star.
        let g = star(3);
        let z = PathTrace::replay(&g, &[0, 1, 2]).unwrap();
        let s = matching_path(&g, &z, 1).unwrap();
        assert_eq!(s.mapped.as_deref(), Some(&[1, 0, 2][..]));
        assert_eq!(s.position, Some(1));
        let z = PathTrace::replay(&g, &[0, 2, 1]).unwrap();
        let s = matching_path(&g, &z, 1).unwrap();
        assert_eq!(s.mapped.as_deref(), Some(&[1, 0, 2][..]));
        assert_eq!(s.position, Some(2));
        let z = PathTrace::replay(&g, &[0, 2, 3]).unwrap();
        let s = matching_path(&g, &z, 1).unwrap();
        assert_eq!((s.mapped, s.weight), (None, 0.0));
    }

    #[test]
    fn matching_path_preconditions() {
        let g = star(3);
        let z = PathTrace::replay(&g, &[0, 1]).unwrap();
        assert!(matches!(matching_path(&g, &z, 0), Err(Error::NotSingleDegree(0))));
        let z = PathTrace::replay(&g, &[1, 0]).unwrap();
        assert!(matches!(matching_path(&g, &z, 2), Err(Error::WrongSource { .. })));
    }

    #[test]
    fn diamond_golden_ratio() {
        let g = diamond();
        let z = PathTrace::replay(&g, &[0, 2, 4, 3, 1]).unwrap();
        assert_eq!(z.boundary_counts(), &[3, 3, 3, 1]);
        let r = likelihood_ratio(&z, 1);
        assert_eq!(r, 27.0 / 8.0);
        // p(f|a) = 1/4, p(z|v0) = 2/27.
        let pf = path_log_prob(&g, &[1, 0, 2, 4, 3]).unwrap().exp();
        let pz = path_log_prob(&g, z.nodes()).unwrap().exp();
        assert!((pf - 0.25).abs() < 1e-15);
        assert!((pz - 2.0 / 27.0).abs() < 1e-15);
        assert!((pf / pz - r).abs() < 1e-12);
    }

    #[test]
    fn star_first_step_ratio() {
        let g = star(3);
        let z = PathTrace::replay(&g, &[0, 1, 2]).unwrap();
        assert_eq!(likelihood_ratio(&z, 1), 3.0);
        assert_eq!(likelihood_ratio(&z, 3), 0.0);
    }

    #[test]
    fn surjective_estimate_special_cases() {
        // Identity map, preimage 1: ordinary importance sampling.
        let items = [(2.0, 1.0, 0.5), (4.0, 1.0, 1.5)];
        assert_eq!(surjective_is_estimate(items), (1.0 + 6.0) / 2.0);
        assert_eq!(surjective_is_estimate([(5.0, 3.0, 0.0)]), 0.0);
        assert_eq!(surjective_is_estimate(std::iter::empty()), 0.0);
    }

    #[test]
    fn weighted_scores_match_mapped_paths() {
        use crate::discrepancy::canonical_discrepancy;
        use crate::rng::stream;

        // Diamond plus a tail so snapshots vary: 4 - 5.
        let g = Graph::from_edges(6, [(0, 1), (0, 2), (0, 3), (2, 4), (3, 4), (4, 5)]).unwrap();
        let bank = SampleBank::generate(&g, 0, 3, 300, &mut stream(8, &[])).unwrap();
        let y = Snapshot::new(&g, [0, 1, 2, 4].into()).unwrap();
        let loss = Loss::adit();
        let h = crate::discrepancy::WeightFunction::InverseTime;
        let m = bank.m() as f64;

        let mapped = |half: &[PathTrace]| -> Vec<(PathTrace, f64)> {
            half.iter()
                .filter_map(|z| {
                    let s = matching_path(&g, z, 1).unwrap();
                    s.mapped.map(|f| (PathTrace::replay(&g, &f).unwrap(), s.weight))
                })
                .collect()
        };
        let expectation = mapped(bank.expectation_half());
        let naive_t = |target: &Snapshot| -> f64 {
            expectation
                .iter()
                .map(|(f, w)| w * canonical_discrepancy(target, f, &h))
                .sum::<f64>()
                / m
        };
        let observed = naive_t(&y);
        let (mut lo, mut hi) = (0.0, 0.0);
        for (f, w) in mapped(bank.test_half()) {
            let t = naive_t(&f.snapshot());
            if t >= observed + 1e-9 {
                lo += w;
            }
            if t >= observed - 1e-9 {
                hi += w;
            }
        }
        let (stat, p, _, extras) = importance_scores(&g, 1, &bank, &y, &loss, &[Loss::adit()]).unwrap();
        assert!((stat - observed).abs() < 1e-12);
        assert!((extras[0] - observed).abs() < 1e-12);
        assert!(p >= (lo / m).min(1.0) - 1e-12 && p <= (hi / m).min(1.0) + 1e-12);
    }
}
