//! Random and deterministic graph families.

use std::collections::BTreeSet;

use rand::Rng as _;

use super::{Graph, NodeId};
use crate::error::{Error, Result};
use crate::rng;

const SMALL_WORLD_ATTEMPTS: usize = 100;

/// Complete tree in which every internal node has `branching` children.
pub fn dary_tree(branching: usize, depth: usize) -> Result<Graph> {
    if branching == 0 {
        return Err(Error::InvalidParameter("branching must be at least 1".into()));
    }
    let mut n: usize = 1;
    let mut level: usize = 1;
    for _ in 0..depth {
        level = level.checked_mul(branching).ok_or(Error::SizeOverflow)?;
        n = n.checked_add(level).ok_or(Error::SizeOverflow)?;
    }
    if n > NodeId::MAX as usize {
        return Err(Error::SizeOverflow);
    }
    // Breadth-first numbering: the parent of node i > 0 is (i - 1) / branching.
    let edges = (1..n).map(|i| (((i - 1) / branching) as NodeId, i as NodeId));
    Graph::from_edges(n, edges)
}

/// Barabási–Albert graph: an `(attach + 1)`-clique, then each new node links
/// to `attach` distinct existing nodes chosen proportionally to degree.
pub fn preferential_attachment(n: usize, attach: usize, seed: u64) -> Result<Graph> {
    if attach == 0 || n < attach + 1 {
        return Err(Error::InvalidParameter(format!(
            "preferential attachment needs attach >= 1 and n >= attach + 1 (n={n}, attach={attach})"
        )));
    }
    let mut rng = rng::stream(seed, &[]);
    let mut edges = Vec::with_capacity(n * attach);
    // Each node appears once per incident edge, so a uniform draw from this
    // list is a degree-proportional draw.
    let mut ends: Vec<NodeId> = Vec::with_capacity(2 * n * attach);
    for u in 0..=attach as NodeId {
        for v in 0..u {
            edges.push((v, u));
            ends.extend([u, v]);
        }
    }
    let mut chosen = Vec::with_capacity(attach);
    for new in (attach + 1)..n {
        chosen.clear();
        while chosen.len() < attach {
            let cand = ends[rng.gen_range(0..ends.len())];
            if !chosen.contains(&cand) {
                chosen.push(cand);
            }
        }
        for &t in &chosen {
            edges.push((t, new as NodeId));
            ends.extend([t, new as NodeId]);
        }
    }
    Graph::from_edges(n, edges)
}

/// Watts–Strogatz graph, regenerated with `seed + 1, seed + 2, ...` until the
/// result is connected.
pub fn small_world(n: usize, ring_degree: usize, rewire_prob: f64, seed: u64) -> Result<Graph> {
    if !ring_degree.is_multiple_of(2) || ring_degree >= n {
        return Err(Error::InvalidParameter(format!(
            "ring degree must be even and below n (n={n}, k={ring_degree})"
        )));
    }
    if !(0.0..=1.0).contains(&rewire_prob) {
        return Err(Error::InvalidParameter(format!(
            "rewire probability {rewire_prob} outside [0, 1]"
        )));
    }
    for attempt in 0..SMALL_WORLD_ATTEMPTS {
        let g = small_world_once(n, ring_degree, rewire_prob, seed.wrapping_add(attempt as u64))?;
        if g.is_connected() {
            return Ok(g);
        }
    }
    Err(Error::NotConnected(SMALL_WORLD_ATTEMPTS))
}

fn small_world_once(n: usize, k: usize, p: f64, seed: u64) -> Result<Graph> {
    let mut rng = rng::stream(seed, &[]);
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for u in 0..n {
        for j in 1..=k / 2 {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=k / 2 {
        for u in 0..n {
            let v = (u + j) % n;
            if !adj[u].contains(&v) || rng.gen::<f64>() >= p {
                continue;
            }
            if adj[u].len() >= n - 1 {
                continue;
            }
            let w = loop {
                let w = rng.gen_range(0..n);
                if w != u && !adj[u].contains(&w) {
                    break w;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let edges = adj.iter().enumerate().flat_map(|(u, set)| {
        set.iter()
            .filter(move |&&v| u < v)
            .map(move |&v| (u as NodeId, v as NodeId))
    });
    Graph::from_edges(n, edges)
}

/// Path `0 - 1 - ... - (n-1)`.
pub fn path(n: usize) -> Graph {
    Graph::from_edges(n, (1..n).map(|i| (i as NodeId - 1, i as NodeId))).expect("valid path")
}

/// Cycle on `n >= 3` nodes.
pub fn cycle(n: usize) -> Graph {
    Graph::from_edges(n, (0..n).map(|i| (i as NodeId, ((i + 1) % n) as NodeId)))
        .expect("valid cycle")
}

/// Star with center `0` and leaves `1..=leaves`.
pub fn star(leaves: usize) -> Graph {
    Graph::from_edges(leaves + 1, (1..=leaves).map(|i| (0, i as NodeId))).expect("valid star")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dary_tree_sizes() {
        // Six levels of a 4-ary tree: depth counts edges from the root.
        assert_eq!(dary_tree(4, 5).unwrap().node_count(), 1365);
        let single = dary_tree(4, 0).unwrap();
        assert_eq!((single.node_count(), single.edge_count()), (1, 0));
        let t = dary_tree(2, 1).unwrap();
        assert_eq!(t.node_count(), 3);
        assert_eq!(t.neighbors(0), &[1, 2]);
        for b in 2..=5usize {
            for d in 0..=6u32 {
                let g = dary_tree(b, d as usize).unwrap();
                assert_eq!(g.node_count(), (b.pow(d + 1) - 1) / (b - 1));
                g.validate().unwrap();
            }
        }
        assert_eq!(dary_tree(1, 4).unwrap().node_count(), 5);
        assert!(matches!(dary_tree(1 << 20, 4), Err(Error::SizeOverflow)));
        assert!(dary_tree(0, 2).is_err());
    }

    #[test]
    fn preferential_attachment_shapes() {
        let tiny = preferential_attachment(3, 1, 9).unwrap();
        assert_eq!(tiny.edge_count(), 2);
        assert!(tiny.is_connected());
        let g = preferential_attachment(1365, 2, 1).unwrap();
        g.validate().unwrap();
        assert!(g.is_connected());
        let avg = 2.0 * g.edge_count() as f64 / g.node_count() as f64;
        assert!(avg < 4.0, "average degree {avg}");
        assert_eq!(g, preferential_attachment(1365, 2, 1).unwrap());
        assert!(preferential_attachment(2, 2, 0).is_err());
    }

    #[test]
    fn preferential_attachment_heavy_tail() {
        let max_degree = (0..50)
            .map(|s| {
                let g = preferential_attachment(2000, 1, s).unwrap();
                g.nodes().map(|v| g.degree(v)).max().unwrap()
            })
            .max()
            .unwrap();
        assert!(max_degree > 20, "max degree {max_degree}");
    }

    #[test]
    fn small_world_shapes() {
        let ring = small_world(10, 4, 0.0, 3).unwrap();
        assert_eq!(ring.edge_count(), 20);
        assert!(ring.nodes().all(|v| ring.degree(v) == 4));
        let rewired = small_world(10, 4, 1.0, 3).unwrap();
        assert_eq!(rewired.edge_count(), 20);
        rewired.validate().unwrap();
        let g = small_world(1365, 4, 0.1, 5).unwrap();
        assert!(g.is_connected());
        assert_eq!(2 * g.edge_count(), 4 * 1365);
        assert!(small_world(10, 3, 0.1, 0).is_err());
        assert!(small_world(10, 4, 1.5, 0).is_err());
    }

    #[test]
    fn helpers() {
        assert_eq!(path(4).edge_count(), 3);
        assert_eq!(cycle(5).edge_count(), 5);
        assert_eq!(star(3).degree(0), 3);
    }
}
