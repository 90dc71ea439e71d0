use super::{Graph, NodeId};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 200_000;

/// Dominant adjacency eigenvector by damped power iteration, normalized to
/// unit Euclidean length.
///
/// Each step maps `x` to `(x + A x) / 2` before renormalizing. The shift keeps
/// the Perron vector but removes the `-λ` eigenvalue that makes plain power
/// iteration oscillate on bipartite graphs such as trees.
pub fn eigencentrality(g: &Graph, tolerance: f64) -> Result<Vec<f64>> {
    let n = g.node_count();
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        for v in g.nodes() {
            let ax: f64 = g.neighbors(v).iter().map(|&u| x[u as usize]).sum();
            next[v as usize] = 0.5 * x[v as usize] + 0.5 * ax;
        }
        let norm = next.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::NoConvergence(0));
        }
        let mut delta: f64 = 0.0;
        for (a, b) in next.iter_mut().zip(&x) {
            *a /= norm;
            delta = delta.max((*a - b).abs());
        }
        std::mem::swap(&mut x, &mut next);
        if delta < tolerance {
            return Ok(x);
        }
    }
    Err(Error::NoConvergence(MAX_ITERATIONS))
}

/// Node at index `n / 2` after sorting by `(score, id)` ascending.
pub fn median_eigencentral_node(g: &Graph, tolerance: f64) -> Result<NodeId> {
    let scores = eigencentrality(g, tolerance)?;
    let mut order: Vec<NodeId> = g.nodes().collect();
    order.sort_by(|&a, &b| {
        scores[a as usize]
            .total_cmp(&scores[b as usize])
            .then(a.cmp(&b))
    });
    order
        .get(order.len() / 2)
        .copied()
        .ok_or_else(|| Error::InvalidParameter("empty graph".into()))
}
