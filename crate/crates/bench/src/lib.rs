//! Fixtures shared by the benchmarks.

use dsi_core::graph::generate::{dary_tree, preferential_attachment};
use dsi_core::graph::median_eigencentral_node;
use dsi_core::rng::stream;
use dsi_core::{simulate_path, Graph, NodeId, Snapshot};

/// A graph, the source used to draw its snapshot, and the snapshot.
pub struct Case {
    pub name: &'static str,
    pub graph: Graph,
    pub source: NodeId,
    pub snapshot: Snapshot,
}

impl Case {
    fn new(name: &'static str, graph: Graph, steps: usize) -> Self {
        let source = median_eigencentral_node(&graph, 1e-10).expect("connected graph");
        let snapshot = simulate_path(&graph, source, steps, &mut stream(17, &[]))
            .expect("graph is large enough")
            .snapshot();
        Case {
            name,
            graph,
            source,
            snapshot,
        }
    }
}

/// The complete 4-ary tree of depth 4 (341 nodes), T = 30.
pub fn tree() -> Case {
    Case::new("tree", dary_tree(4, 4).unwrap(), 30)
}

/// A 200-node preferential-attachment graph, T = 30.
pub fn pa() -> Case {
    Case::new("pa", preferential_attachment(200, 2, 5).unwrap(), 30)
}
