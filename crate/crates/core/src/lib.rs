//! Source identification for SI diffusions: Monte Carlo p-values per
//! candidate node, confidence sets for the source, and pooled sampling.

pub mod diffusion;
pub mod discrepancy;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod inference;
pub mod oracle;
pub mod pooling;
pub mod rng;

pub use diffusion::{path_log_prob, simulate_path, snapshot, PathTrace, Sampler, Snapshot};
pub use discrepancy::{
    build_hit_counts, canonical_discrepancy, fast_statistic, rc_discrepancy, HitCountMatrix, Loss,
    WeightFunction,
};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport};
pub use graph::{Graph, NodeId, NodeSet};
pub use inference::{
    confidence_set, distance_center, estimate_pvalue, estimate_statistic, pvalue_table,
    recommend_m, single_point_estimate, ConfidenceSet, InferenceSettings, PValueTable, SampleBank,
};
pub use pooling::Pooling;
