//! Replicated coverage / accuracy experiments on generated graphs.
//!
//! Each replication generates a graph, picks the source by the configured
//! rule, simulates the true diffusion, and runs the confidence-set engine
//! plus every single-point estimator on the resulting snapshot. All
//! randomness is derived from the master seed and the replication index.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::diffusion::simulate_path;
use crate::discrepancy::Loss;
use crate::error::{Error, Result};
use crate::graph::generate::{dary_tree, preferential_attachment, small_world};
use crate::graph::{median_eigencentral_node, Graph, NodeId};
use crate::inference::engine::table_in_current_pool;
use crate::inference::{distance_center, run_in_pool, InferenceSettings, PhaseTimings};
use crate::pooling::Pooling;
use crate::rng;

/// Convergence tolerance for source selection by eigencentrality.
pub const CENTRALITY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Tree { branching: usize, depth: usize },
    PreferentialAttachment { n: usize, attach: usize },
    SmallWorld { n: usize, ring_degree: usize, rewire_prob: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Tree { .. } => "tree",
            Family::PreferentialAttachment { .. } => "pa",
            Family::SmallWorld { .. } => "sw",
        }
    }

    pub fn generate(&self, seed: u64) -> Result<Graph> {
        match *self {
            Family::Tree { branching, depth } => dary_tree(branching, depth),
            Family::PreferentialAttachment { n, attach } => preferential_attachment(n, attach, seed),
            Family::SmallWorld {
                n,
                ring_degree,
                rewire_prob,
            } => small_world(n, ring_degree, rewire_prob, seed),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceRule {
    MedianEigencentrality,
    Node(NodeId),
}

/// Experiment settings. Text form is flat `key=value` lines; see
/// [`ExperimentConfig::set`] for the keys.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub family: Family,
    pub steps: usize,
    pub m: usize,
    pub alphas: Vec<f64>,
    pub loss: Loss,
    pub pooling: Pooling,
    pub replications: usize,
    pub seed: u64,
    pub workers: usize,
    pub source: SourceRule,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: Family::PreferentialAttachment { n: 200, attach: 2 },
            steps: 30,
            m: 1000,
            alphas: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
            loss: Loss::adit(),
            pooling: Pooling::None,
            replications: 200,
            seed: 1,
            workers: 0,
            source: SourceRule::MedianEigencentrality,
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`].
pub const CONFIG_KEYS: &[&str] = &[
    "family",
    "branching",
    "depth",
    "n",
    "attach",
    "ring_degree",
    "rewire_prob",
    "steps",
    "m",
    "alphas",
    "loss",
    "pooling",
    "replications",
    "seed",
    "workers",
    "source",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl ExperimentConfig {
    /// Parses `key=value` lines over the defaults. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(text)?;
        Ok(cfg)
    }

    /// Applies `key=value` lines over the current settings.
    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Sets one key. Family parameters apply to the current family and are
    /// kept when the family changes to one that shares them.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (mut branching, mut depth, mut n, mut attach, mut ring_degree, mut rewire_prob) =
            (4, 4, 200, 2, 4, 0.1);
        match self.family {
            Family::Tree { branching: b, depth: d } => (branching, depth) = (b, d),
            Family::PreferentialAttachment { n: nn, attach: a } => (n, attach) = (nn, a),
            Family::SmallWorld {
                n: nn,
                ring_degree: k,
                rewire_prob: p,
            } => (n, ring_degree, rewire_prob) = (nn, k, p),
        }
        let mut family = self.family.name().to_string();
        match key {
            "family" => family = value.to_string(),
            "branching" => branching = parse(key, value)?,
            "depth" => depth = parse(key, value)?,
            "n" => n = parse(key, value)?,
            "attach" => attach = parse(key, value)?,
            "ring_degree" => ring_degree = parse(key, value)?,
            "rewire_prob" => rewire_prob = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "alphas" => {
                self.alphas = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "loss" => self.loss = value.parse()?,
            "pooling" => self.pooling = value.parse()?,
            "replications" => self.replications = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "workers" => self.workers = parse(key, value)?,
            "source" => {
                self.source = match value {
                    "median" => SourceRule::MedianEigencentrality,
                    id => SourceRule::Node(parse(key, id)?),
                }
            }
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        self.family = match family.as_str() {
            "tree" => Family::Tree { branching, depth },
            "pa" => Family::PreferentialAttachment { n, attach },
            "sw" => Family::SmallWorld {
                n,
                ring_degree,
                rewire_prob,
            },
            other => return Err(Error::Config(format!("unknown family {other:?} (tree, pa, sw)"))),
        };
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.steps < 1 {
            return bad("steps must be at least 1");
        }
        if self.m < 1 {
            return bad("m must be at least 1");
        }
        if self.replications < 1 {
            return bad("replications must be at least 1");
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return bad("alphas must be a nonempty list of values in (0, 1)");
        }
        Ok(())
    }

    /// The settings as `key=value` pairs, in [`CONFIG_KEYS`] order where
    /// applicable to the family.
    pub fn entries(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = vec![("family".into(), self.family.name().into())];
        match &self.family {
            Family::Tree { branching, depth } => {
                out.push(("branching".into(), branching.to_string()));
                out.push(("depth".into(), depth.to_string()));
            }
            Family::PreferentialAttachment { n, attach } => {
                out.push(("n".into(), n.to_string()));
                out.push(("attach".into(), attach.to_string()));
            }
            Family::SmallWorld {
                n,
                ring_degree,
                rewire_prob,
            } => {
                out.push(("n".into(), n.to_string()));
                out.push(("ring_degree".into(), ring_degree.to_string()));
                out.push(("rewire_prob".into(), rewire_prob.to_string()));
            }
        }
        let alphas: Vec<String> = self.alphas.iter().map(f64::to_string).collect();
        out.extend([
            ("steps".into(), self.steps.to_string()),
            ("m".into(), self.m.to_string()),
            ("alphas".into(), alphas.join(",")),
            ("loss".into(), self.loss.to_string()),
            ("pooling".into(), self.pooling.to_string()),
            ("replications".into(), self.replications.to_string()),
            ("seed".into(), self.seed.to_string()),
            (
                "source".into(),
                match self.source {
                    SourceRule::MedianEigencentrality => "median".into(),
                    SourceRule::Node(v) => v.to_string(),
                },
            ),
        ]);
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

/// Single-point estimators reported per replication.
pub const POINT_METHODS: [&str; 4] = ["adit", "euclidean", "rc", "distance_center"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub source: NodeId,
    pub truth_pvalue: f64,
    /// Set size per configured α, in config order.
    pub sizes: Vec<usize>,
    pub covered: Vec<bool>,
    /// Estimate per entry of [`POINT_METHODS`].
    pub estimates: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSummary {
    pub alpha: f64,
    pub confidence: f64,
    pub coverage: f64,
    pub mean_size: f64,
}

/// Seconds spent per phase, summed over replications and tasks.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TimingSummary {
    pub workers: usize,
    pub pooling: String,
    pub setup_s: f64,
    pub pool_detection_s: f64,
    pub sampling_s: f64,
    pub scoring_s: f64,
    /// Sum of per-replication inference wall-clock.
    pub inference_wall_s: f64,
    /// End-to-end wall-clock of the whole experiment.
    pub total_wall_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: BTreeMap<String, String>,
    pub levels: Vec<LevelSummary>,
    pub accuracy: BTreeMap<String, f64>,
    pub mean_truth_pvalue: f64,
    pub replications: Vec<ReplicationRecord>,
    /// Kept out of `report.json` so reports stay byte-identical across runs.
    #[serde(skip)]
    pub timing: TimingSummary,
}

impl ExperimentReport {
    pub fn coverage_at(&self, alpha: f64) -> Option<f64> {
        self.levels.iter().find(|l| l.alpha == alpha).map(|l| l.coverage)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `report.json`, `timing.json`, `coverage.csv`, `accuracy.csv`
    /// and `replications.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json() + "\n")?;
        fs::write(
            dir.join("timing.json"),
            serde_json::to_string_pretty(&self.timing)? + "\n",
        )?;

        let mut cov = String::from("alpha,confidence,coverage,mean_size\n");
        for l in &self.levels {
            let _ = writeln!(cov, "{},{},{},{}", l.alpha, l.confidence, l.coverage, l.mean_size);
        }
        fs::write(dir.join("coverage.csv"), cov)?;

        let mut acc = String::from("method,accuracy\n");
        for (method, a) in &self.accuracy {
            let _ = writeln!(acc, "{method},{a}");
        }
        fs::write(dir.join("accuracy.csv"), acc)?;

        let alphas: Vec<f64> = self.levels.iter().map(|l| l.alpha).collect();
        let mut reps = String::from("replication,source,truth_pvalue");
        for a in &alphas {
            let _ = write!(reps, ",size_{a},covered_{a}");
        }
        for m in POINT_METHODS {
            let _ = write!(reps, ",estimate_{m}");
        }
        reps.push('\n');
        for r in &self.replications {
            let _ = write!(reps, "{},{},{}", r.replication, r.source, r.truth_pvalue);
            for (s, c) in r.sizes.iter().zip(&r.covered) {
                let _ = write!(reps, ",{s},{c}");
            }
            for e in &r.estimates {
                let _ = write!(reps, ",{e}");
            }
            reps.push('\n');
        }
        fs::write(dir.join("replications.csv"), reps)?;
        Ok(())
    }
}

struct ReplicationOutput {
    record: ReplicationRecord,
    setup: Duration,
    phases: PhaseTimings,
}

fn run_replication(cfg: &ExperimentConfig, rep: usize) -> Result<ReplicationOutput> {
    let t0 = Instant::now();
    let rep_id = rep as u64;
    let graph_seed = rng::stream(cfg.seed, &[rep_id, 0]).next_u64();
    let g = cfg.family.generate(graph_seed)?;
    let source = match cfg.source {
        SourceRule::MedianEigencentrality => median_eigencentral_node(&g, CENTRALITY_TOLERANCE)?,
        SourceRule::Node(v) if g.contains(v) => v,
        SourceRule::Node(v) => return Err(Error::NodeOutOfRange(v)),
    };
    let truth = simulate_path(&g, source, cfg.steps, &mut rng::stream(cfg.seed, &[rep_id, 1]))?;
    let y = truth.snapshot();
    let setup = t0.elapsed();

    let settings = InferenceSettings {
        m: cfg.m,
        loss: cfg.loss.clone(),
        pooling: cfg.pooling,
        seed: rng::stream(cfg.seed, &[rep_id, 2]).next_u64(),
        workers: 0,
        point_losses: vec![Loss::adit(), Loss::euclidean(), Loss::RumorCenter],
    };
    let table = table_in_current_pool(&g, &y, &settings)?;
    let truth_pvalue = table.pvalue(source).expect("the source is infected");
    let sizes: Vec<usize> = cfg
        .alphas
        .iter()
        .map(|&a| table.candidates.iter().filter(|c| c.pvalue > a).count())
        .collect();
    let covered = cfg.alphas.iter().map(|&a| truth_pvalue > a).collect();
    let mut estimates: Vec<NodeId> = (0..3)
        .map(|i| table.point_estimate(i).expect("nonempty table"))
        .collect();
    estimates.push(distance_center(&g, &y));
    Ok(ReplicationOutput {
        record: ReplicationRecord {
            replication: rep,
            source,
            truth_pvalue,
            sizes,
            covered,
            estimates,
        },
        setup,
        phases: table.timing,
    })
}

/// Runs every replication and aggregates coverage, set sizes and accuracy.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let outputs = run_in_pool(cfg.workers, || {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| run_replication(cfg, rep))
            .collect::<Vec<_>>()
    })?;
    let outputs: Vec<ReplicationOutput> = outputs.into_iter().collect::<Result<_>>()?;
    let total_wall = start.elapsed();

    let r = cfg.replications as f64;
    let levels = cfg
        .alphas
        .iter()
        .enumerate()
        .map(|(i, &alpha)| LevelSummary {
            alpha,
            confidence: 1.0 - alpha,
            coverage: outputs.iter().filter(|o| o.record.covered[i]).count() as f64 / r,
            mean_size: outputs.iter().map(|o| o.record.sizes[i] as f64).sum::<f64>() / r,
        })
        .collect();
    let accuracy = POINT_METHODS
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let hits = outputs
                .iter()
                .filter(|o| o.record.estimates[i] == o.record.source)
                .count();
            (m.to_string(), hits as f64 / r)
        })
        .collect();
    let mean_truth_pvalue = outputs.iter().map(|o| o.record.truth_pvalue).sum::<f64>() / r;

    let mut phases = PhaseTimings::default();
    let mut setup = Duration::ZERO;
    for o in &outputs {
        phases.add(&o.phases);
        setup += o.setup;
    }
    let timing = TimingSummary {
        workers: cfg.workers,
        pooling: cfg.pooling.to_string(),
        setup_s: setup.as_secs_f64(),
        pool_detection_s: phases.pooling.as_secs_f64(),
        sampling_s: phases.sampling.as_secs_f64(),
        scoring_s: phases.scoring.as_secs_f64(),
        inference_wall_s: phases.wall.as_secs_f64(),
        total_wall_s: total_wall.as_secs_f64(),
    };
    Ok(ExperimentReport {
        config: cfg
            .entries()
            .into_iter()
            .collect(),
        levels,
        accuracy,
        mean_truth_pvalue,
        replications: outputs.into_iter().map(|o| o.record).collect(),
        timing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::parse(
            "# tiny\nfamily=tree\nbranching=3\ndepth=3\nsteps=6\nm=50\nreplications=6\nalphas=0.1,0.5,0.9\nseed=3\n",
        )
        .unwrap()
    }

    #[test]
    fn parses_and_round_trips() {
        let cfg = small();
        assert_eq!(cfg.family, Family::Tree { branching: 3, depth: 3 });
        assert_eq!(cfg.alphas, vec![0.1, 0.5, 0.9]);
        assert_eq!(ExperimentConfig::parse(&cfg.to_text()).unwrap(), cfg);
        assert!(ExperimentConfig::parse("bogus=1").is_err());
        assert!(ExperimentConfig::parse("steps").is_err());
        let mut c = ExperimentConfig::default();
        c.set("family", "sw").unwrap();
        c.set("rewire_prob", "0.3").unwrap();
        assert_eq!(
            c.family,
            Family::SmallWorld {
                n: 200,
                ring_degree: 4,
                rewire_prob: 0.3
            }
        );
        c.set("alphas", "0").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn report_is_consistent() {
        let report = run_experiment(&small()).unwrap();
        assert_eq!(report.replications.len(), 6);
        let sizes: Vec<f64> = report.levels.iter().map(|l| l.mean_size).collect();
        assert!(sizes.windows(2).all(|w| w[1] <= w[0]));
        for r in &report.replications {
            assert!(r.sizes.windows(2).all(|w| w[1] <= w[0]));
        }
        for a in report.accuracy.values() {
            assert!((0.0..=1.0).contains(a));
        }
    }

    #[test]
    fn same_seed_same_report() {
        let mut cfg = small();
        cfg.pooling = Pooling::Both;
        let a = run_experiment(&cfg).unwrap().to_json();
        cfg.workers = 3;
        assert_eq!(run_experiment(&cfg).unwrap().to_json(), a);
    }

    #[test]
    fn writes_outputs() {
        let dir = std::env::temp_dir().join(format!("dsi-exp-{}", std::process::id()));
        run_experiment(&small()).unwrap().write_dir(&dir).unwrap();
        for f in ["report.json", "timing.json", "coverage.csv", "accuracy.csv", "replications.csv"] {
            assert!(dir.join(f).exists(), "{f}");
        }
        let cov = fs::read_to_string(dir.join("coverage.csv")).unwrap();
        assert!(cov.starts_with("alpha,confidence,coverage,mean_size\n"));
        fs::remove_dir_all(dir).unwrap();
    }
}
