use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use dsi_core::experiment::CENTRALITY_TOLERANCE;
use dsi_core::graph::{median_eigencentral_node, parse_node_list, read_edge_list, write_edge_list, LabelMap};
use dsi_core::pooling::{find_isomorphic_pairs, isomorphic_groups};
use dsi_core::rng::stream;
use dsi_core::{
    pvalue_table, recommend_m, simulate_path, ExperimentConfig, Graph, InferenceSettings, NodeId, Snapshot,
};

use crate::{ExperimentArgs, FamilyArgs, GenerateArgs, InferArgs, IsogroupsArgs, SimulateArgs};

/// Input and validation failures exit with 2, everything else with 1.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<dsi_core::Error>() {
        Some(dsi_core::Error::Io(_)) | None => 1,
        Some(_) => 2,
    }
}

/// Cap on the derived Monte Carlo size.
const MAX_DEFAULT_M: usize = 10_000;

/// The per-level error target is 0.006 at α = 0.1 and scales with the
/// binomial standard deviation elsewhere.
pub fn default_m(alphas: &[f64]) -> Result<usize> {
    let mut m = 1;
    for &a in alphas.iter().filter(|&&a| a > 0.0 && a < 1.0) {
        let target = 0.006 * 0.09f64.sqrt() / (a * (1.0 - a)).sqrt();
        m = m.max(recommend_m(a, target)?);
    }
    Ok(m.min(MAX_DEFAULT_M))
}

fn load_graph(path: &Path) -> Result<Graph> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_edge_list(BufReader::new(file))?)
}

fn load_labels(path: Option<&PathBuf>) -> Result<Option<LabelMap>> {
    path.map(|p| {
        let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        Ok(LabelMap::parse(&text)?)
    })
    .transpose()
}

fn load_snapshot(g: &Graph, path: &Path, labels: Option<&LabelMap>) -> Result<Snapshot> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let nodes = parse_node_list(&text, labels)?;
    Ok(Snapshot::new(g, nodes)?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Writes to `path`, or to standard output when absent.
fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn node_label(v: NodeId, labels: Option<&LabelMap>) -> String {
    labels.map_or_else(|| v.to_string(), |m| m.label(v))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

pub fn generate(args: GenerateArgs) -> Result<()> {
    let FamilyArgs {
        family,
        branching,
        depth,
        n,
        attach,
        ring_degree,
        rewire_prob,
    } = args.family;
    let mut cfg = ExperimentConfig::default();
    cfg.set("family", &family)?;
    let params = [
        ("branching", branching),
        ("depth", depth),
        ("n", n),
        ("attach", attach),
        ("ring_degree", ring_degree),
        ("rewire_prob", rewire_prob),
    ];
    for (key, value) in params {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    let g = cfg.family.generate(args.seed)?;
    let mut out = output(args.out.as_ref())?;
    write_edge_list(&g, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let g = load_graph(&args.graph)?;
    let source = match args.source {
        Some(v) if g.contains(v) => v,
        Some(v) => return Err(dsi_core::Error::NodeOutOfRange(v).into()),
        None => median_eigencentral_node(&g, CENTRALITY_TOLERANCE)?,
    };
    let z = simulate_path(&g, source, args.steps, &mut stream(args.seed, &[]))?;
    let mut snap = create(&args.snapshot)?;
    z.snapshot().write(&mut snap)?;
    snap.flush()?;
    fs::write(&args.truth, format!("{source}\n"))?;
    if let Some(path) = &args.trace {
        let mut out = create(path)?;
        z.write_csv(&mut out)?;
        out.flush()?;
    }
    println!("source {source}, {} infected", args.steps + 1);
    Ok(())
}

pub fn infer(args: InferArgs) -> Result<()> {
    let g = load_graph(&args.graph)?;
    let labels = load_labels(args.labels.as_ref())?;
    let y = load_snapshot(&g, &args.snapshot, labels.as_ref())?;
    if args.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(dsi_core::Error::InvalidParameter("alpha must lie in [0, 1]".into()).into());
    }
    let m = match args.m {
        Some(m) => m,
        None => default_m(&args.alphas)?,
    };
    let mut settings = InferenceSettings::new(m, args.loss.parse()?, args.pooling.parse()?, args.seed);
    settings.workers = args.workers;
    let table = pvalue_table(&g, &y, &settings)?;

    let several = args.alphas.len() > 1;
    for &alpha in &args.alphas {
        let set = table.confidence_set(alpha);
        let prefix = if several {
            with_suffix(&args.out, &format!("-alpha{alpha}"))
        } else {
            args.out.clone()
        };
        let json = serde_json::to_string_pretty(&set.to_json(labels.as_ref()))?;
        fs::write(with_suffix(&prefix, ".json"), json + "\n")?;
        let mut csv = create(&with_suffix(&prefix, ".csv"))?;
        set.write_csv(&mut csv, labels.as_ref())?;
        csv.flush()?;

        let members: Vec<String> = set.set.iter().map(|&v| node_label(v, labels.as_ref())).collect();
        println!(
            "alpha {alpha} (confidence {:.0}%): {} nodes [{}]",
            (1.0 - alpha) * 100.0,
            set.len(),
            members.join(" ")
        );
    }
    Ok(())
}

pub fn isogroups(args: IsogroupsArgs) -> Result<()> {
    let g = load_graph(&args.graph)?;
    let labels = load_labels(args.labels.as_ref())?;
    let y = load_snapshot(&g, &args.snapshot, labels.as_ref())?;
    let core = y.nodes().iter().filter(|&v| g.degree(v) >= 2).collect();
    let pairs = find_isomorphic_pairs(&g, &core);
    let groups = isomorphic_groups(&pairs, &y, &g)?;

    let label = |v: NodeId| match &labels {
        Some(map) => Value::from(map.label(v)),
        None => Value::from(v),
    };
    let doc: Vec<Value> = groups
        .iter()
        .map(|grp| {
            json!({
                "rep": label(grp.rep),
                "members": grp.members.iter().map(|m| json!({
                    "node": label(m.node),
                    "perm_cycles": m.perm.cycles().iter()
                        .map(|c| c.iter().map(|&v| label(v)).collect::<Vec<_>>())
                        .collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
                "satellites": grp.satellites.iter()
                    .map(|s| json!({"node": label(s.node), "neighbor": label(s.neighbor)}))
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    let mut out = output(args.out.as_ref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
    out.flush()?;
    Ok(())
}

pub fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    if let Ok(w) = std::env::var("DSI_WORKERS") {
        cfg.set("workers", &w).context("DSI_WORKERS")?;
    }
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply(&text)?;
    }
    // Family first, so its parameters land on the new family.
    let flags = [
        ("family", args.family),
        ("branching", args.branching),
        ("depth", args.depth),
        ("n", args.n),
        ("attach", args.attach),
        ("ring_degree", args.ring_degree),
        ("rewire_prob", args.rewire_prob),
        ("steps", args.steps),
        ("m", args.m),
        ("alphas", args.alphas),
        ("loss", args.loss),
        ("pooling", args.pooling),
        ("replications", args.replications),
        ("seed", args.seed),
        ("workers", args.workers),
        ("source", args.source),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }

    let report = dsi_core::run_experiment(&cfg)?;
    report.write_dir(&args.out_dir)?;
    fs::write(args.out_dir.join("config.txt"), cfg.to_text())?;

    println!("{:>6} {:>10} {:>9} {:>9}", "alpha", "confidence", "coverage", "mean_size");
    for l in &report.levels {
        println!("{:>6} {:>10.2} {:>9.3} {:>9.2}", l.alpha, l.confidence, l.coverage, l.mean_size);
    }
    for (method, acc) in &report.accuracy {
        println!("accuracy {method}: {acc:.3}");
    }
    println!("wrote {}", args.out_dir.display());
    Ok(())
}
