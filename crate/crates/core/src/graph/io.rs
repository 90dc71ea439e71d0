use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{Graph, NodeId, NodeSet};
use crate::error::{Error, Result};

/// Parses a whitespace-separated edge list. `#` starts a comment line and
/// blank lines are skipped. The node count is one more than the largest id.
pub fn load_edge_list(text: &str) -> Result<Graph> {
    read_edge_list(text.as_bytes())
}

pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Graph> {
    let mut edges = Vec::new();
    let mut max_id: Option<NodeId> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let mut next_id = || -> Result<NodeId> {
            let tok = tokens.next().ok_or_else(|| Error::Parse {
                line: lineno,
                message: "expected two node ids".into(),
            })?;
            tok.parse::<NodeId>().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid node id {tok:?}"),
            })
        };
        let u = next_id()?;
        let v = next_id()?;
        if let Some(extra) = tokens.next() {
            return Err(Error::Parse {
                line: lineno,
                message: format!("unexpected token {extra:?}"),
            });
        }
        if u == v {
            return Err(Error::SelfLoop {
                line: lineno,
                node: u,
            });
        }
        max_id = Some(max_id.map_or(u.max(v), |m| m.max(u).max(v)));
        edges.push((u, v));
    }
    let n = max_id.map_or(0, |m| m as usize + 1);
    Graph::from_edges(n, edges)
}

pub fn write_edge_list<W: Write>(g: &Graph, mut out: W) -> Result<()> {
    writeln!(out, "# nodes {} edges {}", g.node_count(), g.edge_count())?;
    for (u, v) in g.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

/// Mapping between external string labels and dense node ids, read from
/// `label<TAB>id` lines.
#[derive(Clone, Debug, Default)]
pub struct LabelMap {
    by_label: HashMap<String, NodeId>,
    by_id: HashMap<NodeId, String>,
}

impl LabelMap {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = LabelMap::default();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (label, id) = line.rsplit_once('\t').ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: "expected label<TAB>id".into(),
            })?;
            let id: NodeId = id.trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("invalid node id {id:?}"),
            })?;
            map.by_label.insert(label.to_string(), id);
            map.by_id.insert(id, label.to_string());
        }
        Ok(map)
    }

    pub fn id(&self, label: &str) -> Option<NodeId> {
        self.by_label.get(label).copied()
    }

    /// Label for `id`, falling back to the decimal id.
    pub fn label(&self, id: NodeId) -> String {
        self.by_id
            .get(&id)
            .cloned()
            .unwrap_or_else(|| id.to_string())
    }
}

/// Parses one node per line, as an id or (when `labels` is given) a label.
pub fn parse_node_list(text: &str, labels: Option<&LabelMap>) -> Result<NodeSet> {
    let mut nodes = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let tok = line.trim();
        if tok.is_empty() || tok.starts_with('#') {
            continue;
        }
        let id = labels
            .and_then(|m| m.id(tok))
            .or_else(|| tok.parse().ok())
            .ok_or_else(|| Error::Parse {
                line: idx + 1,
                message: format!("unknown node {tok:?}"),
            })?;
        nodes.push(id);
    }
    Ok(nodes.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_list() {
        let g = load_edge_list("0 1\n1 2").unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        let degrees: Vec<_> = g.nodes().map(|v| g.degree(v)).collect();
        assert_eq!(degrees, vec![1, 2, 1]);
    }

    #[test]
    fn duplicates_collapse() {
        let g = load_edge_list("0 1\n0 1").unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn self_loop_reports_line() {
        match load_edge_list("3 3") {
            Err(Error::SelfLoop { line: 1, node: 3 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_token_reports_line() {
        match load_edge_list("# header\n0 1\n\n1 x\n") {
            Err(Error::Parse { line: 4, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            load_edge_list("0"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn write_then_load() {
        let g = load_edge_list("0 2\n2 1\n3 0").unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        assert_eq!(read_edge_list(&buf[..]).unwrap(), g);
    }

    #[test]
    fn labels_resolve_both_ways() {
        let map = LabelMap::parse("Wuhan\t0\nBeijing\t1\n").unwrap();
        assert_eq!(map.id("Beijing"), Some(1));
        assert_eq!(map.label(0), "Wuhan");
        assert_eq!(map.label(7), "7");
        let set = parse_node_list("Wuhan\n2\n", Some(&map)).unwrap();
        assert_eq!(set, NodeSet::from([0, 2]));
        assert!(parse_node_list("Paris\n", Some(&map)).is_err());
    }
}
