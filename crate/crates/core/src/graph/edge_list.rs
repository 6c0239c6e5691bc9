//! Plain-text edge lists: `src dst [weight]` per line, 0-based, `#` comments.
//!
//! A comment of the form `# nodes: N` fixes the node count so isolated
//! trailing nodes survive a round trip; without it the count is one past the
//! largest index seen.

use std::fmt::Write as _;
use std::path::Path;

use super::Graph;
use crate::error::{Error, Result};

pub fn parse_edge_list(text: &str, directed: bool) -> Result<Graph> {
    parse_inner(text, directed, None)
}

pub fn read_edge_list(path: &Path, directed: bool) -> Result<Graph> {
    let text = std::fs::read_to_string(path)?;
    parse_inner(&text, directed, Some(path))
}

fn parse_inner(text: &str, directed: bool, path: Option<&Path>) -> Result<Graph> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.map(Path::to_path_buf),
        line,
        message,
    };
    let mut nodes_hint = None;
    let mut edges = Vec::new();
    let mut max_index = None;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(n) = comment.trim().strip_prefix("nodes:") {
                let n = n
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| err(lineno, format!("bad node count: {e}")))?;
                nodes_hint = Some(n);
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(err(
                lineno,
                format!("expected `src dst [weight]`, got {} fields", fields.len()),
            ));
        }
        let src: usize = fields[0]
            .parse()
            .map_err(|e| err(lineno, format!("bad source index `{}`: {e}", fields[0])))?;
        let dst: usize = fields[1].parse().map_err(|e| {
            err(
                lineno,
                format!("bad destination index `{}`: {e}", fields[1]),
            )
        })?;
        let weight = match fields.get(2) {
            Some(w) => w
                .parse::<f64>()
                .map_err(|e| err(lineno, format!("bad weight `{w}`: {e}")))?,
            None => 1.0,
        };
        if !weight.is_finite() {
            return Err(err(lineno, "weight is not finite".into()));
        }
        if src == dst {
            return Err(err(lineno, format!("self-loop at node {src}")));
        }
        max_index = Some(max_index.unwrap_or(0).max(src).max(dst));
        edges.push((lineno, src, dst, weight));
    }
    let n = match (nodes_hint, max_index) {
        (Some(n), Some(m)) if m >= n => {
            return Err(err(0, format!("node index {m} exceeds declared count {n}")))
        }
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => 0,
    };
    let mut graph = Graph::new(n, directed);
    for (lineno, s, d, w) in edges {
        graph
            .add_edge(s, d, w)
            .map_err(|e| err(lineno, e.to_string()))?;
    }
    Ok(graph)
}

/// Serializes a graph; weights use the shortest round-trip float format.
pub fn write_edge_list(graph: &Graph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# nodes: {}", graph.n());
    let _ = writeln!(out, "# directed: {}", graph.is_directed());
    for e in graph.edges() {
        let _ = writeln!(out, "{} {} {}", e.src, e.dst, e.weight);
    }
    out
}
