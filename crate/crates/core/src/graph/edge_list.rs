//! Plain-text edge list.
//!
//! ```text
//! # nodes=N
//! i j s
//! ```
//!
//! One observed pair per line with 1-based ids and `s` in `{0, 1}`. Pairs that
//! are not listed are unobserved or observed-zero depending on the reader's
//! `default_unobserved` flag. The writer emits every observed pair with
//! `i < j` in row-major order and never lists unobserved pairs, so reading
//! with `default_unobserved = true` reproduces the graph exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Entry, ObservedGraph};
use crate::error::{Error, Result};

/// Parses an edge-list file.
///
/// `n_nodes` may be omitted when the file carries a `# nodes=N` header; if
/// both are present they must agree.
pub fn read_edge_list(
    path: &Path,
    n_nodes: Option<usize>,
    default_unobserved: bool,
) -> Result<ObservedGraph> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, path, n_nodes, default_unobserved)
}

fn parse_edge_list(
    text: &str,
    path: &Path,
    n_nodes: Option<usize>,
    default_unobserved: bool,
) -> Result<ObservedGraph> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut header_n = None;
    let mut records: Vec<(usize, usize, usize, Entry)> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let lineno = k + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("nodes=") {
                let n: usize = v
                    .trim()
                    .parse()
                    .map_err(|_| err(lineno, format!("bad node count {v:?}")))?;
                header_n = Some(n);
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(lineno, format!("expected \"i j s\", got {line:?}")));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| err(lineno, format!("bad node id {:?}", fields[0])))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| err(lineno, format!("bad node id {:?}", fields[1])))?;
        let state = match fields[2] {
            "0" => Entry::ObservedZero,
            "1" => Entry::ObservedOne,
            other => return Err(err(lineno, format!("state must be 0 or 1, got {other:?}"))),
        };
        if i == 0 || j == 0 {
            return Err(err(lineno, "node ids are 1-based".into()));
        }
        if i == j {
            return Err(err(lineno, format!("self pair ({i},{i}) is implicit")));
        }
        records.push((lineno, i - 1, j - 1, state));
    }

    let n = match (n_nodes, header_n) {
        (Some(a), Some(b)) if a != b => {
            return Err(err(
                1,
                format!("header says {b} nodes but {a} were requested"),
            ))
        }
        (Some(a), _) | (None, Some(a)) => a,
        (None, None) => {
            return Err(err(
                1,
                "node count missing: no header and none given".into(),
            ))
        }
    };

    let fill = if default_unobserved {
        Entry::Unobserved
    } else {
        Entry::ObservedZero
    };
    let mut g = ObservedGraph::new(n, fill).map_err(|e| err(1, e.to_string()))?;
    let mut seen: HashMap<(usize, usize), (usize, Entry)> = HashMap::new();
    for (lineno, i, j, state) in records {
        if i >= n || j >= n {
            return Err(err(
                lineno,
                format!("node {} out of range 1..={n}", i.max(j) + 1),
            ));
        }
        let key = (i.min(j), i.max(j));
        if let Some(&(prev_line, prev)) = seen.get(&key) {
            if prev != state {
                return Err(err(
                    lineno,
                    format!(
                        "pair ({},{}) conflicts with line {prev_line}",
                        key.0 + 1,
                        key.1 + 1
                    ),
                ));
            }
            continue;
        }
        seen.insert(key, (lineno, state));
        g.set(i, j, state).expect("indices validated above");
    }
    Ok(g)
}

pub(crate) fn format_edge_list(graph: &ObservedGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# nodes={}", graph.n_nodes());
    for (i, j, e) in graph.pairs() {
        if e.is_observed() {
            let _ = writeln!(out, "{} {} {}", i + 1, j + 1, e.zero_filled());
        }
    }
    out
}

pub fn write_edge_list(graph: &ObservedGraph, path: &Path) -> Result<()> {
    fs::write(path, format_edge_list(graph)).map_err(|e| Error::io(path, e))
}
