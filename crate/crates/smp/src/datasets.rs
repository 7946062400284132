//! Synthetic graph generators and plain-text loaders.
//!
//! File formats:
//! - edge list: one `u v` pair of 0-based node indices per line, whitespace
//!   separated, `#` starts a comment line; each undirected edge appears
//!   exactly once (no weights, no reversed duplicates),
//! - features: one CSV row of floats per node,
//! - labels: one non-negative integer per node, one per line.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

/// Rectangular 4-neighbor lattice with `height * width` nodes and
/// `height * (width - 1) + width * (height - 1)` edges. Node (r, c) has
/// index `r * width + c`.
pub fn gen_grid(height: usize, width: usize) -> Result<Graph> {
    if height == 0 || width == 0 {
        return Err(Error::Invalid(format!(
            "grid dimensions must be positive, got {height}x{width}"
        )));
    }
    let mut edges = Vec::with_capacity(height * (width - 1) + width * (height - 1));
    for r in 0..height {
        for c in 0..width {
            let i = r * width + c;
            if c + 1 < width {
                edges.push((i, i + 1));
            }
            if r + 1 < height {
                edges.push((i, i + width));
            }
        }
    }
    Graph::new(height * width, edges)
}

/// Disjoint cliques ("caveman" graph) with a small fraction of edges
/// rewired. `ceil(rewire_frac * M)` randomly chosen edges each get one
/// uniformly chosen endpoint reassigned to a uniform random node; self-loops
/// and duplicates are rejected and redrawn, so the edge count is preserved
/// exactly. Labels carry the community index.
pub fn gen_communities(
    num_communities: usize,
    community_size: usize,
    rewire_frac: f64,
    seed: u64,
) -> Result<Graph> {
    if num_communities == 0 || community_size < 2 {
        return Err(Error::Invalid(format!(
            "need at least one community of size >= 2, got {num_communities} x {community_size}"
        )));
    }
    if !(0.0..=1.0).contains(&rewire_frac) {
        return Err(Error::Invalid(format!(
            "rewire fraction must lie in [0, 1], got {rewire_frac}"
        )));
    }
    let n = num_communities * community_size;
    let mut edges = Vec::new();
    for c in 0..num_communities {
        let base = c * community_size;
        for a in 0..community_size {
            for b in (a + 1)..community_size {
                edges.push((base + a, base + b));
            }
        }
    }
    let m = edges.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_rewire = (rewire_frac * m as f64).ceil() as usize;
    let mut edge_set: std::collections::HashSet<(usize, usize)> = edges.iter().copied().collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut rng);
    for &idx in order.iter().take(num_rewire) {
        let (u, v) = edges[idx];
        edge_set.remove(&(u, v));
        let mut attempts = 0;
        let replacement = loop {
            let keep = if rng.random_range(0..2) == 0 { u } else { v };
            let fresh = rng.random_range(0..n);
            let candidate = (keep.min(fresh), keep.max(fresh));
            if fresh != keep && !edge_set.contains(&candidate) {
                break candidate;
            }
            attempts += 1;
            if attempts > 10_000 {
                return Err(Error::Invalid(
                    "rewiring failed to find an admissible edge".into(),
                ));
            }
        };
        edge_set.insert(replacement);
        edges[idx] = replacement;
    }
    let labels = (0..n).map(|i| (i / community_size) as u32).collect();
    Graph::new(n, edges)?.with_labels(labels)
}

/// Attaches an all-ones n x 1 feature column.
pub fn constant_features(g: Graph) -> Result<Graph> {
    if g.features.is_some() {
        return Err(Error::Invalid("graph already has features".into()));
    }
    let n = g.num_nodes;
    g.with_features(DenseMatrix::filled(n, 1, 1.0))
}

pub const IDENTITY_FEATURE_CAP: usize = 5000;

/// Attaches one-hot (identity) features; N x N, guarded by a node cap.
pub fn identity_features(g: Graph) -> Result<Graph> {
    identity_features_with_cap(g, IDENTITY_FEATURE_CAP)
}

pub fn identity_features_with_cap(g: Graph, cap: usize) -> Result<Graph> {
    if g.features.is_some() {
        return Err(Error::Invalid("graph already has features".into()));
    }
    if g.num_nodes > cap {
        return Err(Error::Limit {
            what: "identity feature matrix size",
            actual: g.num_nodes,
            limit: cap,
        });
    }
    let n = g.num_nodes;
    g.with_features(DenseMatrix::identity(n))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Loads an edge-list graph, with optional feature and label files. The node
/// count is the largest index seen plus one, checked against the feature and
/// label row counts.
pub fn load_graph(
    edge_path: impl AsRef<Path>,
    feature_path: Option<&Path>,
    label_path: Option<&Path>,
) -> Result<Graph> {
    let edge_path = edge_path.as_ref();
    let text = std::fs::read_to_string(edge_path)?;
    let mut edges = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut max_idx = 0usize;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 2 {
            let hint = if tokens.len() == 3 {
                " (weighted edge lists are not supported)"
            } else {
                ""
            };
            return Err(parse_err(
                edge_path,
                lineno,
                format!("expected two node indices, found {}{hint}", tokens.len()),
            ));
        }
        let u: usize = tokens[0]
            .parse()
            .map_err(|_| parse_err(edge_path, lineno, format!("invalid node index `{}`", tokens[0])))?;
        let v: usize = tokens[1]
            .parse()
            .map_err(|_| parse_err(edge_path, lineno, format!("invalid node index `{}`", tokens[1])))?;
        if u == v {
            return Err(parse_err(edge_path, lineno, format!("self-loop at node {u}")));
        }
        let key = (u.min(v), u.max(v));
        if let Some(first) = seen.insert(key, lineno) {
            return Err(parse_err(
                edge_path,
                lineno,
                format!(
                    "edge ({u}, {v}) duplicates the edge first listed on line {first} \
                     (reversed orientations count as duplicates)"
                ),
            ));
        }
        max_idx = max_idx.max(u).max(v);
        edges.push((u, v));
    }
    if edges.is_empty() {
        return Err(Error::Invalid(format!(
            "{}: edge list contains no edges",
            edge_path.display()
        )));
    }
    let mut g = Graph::new(max_idx + 1, edges)?;
    if let Some(fp) = feature_path {
        g = g.with_features(load_features_csv(fp, max_idx + 1)?)?;
    }
    if let Some(lp) = label_path {
        g = g.with_labels(load_labels(lp, max_idx + 1)?)?;
    }
    Ok(g)
}

fn load_features_csv(path: &Path, expected_rows: usize) -> Result<DenseMatrix<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, lineno, format!("invalid float `{}`", tok.trim())))
            })
            .collect::<Result<_>>()?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(parse_err(path, lineno, "ragged feature row"));
        }
        rows.push(row);
    }
    if rows.len() != expected_rows {
        return Err(Error::Mismatch {
            context: format!("{}: feature rows", path.display()),
            expected: expected_rows.to_string(),
            found: rows.len().to_string(),
        });
    }
    Ok(DenseMatrix::from_rows(&rows))
}

fn load_labels(path: &Path, expected_rows: usize) -> Result<Vec<u32>> {
    let text = std::fs::read_to_string(path)?;
    let mut labels = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        labels.push(line.parse::<u32>().map_err(|_| {
            parse_err(path, lineno + 1, format!("invalid label `{line}`"))
        })?);
    }
    if labels.len() != expected_rows {
        return Err(Error::Mismatch {
            context: format!("{}: label rows", path.display()),
            expected: expected_rows.to_string(),
            found: labels.len().to_string(),
        });
    }
    Ok(labels)
}

pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "# undirected edge list: one `u v` pair per line, 0-based")?;
    for &(u, v) in g.edges() {
        writeln!(f, "{u} {v}")?;
    }
    Ok(())
}

pub fn write_labels(labels: &[u32], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for l in labels {
        writeln!(f, "{l}")?;
    }
    Ok(())
}
