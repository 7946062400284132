//! Train/validation/test splits for the three tasks.
//!
//! All sampling is seeded and deterministic; splits serialize to JSON so a
//! run can be reproduced or audited later.

use crate::error::{Error, Result};
use crate::graph::Graph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Edge-level split for link prediction. Negatives are uniformly sampled
/// non-edges, matched in count to the positives of each bucket.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkSplit {
    pub seed: u64,
    pub train_pos: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

/// Pairwise node-classification split: positives are same-label pairs,
/// negatives different-label pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSplit {
    pub seed: u64,
    pub train_pos: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
}

/// Node-classification split with fixed per-class counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub seed: u64,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// A split tagged with its task, as stored on disk next to a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "lowercase")]
pub enum TaskSplit {
    Link(LinkSplit),
    Pair(PairSplit),
    Node(NodeSplit),
}

fn check_ratios(ratios: (f64, f64, f64)) -> Result<()> {
    let (a, b, c) = ratios;
    if a <= 0.0 || b <= 0.0 || c <= 0.0 || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::Invalid(format!(
            "split ratios must be positive and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    Ok(())
}

/// Splits `items` into train/val/test buckets by count.
fn bucket<T>(mut items: Vec<T>, ratios: (f64, f64, f64), what: &str) -> Result<[Vec<T>; 3]> {
    let m = items.len();
    let n_train = (ratios.0 * m as f64).round() as usize;
    let n_val = (ratios.1 * m as f64).round() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= m {
        return Err(Error::Invalid(format!(
            "cannot split {m} {what} into non-empty train/val/test buckets"
        )));
    }
    let test = items.split_off(n_train + n_val);
    let val = items.split_off(n_train);
    Ok([items, val, test])
}

fn canonical(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

/// Draws `count` distinct pairs that satisfy `admit` and are not already in
/// `taken`. Switches to exhaustive enumeration when the admissible set is
/// small relative to the request, so sampling always terminates.
fn sample_pairs(
    n: usize,
    count: usize,
    available: usize,
    taken: &HashSet<(usize, usize)>,
    admit: impl Fn(usize, usize) -> bool,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(usize, usize)>> {
    if available < count {
        return Err(Error::Negatives {
            needed: count,
            available,
        });
    }
    if available < 4 * count {
        // Dense regime: enumerate every admissible pair and shuffle.
        let mut pool = Vec::with_capacity(available);
        for u in 0..n {
            for v in (u + 1)..n {
                if admit(u, v) && !taken.contains(&(u, v)) {
                    pool.push((u, v));
                }
            }
        }
        pool.shuffle(rng);
        pool.truncate(count);
        return Ok(pool);
    }
    let mut chosen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u == v {
            continue;
        }
        let pair = canonical(u, v);
        if admit(pair.0, pair.1) && !taken.contains(&pair) && chosen.insert(pair) {
            out.push(pair);
        }
    }
    Ok(out)
}

/// 80/10/10 by default; positives partition the edge set, negatives are
/// count-matched non-edges disjoint from the edges and from each other.
pub fn split_edges(g: &Graph, ratios: (f64, f64, f64), seed: u64) -> Result<LinkSplit> {
    check_ratios(ratios)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut rng);
    let [train_pos, val_pos, test_pos] = bucket(edges, ratios, "edges")?;

    let m = g.num_edges();
    let all_pairs = g.num_nodes * (g.num_nodes - 1) / 2;
    let edge_set: HashSet<(usize, usize)> = g.edges().iter().copied().collect();
    let negatives = sample_pairs(
        g.num_nodes,
        m,
        all_pairs - m,
        &edge_set,
        |_, _| true,
        &mut rng,
    )?;
    let counts = [train_pos.len(), val_pos.len(), test_pos.len()];
    let mut it = negatives.into_iter();
    let mut buckets: Vec<Vec<(usize, usize)>> =
        counts.iter().map(|&c| (&mut it).take(c).collect()).collect();
    let test_neg = buckets.pop().unwrap();
    let val_neg = buckets.pop().unwrap();
    let train_neg = buckets.pop().unwrap();
    Ok(LinkSplit {
        seed,
        train_pos,
        val_pos,
        test_pos,
        train_neg,
        val_neg,
        test_neg,
    })
}

/// Same-label pairs as positives (subsampled to `max_positive` when needed),
/// count-matched different-label pairs as negatives, both bucketed by ratio.
pub fn split_pairs(
    g: &Graph,
    max_positive: usize,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<PairSplit> {
    check_ratios(ratios)?;
    let labels = g
        .labels
        .as_ref()
        .ok_or_else(|| Error::Invalid("pairwise split needs node labels".into()))?;
    let distinct: HashSet<u32> = labels.iter().copied().collect();
    if distinct.len() < 2 {
        return Err(Error::Invalid(
            "pairwise split needs at least two distinct labels".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.num_nodes;
    let mut positives = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if labels[u] == labels[v] {
                positives.push((u, v));
            }
        }
    }
    let same_total = positives.len();
    positives.shuffle(&mut rng);
    positives.truncate(max_positive);
    let count = positives.len();

    let diff_total = n * (n - 1) / 2 - same_total;
    let negatives = sample_pairs(
        n,
        count,
        diff_total,
        &HashSet::new(),
        |u, v| labels[u] != labels[v],
        &mut rng,
    )?;

    let [train_pos, val_pos, test_pos] = bucket(positives, ratios, "positive pairs")?;
    let counts = [train_pos.len(), val_pos.len(), test_pos.len()];
    let mut it = negatives.into_iter();
    let mut buckets: Vec<Vec<(usize, usize)>> =
        counts.iter().map(|&c| (&mut it).take(c).collect()).collect();
    let test_neg = buckets.pop().unwrap();
    let val_neg = buckets.pop().unwrap();
    let train_neg = buckets.pop().unwrap();
    Ok(PairSplit {
        seed,
        train_pos,
        val_pos,
        test_pos,
        train_neg,
        val_neg,
        test_neg,
    })
}

/// Per-class split: `per_class.0` training and `per_class.1` validation
/// nodes from every class, the remainder (at least one node) as test.
pub fn split_nodes(g: &Graph, per_class: (usize, usize), seed: u64) -> Result<NodeSplit> {
    let labels = g
        .labels
        .as_ref()
        .ok_or_else(|| Error::Invalid("node split needs node labels".into()))?;
    let (n_train, n_val) = per_class;
    if n_train == 0 || n_val == 0 {
        return Err(Error::Invalid(
            "per-class train and validation counts must be positive".into(),
        ));
    }
    let num_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in 0..num_classes as u32 {
        let mut members: Vec<usize> = (0..g.num_nodes).filter(|&i| labels[i] == class).collect();
        if members.len() < n_train + n_val + 1 {
            return Err(Error::ClassTooSmall {
                class,
                size: members.len(),
                needed: n_train + n_val + 1,
            });
        }
        members.shuffle(&mut rng);
        train_idx.extend_from_slice(&members[..n_train]);
        val_idx.extend_from_slice(&members[n_train..n_train + n_val]);
        test_idx.extend_from_slice(&members[n_train + n_val..]);
    }
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(NodeSplit {
        seed,
        train_idx,
        val_idx,
        test_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{gen_communities, gen_grid};

    #[test]
    fn test_grid_link_split_counts() {
        let g = gen_grid(20, 20).unwrap();
        assert_eq!(g.num_edges(), 760);
        let s = split_edges(&g, (0.8, 0.1, 0.1), 0).unwrap();
        assert_eq!(s.train_pos.len(), 608);
        assert_eq!(s.val_pos.len(), 76);
        assert_eq!(s.test_pos.len(), 76);
        assert_eq!(s.train_neg.len(), 608);
        assert_eq!(s.val_neg.len(), 76);
        assert_eq!(s.test_neg.len(), 76);
    }

    #[test]
    fn test_link_split_partitions_edges_and_negatives_are_non_edges() {
        let g = gen_grid(8, 8).unwrap();
        let s = split_edges(&g, (0.8, 0.1, 0.1), 1).unwrap();
        let mut all_pos: Vec<_> = s
            .train_pos
            .iter()
            .chain(&s.val_pos)
            .chain(&s.test_pos)
            .copied()
            .collect();
        all_pos.sort_unstable();
        assert_eq!(all_pos, g.edges());

        let negs: Vec<_> = s
            .train_neg
            .iter()
            .chain(&s.val_neg)
            .chain(&s.test_neg)
            .copied()
            .collect();
        let distinct: HashSet<_> = negs.iter().copied().collect();
        assert_eq!(distinct.len(), negs.len(), "negatives must be distinct");
        for &(u, v) in &negs {
            assert!(u < v);
            assert!(!g.has_edge(u, v), "negative ({u}, {v}) is an edge");
        }
    }

    #[test]
    fn test_link_split_deterministic_and_seed_sensitive() {
        let g = gen_grid(6, 6).unwrap();
        assert_eq!(
            split_edges(&g, (0.8, 0.1, 0.1), 9).unwrap(),
            split_edges(&g, (0.8, 0.1, 0.1), 9).unwrap()
        );
        assert_ne!(
            split_edges(&g, (0.8, 0.1, 0.1), 9).unwrap(),
            split_edges(&g, (0.8, 0.1, 0.1), 10).unwrap()
        );
    }

    #[test]
    fn test_link_split_rejects_graph_with_too_few_non_edges() {
        // Near-complete graph: 5 nodes, all 10 edges present.
        let mut edges = Vec::new();
        for u in 0..5 {
            for v in (u + 1)..5 {
                edges.push((u, v));
            }
        }
        let g = Graph::new(5, edges).unwrap();
        assert!(matches!(
            split_edges(&g, (0.8, 0.1, 0.1), 0),
            Err(Error::Negatives { .. })
        ));
    }

    #[test]
    fn test_bad_ratios_rejected() {
        let g = gen_grid(5, 5).unwrap();
        assert!(split_edges(&g, (0.8, 0.1, 0.2), 0).is_err());
        assert!(split_edges(&g, (1.0, -0.1, 0.1), 0).is_err());
    }

    #[test]
    fn test_communities_pair_split_candidates() {
        // 20 communities of 20 nodes: 20 * C(20, 2) = 3800 same-label pairs.
        let g = gen_communities(20, 20, 0.0, 0).unwrap();
        let s = split_pairs(&g, 10_000, (0.8, 0.1, 0.1), 0).unwrap();
        let total = s.train_pos.len() + s.val_pos.len() + s.test_pos.len();
        assert_eq!(total, 3800);
        assert_eq!(s.train_pos.len(), 3040);
        let labels = g.labels.as_ref().unwrap();
        for &(u, v) in s.train_pos.iter().chain(&s.val_pos).chain(&s.test_pos) {
            assert_eq!(labels[u], labels[v]);
        }
        for &(u, v) in s.train_neg.iter().chain(&s.val_neg).chain(&s.test_neg) {
            assert_ne!(labels[u], labels[v]);
        }
    }

    #[test]
    fn test_pair_split_respects_max_positive() {
        let g = gen_communities(4, 10, 0.0, 0).unwrap();
        let s = split_pairs(&g, 100, (0.8, 0.1, 0.1), 3).unwrap();
        let total = s.train_pos.len() + s.val_pos.len() + s.test_pos.len();
        assert_eq!(total, 100);
        let neg_total = s.train_neg.len() + s.val_neg.len() + s.test_neg.len();
        assert_eq!(neg_total, 100);
    }

    #[test]
    fn test_pair_split_needs_labels_and_two_classes() {
        let g = gen_grid(4, 4).unwrap();
        assert!(split_pairs(&g, 100, (0.8, 0.1, 0.1), 0).is_err());
        let one_class = Graph::new(4, vec![(0, 1), (2, 3)])
            .unwrap()
            .with_labels(vec![0, 0, 0, 0])
            .unwrap();
        assert!(split_pairs(&one_class, 100, (0.8, 0.1, 0.1), 0).is_err());
    }

    #[test]
    fn test_communities_node_split_counts() {
        let g = gen_communities(20, 20, 0.01, 0).unwrap();
        let s = split_nodes(&g, (5, 5), 0).unwrap();
        assert_eq!(s.train_idx.len(), 100);
        assert_eq!(s.val_idx.len(), 100);
        assert_eq!(s.test_idx.len(), 200);
        // Disjoint cover of all nodes.
        let mut all: Vec<usize> = s
            .train_idx
            .iter()
            .chain(&s.val_idx)
            .chain(&s.test_idx)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..400).collect::<Vec<_>>());
        // Per-class counts hold exactly.
        let labels = g.labels.as_ref().unwrap();
        for class in 0..20u32 {
            let c = s.train_idx.iter().filter(|&&i| labels[i] == class).count();
            assert_eq!(c, 5, "class {class}");
        }
    }

    #[test]
    fn test_node_split_class_too_small() {
        let g = Graph::new(4, vec![(0, 1), (2, 3)])
            .unwrap()
            .with_labels(vec![0, 0, 1, 1])
            .unwrap();
        assert!(matches!(
            split_nodes(&g, (1, 1), 0),
            Err(Error::ClassTooSmall { .. })
        ));
    }

    #[test]
    fn test_split_json_round_trip() {
        let g = gen_communities(4, 8, 0.05, 2).unwrap();
        let link = TaskSplit::Link(split_edges(&g, (0.8, 0.1, 0.1), 7).unwrap());
        let pair = TaskSplit::Pair(split_pairs(&g, 50, (0.8, 0.1, 0.1), 7).unwrap());
        let node = TaskSplit::Node(split_nodes(&g, (2, 2), 7).unwrap());
        for split in [link, pair, node] {
            let text = serde_json::to_string(&split).unwrap();
            let back: TaskSplit = serde_json::from_str(&text).unwrap();
            assert_eq!(back, split);
        }
    }
}
