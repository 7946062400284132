//! Undirected graphs with optional node features and labels, plus the
//! symmetric degree-normalized propagation operator built from them.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;
use serde::{Deserialize, Serialize};

/// Simple undirected graph. Edges are stored canonically as (u, v) with
/// u < v, sorted and deduplicated; self-loops are rejected at construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub num_nodes: usize,
    edges: Vec<(usize, usize)>,
    pub features: Option<DenseMatrix<f64>>,
    pub labels: Option<Vec<u32>>,
}

impl Graph {
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Graph> {
        let mut canonical = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(Error::Graph(format!("self-loop at node {u}")));
            }
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            canonical.push((u.min(v), u.max(v)));
        }
        canonical.sort_unstable();
        if let Some(w) = canonical.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Graph(format!(
                "duplicate edge ({}, {})",
                w[0].0, w[0].1
            )));
        }
        Ok(Graph {
            num_nodes,
            edges: canonical,
            features: None,
            labels: None,
        })
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn with_features(mut self, features: DenseMatrix<f64>) -> Result<Graph> {
        if features.rows != self.num_nodes {
            return Err(Error::Mismatch {
                context: "feature matrix rows".into(),
                expected: self.num_nodes.to_string(),
                found: features.rows.to_string(),
            });
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<u32>) -> Result<Graph> {
        if labels.len() != self.num_nodes {
            return Err(Error::Mismatch {
                context: "label vector length".into(),
                expected: self.num_nodes.to_string(),
                found: labels.len().to_string(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.num_nodes];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).is_ok()
    }

    /// Number of classes implied by the labels (max label + 1).
    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().max().map_or(0, |&m| m as usize + 1))
    }
}

/// Binary symmetric adjacency with zero diagonal.
pub fn build_adjacency<T: Scalar>(g: &Graph) -> SparseMatrix<T> {
    let mut entries = Vec::with_capacity(2 * g.num_edges());
    for &(u, v) in g.edges() {
        entries.push((u, v, T::one()));
        entries.push((v, u, T::one()));
    }
    SparseMatrix::from_entries(g.num_nodes, g.num_nodes, &entries)
}

/// Symmetric normalization with implicit self-loops:
/// entry (i, j) = 1 / sqrt((deg_i + 1) * (deg_j + 1)) for every edge and for
/// the diagonal. An isolated node keeps a diagonal entry of exactly 1.
pub fn normalize_adjacency<T: Scalar>(a: &SparseMatrix<T>) -> SparseMatrix<T> {
    assert_eq!(a.rows, a.cols, "adjacency must be square");
    let n = a.rows;
    let deg_plus_one: Vec<f64> = (0..n)
        .map(|i| (a.row_ptr[i + 1] - a.row_ptr[i] + 1) as f64)
        .collect();
    // One square root per entry, on the product of the two degree terms, so
    // that hand-checkable entries like 1/sqrt(4) come out exact.
    let weight =
        |i: usize, j: usize| T::from_f64(1.0 / (deg_plus_one[i] * deg_plus_one[j]).sqrt());
    let mut entries = Vec::with_capacity(a.nnz() + n);
    for i in 0..n {
        let (cols, _) = a.row(i);
        for &j in cols {
            entries.push((i, j, weight(i, j)));
        }
        entries.push((i, i, weight(i, i)));
    }
    SparseMatrix::from_entries(n, n, &entries)
}

/// Normalized propagation operator straight from a graph.
pub fn adjacency_normalized<T: Scalar>(g: &Graph) -> SparseMatrix<T> {
    normalize_adjacency(&build_adjacency(g))
}

/// Bijection on node indices; position i holds the image of node i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodePermutation(Vec<usize>);

impl NodePermutation {
    pub fn new(perm: Vec<usize>) -> Result<NodePermutation> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || seen[p] {
                return Err(Error::Invalid(format!(
                    "permutation of length {n} is not a bijection"
                )));
            }
            seen[p] = true;
        }
        Ok(NodePermutation(perm))
    }

    pub fn identity(n: usize) -> NodePermutation {
        NodePermutation((0..n).collect())
    }

    pub fn random(n: usize, rng: &mut impl rand::Rng) -> NodePermutation {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        NodePermutation(perm)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.0[i]
    }

    pub fn inverse(&self) -> NodePermutation {
        let mut inv = vec![0usize; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        NodePermutation(inv)
    }

    /// P * X: row i of `x` moves to row image(i).
    pub fn apply_rows<T: Scalar>(&self, x: &DenseMatrix<T>) -> DenseMatrix<T> {
        assert_eq!(x.rows, self.0.len(), "permutation length mismatch");
        let mut out = DenseMatrix::zeros(x.rows, x.cols);
        for i in 0..x.rows {
            out.row_mut(self.0[i]).copy_from_slice(x.row(i));
        }
        out
    }
}

/// Relabels nodes: edge (u, v) becomes (image(u), image(v)); feature and
/// label rows move with their nodes.
pub fn apply_permutation(g: &Graph, p: &NodePermutation) -> Graph {
    assert_eq!(p.len(), g.num_nodes, "permutation length mismatch");
    let edges = g
        .edges()
        .iter()
        .map(|&(u, v)| (p.image(u), p.image(v)))
        .collect();
    let mut out = Graph::new(g.num_nodes, edges).expect("relabeling preserves validity");
    if let Some(f) = &g.features {
        out = out.with_features(p.apply_rows(f)).unwrap();
    }
    if let Some(l) = &g.labels {
        let mut labels = vec![0u32; g.num_nodes];
        for (i, &lab) in l.iter().enumerate() {
            labels[p.image(i)] = lab;
        }
        out = out.with_labels(labels).unwrap();
    }
    out
}

/// Disjoint union of a graph with a copy of itself. Node i of the copy gets
/// index i + N; the returned vector maps each original node to its twin.
pub fn duplicate_graph(g: &Graph) -> (Graph, Vec<usize>) {
    let n = g.num_nodes;
    let mut edges = g.edges().to_vec();
    edges.extend(g.edges().iter().map(|&(u, v)| (u + n, v + n)));
    let mut out = Graph::new(2 * n, edges).expect("disjoint union preserves validity");
    if let Some(f) = &g.features {
        let mut data = f.data.clone();
        data.extend_from_slice(&f.data);
        out = out
            .with_features(DenseMatrix::from_vec(2 * n, f.cols, data))
            .unwrap();
    }
    if let Some(l) = &g.labels {
        let mut labels = l.clone();
        labels.extend_from_slice(l);
        out = out.with_labels(labels).unwrap();
    }
    (out, (n..2 * n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Graph {
        Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn test_edges_canonicalized() {
        let g = Graph::new(4, vec![(3, 1), (0, 2)]).unwrap();
        assert_eq!(g.edges(), &[(0, 2), (1, 3)]);
        assert!(g.has_edge(1, 3));
        assert!(g.has_edge(3, 1));
        assert!(!g.has_edge(0, 1));
    }

    #[test]
    fn test_self_loop_rejected() {
        assert!(matches!(
            Graph::new(3, vec![(1, 1)]),
            Err(Error::Graph(msg)) if msg.contains("self-loop")
        ));
    }

    #[test]
    fn test_duplicate_and_reversed_edges_rejected() {
        assert!(Graph::new(3, vec![(0, 1), (0, 1)]).is_err());
        assert!(Graph::new(3, vec![(0, 1), (1, 0)]).is_err());
    }

    #[test]
    fn test_triangle_normalization_all_one_third() {
        // Every node has degree 2, so every stored entry is 1/3.
        let adj = adjacency_normalized::<f64>(&triangle());
        assert_eq!(adj.nnz(), 9);
        for i in 0..3 {
            for j in 0..3 {
                assert!((adj.get(i, j) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn test_two_node_path_normalization_and_propagation() {
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let adj = adjacency_normalized::<f64>(&g);
        for i in 0..2 {
            for j in 0..2 {
                assert!((adj.get(i, j) - 0.5).abs() < 1e-15);
            }
        }
        let x = DenseMatrix::from_rows(&[vec![1.0], vec![3.0]]);
        assert_eq!(adj.spmm(&x).data, vec![2.0, 2.0]);
    }

    #[test]
    fn test_isolated_node_diagonal_is_one() {
        let g = Graph::new(3, vec![(0, 1)]).unwrap();
        let adj = adjacency_normalized::<f64>(&g);
        assert_eq!(adj.get(2, 2), 1.0);
        assert_eq!(adj.get(2, 0), 0.0);
    }

    #[test]
    fn test_normalized_adjacency_exactly_symmetric() {
        let g = Graph::new(5, vec![(0, 1), (0, 2), (1, 2), (2, 3), (3, 4)]).unwrap();
        let adj = adjacency_normalized::<f64>(&g);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(adj.get(i, j), adj.get(j, i), "entry ({i}, {j})");
            }
        }
    }

    #[test]
    fn test_permutation_round_trip_returns_original() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50 {
            let n = 2 + (trial % 9);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.random_range(0..3) == 0 {
                        edges.push((u, v));
                    }
                }
            }
            let features = DenseMatrix::from_vec(
                n,
                2,
                (0..2 * n).map(|x| x as f64).collect(),
            );
            let g = Graph::new(n, edges)
                .unwrap()
                .with_features(features)
                .unwrap()
                .with_labels((0..n as u32).collect())
                .unwrap();
            let p = NodePermutation::random(n, &mut rng);
            let round_trip = apply_permutation(&apply_permutation(&g, &p), &p.inverse());
            assert_eq!(round_trip, g, "trial {trial}");
        }
    }

    #[test]
    fn test_permutation_rejects_non_bijection() {
        assert!(NodePermutation::new(vec![0, 0, 2]).is_err());
        assert!(NodePermutation::new(vec![0, 3]).is_err());
    }

    #[test]
    fn test_duplicate_graph_counts_and_twins() {
        let g = triangle()
            .with_features(DenseMatrix::from_rows(&[
                vec![1.0],
                vec![2.0],
                vec![3.0],
            ]))
            .unwrap()
            .with_labels(vec![0, 1, 2])
            .unwrap();
        let (dup, twins) = duplicate_graph(&g);
        assert_eq!(dup.num_nodes, 6);
        assert_eq!(dup.num_edges(), 6);
        assert_eq!(twins, vec![3, 4, 5]);
        assert!(!dup.has_edge(0, 3), "copies must stay disconnected");
        let f = dup.features.as_ref().unwrap();
        for i in 0..3 {
            assert_eq!(f.get(i, 0), f.get(i + 3, 0));
        }
        assert_eq!(dup.labels.as_ref().unwrap()[4], 1);
    }

    #[test]
    fn test_apply_rows_moves_rows_to_images() {
        let p = NodePermutation::new(vec![2, 0, 1]).unwrap();
        let x = DenseMatrix::from_rows(&[vec![10.0], vec![20.0], vec![30.0]]);
        let y = p.apply_rows(&x);
        assert_eq!(y.data, vec![20.0, 30.0, 10.0]);
    }
}
