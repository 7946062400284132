//! Executable checks of the toolkit's structural guarantees.
//!
//! Four families of checks live here:
//!
//! * dense reference computations of the propagation operator and the
//!   pairwise proximity target, for cross-validating the sparse paths;
//! * the random-projection distance analysis: propagated stochastic
//!   signals approximate propagation-profile distances, with an explicit
//!   dimension bound for a requested error and confidence;
//! * permutation equivariance of the deterministic models;
//! * the twin-collision probe: duplicating every node yields automorphic
//!   twins that deterministic models cannot tell apart but stochastic
//!   signals separate.
//!
//! All dense materializations refuse graphs above [`DENSE_GUARD`] nodes.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{adjacency_normalized, apply_permutation, duplicate_graph, Graph, NodePermutation};
use crate::model::{forward, ModelParams, ModelSpec};
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;
use crate::stochastic::{sample_stochastic, StochasticConfig};
use serde::{Deserialize, Serialize};

/// Largest node count for which dense verification matrices are built.
pub const DENSE_GUARD: usize = 5000;
/// Deterministic models must be permutation-equivariant to this tolerance.
pub const EQUIVARIANCE_TOL: f64 = 1e-9;
/// Stochastic signals should separate automorphic twins by at least this much.
pub const SMP_GAP_MIN: f64 = 0.1;

/// Dense k-th power of the propagation operator, built by propagating the
/// identity columns. Verification only; the training paths never
/// materialize this.
pub fn propagation_power<T: Scalar>(adj: &SparseMatrix<T>, k: usize) -> Result<DenseMatrix<T>> {
    if adj.rows > DENSE_GUARD {
        return Err(Error::Limit {
            what: "dense verification matrix",
            actual: adj.rows,
            limit: DENSE_GUARD,
        });
    }
    Ok(adj.propagate(&DenseMatrix::identity(adj.rows), k))
}

/// Pairwise proximity target: with `M` the k-step propagation matrix, entry
/// (i, j) is the inner product of rows i and j of `M`.
pub fn proximity_target<T: Scalar>(adj: &SparseMatrix<T>, k: usize) -> Result<DenseMatrix<T>> {
    let m = propagation_power(adj, k)?;
    Ok(m.matmul_nt(&m))
}

/// Smallest stochastic dimension guaranteeing relative distance error at
/// most `eps` with probability at least `1 - delta` per pair, given the
/// largest propagation-profile row norm `r`. Requires `r > eps`: a profile
/// norm at or below the requested error leaves nothing to resolve.
pub fn d0_bound(eps: f64, delta: f64, max_row_norm: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    if delta.is_nan() || delta <= 0.0 || delta >= 1.0 {
        return Err(Error::Invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let r = max_row_norm;
    if r.is_nan() || r <= eps {
        return Err(Error::Invalid(format!(
            "max row norm {r} must exceed eps {eps} for the bound to hold"
        )));
    }
    Ok(4.0 * (4.0 / delta).ln() * r.powi(3) / (eps * eps * r - eps.powi(3)))
}

/// Proximity-recovery statistics for the stochastic decoder.
///
/// The reference is the proximity target `S`; the estimate is the decoder
/// `(1/dim) * E_prop * E_prop^T` built from propagated stochastic signals.
/// `errors` holds the absolute per-entry errors over the full matrix and
/// is omitted from serialized output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JlReport {
    pub k: usize,
    pub dim: usize,
    pub seed: u64,
    pub eps: f64,
    pub delta: f64,
    /// Dimension bound evaluated at (`eps`, `delta`, `max_row_norm`).
    pub d0: f64,
    /// Largest row norm of the k-step propagation matrix.
    pub max_row_norm: f64,
    pub entries: usize,
    pub max_error: f64,
    pub mean_error: f64,
    pub median_error: f64,
    /// Fraction of entries with error strictly below `eps`.
    pub success_rate: f64,
    #[serde(skip)]
    pub errors: Vec<f64>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "median of empty slice");
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Measures how well the dimension-`dim` stochastic decoder recovers the
/// proximity target, entry by entry.
pub fn jl_error_report<T: Scalar>(
    adj: &SparseMatrix<T>,
    k: usize,
    dim: usize,
    seed: u64,
    eps: f64,
    delta: f64,
) -> Result<JlReport> {
    assert!(dim > 0, "stochastic dimension must be positive");
    let n = adj.rows;
    let m = propagation_power(adj, k)?;
    let target = m.matmul_nt(&m);
    let max_row_norm = (0..n).map(|i| m.row_l2_norm(i)).fold(0.0_f64, f64::max);
    let d0 = d0_bound(eps, delta, max_row_norm)?;

    let e = sample_stochastic::<T>(n, &StochasticConfig::fixed(dim, seed), 0);
    let e_prop = adj.propagate(&e, k);
    let mut decoder = e_prop.matmul_nt(&e_prop);
    decoder.scale(T::from_f64(1.0 / dim as f64));

    let mut errors: Vec<f64> = target
        .data
        .iter()
        .zip(&decoder.data)
        .map(|(&s, &est)| (s.as_f64() - est.as_f64()).abs())
        .collect();
    errors.sort_by(|a, b| a.partial_cmp(b).expect("errors are finite"));
    let entry_count = errors.len();
    let successes = errors.iter().filter(|&&e| e < eps).count();
    Ok(JlReport {
        k,
        dim,
        seed,
        eps,
        delta,
        d0,
        max_row_norm,
        entries: entry_count,
        max_error: *errors.last().expect("at least one entry"),
        mean_error: errors.iter().sum::<f64>() / entry_count as f64,
        median_error: median(&errors),
        success_rate: successes as f64 / entry_count as f64,
        errors,
    })
}

/// Largest elementwise deviation between permuted-input outputs and
/// permuted outputs, with caller-supplied operators. The negative control
/// passes a deliberately perturbed permuted operator here.
pub fn equivariance_deviation_with_adj<T: Scalar>(
    spec: &ModelSpec,
    params: &ModelParams<T>,
    adj: &SparseMatrix<T>,
    features: &DenseMatrix<T>,
    perm_adj: &SparseMatrix<T>,
    perm: &NodePermutation,
) -> f64 {
    let (h, _) = forward(spec, params, adj, features, None);
    let perm_features = perm.apply_rows(features);
    let (h_perm, _) = forward(spec, params, perm_adj, &perm_features, None);
    let mut worst = 0.0_f64;
    for i in 0..h.rows {
        let a = h.row(i);
        let b = h_perm.row(perm.image(i));
        for (x, y) in a.iter().zip(b) {
            worst = worst.max((x.as_f64() - y.as_f64()).abs());
        }
    }
    worst
}

/// Checks that relabeling nodes commutes with the model: running on the
/// permuted graph then un-permuting the rows reproduces the original
/// output. Only meaningful for models without stochastic input.
pub fn check_equivariance<T: Scalar>(
    spec: &ModelSpec,
    params: &ModelParams<T>,
    g: &Graph,
    perm: &NodePermutation,
) -> Result<f64> {
    if spec.kind.uses_stochastic() {
        return Err(Error::Invalid(format!(
            "{} uses stochastic input and is deliberately not equivariant",
            spec.kind
        )));
    }
    let features = g
        .features
        .as_ref()
        .ok_or_else(|| Error::Invalid("equivariance check needs node features".into()))?
        .cast::<T>();
    let adj = adjacency_normalized::<T>(g);
    let permuted = apply_permutation(g, perm);
    let perm_adj = adjacency_normalized::<T>(&permuted);
    Ok(equivariance_deviation_with_adj(
        spec, params, &adj, &features, &perm_adj, perm,
    ))
}

/// Embedding distances between each node and its automorphic twin after
/// duplicating the whole graph as a disjoint copy.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TwinGapReport {
    pub max_gap: f64,
    pub min_gap: f64,
    pub mean_gap: f64,
}

/// Duplicates the graph so every node gains an automorphic twin, runs the
/// model once, and reports the embedding gaps between twins. Deterministic
/// models must collapse the gaps to zero; stochastic signals keep them open.
pub fn check_automorphic_collision<T: Scalar>(
    spec: &ModelSpec,
    params: &ModelParams<T>,
    g: &Graph,
    scfg: &StochasticConfig,
) -> Result<TwinGapReport> {
    let (doubled, twins) = duplicate_graph(g);
    let features = doubled
        .features
        .as_ref()
        .ok_or_else(|| Error::Invalid("collision check needs node features".into()))?
        .cast::<T>();
    let adj = adjacency_normalized::<T>(&doubled);
    let e = spec
        .kind
        .uses_stochastic()
        .then(|| sample_stochastic::<T>(doubled.num_nodes, scfg, 0));
    let (h, _) = forward(spec, params, &adj, &features, e.as_ref());
    let mut max_gap = 0.0_f64;
    let mut min_gap = f64::INFINITY;
    let mut sum = 0.0;
    for (i, &twin) in twins.iter().enumerate() {
        let gap = h.row_diff_l2(i, &h, twin);
        max_gap = max_gap.max(gap);
        min_gap = min_gap.min(gap);
        sum += gap;
    }
    Ok(TwinGapReport {
        max_gap,
        min_gap,
        mean_gap: sum / twins.len() as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{constant_features, gen_grid};
    use crate::model::{init_params, ModelKind, ModelSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn test_propagation_power_hand_checked_graphs() {
        // Triangle: every entry of the normalized operator is 1/3.
        let tri = Graph::new(3, vec![(0, 1), (0, 2), (1, 2)]).unwrap();
        let s = propagation_power(&adjacency_normalized::<f64>(&tri), 1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.get(i, j) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        // Single edge: both degrees 1, every entry 1/2.
        let path = Graph::new(2, vec![(0, 1)]).unwrap();
        let s = propagation_power(&adjacency_normalized::<f64>(&path), 1).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((s.get(i, j) - 0.5).abs() < 1e-15);
            }
        }
        // Edgeless graph: operator is the identity at any power.
        let empty = Graph::new(3, vec![]).unwrap();
        let s = propagation_power(&adjacency_normalized::<f64>(&empty), 3).unwrap();
        assert_eq!(s, DenseMatrix::identity(3));
    }

    #[test]
    fn test_propagation_power_matches_dense_matmul_oracle() {
        let g = gen_grid(5, 5).unwrap();
        let adj = adjacency_normalized::<f64>(&g);
        let a = adj.to_dense();
        let mut oracle = DenseMatrix::<f64>::identity(25);
        for k in 0..4 {
            let fast = propagation_power(&adj, k).unwrap();
            assert!(fast.max_abs_diff(&oracle) < 1e-12, "k={k}");
            oracle = a.matmul(&oracle);
        }
    }

    #[test]
    fn test_proximity_matches_manual_inner_products() {
        let g = gen_grid(3, 3).unwrap();
        let adj = adjacency_normalized::<f64>(&g);
        let m = propagation_power(&adj, 2).unwrap();
        let prox = proximity_target(&adj, 2).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let manual: f64 = (0..9).map(|c| m.get(i, c) * m.get(j, c)).sum();
                assert!((prox.get(i, j) - manual).abs() < 1e-12);
                // Symmetric with a non-negative diagonal (it is a Gram matrix).
                assert_eq!(prox.get(i, j), prox.get(j, i));
            }
            assert!(prox.get(i, i) >= 0.0);
        }
    }

    #[test]
    fn test_proximity_two_node_path_is_all_half() {
        // Operator entries are all 1/2, so every Gram entry is
        // 0.5*0.5 + 0.5*0.5 = 0.5.
        let g = Graph::new(2, vec![(0, 1)]).unwrap();
        let prox = proximity_target(&adjacency_normalized::<f64>(&g), 1).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((prox.get(i, j) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn test_dimension_bound_closed_form() {
        let d0 = d0_bound(0.1, 0.05, 1.0).unwrap();
        let expected = 4.0 * 80.0_f64.ln() / 0.009;
        assert!((d0 - expected).abs() < 1e-9, "d0 = {d0}");
        assert!(d0 > 1947.0 && d0 < 1948.0);
    }

    #[test]
    fn test_dimension_bound_rejects_bad_inputs() {
        assert!(d0_bound(0.0, 0.05, 1.0).is_err());
        assert!(d0_bound(-0.1, 0.05, 1.0).is_err());
        assert!(d0_bound(0.1, 0.0, 1.0).is_err());
        assert!(d0_bound(0.1, 1.0, 1.0).is_err());
        // Row norm must exceed the requested error.
        assert!(d0_bound(1.0, 0.05, 1.0).is_err());
        assert!(d0_bound(0.5, 0.05, 0.3).is_err());
    }

    #[test]
    fn test_dense_guard_refuses_large_graphs() {
        let g = gen_grid(71, 71).unwrap(); // 5041 nodes
        let adj = adjacency_normalized::<f64>(&g);
        match propagation_power(&adj, 1) {
            Err(Error::Limit { actual, limit, .. }) => {
                assert_eq!(actual, 5041);
                assert_eq!(limit, DENSE_GUARD);
            }
            other => panic!("expected limit error, got {:?}", other.map(|m| m.rows)),
        }
        assert!(jl_error_report(&adj, 1, 16, 0, 0.25, 0.1).is_err());
    }

    #[test]
    fn test_jl_errors_shrink_with_dimension() {
        let g = gen_grid(5, 5).unwrap();
        let adj = adjacency_normalized::<f64>(&g);
        let narrow = jl_error_report(&adj, 2, 16, 7, 0.2, 0.1).unwrap();
        let wide = jl_error_report(&adj, 2, 2048, 7, 0.2, 0.1).unwrap();
        assert_eq!(narrow.entries, 625);
        assert!(wide.median_error < narrow.median_error);
        assert!(wide.success_rate > 0.95, "success {}", wide.success_rate);
        assert!(wide.median_error < 0.1);
        assert!(narrow.d0 > 0.0);
        assert_eq!(narrow.errors.len(), narrow.entries);
    }

    #[test]
    fn test_jl_edgeless_diagonal_approaches_one() {
        // With no edges the operator is the identity, so each diagonal
        // decoder entry is a mean of dim squared standard normals: close to
        // 1 within 3 sigma = 3*sqrt(2/dim). Off-diagonals concentrate at 0.
        let g = Graph::new(3, vec![]).unwrap();
        let adj = adjacency_normalized::<f64>(&g);
        let dim = 8192;
        let report = jl_error_report(&adj, 1, dim, 0, 0.2, 0.1).unwrap();
        let tol = 3.0 * (2.0 / dim as f64).sqrt();
        // The worst entry error includes the diagonal deviations from 1.
        assert!(report.max_error < tol, "max error {}", report.max_error);
        assert_eq!(report.max_row_norm, 1.0);
    }

    #[test]
    fn test_jl_report_is_deterministic() {
        let g = gen_grid(4, 4).unwrap();
        let adj = adjacency_normalized::<f64>(&g);
        let a = jl_error_report(&adj, 2, 64, 3, 0.2, 0.1).unwrap();
        let b = jl_error_report(&adj, 2, 64, 3, 0.2, 0.1).unwrap();
        assert_eq!(a.errors, b.errors);
        assert_eq!(a.median_error, b.median_error);
    }

    #[test]
    fn test_deterministic_models_are_equivariant() {
        let g = constant_features(gen_grid(4, 4).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [ModelKind::Sgc, ModelKind::Gcn] {
            let spec = ModelSpec {
                kind,
                k_steps: 2,
                feat_dim: 1,
                stoch_dim: 8,
                hidden_dim: 8,
                out_dim: 8,
            };
            let params = init_params::<f64>(&spec, 0);
            for _ in 0..5 {
                let perm = NodePermutation::random(16, &mut rng);
                let dev = check_equivariance(&spec, &params, &g, &perm).unwrap();
                assert!(dev <= EQUIVARIANCE_TOL, "{kind}: deviation {dev}");
            }
        }
    }

    #[test]
    fn test_equivariance_check_rejects_stochastic_models() {
        let g = constant_features(gen_grid(3, 3).unwrap()).unwrap();
        let spec = ModelSpec::new(ModelKind::SmpLinear, 2, 1);
        let params = init_params::<f64>(&spec, 0);
        let perm = NodePermutation::identity(9);
        assert!(check_equivariance(&spec, &params, &g, &perm).is_err());
    }

    #[test]
    fn test_perturbed_operator_breaks_equivariance() {
        // Feeding a slightly wrong permuted operator must produce a visible
        // deviation; this guards the check itself against trivially passing.
        let g = constant_features(gen_grid(4, 4).unwrap()).unwrap();
        let spec = ModelSpec {
            kind: ModelKind::Sgc,
            k_steps: 2,
            feat_dim: 1,
            stoch_dim: 8,
            hidden_dim: 8,
            out_dim: 8,
        };
        let params = init_params::<f64>(&spec, 0);
        let features = g.features.as_ref().unwrap().clone();
        let adj = adjacency_normalized::<f64>(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let perm = NodePermutation::random(16, &mut rng);
        let permuted = apply_permutation(&g, &perm);
        let scaled = {
            let dense = adjacency_normalized::<f64>(&permuted).to_dense();
            let mut entries = Vec::new();
            for i in 0..dense.rows {
                for j in 0..dense.cols {
                    let v = dense.get(i, j);
                    if v != 0.0 {
                        let v = if i == 0 && j == 0 { v * 1.01 } else { v };
                        entries.push((i, j, v));
                    }
                }
            }
            SparseMatrix::from_entries(dense.rows, dense.cols, &entries)
        };
        let dev = equivariance_deviation_with_adj(&spec, &params, &adj, &features, &scaled, &perm);
        assert!(dev > 1e-6, "perturbation went unnoticed: deviation {dev}");
    }

    #[test]
    fn test_twin_gaps_deterministic_vs_stochastic() {
        let g = constant_features(gen_grid(5, 5).unwrap()).unwrap();
        let scfg = StochasticConfig::fixed(32, 0);

        let sgc = ModelSpec {
            kind: ModelKind::Sgc,
            k_steps: 2,
            feat_dim: 1,
            stoch_dim: 32,
            hidden_dim: 8,
            out_dim: 8,
        };
        let report =
            check_automorphic_collision(&sgc, &init_params::<f64>(&sgc, 0), &g, &scfg).unwrap();
        assert!(report.max_gap <= EQUIVARIANCE_TOL, "SGC gap {}", report.max_gap);

        let smp = ModelSpec {
            kind: ModelKind::SmpIdentity,
            k_steps: 2,
            feat_dim: 1,
            stoch_dim: 32,
            hidden_dim: 8,
            out_dim: 8,
        };
        let report =
            check_automorphic_collision(&smp, &ModelParams::<f64>::empty(), &g, &scfg).unwrap();
        assert!(report.min_gap > SMP_GAP_MIN, "twin gap only {}", report.min_gap);
        assert!(report.mean_gap >= report.min_gap && report.mean_gap <= report.max_gap);
    }

    #[test]
    fn test_single_node_duplicated_has_exactly_zero_gap() {
        // One isolated node and its twin: identical features, identity
        // operator rows, so the deterministic gap is exactly zero.
        let g = constant_features(Graph::new(1, vec![]).unwrap()).unwrap();
        let spec = ModelSpec {
            kind: ModelKind::Sgc,
            k_steps: 2,
            feat_dim: 1,
            stoch_dim: 4,
            hidden_dim: 4,
            out_dim: 4,
        };
        let report = check_automorphic_collision(
            &spec,
            &init_params::<f64>(&spec, 3),
            &g,
            &StochasticConfig::fixed(4, 0),
        )
        .unwrap();
        assert_eq!(report.max_gap, 0.0);
    }
}
