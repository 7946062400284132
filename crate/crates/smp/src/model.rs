//! Propagation models.
//!
//! All variants share one input convention: a feature matrix F (n x feat_dim),
//! an optional stochastic signal E (n x stoch_dim) and the normalized
//! adjacency. The stochastic block always comes first in concatenations.
//!
//! | kind                | output                                        |
//! |---------------------|-----------------------------------------------|
//! | `Sgc`               | A^K F W + b (identity head when no params)    |
//! | `Gcn`               | A relu(A F W1) W2                             |
//! | `SmpIdentity`       | A^K [E, F] (no parameters)                    |
//! | `SmpLinear`         | A^K [E, F] W + b                              |
//! | `SmpMlp`            | relu(A^K [E, F] W1 + b1) W2 + b2              |
//! | `SmpLinearGcnFeat`  | [A^K E, gcn(F)] W + b                         |
//! | `SmpLinearGcnBoth`  | [gcn(E), gcn(F)] W + b                        |
//!
//! where gcn(X) = relu(A X W1') W2' is a two-layer branch ending in its last
//! hidden layer. Inputs that do not change across epochs (the propagated
//! blocks and first-hop products) are precomputed once via
//! [`precompute`] and reused by [`forward_prepared`].

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Sgc,
    Gcn,
    SmpIdentity,
    SmpLinear,
    SmpMlp,
    SmpLinearGcnFeat,
    SmpLinearGcnBoth,
}

impl ModelKind {
    pub const ALL: [ModelKind; 7] = [
        ModelKind::Sgc,
        ModelKind::Gcn,
        ModelKind::SmpIdentity,
        ModelKind::SmpLinear,
        ModelKind::SmpMlp,
        ModelKind::SmpLinearGcnFeat,
        ModelKind::SmpLinearGcnBoth,
    ];

    /// True for variants that consume the stochastic signal E.
    pub fn uses_stochastic(self) -> bool {
        !matches!(self, ModelKind::Sgc | ModelKind::Gcn)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Sgc => "sgc",
            ModelKind::Gcn => "gcn",
            ModelKind::SmpIdentity => "smp-identity",
            ModelKind::SmpLinear => "smp-linear",
            ModelKind::SmpMlp => "smp-mlp",
            ModelKind::SmpLinearGcnFeat => "smp-linear-gcn-feat",
            ModelKind::SmpLinearGcnBoth => "smp-linear-gcn-both",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown model kind `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Propagation depth K for the linear variants. The GCN branches are
    /// always the fixed two-layer form.
    pub k_steps: usize,
    pub feat_dim: usize,
    pub stoch_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, k_steps: usize, feat_dim: usize) -> ModelSpec {
        ModelSpec {
            kind,
            k_steps,
            feat_dim,
            stoch_dim: 32,
            hidden_dim: 32,
            out_dim: 32,
        }
    }

    /// Width of the representation produced with the given parameters.
    pub fn output_dim(&self, params: &ModelParams<impl Scalar>) -> usize {
        match self.kind {
            ModelKind::SmpIdentity => self.stoch_dim + self.feat_dim,
            ModelKind::Sgc if params.is_empty() => self.feat_dim,
            _ => self.out_dim,
        }
    }
}

/// One trainable parameter: name, matrix, and whether it is a bias row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: &'static str,
    pub rows: usize,
    pub cols: usize,
    pub bias: bool,
}

fn shape(name: &'static str, rows: usize, cols: usize) -> ParamShape {
    ParamShape {
        name,
        rows,
        cols,
        bias: false,
    }
}

fn bias(name: &'static str, cols: usize) -> ParamShape {
    ParamShape {
        name,
        rows: 1,
        cols,
        bias: true,
    }
}

/// Expected parameter list (order matters; gradients are index-aligned).
pub fn param_shapes(spec: &ModelSpec) -> Vec<ParamShape> {
    let (d, d0, h, out) = (spec.stoch_dim, spec.feat_dim, spec.hidden_dim, spec.out_dim);
    match spec.kind {
        ModelKind::Sgc => vec![shape("w_out", d0, out), bias("b_out", out)],
        ModelKind::Gcn => vec![shape("w1", d0, h), shape("w2", h, out)],
        ModelKind::SmpIdentity => vec![],
        ModelKind::SmpLinear => vec![shape("w_out", d + d0, out), bias("b_out", out)],
        ModelKind::SmpMlp => vec![
            shape("w1", d + d0, h),
            bias("b1", h),
            shape("w2", h, out),
            bias("b2", out),
        ],
        ModelKind::SmpLinearGcnFeat => vec![
            shape("gcn_w1", d0, h),
            shape("gcn_w2", h, h),
            shape("w_out", d + h, out),
            bias("b_out", out),
        ],
        ModelKind::SmpLinearGcnBoth => vec![
            shape("gcn_e_w1", d, h),
            shape("gcn_e_w2", h, h),
            shape("gcn_f_w1", d0, h),
            shape("gcn_f_w2", h, h),
            shape("w_out", 2 * h, out),
            bias("b_out", out),
        ],
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub entries: Vec<(String, DenseMatrix<T>)>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn empty() -> ModelParams<T> {
        ModelParams { entries: vec![] }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> &DenseMatrix<T> {
        &self
            .entries
            .iter()
            .find(|(n, _)| n == name)
            .unwrap_or_else(|| panic!("missing parameter `{name}`"))
            .1
    }

    pub fn matrices(&self) -> impl Iterator<Item = &DenseMatrix<T>> {
        self.entries.iter().map(|(_, m)| m)
    }

    pub fn matrices_mut(&mut self) -> impl Iterator<Item = &mut DenseMatrix<T>> {
        self.entries.iter_mut().map(|(_, m)| m)
    }

    /// Checks names and shapes against the spec's parameter table.
    /// An empty list is also accepted for SGC (identity head).
    pub fn validate_for(&self, spec: &ModelSpec) -> Result<()> {
        if spec.kind == ModelKind::Sgc && self.is_empty() {
            return Ok(());
        }
        let expected = param_shapes(spec);
        if expected.len() != self.entries.len() {
            return Err(Error::Mismatch {
                context: format!("parameter count for {}", spec.kind),
                expected: expected.len().to_string(),
                found: self.entries.len().to_string(),
            });
        }
        for (want, (name, mat)) in expected.iter().zip(&self.entries) {
            if want.name != name || want.rows != mat.rows || want.cols != mat.cols {
                return Err(Error::Mismatch {
                    context: format!("parameter `{}` of {}", want.name, spec.kind),
                    expected: format!("{} {}x{}", want.name, want.rows, want.cols),
                    found: format!("{} {}x{}", name, mat.rows, mat.cols),
                });
            }
            if !mat.is_finite() {
                return Err(Error::Invalid(format!(
                    "parameter `{name}` contains non-finite values"
                )));
            }
        }
        Ok(())
    }

    /// For `SmpLinear` with `out_dim == feat_dim`: weights that zero out the
    /// stochastic block and pass the propagated features through unchanged,
    /// making the model coincide with head-less SGC.
    pub fn passthrough_features(spec: &ModelSpec) -> ModelParams<T> {
        assert_eq!(spec.kind, ModelKind::SmpLinear, "passthrough is an SmpLinear construction");
        assert_eq!(
            spec.out_dim, spec.feat_dim,
            "passthrough needs out_dim == feat_dim"
        );
        let mut w = DenseMatrix::zeros(spec.stoch_dim + spec.feat_dim, spec.out_dim);
        for j in 0..spec.feat_dim {
            w.set(spec.stoch_dim + j, j, T::one());
        }
        ModelParams {
            entries: vec![
                ("w_out".to_string(), w),
                ("b_out".to_string(), DenseMatrix::zeros(1, spec.out_dim)),
            ],
        }
    }
}

/// Glorot-uniform weights (+-sqrt(6 / (fan_in + fan_out))), zero biases.
/// Deterministic in the seed.
pub fn init_params<T: Scalar>(spec: &ModelSpec, seed: u64) -> ModelParams<T> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let entries = param_shapes(spec)
        .into_iter()
        .map(|s| {
            let mat = if s.bias {
                DenseMatrix::zeros(s.rows, s.cols)
            } else {
                let bound = (6.0 / (s.rows + s.cols) as f64).sqrt();
                let data = (0..s.rows * s.cols)
                    .map(|_| T::from_f64(rng.random_range(-bound..bound)))
                    .collect();
                DenseMatrix::from_vec(s.rows, s.cols, data)
            };
            (s.name.to_string(), mat)
        })
        .collect();
    ModelParams { entries }
}

/// Epoch-invariant inputs: everything upstream of the first trainable
/// parameter, computed once per (graph, E) pair.
pub enum PreparedInputs<T> {
    /// A^K F for SGC; A^K [E, F] for the one-shot stochastic variants.
    Propagated { z: DenseMatrix<T> },
    /// First-hop product A F for the plain GCN.
    Gcn { pin_f: DenseMatrix<T> },
    /// A^K E next to the feature branch's first hop.
    GcnFeat {
        eprop: DenseMatrix<T>,
        pin_f: DenseMatrix<T>,
    },
    /// First hops for both branches.
    GcnBoth {
        pin_e: DenseMatrix<T>,
        pin_f: DenseMatrix<T>,
    },
}

/// Nonlinearity state recorded by a GCN branch for its backward pass.
pub struct GcnTrace<T> {
    pre1: DenseMatrix<T>,
    prop2: DenseMatrix<T>,
}

pub enum ForwardCache<T> {
    /// No trainable parameters touched the output.
    NoParams,
    /// Output was a single linear map of the prepared input.
    Linear,
    Mlp {
        pre1: DenseMatrix<T>,
        act1: DenseMatrix<T>,
    },
    Gcn(GcnTrace<T>),
    GcnFeat {
        core: GcnTrace<T>,
        concat: DenseMatrix<T>,
    },
    GcnBoth {
        core_e: GcnTrace<T>,
        core_f: GcnTrace<T>,
        concat: DenseMatrix<T>,
    },
}

fn check_inputs<T: Scalar>(
    spec: &ModelSpec,
    adj: &SparseMatrix<T>,
    f: &DenseMatrix<T>,
    e: Option<&DenseMatrix<T>>,
) {
    assert_eq!(adj.rows, adj.cols, "propagation operator must be square");
    assert_eq!(adj.rows, f.rows, "feature rows must match node count");
    assert_eq!(
        f.cols, spec.feat_dim,
        "feature width {} does not match spec feat_dim {}",
        f.cols, spec.feat_dim
    );
    if spec.kind.uses_stochastic() {
        let e = e.expect("stochastic variant requires a sampled signal matrix");
        assert_eq!(e.rows, f.rows, "stochastic rows must match node count");
        assert_eq!(
            e.cols, spec.stoch_dim,
            "stochastic width {} does not match spec stoch_dim {}",
            e.cols, spec.stoch_dim
        );
    }
}

pub fn precompute<T: Scalar>(
    spec: &ModelSpec,
    adj: &SparseMatrix<T>,
    f: &DenseMatrix<T>,
    e: Option<&DenseMatrix<T>>,
) -> PreparedInputs<T> {
    check_inputs(spec, adj, f, e);
    match spec.kind {
        ModelKind::Sgc => PreparedInputs::Propagated {
            z: adj.propagate(f, spec.k_steps),
        },
        ModelKind::SmpIdentity | ModelKind::SmpLinear | ModelKind::SmpMlp => {
            let joint = DenseMatrix::concat_cols(e.unwrap(), f);
            PreparedInputs::Propagated {
                z: adj.propagate(&joint, spec.k_steps),
            }
        }
        ModelKind::Gcn => PreparedInputs::Gcn {
            pin_f: adj.spmm(f),
        },
        ModelKind::SmpLinearGcnFeat => PreparedInputs::GcnFeat {
            eprop: adj.propagate(e.unwrap(), spec.k_steps),
            pin_f: adj.spmm(f),
        },
        ModelKind::SmpLinearGcnBoth => PreparedInputs::GcnBoth {
            pin_e: adj.spmm(e.unwrap()),
            pin_f: adj.spmm(f),
        },
    }
}

fn linear_head<T: Scalar>(
    input: &DenseMatrix<T>,
    w: &DenseMatrix<T>,
    b: &DenseMatrix<T>,
) -> DenseMatrix<T> {
    let mut h = input.matmul(w);
    h.add_row_broadcast(b);
    h
}

fn gcn_branch_forward<T: Scalar>(
    pin: &DenseMatrix<T>,
    w1: &DenseMatrix<T>,
    w2: &DenseMatrix<T>,
    adj: &SparseMatrix<T>,
) -> (DenseMatrix<T>, GcnTrace<T>) {
    let pre1 = pin.matmul(w1);
    let act1 = pre1.relu();
    let prop2 = adj.spmm(&act1);
    let out = prop2.matmul(w2);
    (out, GcnTrace { pre1, prop2 })
}

/// Gradients (w1, w2) of a GCN branch; relies on the operator being
/// symmetric, which the normalized adjacency guarantees.
fn gcn_branch_backward<T: Scalar>(
    trace: &GcnTrace<T>,
    pin: &DenseMatrix<T>,
    w2: &DenseMatrix<T>,
    adj: &SparseMatrix<T>,
    g_out: &DenseMatrix<T>,
) -> (DenseMatrix<T>, DenseMatrix<T>) {
    let g_w2 = trace.prop2.matmul_tn(g_out);
    let g_act1 = adj.spmm(&g_out.matmul_nt(w2));
    let g_pre1 = DenseMatrix::relu_backward(&trace.pre1, &g_act1);
    let g_w1 = pin.matmul_tn(&g_pre1);
    (g_w1, g_w2)
}

pub fn forward_prepared<T: Scalar>(
    spec: &ModelSpec,
    params: &ModelParams<T>,
    adj: &SparseMatrix<T>,
    prepared: &PreparedInputs<T>,
) -> (DenseMatrix<T>, ForwardCache<T>) {
    match (spec.kind, prepared) {
        (ModelKind::Sgc, PreparedInputs::Propagated { z }) => {
            if params.is_empty() {
                (z.clone(), ForwardCache::NoParams)
            } else {
                let h = linear_head(z, params.get("w_out"), params.get("b_out"));
                (h, ForwardCache::Linear)
            }
        }
        (ModelKind::SmpIdentity, PreparedInputs::Propagated { z }) => {
            assert!(params.is_empty(), "smp-identity takes no parameters");
            (z.clone(), ForwardCache::NoParams)
        }
        (ModelKind::SmpLinear, PreparedInputs::Propagated { z }) => {
            let h = linear_head(z, params.get("w_out"), params.get("b_out"));
            (h, ForwardCache::Linear)
        }
        (ModelKind::SmpMlp, PreparedInputs::Propagated { z }) => {
            let mut pre1 = z.matmul(params.get("w1"));
            pre1.add_row_broadcast(params.get("b1"));
            let act1 = pre1.relu();
            let h = linear_head(&act1, params.get("w2"), params.get("b2"));
            (h, ForwardCache::Mlp { pre1, act1 })
        }
        (ModelKind::Gcn, PreparedInputs::Gcn { pin_f }) => {
            let (h, trace) = gcn_branch_forward(pin_f, params.get("w1"), params.get("w2"), adj);
            (h, ForwardCache::Gcn(trace))
        }
        (ModelKind::SmpLinearGcnFeat, PreparedInputs::GcnFeat { eprop, pin_f }) => {
            let (branch, core) =
                gcn_branch_forward(pin_f, params.get("gcn_w1"), params.get("gcn_w2"), adj);
            let concat = DenseMatrix::concat_cols(eprop, &branch);
            let h = linear_head(&concat, params.get("w_out"), params.get("b_out"));
            (h, ForwardCache::GcnFeat { core, concat })
        }
        (ModelKind::SmpLinearGcnBoth, PreparedInputs::GcnBoth { pin_e, pin_f }) => {
            let (out_e, core_e) =
                gcn_branch_forward(pin_e, params.get("gcn_e_w1"), params.get("gcn_e_w2"), adj);
            let (out_f, core_f) =
                gcn_branch_forward(pin_f, params.get("gcn_f_w1"), params.get("gcn_f_w2"), adj);
            let concat = DenseMatrix::concat_cols(&out_e, &out_f);
            let h = linear_head(&concat, params.get("w_out"), params.get("b_out"));
            (
                h,
                ForwardCache::GcnBoth {
                    core_e,
                    core_f,
                    concat,
                },
            )
        }
        _ => panic!("prepared inputs do not match model kind {}", spec.kind),
    }
}

/// Node representations for the given inputs.
pub fn forward<T: Scalar>(
    spec: &ModelSpec,
    params: &ModelParams<T>,
    adj: &SparseMatrix<T>,
    f: &DenseMatrix<T>,
    e: Option<&DenseMatrix<T>>,
) -> (DenseMatrix<T>, ForwardCache<T>) {
    let prepared = precompute(spec, adj, f, e);
    forward_prepared(spec, params, adj, &prepared)
}

/// Parameter gradients, index-aligned with `params.entries`, given the
/// gradient of the loss with respect to the forward output.
pub fn backward<T: Scalar>(
    spec: &ModelSpec,
    params: &ModelParams<T>,
    prepared: &PreparedInputs<T>,
    cache: &ForwardCache<T>,
    adj: &SparseMatrix<T>,
    grad_h: &DenseMatrix<T>,
) -> Vec<DenseMatrix<T>> {
    match (cache, prepared) {
        (ForwardCache::NoParams, _) => vec![],
        (ForwardCache::Linear, PreparedInputs::Propagated { z }) => {
            vec![z.matmul_tn(grad_h), grad_h.col_sums()]
        }
        (ForwardCache::Mlp { pre1, act1 }, PreparedInputs::Propagated { z }) => {
            let g_act1 = grad_h.matmul_nt(params.get("w2"));
            let g_pre1 = DenseMatrix::relu_backward(pre1, &g_act1);
            vec![
                z.matmul_tn(&g_pre1),
                g_pre1.col_sums(),
                act1.matmul_tn(grad_h),
                grad_h.col_sums(),
            ]
        }
        (ForwardCache::Gcn(trace), PreparedInputs::Gcn { pin_f }) => {
            let (g_w1, g_w2) =
                gcn_branch_backward(trace, pin_f, params.get("w2"), adj, grad_h);
            vec![g_w1, g_w2]
        }
        (ForwardCache::GcnFeat { core, concat }, PreparedInputs::GcnFeat { eprop, pin_f }) => {
            let g_concat = grad_h.matmul_nt(params.get("w_out"));
            let g_branch = g_concat.slice_cols(eprop.cols, concat.cols);
            let (g_w1, g_w2) =
                gcn_branch_backward(core, pin_f, params.get("gcn_w2"), adj, &g_branch);
            vec![g_w1, g_w2, concat.matmul_tn(grad_h), grad_h.col_sums()]
        }
        (
            ForwardCache::GcnBoth {
                core_e,
                core_f,
                concat,
            },
            PreparedInputs::GcnBoth { pin_e, pin_f },
        ) => {
            let h = spec.hidden_dim;
            let g_concat = grad_h.matmul_nt(params.get("w_out"));
            let g_out_e = g_concat.slice_cols(0, h);
            let g_out_f = g_concat.slice_cols(h, 2 * h);
            let (g_e_w1, g_e_w2) =
                gcn_branch_backward(core_e, pin_e, params.get("gcn_e_w2"), adj, &g_out_e);
            let (g_f_w1, g_f_w2) =
                gcn_branch_backward(core_f, pin_f, params.get("gcn_f_w2"), adj, &g_out_f);
            vec![
                g_e_w1,
                g_e_w2,
                g_f_w1,
                g_f_w2,
                concat.matmul_tn(grad_h),
                grad_h.col_sums(),
            ]
        }
        _ => panic!("forward cache does not match prepared inputs"),
    }
}

#[derive(Serialize, Deserialize)]
struct Checkpoint<T> {
    spec: ModelSpec,
    params: ModelParams<T>,
}

/// Writes spec + parameters as JSON. f64 values survive the round trip
/// bit-exactly (shortest round-trip float formatting).
pub fn save_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
    spec: &ModelSpec,
    params: &ModelParams<T>,
) -> Result<()> {
    let blob = Checkpoint {
        spec: *spec,
        params: params.clone(),
    };
    let text = serde_json::to_string_pretty(&blob).map_err(|e| Error::Json {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<(ModelSpec, ModelParams<T>)> {
    let text = std::fs::read_to_string(&path)?;
    let blob: Checkpoint<T> = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.as_ref().display().to_string(),
        source: e,
    })?;
    blob.params.validate_for(&blob.spec)?;
    Ok((blob.spec, blob.params))
}
