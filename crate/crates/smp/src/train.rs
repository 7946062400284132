//! Full-batch training with Adam, periodic evaluation and best-validation
//! checkpoint selection.
//!
//! Defaults follow the reference protocol: learning rate 0.01 decayed by
//! 0.1 every 200 epochs, weight decay 5e-4, 1000 epochs, evaluation every 5.
//! Link and pairwise tasks report AUC from inner-product pair scores; the
//! node task reports argmax accuracy.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::{adjacency_normalized, Graph};
use crate::loss::{link_loss_and_grad, node_loss_and_grad};
use crate::metrics::{accuracy, auc};
use crate::model::{
    backward, forward_prepared, init_params, precompute, ModelParams, ModelSpec, PreparedInputs,
};
use crate::optim::{adam_step, AdamState};
use crate::scalar::Scalar;
use crate::sparse::SparseMatrix;
use crate::split::{LinkSplit, NodeSplit, PairSplit, TaskSplit};
use crate::stochastic::{sample_stochastic, StochMode, StochasticConfig};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Which edges feed the propagation operator for link prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagateOn {
    /// All edges of the graph (transductive default).
    Full,
    /// Training positives only, so no message passes along held-out edges.
    Train,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_decay_factor: f64,
    /// Epoch interval between decays; 0 disables decay.
    pub lr_decay_every: usize,
    pub weight_decay: f64,
    pub epochs: usize,
    pub eval_every: usize,
    /// Seed for parameter initialization.
    pub seed: u64,
    pub propagate_on: PropagateOn,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            lr: 0.01,
            lr_decay_factor: 0.1,
            lr_decay_every: 200,
            weight_decay: 5e-4,
            epochs: 1000,
            eval_every: 5,
            seed: 0,
            propagate_on: PropagateOn::Full,
        }
    }
}

/// One evaluation-epoch record; epochs are 1-based in the trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub test_metric: f64,
}

pub struct TrainOutcome<T> {
    /// Parameters from the epoch with the best validation metric
    /// (earliest epoch on ties).
    pub params: ModelParams<T>,
    pub best_epoch: usize,
    pub best_val: f64,
    pub best_test: f64,
    pub trace: Vec<TraceRow>,
}

fn pair_scores<T: Scalar>(h: &DenseMatrix<T>, pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|&(i, j)| {
            h.row(i)
                .iter()
                .zip(h.row(j))
                .map(|(&a, &b)| (a * b).as_f64())
                .sum()
        })
        .collect()
}

/// AUC of positive-pair scores against negative-pair scores.
fn pair_auc<T: Scalar>(
    h: &DenseMatrix<T>,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
) -> Result<f64> {
    let mut scores = pair_scores(h, pos);
    scores.extend(pair_scores(h, neg));
    let labels: Vec<bool> = (0..scores.len()).map(|i| i < pos.len()).collect();
    auc(&scores, &labels)
}

fn argmax_accuracy<T: Scalar>(h: &DenseMatrix<T>, labels: &[u32], idx: &[usize]) -> Result<f64> {
    let pred: Vec<u32> = idx
        .iter()
        .map(|&i| {
            let row = h.row(i);
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best as u32
        })
        .collect();
    let truth: Vec<u32> = idx.iter().map(|&i| labels[i]).collect();
    accuracy(&pred, &truth)
}

/// Shared state for one training run; drives both `train` and the
/// per-epoch benchmark.
pub(crate) struct Engine<'a, T: Scalar> {
    spec: &'a ModelSpec,
    task: &'a TaskSplit,
    cfg: &'a TrainConfig,
    scfg: &'a StochasticConfig,
    adj: SparseMatrix<T>,
    features: DenseMatrix<T>,
    labels: Vec<u32>,
    pub params: ModelParams<T>,
    state: AdamState<T>,
    prepared: PreparedInputs<T>,
    num_nodes: usize,
}

impl<'a, T: Scalar> Engine<'a, T> {
    pub fn new(
        spec: &'a ModelSpec,
        g: &Graph,
        task: &'a TaskSplit,
        cfg: &'a TrainConfig,
        scfg: &'a StochasticConfig,
    ) -> Result<Engine<'a, T>> {
        let features = g
            .features
            .as_ref()
            .ok_or_else(|| {
                Error::Invalid(
                    "graph has no features; attach constant or identity features first".into(),
                )
            })?
            .cast::<T>();
        if spec.feat_dim != features.cols {
            return Err(Error::Mismatch {
                context: "model feat_dim".into(),
                expected: features.cols.to_string(),
                found: spec.feat_dim.to_string(),
            });
        }
        let labels = match task {
            TaskSplit::Node(_) => g
                .labels
                .clone()
                .ok_or_else(|| Error::Invalid("node task needs labels".into()))?,
            _ => g.labels.clone().unwrap_or_default(),
        };
        if let TaskSplit::Node(_) = task {
            let classes = g.num_classes().unwrap_or(0);
            if spec.out_dim != classes {
                return Err(Error::Mismatch {
                    context: "node task output width".into(),
                    expected: format!("{classes} classes"),
                    found: spec.out_dim.to_string(),
                });
            }
        }
        let adj = match (task, cfg.propagate_on) {
            (TaskSplit::Link(split), PropagateOn::Train) => {
                let train_graph = Graph::new(g.num_nodes, split.train_pos.clone())?;
                adjacency_normalized::<T>(&train_graph)
            }
            _ => adjacency_normalized::<T>(g),
        };
        let params = init_params::<T>(spec, cfg.seed);
        let state = AdamState::new(&params);
        let e = spec
            .kind
            .uses_stochastic()
            .then(|| sample_stochastic::<T>(g.num_nodes, scfg, 0));
        let prepared = precompute(spec, &adj, &features, e.as_ref());
        Ok(Engine {
            spec,
            task,
            cfg,
            scfg,
            adj,
            features,
            labels,
            params,
            state,
            prepared,
            num_nodes: g.num_nodes,
        })
    }

    fn refresh_inputs(&mut self, epoch: usize) {
        if self.spec.kind.uses_stochastic() && self.scfg.mode == StochMode::Resampled {
            let e = sample_stochastic::<T>(self.num_nodes, self.scfg, epoch);
            self.prepared = precompute(self.spec, &self.adj, &self.features, Some(&e));
        }
    }

    fn loss_and_grad(&self, h: &DenseMatrix<T>) -> (f64, DenseMatrix<T>) {
        match self.task {
            TaskSplit::Link(LinkSplit {
                train_pos,
                train_neg,
                ..
            })
            | TaskSplit::Pair(PairSplit {
                train_pos,
                train_neg,
                ..
            }) => link_loss_and_grad(h, train_pos, train_neg),
            TaskSplit::Node(NodeSplit { train_idx, .. }) => {
                node_loss_and_grad(h, &self.labels, train_idx)
            }
        }
    }

    /// One optimization step; returns the training loss at this epoch.
    pub fn epoch(&mut self, epoch: usize) -> Result<f64> {
        self.refresh_inputs(epoch);
        let (h, cache) = forward_prepared(self.spec, &self.params, &self.adj, &self.prepared);
        let (loss, grad_h) = self.loss_and_grad(&h);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let grads = backward(
            self.spec,
            &self.params,
            &self.prepared,
            &cache,
            &self.adj,
            &grad_h,
        );
        adam_step(&mut self.params, &grads, &mut self.state, self.cfg, epoch);
        Ok(loss)
    }

    /// (validation metric, test metric) for the current parameters.
    pub fn evaluate(&self) -> Result<(f64, f64)> {
        let (h, _) = forward_prepared(self.spec, &self.params, &self.adj, &self.prepared);
        match self.task {
            TaskSplit::Link(LinkSplit {
                val_pos,
                val_neg,
                test_pos,
                test_neg,
                ..
            })
            | TaskSplit::Pair(PairSplit {
                val_pos,
                val_neg,
                test_pos,
                test_neg,
                ..
            }) => Ok((
                pair_auc(&h, val_pos, val_neg)?,
                pair_auc(&h, test_pos, test_neg)?,
            )),
            TaskSplit::Node(NodeSplit {
                val_idx, test_idx, ..
            }) => Ok((
                argmax_accuracy(&h, &self.labels, val_idx)?,
                argmax_accuracy(&h, &self.labels, test_idx)?,
            )),
        }
    }

    pub fn current_loss(&self) -> Result<f64> {
        let (h, _) = forward_prepared(self.spec, &self.params, &self.adj, &self.prepared);
        let (loss, _) = self.loss_and_grad(&h);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch: 0 });
        }
        Ok(loss)
    }
}

/// Runs the full loop and returns the best-validation parameters along with
/// the evaluation trace. Identical seeds produce identical traces.
pub fn train<T: Scalar>(
    spec: &ModelSpec,
    g: &Graph,
    task: &TaskSplit,
    cfg: &TrainConfig,
    scfg: &StochasticConfig,
) -> Result<TrainOutcome<T>> {
    if cfg.eval_every == 0 {
        return Err(Error::Invalid("eval_every must be positive".into()));
    }
    let mut engine = Engine::<T>::new(spec, g, task, cfg, scfg)?;
    let mut trace = Vec::new();
    let mut best: Option<(f64, usize, f64, ModelParams<T>)> = None;

    if cfg.epochs == 0 {
        let loss = engine.current_loss()?;
        let (val, test) = engine.evaluate()?;
        return Ok(TrainOutcome {
            params: engine.params,
            best_epoch: 0,
            best_val: val,
            best_test: test,
            trace: vec![TraceRow {
                epoch: 0,
                train_loss: loss,
                val_metric: val,
                test_metric: test,
            }],
        });
    }

    for epoch in 0..cfg.epochs {
        let loss = engine.epoch(epoch)?;
        let display_epoch = epoch + 1;
        if display_epoch % cfg.eval_every == 0 || display_epoch == cfg.epochs {
            let (val, test) = engine.evaluate()?;
            trace.push(TraceRow {
                epoch: display_epoch,
                train_loss: loss,
                val_metric: val,
                test_metric: test,
            });
            let improved = best.as_ref().is_none_or(|(bv, ..)| val > *bv);
            if improved {
                best = Some((val, display_epoch, test, engine.params.clone()));
            }
        }
    }
    let (best_val, best_epoch, best_test, params) = best.expect("at least one evaluation ran");
    Ok(TrainOutcome {
        params,
        best_epoch,
        best_val,
        best_test,
        trace,
    })
}

/// Writes the trace as `epoch,train_loss,val_metric,test_metric` CSV.
pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TraceRow]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "epoch,train_loss,val_metric,test_metric")?;
    for row in trace {
        writeln!(
            f,
            "{},{},{},{}",
            row.epoch, row.train_loss, row.val_metric, row.test_metric
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{constant_features, gen_communities, gen_grid};
    use crate::model::{ModelKind, ModelSpec};
    use crate::split::{split_edges, split_nodes};

    fn quick_cfg(epochs: usize, eval_every: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            eval_every,
            ..TrainConfig::default()
        }
    }

    fn small_link_setup() -> (Graph, TaskSplit) {
        let g = constant_features(gen_grid(6, 6).unwrap()).unwrap();
        let split = TaskSplit::Link(split_edges(&g, (0.8, 0.1, 0.1), 0).unwrap());
        (g, split)
    }

    fn smp_linear_spec() -> ModelSpec {
        ModelSpec {
            kind: ModelKind::SmpLinear,
            k_steps: 2,
            feat_dim: 1,
            stoch_dim: 8,
            hidden_dim: 8,
            out_dim: 8,
        }
    }

    #[test]
    fn test_training_is_deterministic() {
        let (g, task) = small_link_setup();
        let spec = smp_linear_spec();
        let cfg = quick_cfg(30, 5);
        let scfg = StochasticConfig::fixed(8, 1);
        let a = train::<f64>(&spec, &g, &task, &cfg, &scfg).unwrap();
        let b = train::<f64>(&spec, &g, &task, &cfg, &scfg).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.params, b.params);
        assert_eq!(a.best_epoch, b.best_epoch);
    }

    #[test]
    fn test_loss_decreases_over_training() {
        let (g, task) = small_link_setup();
        let spec = smp_linear_spec();
        let cfg = quick_cfg(100, 1);
        let scfg = StochasticConfig::fixed(8, 2);
        let out = train::<f64>(&spec, &g, &task, &cfg, &scfg).unwrap();
        let first = out.trace.first().unwrap();
        let last = out.trace.last().unwrap();
        assert_eq!(first.epoch, 1);
        assert_eq!(last.epoch, 100);
        assert!(
            last.train_loss < first.train_loss,
            "loss went {} -> {}",
            first.train_loss,
            last.train_loss
        );
    }

    #[test]
    fn test_zero_epochs_returns_initial_params_with_one_eval() {
        let (g, task) = small_link_setup();
        let spec = smp_linear_spec();
        let cfg = quick_cfg(0, 5);
        let scfg = StochasticConfig::fixed(8, 3);
        let out = train::<f64>(&spec, &g, &task, &cfg, &scfg).unwrap();
        assert_eq!(out.best_epoch, 0);
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.params, init_params::<f64>(&spec, cfg.seed));
    }

    #[test]
    fn test_constant_metric_keeps_earliest_epoch() {
        // SmpIdentity has no parameters, so the metric never changes and the
        // first evaluation epoch must win.
        let (g, task) = small_link_setup();
        let spec = ModelSpec {
            kind: ModelKind::SmpIdentity,
            ..smp_linear_spec()
        };
        let cfg = quick_cfg(20, 5);
        let scfg = StochasticConfig::fixed(8, 4);
        let out = train::<f64>(&spec, &g, &task, &cfg, &scfg).unwrap();
        assert_eq!(out.best_epoch, 5);
        let vals: Vec<f64> = out.trace.iter().map(|r| r.val_metric).collect();
        assert!(vals.iter().all(|&v| v == vals[0]));
    }

    #[test]
    fn test_node_task_trains_and_validates_widths() {
        let g = constant_features(gen_communities(4, 8, 0.02, 0).unwrap()).unwrap();
        let task = TaskSplit::Node(split_nodes(&g, (2, 2), 0).unwrap());
        let mut spec = ModelSpec {
            kind: ModelKind::SmpLinear,
            k_steps: 2,
            feat_dim: 1,
            stoch_dim: 8,
            hidden_dim: 8,
            out_dim: 4,
        };
        let cfg = quick_cfg(60, 5);
        let scfg = StochasticConfig::fixed(8, 5);
        let out = train::<f64>(&spec, &g, &task, &cfg, &scfg).unwrap();
        assert!(out.best_val > 0.5, "val accuracy {}", out.best_val);

        spec.out_dim = 7; // wrong class count must be rejected up front
        assert!(train::<f64>(&spec, &g, &task, &cfg, &scfg).is_err());
    }

    #[test]
    fn test_resampled_mode_differs_from_fixed() {
        let (g, task) = small_link_setup();
        let spec = smp_linear_spec();
        let cfg = quick_cfg(20, 5);
        let fixed = train::<f64>(&spec, &g, &task, &cfg, &StochasticConfig::fixed(8, 6)).unwrap();
        let res = train::<f64>(&spec, &g, &task, &cfg, &StochasticConfig::resampled(8, 6)).unwrap();
        assert_ne!(fixed.trace, res.trace);
    }

    #[test]
    fn test_propagate_on_train_changes_the_operator() {
        let (g, task) = small_link_setup();
        let spec = smp_linear_spec();
        let scfg = StochasticConfig::fixed(8, 7);
        let full = train::<f64>(&spec, &g, &task, &quick_cfg(10, 5), &scfg).unwrap();
        let mut cfg = quick_cfg(10, 5);
        cfg.propagate_on = PropagateOn::Train;
        let heldout = train::<f64>(&spec, &g, &task, &cfg, &scfg).unwrap();
        assert_ne!(full.trace, heldout.trace);
    }

    #[test]
    fn test_divergence_reported_with_epoch() {
        let (g, task) = small_link_setup();
        let spec = smp_linear_spec();
        // Adam updates have magnitude ~lr, so the learning rate must be large
        // enough that squared pair scores overflow f64.
        let mut cfg = quick_cfg(30, 5);
        cfg.lr = 1e160;
        let scfg = StochasticConfig::fixed(8, 8);
        match train::<f64>(&spec, &g, &task, &cfg, &scfg) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("expected divergence, got {:?}", other.map(|o| o.best_val)),
        }
    }

    #[test]
    fn test_missing_features_rejected() {
        let g = gen_grid(4, 4).unwrap();
        let task = TaskSplit::Link(split_edges(&g, (0.8, 0.1, 0.1), 0).unwrap());
        let spec = smp_linear_spec();
        let cfg = quick_cfg(5, 5);
        let scfg = StochasticConfig::fixed(8, 9);
        assert!(train::<f64>(&spec, &g, &task, &cfg, &scfg).is_err());
    }

    #[test]
    fn test_f32_training_runs_and_roughly_tracks_f64() {
        let (g, task) = small_link_setup();
        let spec = smp_linear_spec();
        let cfg = quick_cfg(30, 5);
        let scfg = StochasticConfig::fixed(8, 10);
        let double = train::<f64>(&spec, &g, &task, &cfg, &scfg).unwrap();
        let single = train::<f32>(&spec, &g, &task, &cfg, &scfg).unwrap();
        let d = double.trace.last().unwrap().train_loss;
        let s = single.trace.last().unwrap().train_loss;
        assert!((d - s).abs() < 1e-2, "f64 loss {d} vs f32 loss {s}");
    }

    #[test]
    fn test_trace_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv");
        let rows = vec![TraceRow {
            epoch: 5,
            train_loss: 0.5,
            val_metric: 0.75,
            test_metric: 0.7,
        }];
        write_trace_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "epoch,train_loss,val_metric,test_metric\n5,0.5,0.75,0.7\n");
    }
}
