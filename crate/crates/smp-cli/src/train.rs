//! `smp train`: run the training pipeline over a list of seeds and emit
//! metrics JSON, per-seed trace CSVs, checkpoints, and split files.
//!
//! Every value can come from three places; highest wins:
//!   1. command-line flag
//!   2. TOML config file (`--config`)
//!   3. built-in default (the protocol the synthetic benchmarks use)

use crate::common::{
    build_graph, derived_seed, usage, CmdResult, DatasetEcho, Failure, FeatureMode, GraphKind,
    GraphOpts,
};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use smp::jsonio::write_json;
use smp::model::{save_checkpoint, ModelKind, ModelSpec};
use smp::split::{split_edges, split_nodes, split_pairs, TaskSplit};
use smp::stochastic::{StochMode, StochasticConfig};
use smp::train::{train, write_trace_csv, PropagateOn, TrainConfig};
use smp::Graph;
use std::path::{Path, PathBuf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    /// Held-out edge prediction, scored by AUC.
    Link,
    /// Per-node classification, scored by accuracy.
    Node,
    /// Same-community pair prediction, scored by AUC.
    Pair,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StochModeArg {
    Fixed,
    Resampled,
}

impl StochModeArg {
    pub fn to_lib(self) -> StochMode {
        match self {
            StochModeArg::Fixed => StochMode::Fixed,
            StochModeArg::Resampled => StochMode::Resampled,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagateArg {
    Full,
    Train,
}

impl PropagateArg {
    pub fn to_lib(self) -> PropagateOn {
        match self {
            PropagateArg::Full => PropagateOn::Full,
            PropagateArg::Train => PropagateOn::Train,
        }
    }
}

#[derive(clap::Args, Debug)]
pub struct TrainArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Prediction task.
    #[arg(long, value_enum)]
    pub task: Option<TaskArg>,

    /// Model variant (sgc, gcn, smp-identity, smp-linear, smp-mlp,
    /// smp-linear-gcn-feat, smp-linear-gcn-both).
    #[arg(long)]
    pub model: Option<ModelKind>,

    /// Graph source.
    #[arg(long, value_enum)]
    pub graph: Option<GraphKind>,

    /// Grid height.
    #[arg(long, visible_alias = "h")]
    pub height: Option<usize>,

    /// Grid width.
    #[arg(long, visible_alias = "w")]
    pub width: Option<usize>,

    /// Number of communities.
    #[arg(long)]
    pub num_communities: Option<usize>,

    /// Nodes per community.
    #[arg(long)]
    pub community_size: Option<usize>,

    /// Fraction of intra-community edges rewired across communities.
    #[arg(long)]
    pub rewire_frac: Option<f64>,

    /// Edge list for --graph file.
    #[arg(long)]
    pub edge_file: Option<PathBuf>,

    /// Node features for --graph file.
    #[arg(long)]
    pub feature_file: Option<PathBuf>,

    /// Node labels for --graph file.
    #[arg(long)]
    pub label_file: Option<PathBuf>,

    /// Node attributes when no feature file is given.
    #[arg(long, value_enum)]
    pub feature_mode: Option<FeatureMode>,

    /// Propagation depth K.
    #[arg(long)]
    pub k: Option<usize>,

    /// Stochastic signal width d.
    #[arg(long)]
    pub stoch_dim: Option<usize>,

    /// Hidden width of the MLP / GCN branches.
    #[arg(long)]
    pub hidden_dim: Option<usize>,

    /// Output embedding width (node task: defaults to the class count).
    #[arg(long)]
    pub out_dim: Option<usize>,

    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,

    /// Multiplier applied to the learning rate at each decay step.
    #[arg(long)]
    pub lr_decay_factor: Option<f64>,

    /// Epochs between decay steps (0 disables decay).
    #[arg(long)]
    pub lr_decay_every: Option<usize>,

    /// L2 weight decay added to gradients.
    #[arg(long)]
    pub weight_decay: Option<f64>,

    /// Training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Epochs between validation passes.
    #[arg(long)]
    pub eval_every: Option<usize>,

    /// Keep the stochastic signal fixed or resample it every epoch.
    #[arg(long, value_enum)]
    pub stoch_mode: Option<StochModeArg>,

    /// Propagate over all edges or training positives only.
    #[arg(long, value_enum)]
    pub propagate_on: Option<PropagateArg>,

    /// Fraction of edges/pairs used for training.
    #[arg(long)]
    pub train_ratio: Option<f64>,

    /// Fraction of edges/pairs used for validation.
    #[arg(long)]
    pub val_ratio: Option<f64>,

    /// Labeled training nodes per class (node task).
    #[arg(long)]
    pub train_per_class: Option<usize>,

    /// Labeled validation nodes per class (node task).
    #[arg(long)]
    pub val_per_class: Option<usize>,

    /// Cap on positive pairs for the pair task (default: the edge count).
    #[arg(long)]
    pub max_pairs: Option<usize>,

    /// Master seed; every random component derives its own stream from it.
    #[arg(long)]
    pub seed: Option<u64>,

    /// How many derived run seeds to train.
    #[arg(long)]
    pub num_seeds: Option<usize>,

    /// Explicit run seeds (overrides --num-seeds derivation).
    #[arg(long, value_delimiter = ',', conflicts_with = "num_seeds")]
    pub seeds: Option<Vec<u64>>,

    /// Train the seeds on worker threads instead of sequentially.
    #[arg(long)]
    pub parallel: bool,
}

/// The same keys as the flags, all optional; unknown keys are rejected so a
/// typo cannot silently fall back to a default.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    out: Option<PathBuf>,
    task: Option<TaskArg>,
    model: Option<ModelKind>,
    graph: Option<GraphKind>,
    height: Option<usize>,
    width: Option<usize>,
    num_communities: Option<usize>,
    community_size: Option<usize>,
    rewire_frac: Option<f64>,
    edge_file: Option<PathBuf>,
    feature_file: Option<PathBuf>,
    label_file: Option<PathBuf>,
    feature_mode: Option<FeatureMode>,
    k: Option<usize>,
    stoch_dim: Option<usize>,
    hidden_dim: Option<usize>,
    out_dim: Option<usize>,
    lr: Option<f64>,
    lr_decay_factor: Option<f64>,
    lr_decay_every: Option<usize>,
    weight_decay: Option<f64>,
    epochs: Option<usize>,
    eval_every: Option<usize>,
    stoch_mode: Option<StochModeArg>,
    propagate_on: Option<PropagateArg>,
    train_ratio: Option<f64>,
    val_ratio: Option<f64>,
    train_per_class: Option<usize>,
    val_per_class: Option<usize>,
    max_pairs: Option<usize>,
    seed: Option<u64>,
    num_seeds: Option<usize>,
    seeds: Option<Vec<u64>>,
}

/// Split parameters actually used, one variant per task.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SplitEcho {
    Link {
        train_ratio: f64,
        val_ratio: f64,
        test_ratio: f64,
    },
    Pair {
        max_pairs: usize,
        train_ratio: f64,
        val_ratio: f64,
        test_ratio: f64,
    },
    Node {
        train_per_class: usize,
        val_per_class: usize,
    },
}

/// Fully resolved run description; embedded in the metrics JSON so any run
/// is reproducible from its own output.
#[derive(Debug, Serialize)]
struct ResolvedConfig {
    task: TaskArg,
    model: ModelKind,
    dataset: DatasetEcho,
    /// None when features came from a file rather than a synthetic fill.
    feature_mode: Option<FeatureMode>,
    k: usize,
    stoch_dim: usize,
    hidden_dim: usize,
    out_dim: usize,
    lr: f64,
    lr_decay_factor: f64,
    lr_decay_every: usize,
    weight_decay: f64,
    epochs: usize,
    eval_every: usize,
    stoch_mode: StochModeArg,
    propagate_on: PropagateArg,
    split: SplitEcho,
    seed: u64,
    run_seeds: Vec<u64>,
    out_dir: String,
}

#[derive(Clone, Debug, Serialize)]
struct SeedRecord {
    index: usize,
    run_seed: u64,
    split_seed: u64,
    param_seed: u64,
    stoch_seed: u64,
    best_epoch: usize,
    best_val: f64,
    best_test: f64,
}

#[derive(Debug, Serialize)]
struct Metrics {
    config: ResolvedConfig,
    /// Name of the task metric the per-seed values report.
    metric: &'static str,
    per_seed: Vec<SeedRecord>,
    summary: Summary,
}

#[derive(Debug, Serialize)]
struct Summary {
    mean: f64,
    /// Sample standard deviation across seeds; 0 for a single seed.
    std: f64,
}

pub fn run(args: TrainArgs) -> CmdResult {
    let file = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::Runtime(format!("cannot read config `{}`: {e}", path.display()))
            })?;
            toml::from_str::<FileConfig>(&text).map_err(|e| {
                Failure::Runtime(format!("config `{}`: {e}", path.display()))
            })?
        }
        None => FileConfig::default(),
    };
    let parallel = args.parallel;
    let out_dir = args
        .out
        .clone()
        .or(file.out.clone())
        .unwrap_or_else(|| PathBuf::from("train-out"));
    let (mut cfg, g) = resolve(args, file)?;
    cfg.out_dir = out_dir.display().to_string();

    std::fs::create_dir_all(&out_dir)?;
    let metrics_path = out_dir.join("metrics.json");

    let records = if parallel && cfg.run_seeds.len() > 1 {
        let results: Vec<CmdResult<SeedRecord>> = std::thread::scope(|scope| {
            let handles: Vec<_> = cfg
                .run_seeds
                .iter()
                .enumerate()
                .map(|(i, &rs)| {
                    let (cfg, g, out_dir) = (&cfg, &g, &out_dir);
                    scope.spawn(move || run_one_seed(i, rs, cfg, g, out_dir))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Failure::Runtime("seed worker panicked".into())))
                })
                .collect()
        });
        results.into_iter().collect::<CmdResult<Vec<_>>>()?
    } else {
        let mut records = Vec::with_capacity(cfg.run_seeds.len());
        for (i, &rs) in cfg.run_seeds.iter().enumerate() {
            records.push(run_one_seed(i, rs, &cfg, &g, &out_dir)?);
        }
        records
    };

    let metric = match cfg.task {
        TaskArg::Link | TaskArg::Pair => "auc",
        TaskArg::Node => "accuracy",
    };
    for r in &records {
        println!(
            "seed {} (run seed {}): best epoch {}, val {:.4}, test {:.4}",
            r.index, r.run_seed, r.best_epoch, r.best_val, r.best_test
        );
    }
    let tests: Vec<f64> = records.iter().map(|r| r.best_test).collect();
    let summary = Summary {
        mean: mean(&tests),
        std: sample_std(&tests),
    };
    println!(
        "{metric} over {} seed(s): {:.4} +/- {:.4}",
        tests.len(),
        summary.mean,
        summary.std
    );

    let metrics = Metrics {
        config: cfg,
        metric,
        per_seed: records,
        summary,
    };
    write_json(&metrics_path, &metrics)?;
    println!("wrote {}", metrics_path.display());
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() <= 1 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Merges flags over file values over defaults into a concrete run plan,
/// building the graph on the way (some defaults depend on it).
fn resolve(args: TrainArgs, file: FileConfig) -> CmdResult<(ResolvedConfig, Graph)> {
    let task = args.task.or(file.task).unwrap_or(TaskArg::Link);
    let model = args.model.or(file.model).unwrap_or(ModelKind::SmpLinear);
    let seed = args.seed.or(file.seed).unwrap_or(0);

    let feature_mode = args.feature_mode.or(file.feature_mode);
    let graph_opts = GraphOpts {
        graph: args.graph.or(file.graph).unwrap_or(GraphKind::Communities),
        height: args.height.or(file.height).unwrap_or(20),
        width: args.width.or(file.width).unwrap_or(20),
        num_communities: args.num_communities.or(file.num_communities).unwrap_or(20),
        community_size: args.community_size.or(file.community_size).unwrap_or(20),
        rewire_frac: args.rewire_frac.or(file.rewire_frac).unwrap_or(0.01),
        edge_file: args.edge_file.or(file.edge_file),
        feature_file: args.feature_file.or(file.feature_file),
        label_file: args.label_file.or(file.label_file),
        feature_mode,
    };
    let (g, dataset) = build_graph(&graph_opts, seed, FeatureMode::Constant)?;
    let synthetic_features = graph_opts.feature_file.is_none();

    let classes = g
        .labels
        .as_ref()
        .and_then(|l| l.iter().copied().max())
        .map(|m| m as usize + 1);
    let out_dim = match (args.out_dim.or(file.out_dim), task) {
        (Some(d), _) => d,
        (None, TaskArg::Node) => classes.ok_or_else(|| {
            Failure::Runtime("node task needs labeled nodes to size the output layer".into())
        })?,
        (None, _) => 32,
    };

    let train_ratio = args.train_ratio.or(file.train_ratio).unwrap_or(0.8);
    let val_ratio = args.val_ratio.or(file.val_ratio).unwrap_or(0.1);
    let test_ratio = 1.0 - train_ratio - val_ratio;
    if !(train_ratio > 0.0 && val_ratio > 0.0 && test_ratio > 0.0) {
        return Err(usage(format!(
            "split ratios must be positive and sum below 1 \
             (train {train_ratio}, val {val_ratio} leave test {test_ratio})"
        )));
    }
    let split = match task {
        TaskArg::Link => SplitEcho::Link {
            train_ratio,
            val_ratio,
            test_ratio,
        },
        TaskArg::Pair => SplitEcho::Pair {
            max_pairs: args.max_pairs.or(file.max_pairs).unwrap_or(g.num_edges()),
            train_ratio,
            val_ratio,
            test_ratio,
        },
        TaskArg::Node => SplitEcho::Node {
            train_per_class: args.train_per_class.or(file.train_per_class).unwrap_or(5),
            val_per_class: args.val_per_class.or(file.val_per_class).unwrap_or(5),
        },
    };

    let run_seeds = match args.seeds.or(file.seeds) {
        Some(list) if list.is_empty() => {
            return Err(usage("--seeds must list at least one seed"));
        }
        Some(list) => list,
        None => {
            let n = args.num_seeds.or(file.num_seeds).unwrap_or(10);
            if n == 0 {
                return Err(usage("--num-seeds must be at least 1"));
            }
            (0..n)
                .map(|i| derived_seed(seed, &format!("run/{i}")))
                .collect()
        }
    };

    let cfg = ResolvedConfig {
        task,
        model,
        dataset,
        feature_mode: synthetic_features
            .then(|| feature_mode.unwrap_or(FeatureMode::Constant)),
        k: args.k.or(file.k).unwrap_or(2),
        stoch_dim: args.stoch_dim.or(file.stoch_dim).unwrap_or(32),
        hidden_dim: args.hidden_dim.or(file.hidden_dim).unwrap_or(32),
        out_dim,
        lr: args.lr.or(file.lr).unwrap_or(0.01),
        lr_decay_factor: args
            .lr_decay_factor
            .or(file.lr_decay_factor)
            .unwrap_or(0.1),
        lr_decay_every: args.lr_decay_every.or(file.lr_decay_every).unwrap_or(200),
        weight_decay: args.weight_decay.or(file.weight_decay).unwrap_or(5e-4),
        epochs: args.epochs.or(file.epochs).unwrap_or(1000),
        eval_every: args.eval_every.or(file.eval_every).unwrap_or(5),
        stoch_mode: args
            .stoch_mode
            .or(file.stoch_mode)
            .unwrap_or(StochModeArg::Fixed),
        propagate_on: args
            .propagate_on
            .or(file.propagate_on)
            .unwrap_or(PropagateArg::Full),
        split,
        seed,
        run_seeds,
        out_dir: String::new(),
    };
    Ok((cfg, g))
}

fn run_one_seed(
    index: usize,
    run_seed: u64,
    cfg: &ResolvedConfig,
    g: &Graph,
    out_dir: &Path,
) -> CmdResult<SeedRecord> {
    let split_seed = derived_seed(run_seed, "split");
    let param_seed = derived_seed(run_seed, "params");
    let stoch_seed = derived_seed(run_seed, "stochastic");

    let task = match cfg.split {
        SplitEcho::Link {
            train_ratio,
            val_ratio,
            test_ratio,
        } => TaskSplit::Link(split_edges(g, (train_ratio, val_ratio, test_ratio), split_seed)?),
        SplitEcho::Pair {
            max_pairs,
            train_ratio,
            val_ratio,
            test_ratio,
        } => TaskSplit::Pair(split_pairs(
            g,
            max_pairs,
            (train_ratio, val_ratio, test_ratio),
            split_seed,
        )?),
        SplitEcho::Node {
            train_per_class,
            val_per_class,
        } => TaskSplit::Node(split_nodes(g, (train_per_class, val_per_class), split_seed)?),
    };
    write_json(out_dir.join(format!("split_seed{index}.json")), &task)?;

    let feat_dim = g.features.as_ref().map_or(0, |f| f.cols);
    let spec = ModelSpec {
        kind: cfg.model,
        k_steps: cfg.k,
        feat_dim,
        stoch_dim: cfg.stoch_dim,
        hidden_dim: cfg.hidden_dim,
        out_dim: cfg.out_dim,
    };
    let train_cfg = TrainConfig {
        lr: cfg.lr,
        lr_decay_factor: cfg.lr_decay_factor,
        lr_decay_every: cfg.lr_decay_every,
        weight_decay: cfg.weight_decay,
        epochs: cfg.epochs,
        eval_every: cfg.eval_every,
        seed: param_seed,
        propagate_on: cfg.propagate_on.to_lib(),
    };
    let stoch_cfg = StochasticConfig {
        dim: cfg.stoch_dim,
        seed: stoch_seed,
        mode: cfg.stoch_mode.to_lib(),
    };

    let outcome = train::<f64>(&spec, g, &task, &train_cfg, &stoch_cfg)
        .map_err(|e| Failure::Runtime(format!("seed {index} (run seed {run_seed}): {e}")))?;

    write_trace_csv(out_dir.join(format!("trace_seed{index}.csv")), &outcome.trace)?;
    save_checkpoint(
        out_dir.join(format!("checkpoint_seed{index}.json")),
        &spec,
        &outcome.params,
    )?;

    Ok(SeedRecord {
        index,
        run_seed,
        split_seed,
        param_seed,
        stoch_seed,
        best_epoch: outcome.best_epoch,
        best_val: outcome.best_val,
        best_test: outcome.best_test,
    })
}
