//! `smp bench`: wall-clock cost of one training epoch (update plus
//! evaluation) per model variant, written as a CSV with a ratio column
//! against the SGC baseline.

use crate::common::{build_graph, derived_seed, usage, CmdResult, Failure, FeatureMode, GraphOpts};
use smp::bench::{bench_epoch, BenchReport};
use smp::model::{ModelKind, ModelSpec};
use smp::split::{split_edges, TaskSplit};
use smp::stochastic::StochasticConfig;
use smp::train::TrainConfig;
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(clap::Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub graph: GraphOpts,

    /// Comma-separated variants to time. The sgc baseline is always timed
    /// as the ratio denominator and is prepended when missing.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<ModelKind>>,

    /// Timed epochs per variant.
    #[arg(long, default_value_t = 3000)]
    pub reps: usize,

    /// Propagation depth K.
    #[arg(long, default_value_t = 2)]
    pub k: usize,

    /// Stochastic signal width d.
    #[arg(long, default_value_t = 32)]
    pub stoch_dim: usize,

    /// Hidden width of the MLP / GCN branches.
    #[arg(long, default_value_t = 32)]
    pub hidden_dim: usize,

    /// Output embedding width.
    #[arg(long, default_value_t = 32)]
    pub out_dim: usize,

    /// Keep the stochastic signal fixed or resample it every epoch.
    #[arg(long, value_enum, default_value_t = crate::train::StochModeArg::Fixed)]
    pub stoch_mode: crate::train::StochModeArg,

    /// Master seed for the split, parameters, and stochastic signal.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: BenchArgs) -> CmdResult {
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let mut models = args
        .models
        .clone()
        .unwrap_or_else(|| vec![ModelKind::Sgc, ModelKind::SmpLinear]);
    if !models.contains(&ModelKind::Sgc) {
        models.insert(0, ModelKind::Sgc);
    }

    // One-hot attributes keep the baseline's feature block comparable to
    // the real-attribute regime the timing comparison targets; constant
    // attributes would shrink it to a single column.
    let (g, _) = build_graph(&args.graph, args.seed, FeatureMode::Identity)?;
    let feat_dim = g.features.as_ref().map_or(0, |f| f.cols);
    let task = TaskSplit::Link(split_edges(
        &g,
        (0.8, 0.1, 0.1),
        derived_seed(args.seed, "split"),
    )?);
    let train_cfg = TrainConfig {
        seed: derived_seed(args.seed, "params"),
        ..TrainConfig::default()
    };
    let stoch_cfg = StochasticConfig {
        dim: args.stoch_dim,
        seed: derived_seed(args.seed, "stochastic"),
        mode: args.stoch_mode.to_lib(),
    };

    let mut reports: Vec<(ModelKind, BenchReport)> = Vec::with_capacity(models.len());
    for &kind in &models {
        let spec = ModelSpec {
            kind,
            k_steps: args.k,
            feat_dim,
            stoch_dim: args.stoch_dim,
            hidden_dim: args.hidden_dim,
            out_dim: args.out_dim,
        };
        let report = bench_epoch::<f64>(&spec, &g, &task, &train_cfg, &stoch_cfg, args.reps)?;
        eprintln!(
            "{kind}: {:.3} ms/epoch (std {:.3}, cv {:.3}, {} reps)",
            report.mean_ms, report.std_ms, report.cv, report.reps
        );
        reports.push((kind, report));
    }

    let sgc_mean = reports
        .iter()
        .find(|(k, _)| *k == ModelKind::Sgc)
        .map(|(_, r)| r.mean_ms)
        .expect("sgc is always benchmarked");

    let mut csv = String::from("model,reps,mean_ms,std_ms,cv,ratio_vs_sgc\n");
    for (kind, r) in &reports {
        writeln!(
            csv,
            "{kind},{},{},{},{},{}",
            r.reps,
            r.mean_ms,
            r.std_ms,
            r.cv,
            r.mean_ms / sgc_mean
        )
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    }

    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
