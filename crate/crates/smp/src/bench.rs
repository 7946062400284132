//! Wall-clock timing of training epochs.
//!
//! One measured repetition covers a full optimization step plus one
//! evaluation pass, matching what the training loop does on evaluation
//! epochs. Reports mean, standard deviation and coefficient of variation
//! across repetitions.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::ModelSpec;
use crate::scalar::Scalar;
use crate::split::TaskSplit;
use crate::stochastic::StochasticConfig;
use crate::train::{Engine, TrainConfig};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub reps: usize,
    pub mean_ms: f64,
    pub std_ms: f64,
    /// Standard deviation divided by the mean; a rough stability indicator.
    pub cv: f64,
}

/// Times `reps` epochs (update + evaluation each) after a short warmup.
pub fn bench_epoch<T: Scalar>(
    spec: &ModelSpec,
    g: &Graph,
    task: &TaskSplit,
    cfg: &TrainConfig,
    scfg: &StochasticConfig,
    reps: usize,
) -> Result<BenchReport> {
    if reps == 0 {
        return Err(Error::Invalid("benchmark needs at least one repetition".into()));
    }
    let mut engine = Engine::<T>::new(spec, g, task, cfg, scfg)?;
    let warmup = (reps / 10).clamp(1, 50);
    for epoch in 0..warmup {
        engine.epoch(epoch)?;
        engine.evaluate()?;
    }
    let mut samples_ms = Vec::with_capacity(reps);
    for rep in 0..reps {
        let start = Instant::now();
        engine.epoch(warmup + rep)?;
        engine.evaluate()?;
        samples_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }
    let mean = samples_ms.iter().sum::<f64>() / reps as f64;
    let var = samples_ms.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / reps as f64;
    let std = var.sqrt();
    Ok(BenchReport {
        reps,
        mean_ms: mean,
        std_ms: std,
        cv: if mean > 0.0 { std / mean } else { 0.0 },
    })
}
