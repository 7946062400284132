//! Shared plumbing: exit-code classification, labeled seed derivation, and
//! the graph-building options used by every subcommand.

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use smp::datasets::{constant_features, gen_communities, gen_grid, identity_features, load_graph};
use smp::Graph;
use std::path::PathBuf;

/// Why a command failed, mapped to the process exit code in `main`.
#[derive(Debug)]
pub enum Failure {
    /// Contradictory or incomplete flags (exit 1).
    Usage(String),
    /// Anything that went wrong while doing the work: I/O, bad data files,
    /// invalid runtime combinations (exit 2).
    Runtime(String),
    /// The requested checks ran, and at least one invariant does not hold
    /// (exit 3). The report has already been printed when this is returned.
    Verification,
}

pub type CmdResult<T = ()> = Result<T, Failure>;

impl From<smp::Error> for Failure {
    fn from(e: smp::Error) -> Failure {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Failure {
        Failure::Runtime(e.to_string())
    }
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer (bijective, strong avalanche).
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a textual label. Every
/// random consumer (dataset, split, parameters, stochastic signal, ...)
/// gets its own label, so adding a consumer never shifts the stream of
/// another, and the whole run is reproducible from the single master seed.
pub fn derived_seed(parent: u64, label: &str) -> u64 {
    // FNV-1a over the label, folded into the parent via the same
    // splitmix-style chaining the sampler uses internally.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in label.as_bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3);
    }
    mix64(parent ^ h.wrapping_mul(GOLDEN).wrapping_add(GOLDEN))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Grid,
    Communities,
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    /// Single all-ones attribute column (the synthetic-benchmark default).
    Constant,
    /// One-hot identity attributes, one column per node.
    Identity,
}

/// Graph selection shared by `verify` and `bench`. (`train` re-declares
/// these fields as optionals so a config file can supply them.)
#[derive(clap::Args, Clone, Debug)]
pub struct GraphOpts {
    /// Graph to build: a generator name or `file` for on-disk data.
    #[arg(long, value_enum)]
    pub graph: GraphKind,

    /// Grid height.
    #[arg(long, visible_alias = "h", default_value_t = 20)]
    pub height: usize,

    /// Grid width.
    #[arg(long, visible_alias = "w", default_value_t = 20)]
    pub width: usize,

    /// Number of communities.
    #[arg(long, default_value_t = 20)]
    pub num_communities: usize,

    /// Nodes per community.
    #[arg(long, default_value_t = 20)]
    pub community_size: usize,

    /// Fraction of intra-community edges rewired across communities.
    #[arg(long, default_value_t = 0.01)]
    pub rewire_frac: f64,

    /// Edge list (`u v` per line) for --graph file.
    #[arg(long)]
    pub edge_file: Option<PathBuf>,

    /// Optional whitespace-separated node-feature table for --graph file.
    #[arg(long)]
    pub feature_file: Option<PathBuf>,

    /// Optional node-label file (one integer per line) for --graph file.
    #[arg(long)]
    pub label_file: Option<PathBuf>,

    /// Node attributes to attach when no feature file is given.
    #[arg(long, value_enum)]
    pub feature_mode: Option<FeatureMode>,
}

/// Resolved description of the graph a run used; echoed into every JSON
/// report so the run can be reproduced from its output alone.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetEcho {
    Grid {
        height: usize,
        width: usize,
    },
    Communities {
        num_communities: usize,
        community_size: usize,
        rewire_frac: f64,
        seed: u64,
    },
    File {
        edge_file: String,
        feature_file: Option<String>,
        label_file: Option<String>,
    },
}

/// Builds the requested graph and attaches features. `master_seed` feeds
/// the communities generator through the label "dataset", so `gen` and the
/// in-process generators agree for equal master seeds.
pub fn build_graph(
    opts: &GraphOpts,
    master_seed: u64,
    default_features: FeatureMode,
) -> CmdResult<(Graph, DatasetEcho)> {
    let (g, echo) = match opts.graph {
        GraphKind::Grid => (
            gen_grid(opts.height, opts.width)?,
            DatasetEcho::Grid {
                height: opts.height,
                width: opts.width,
            },
        ),
        GraphKind::Communities => {
            let seed = derived_seed(master_seed, "dataset");
            (
                gen_communities(
                    opts.num_communities,
                    opts.community_size,
                    opts.rewire_frac,
                    seed,
                )?,
                DatasetEcho::Communities {
                    num_communities: opts.num_communities,
                    community_size: opts.community_size,
                    rewire_frac: opts.rewire_frac,
                    seed,
                },
            )
        }
        GraphKind::File => {
            let edges = opts
                .edge_file
                .as_ref()
                .ok_or_else(|| usage("--graph file requires --edge-file"))?;
            let g = load_graph(
                edges,
                opts.feature_file.as_deref(),
                opts.label_file.as_deref(),
            )?;
            (
                g,
                DatasetEcho::File {
                    edge_file: edges.display().to_string(),
                    feature_file: opts.feature_file.as_ref().map(|p| p.display().to_string()),
                    label_file: opts.label_file.as_ref().map(|p| p.display().to_string()),
                },
            )
        }
    };
    let g = if g.features.is_some() {
        g
    } else {
        match opts.feature_mode.unwrap_or(default_features) {
            FeatureMode::Constant => constant_features(g)?,
            FeatureMode::Identity => identity_features(g)?,
        }
    };
    Ok((g, echo))
}
