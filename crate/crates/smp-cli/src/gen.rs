//! `smp gen`: write a synthetic dataset to disk.

use crate::common::{derived_seed, CmdResult, Failure};
use smp::datasets::{gen_communities, gen_grid, write_edge_list, write_labels};
use smp::Graph;
use std::path::{Path, PathBuf};

#[derive(clap::Args, Debug)]
pub struct GenArgs {
    #[command(subcommand)]
    pub generator: Generator,
}

#[derive(clap::Subcommand, Debug)]
pub enum Generator {
    /// Rectangular lattice (no labels; deterministic).
    Grid {
        /// Grid height.
        #[arg(long, visible_alias = "h", default_value_t = 20)]
        height: usize,

        /// Grid width.
        #[arg(long, visible_alias = "w", default_value_t = 20)]
        width: usize,

        /// Existing directory to write `edges.txt` into.
        #[arg(long)]
        out: PathBuf,

        /// Overwrite files that already exist.
        #[arg(long)]
        force: bool,
    },
    /// Densely connected communities with a fraction of rewired edges;
    /// community membership is written as node labels.
    Communities {
        /// Number of communities.
        #[arg(long, default_value_t = 20)]
        num_communities: usize,

        /// Nodes per community.
        #[arg(long, default_value_t = 20)]
        community_size: usize,

        /// Fraction of intra-community edges rewired across communities.
        #[arg(long, default_value_t = 0.01)]
        rewire_frac: f64,

        /// Master seed (the generator stream is derived from it).
        #[arg(long, default_value_t = 0)]
        seed: u64,

        /// Existing directory to write `edges.txt` and `labels.csv` into.
        #[arg(long)]
        out: PathBuf,

        /// Overwrite files that already exist.
        #[arg(long)]
        force: bool,
    },
}

pub fn run(args: GenArgs) -> CmdResult {
    match args.generator {
        Generator::Grid {
            height,
            width,
            out,
            force,
        } => {
            let g = gen_grid(height, width)?;
            write_dataset(&g, &out, force)
        }
        Generator::Communities {
            num_communities,
            community_size,
            rewire_frac,
            seed,
            out,
            force,
        } => {
            let g = gen_communities(
                num_communities,
                community_size,
                rewire_frac,
                derived_seed(seed, "dataset"),
            )?;
            write_dataset(&g, &out, force)
        }
    }
}

fn refuse_overwrite(path: &Path, force: bool) -> CmdResult {
    if path.exists() && !force {
        return Err(Failure::Runtime(format!(
            "`{}` already exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

fn write_dataset(g: &Graph, out_dir: &Path, force: bool) -> CmdResult {
    if !out_dir.is_dir() {
        return Err(Failure::Runtime(format!(
            "output directory `{}` does not exist",
            out_dir.display()
        )));
    }
    let edge_path = out_dir.join("edges.txt");
    let label_path = out_dir.join("labels.csv");
    refuse_overwrite(&edge_path, force)?;
    if g.labels.is_some() {
        refuse_overwrite(&label_path, force)?;
    }
    write_edge_list(g, &edge_path)?;
    println!(
        "wrote {}: {} nodes, {} edges",
        edge_path.display(),
        g.num_nodes,
        g.num_edges()
    );
    if let Some(labels) = &g.labels {
        write_labels(labels, &label_path)?;
        let classes = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        println!("wrote {}: {} classes", label_path.display(), classes);
    }
    Ok(())
}
