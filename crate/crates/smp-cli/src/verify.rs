//! `smp verify`: executable checks of the method's structural claims on a
//! chosen graph. Exit code 3 means the checks ran and at least one failed.
//!
//! Suites:
//!   chi          scaled pairwise distances of the raw stochastic matrix
//!                against the analytic chi moments
//!   equivariance deterministic baselines commute with node relabeling
//!   collision    deterministic baselines collapse automorphic twins,
//!                stochastic signals keep them apart
//!   jl           propagated random signals recover the walk proximity
//!                matrix within the dimension bound

use crate::common::{
    build_graph, derived_seed, usage, CmdResult, DatasetEcho, Failure, FeatureMode, GraphOpts,
};
use serde::Serialize;
use smp::graph::{adjacency_normalized, apply_permutation};
use smp::jsonio::write_json;
use smp::model::{init_params, ModelKind, ModelParams, ModelSpec};
use smp::stochastic::{chi_distance_check, sample_stochastic, ChiDistanceReport, StochasticConfig};
use smp::verify::{
    check_automorphic_collision, d0_bound, equivariance_deviation_with_adj, jl_error_report,
    propagation_power, JlReport, TwinGapReport,
};
use smp::{Graph, NodePermutation, SparseMatrix};
use std::path::PathBuf;

/// Largest deviation tolerated from models that are exactly equivariant.
const DETERMINISTIC_TOL: f64 = 1e-9;
/// Twin gap the stochastic identity model must exceed.
const MIN_STOCHASTIC_GAP: f64 = 0.1;
/// Chi gate in units of the iid standard error. Pairs sharing a row are
/// positively correlated, so the spread of the sample mean runs above the
/// iid estimate; four units absorbs that inflation.
const CHI_SIGMA: f64 = 4.0;

#[derive(clap::Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub graph: GraphOpts,

    /// Run every suite (also the default when no suite flag is given).
    #[arg(long)]
    pub all: bool,

    /// Chi-distribution check of pairwise stochastic distances.
    #[arg(long)]
    pub chi: bool,

    /// Permutation-equivariance check of the deterministic baselines.
    #[arg(long)]
    pub equivariance: bool,

    /// Automorphic-twin collapse / separation check.
    #[arg(long)]
    pub collision: bool,

    /// Proximity-recovery check at the computed dimension bound.
    #[arg(long)]
    pub jl: bool,

    /// Propagation depth K.
    #[arg(long, default_value_t = 2)]
    pub k: usize,

    /// Stochastic signal width d.
    #[arg(long, default_value_t = 32)]
    pub stoch_dim: usize,

    /// Per-entry error bound for the proximity check.
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,

    /// Failure probability for the proximity check.
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,

    /// Random permutations tested per model.
    #[arg(long, default_value_t = 5)]
    pub permutations: usize,

    /// Rows of the sampled matrix for the chi check.
    #[arg(long, default_value_t = 2000)]
    pub chi_rows: usize,

    /// Sampled row pairs for the chi check.
    #[arg(long, default_value_t = 10000)]
    pub chi_pairs: usize,

    /// Master seed for all derived streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Deliberately corrupt the relabeled operator; the equivariance suite
    /// must then fail (negative control for the checks themselves).
    #[arg(long)]
    pub negative_control: bool,
}

#[derive(Debug, Serialize)]
struct VerifyEcho {
    dataset: DatasetEcho,
    feature_mode: FeatureMode,
    k: usize,
    stoch_dim: usize,
    eps: f64,
    delta: f64,
    permutations: usize,
    chi_rows: usize,
    chi_pairs: usize,
    seed: u64,
    negative_control: bool,
    suites: Vec<&'static str>,
}

#[derive(Debug, Serialize)]
struct ChiSection {
    #[serde(flatten)]
    stats: ChiDistanceReport,
    rows: usize,
    deviation: f64,
    tolerance: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct EquivSection {
    permutations: usize,
    tolerance: f64,
    negative_control: bool,
    sgc_max_deviation: f64,
    gcn_max_deviation: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct CollisionSection {
    equivariant_tolerance: f64,
    stochastic_min_gap: f64,
    sgc: TwinGapReport,
    gcn: TwinGapReport,
    smp_identity: TwinGapReport,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct JlSection {
    #[serde(flatten)]
    report: JlReport,
    /// How the tested width was chosen from the bound.
    dim_rule: &'static str,
    required_success: f64,
    pass: bool,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    config: VerifyEcho,
    #[serde(skip_serializing_if = "Option::is_none")]
    chi: Option<ChiSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    equivariance: Option<EquivSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collision: Option<CollisionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    jl: Option<JlSection>,
    pass: bool,
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn run(args: VerifyArgs) -> CmdResult {
    let explicit = args.chi || args.equivariance || args.collision || args.jl;
    let run_all = args.all || !explicit;
    let (do_chi, do_equiv, do_coll, do_jl) = if run_all {
        (true, true, true, true)
    } else {
        (args.chi, args.equivariance, args.collision, args.jl)
    };
    if args.negative_control && !do_equiv {
        return Err(usage(
            "--negative-control corrupts the relabeled operator, so it needs \
             the equivariance suite (--equivariance or --all)",
        ));
    }
    if do_chi && (args.chi_rows < 2 || args.chi_pairs < 2) {
        return Err(usage("chi check needs --chi-rows >= 2 and --chi-pairs >= 2"));
    }
    if do_chi && args.stoch_dim == 0 {
        return Err(usage("chi check needs --stoch-dim >= 1"));
    }
    if do_equiv && args.permutations == 0 {
        return Err(usage("--permutations must be at least 1"));
    }

    // One-hot attributes exercise every feature coordinate, which makes the
    // equivariance and collision checks maximally sensitive.
    let (g, dataset) = build_graph(&args.graph, args.seed, FeatureMode::Identity)?;
    let feature_mode = args.graph.feature_mode.unwrap_or(FeatureMode::Identity);
    let adj = adjacency_normalized::<f64>(&g);

    let mut suites = Vec::new();
    let mut report = VerifyReport {
        config: VerifyEcho {
            dataset,
            feature_mode,
            k: args.k,
            stoch_dim: args.stoch_dim,
            eps: args.eps,
            delta: args.delta,
            permutations: args.permutations,
            chi_rows: args.chi_rows,
            chi_pairs: args.chi_pairs,
            seed: args.seed,
            negative_control: args.negative_control,
            suites: Vec::new(),
        },
        chi: None,
        equivariance: None,
        collision: None,
        jl: None,
        pass: true,
    };

    if do_chi {
        suites.push("chi");
        let section = chi_suite(&args);
        println!(
            "chi distance: {} — sample mean {:.5} vs analytic {:.5} \
             (|dev| {:.2e} vs {CHI_SIGMA:.0} x std err = {:.2e})",
            verdict(section.pass),
            section.stats.sample_mean,
            section.stats.analytic_mean,
            section.deviation,
            section.tolerance,
        );
        report.pass &= section.pass;
        report.chi = Some(section);
    }
    if do_equiv {
        suites.push("equivariance");
        let section = equivariance_suite(&args, &g, &adj)?;
        println!(
            "equivariance: {} — max deviation sgc {:.2e}, gcn {:.2e} over {} permutation(s) (tol {:.0e}){}",
            verdict(section.pass),
            section.sgc_max_deviation,
            section.gcn_max_deviation,
            section.permutations,
            section.tolerance,
            if section.negative_control {
                " [negative control active]"
            } else {
                ""
            },
        );
        report.pass &= section.pass;
        report.equivariance = Some(section);
    }
    if do_coll {
        suites.push("collision");
        let section = collision_suite(&args, &g)?;
        println!(
            "automorphic twins: {} — max gap sgc {:.2e}, gcn {:.2e} (tol {:.0e}); \
             smp-identity min gap {:.3} (need > {MIN_STOCHASTIC_GAP})",
            verdict(section.pass),
            section.sgc.max_gap,
            section.gcn.max_gap,
            section.equivariant_tolerance,
            section.smp_identity.min_gap,
        );
        report.pass &= section.pass;
        report.collision = Some(section);
    }
    if do_jl {
        suites.push("jl");
        let section = jl_suite(&args, &adj)?;
        println!(
            "proximity recovery: {} — d0({}, {}) = {:.1}, tested width {}, \
             success rate {:.4} (need >= {:.3})",
            verdict(section.pass),
            section.report.eps,
            section.report.delta,
            section.report.d0,
            section.report.dim,
            section.report.success_rate,
            section.required_success,
        );
        report.pass &= section.pass;
        report.jl = Some(section);
    }
    report.config.suites = suites;

    let passed = [
        report.chi.as_ref().map(|s| s.pass),
        report.equivariance.as_ref().map(|s| s.pass),
        report.collision.as_ref().map(|s| s.pass),
        report.jl.as_ref().map(|s| s.pass),
    ];
    let ran = passed.iter().flatten().count();
    let ok = passed.iter().flatten().filter(|p| **p).count();
    println!("verification: {} ({ok}/{ran} suites)", verdict(report.pass));

    match &args.out {
        Some(path) => {
            write_json(path, &report)?;
            println!("wrote {}", path.display());
        }
        None => {
            let text = serde_json::to_string_pretty(&report)
                .map_err(|e| Failure::Runtime(e.to_string()))?;
            println!("{text}");
        }
    }

    if report.pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}

fn chi_suite(args: &VerifyArgs) -> ChiSection {
    let e = sample_stochastic::<f64>(
        args.chi_rows,
        &StochasticConfig::fixed(args.stoch_dim, derived_seed(args.seed, "chi-matrix")),
        0,
    );
    let stats = chi_distance_check(&e, args.chi_pairs, derived_seed(args.seed, "chi-pairs"));
    let deviation = (stats.sample_mean - stats.analytic_mean).abs();
    let tolerance = CHI_SIGMA * stats.std_err;
    ChiSection {
        rows: args.chi_rows,
        deviation,
        tolerance,
        pass: deviation <= tolerance,
        stats,
    }
}

fn spec_for(kind: ModelKind, k: usize, feat_dim: usize, stoch_dim: usize) -> ModelSpec {
    ModelSpec {
        kind,
        k_steps: k,
        feat_dim,
        stoch_dim,
        hidden_dim: 32,
        out_dim: 32,
    }
}

fn features_of(g: &Graph) -> &smp::Dense64 {
    g.features
        .as_ref()
        .expect("build_graph always attaches features")
}

fn equivariance_suite(args: &VerifyArgs, g: &Graph, adj: &SparseMatrix<f64>) -> CmdResult<EquivSection> {
    use rand::SeedableRng;
    let features = features_of(g);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(derived_seed(args.seed, "perm"));
    let mut devs = [0.0_f64; 2];
    for (slot, kind) in [ModelKind::Sgc, ModelKind::Gcn].into_iter().enumerate() {
        let spec = spec_for(kind, args.k, features.cols, args.stoch_dim);
        let params: ModelParams<f64> =
            init_params(&spec, derived_seed(args.seed, &format!("params/{kind}")));
        for _ in 0..args.permutations {
            let perm = NodePermutation::random(g.num_nodes, &mut rng);
            let perm_g = apply_permutation(g, &perm);
            let mut perm_adj = adjacency_normalized::<f64>(&perm_g);
            if args.negative_control {
                let idx = perm_adj.values.len() / 2;
                perm_adj.values[idx] *= 1.01;
            }
            let dev = equivariance_deviation_with_adj(&spec, &params, adj, features, &perm_adj, &perm);
            devs[slot] = devs[slot].max(dev);
        }
    }
    let pass = devs[0] <= DETERMINISTIC_TOL && devs[1] <= DETERMINISTIC_TOL;
    Ok(EquivSection {
        permutations: args.permutations,
        tolerance: DETERMINISTIC_TOL,
        negative_control: args.negative_control,
        sgc_max_deviation: devs[0],
        gcn_max_deviation: devs[1],
        pass,
    })
}

fn collision_suite(args: &VerifyArgs, g: &Graph) -> CmdResult<CollisionSection> {
    let features = features_of(g);
    let scfg = StochasticConfig::fixed(args.stoch_dim, derived_seed(args.seed, "stochastic"));
    let mut gaps = Vec::with_capacity(3);
    for kind in [ModelKind::Sgc, ModelKind::Gcn, ModelKind::SmpIdentity] {
        let spec = spec_for(kind, args.k, features.cols, args.stoch_dim);
        let params: ModelParams<f64> =
            init_params(&spec, derived_seed(args.seed, &format!("params/{kind}")));
        gaps.push(check_automorphic_collision(&spec, &params, g, &scfg)?);
    }
    let pass = gaps[0].max_gap <= DETERMINISTIC_TOL
        && gaps[1].max_gap <= DETERMINISTIC_TOL
        && gaps[2].min_gap > MIN_STOCHASTIC_GAP;
    Ok(CollisionSection {
        equivariant_tolerance: DETERMINISTIC_TOL,
        stochastic_min_gap: MIN_STOCHASTIC_GAP,
        sgc: gaps[0],
        gcn: gaps[1],
        smp_identity: gaps[2],
        pass,
    })
}

fn jl_suite(args: &VerifyArgs, adj: &SparseMatrix<f64>) -> CmdResult<JlSection> {
    let m = propagation_power(adj, args.k)?;
    let max_row_norm = (0..m.rows).map(|i| m.row_l2_norm(i)).fold(0.0_f64, f64::max);
    let d0 = d0_bound(args.eps, args.delta, max_row_norm).map_err(|e| {
        Failure::Runtime(format!(
            "proximity suite: {e}; on this graph pass --eps below {max_row_norm:.4}"
        ))
    })?;
    let dim = (d0.ceil() as usize).max(1);
    let report = jl_error_report(
        adj,
        args.k,
        dim,
        derived_seed(args.seed, "jl"),
        args.eps,
        args.delta,
    )?;
    let required_success = 1.0 - args.delta;
    let pass = report.success_rate >= required_success;
    Ok(JlSection {
        report,
        dim_rule: "ceil(d0)",
        required_success,
        pass,
    })
}
