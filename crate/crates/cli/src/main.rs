//! `sketchclust` command line: phase grids, timing sweeps, balance
//! diagnostics, theory reports and single pipeline runs.

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};
use sketchclust::decomposition::LambdaMode;
use sketchclust::graph::read_edge_list;
use sketchclust::harness::{
    emit_report, run_balance_diagnostics, run_phase_grid, run_timing_sweep, Report,
};
use sketchclust::pipeline::run;
use sketchclust::sampling::Strategy;
use sketchclust::sbm::{generate, GroundTruth};
use sketchclust::theory::{compute_bounds, TheoryInputs};
use sketchclust::{Error, Partition, Result, TheoryBounds64};

use config::HarnessConfig;

#[derive(Debug, Parser)]
#[command(
    name = "sketchclust",
    version,
    about = "Sketch-based clustering experiments"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML file whose keys override the command line.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    parallelism: Option<usize>,

    #[arg(long, global = true)]
    n_nodes: Option<usize>,
    /// Explicit cluster sizes, e.g. `40,40,720`.
    #[arg(long, global = true, value_delimiter = ',')]
    cluster_sizes: Option<Vec<usize>>,
    #[arg(long, global = true)]
    n_min: Option<usize>,
    /// Number of small clusters in the unbalanced preset.
    #[arg(long, global = true)]
    r_small: Option<usize>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    #[arg(long, global = true)]
    rho: Option<f64>,

    /// urs, sbs, srs or mixed.
    #[arg(long, global = true)]
    strategy: Option<Strategy>,
    /// Sketch size N'.
    #[arg(long, global = true)]
    n_samples: Option<usize>,
    #[arg(long, global = true)]
    embed_dim: Option<usize>,
    #[arg(long, global = true)]
    urs_fraction: Option<f64>,
    #[arg(long, global = true)]
    precomplete_budget: Option<usize>,

    /// `search` (initial guess plus bisection) or `fixed` (1/sqrt(N')).
    #[arg(long, global = true, value_parser = parse_lambda_mode)]
    lambda_mode: Option<LambdaMode>,
    /// Fixed lambda overriding 1/sqrt(N') in fixed mode.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    max_iterations: Option<usize>,
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[arg(long, global = true)]
    search_depth: Option<usize>,
    #[arg(long, global = true)]
    rounding_threshold: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Success-rate grid over smallest cluster size and sketch size.
    PhaseGrid {
        #[arg(long, value_delimiter = ',')]
        n_min_values: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        n_prime_values: Option<Vec<usize>>,
    },
    /// Sketch pipeline against full-graph decomposition as N grows.
    Timing {
        #[arg(long, value_delimiter = ',')]
        n_values: Option<Vec<usize>>,
        #[arg(long)]
        n_prime: Option<usize>,
        #[arg(long)]
        runs: Option<usize>,
        /// Largest N for the full-graph baseline.
        #[arg(long)]
        baseline_cap: Option<usize>,
    },
    /// Smallest-cluster sampling frequency per strategy.
    Balance {
        #[arg(long, value_delimiter = ',')]
        n_min_values: Option<Vec<usize>>,
        #[arg(long)]
        n_prime: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<Strategy>>,
    },
    /// Evaluate the sufficient conditions for the configured model.
    Bounds {
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        b: Option<usize>,
    },
    /// One pipeline run on a generated or supplied graph.
    RunOnce {
        #[arg(long)]
        edge_list: Option<PathBuf>,
        /// Planted partition, one label per line, for scoring.
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long)]
        missing_unobserved: bool,
    },
}

fn parse_lambda_mode(s: &str) -> std::result::Result<LambdaMode, String> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "search" | "paper_init_with_search" => Ok(LambdaMode::PaperInitWithSearch),
        "fixed" | "fixed_inv_sqrt" => Ok(LambdaMode::FixedInvSqrt),
        other => Err(format!(
            "unknown lambda mode `{other}` (expected search or fixed)"
        )),
    }
}

macro_rules! set {
    ($dst:expr, $src:expr) => {
        if let Some(v) = $src {
            $dst = v;
        }
    };
}

fn build_config(cli: &Cli) -> Result<HarnessConfig> {
    let a = &cli.common;
    let mut cfg = HarnessConfig::default();
    set!(cfg.seed, a.seed);
    set!(cfg.trials, a.trials);
    set!(cfg.parallelism, a.parallelism);
    set!(cfg.out_dir, a.out_dir.clone());
    set!(cfg.sbm.n_nodes, a.n_nodes);
    set!(cfg.sbm.cluster_sizes, a.cluster_sizes.clone());
    set!(cfg.sbm.n_min, a.n_min);
    set!(cfg.sbm.r_small, a.r_small);
    set!(cfg.sbm.p, a.p);
    set!(cfg.sbm.q, a.q);
    set!(cfg.sbm.rho, a.rho);
    set!(cfg.sampler.strategy, a.strategy);
    set!(cfg.sampler.n_samples, a.n_samples);
    set!(cfg.sampler.embed_dim, a.embed_dim);
    set!(cfg.sampler.urs_fraction, a.urs_fraction);
    if a.precomplete_budget.is_some() {
        cfg.precomplete_budget = a.precomplete_budget;
    }
    set!(cfg.solver.lambda_mode, a.lambda_mode);
    if a.lambda.is_some() {
        cfg.solver.lambda_fixed_override = a.lambda;
    }
    set!(cfg.solver.max_iterations, a.max_iterations);
    set!(cfg.solver.tolerance, a.tolerance);
    set!(cfg.solver.search_depth, a.search_depth);
    set!(cfg.solver.rounding_threshold, a.rounding_threshold);
    if cfg.sbm.cluster_sizes.len() > 0 && a.n_nodes.is_none() {
        cfg.sbm.n_nodes = cfg.sbm.cluster_sizes.iter().sum();
    }

    match &cli.command {
        Command::PhaseGrid {
            n_min_values,
            n_prime_values,
        } => {
            set!(cfg.grid.n_min_values, n_min_values.clone());
            set!(cfg.grid.n_prime_values, n_prime_values.clone());
        }
        Command::Timing {
            n_values,
            n_prime,
            runs,
            baseline_cap,
        } => {
            set!(cfg.timing.n_values, n_values.clone());
            set!(cfg.timing.n_prime, *n_prime);
            set!(cfg.timing.runs, *runs);
            set!(cfg.timing.baseline_cap, *baseline_cap);
        }
        Command::Balance {
            n_min_values,
            n_prime,
            strategies,
        } => {
            set!(cfg.balance.n_min_values, n_min_values.clone());
            set!(cfg.balance.n_prime, *n_prime);
            set!(cfg.balance.strategies, strategies.clone());
        }
        Command::Bounds { c, b } => {
            set!(cfg.bounds.c, *c);
            set!(cfg.bounds.b, *b);
        }
        Command::RunOnce {
            edge_list,
            partition,
            missing_unobserved,
        } => {
            if edge_list.is_some() {
                cfg.input.edge_list = edge_list.clone();
            }
            if partition.is_some() {
                cfg.input.partition = partition.clone();
            }
            cfg.input.missing_unobserved |= *missing_unobserved;
        }
    }

    if let Some(path) = &a.config {
        cfg = cfg.overlay_file(path)?;
    }
    cfg.validate()?;
    let supplied_graph = cfg.input.edge_list.is_some();
    match cli.command {
        Command::Bounds { .. } => cfg.validate_model()?,
        // The model section does not describe a supplied graph.
        Command::RunOnce { .. } if !supplied_graph => cfg.validate_model()?,
        _ => {}
    }
    Ok(cfg)
}

fn bounds_for(
    cfg: &HarnessConfig,
    n_min: usize,
    r: usize,
    n_sketch: usize,
) -> Result<TheoryBounds64> {
    let inputs = TheoryInputs::new(
        cfg.sbm.n_nodes,
        r,
        n_min,
        cfg.sbm.p,
        cfg.sbm.q,
        cfg.sbm.rho,
        n_sketch,
    )
    .with_c(cfg.bounds.c)
    .with_b(cfg.bounds.b);
    compute_bounds(&inputs)
}

fn execute(cli: &Cli, cfg: &HarnessConfig) -> Result<()> {
    let mut report = Report::default();
    match &cli.command {
        Command::PhaseGrid { .. } => {
            let spec = cfg.grid_spec();
            spec.validate().map_err(|e| Error::Config(e.to_string()))?;
            let grid = run_phase_grid::<f64>(&spec, cfg.parallelism)?;
            print!("{}", grid.to_csv());
            for &n_min in &spec.n_min_values {
                for &np in &spec.n_prime_values {
                    match bounds_for(cfg, n_min, spec.r_small + 1, np) {
                        Ok(b) => report.bounds.push(b),
                        Err(e) => warn!("no bounds for n_min={n_min} n_prime={np}: {e}"),
                    }
                }
            }
            report.grid = Some(grid);
        }
        Command::Timing { .. } => {
            let rows = run_timing_sweep::<f64>(&cfg.timing_spec())?;
            print!("{}", sketchclust::harness::timing_csv(&rows));
            report.timing = Some(rows);
        }
        Command::Balance { .. } => {
            let rows = run_balance_diagnostics::<f64>(&cfg.balance_spec(), cfg.parallelism)?;
            print!("{}", sketchclust::harness::balance_csv(&rows));
            report.balance = Some(rows);
        }
        Command::Bounds { .. } => {
            let sizes = cfg.cluster_sizes()?;
            let n_min = sizes.iter().copied().min().unwrap_or(0);
            let bounds = bounds_for(cfg, n_min, sizes.len(), cfg.sampler.n_samples)
                .map_err(|e| Error::Config(e.to_string()))?;
            println!("{}", bounds.to_json()?);
            report.bounds.push(bounds);
        }
        Command::RunOnce { .. } => return run_once(cfg),
    }
    let written = emit_report(&report, &cfg.out_dir)?;
    for path in written {
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn run_once(cfg: &HarnessConfig) -> Result<()> {
    let (graph, truth) = match &cfg.input.edge_list {
        Some(path) => {
            let graph = read_edge_list(path, None, cfg.input.missing_unobserved)?;
            let truth = match &cfg.input.partition {
                Some(p) => Some(GroundTruth::from_partition(&graph, Partition::read(p)?)?),
                None => None,
            };
            (graph, truth)
        }
        None => {
            let (graph, truth) = generate(&cfg.sbm_params(cfg.seed)?)?;
            (graph, Some(truth))
        }
    };
    let result = run::<f64>(&graph, truth.as_ref(), &cfg.pipeline())?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let json = result.to_json()?;
    let run_path = cfg.out_dir.join("run.json");
    std::fs::write(&run_path, format!("{json}\n")).map_err(|e| io_err(&run_path, e))?;
    result.partition.write(&cfg.out_dir.join("partition.txt"))?;
    let summary = serde_json::json!({
        "n_nodes": graph.n_nodes(),
        "sketch_size": result.sketch_index.len(),
        "clusters": result.partition.n_clusters(),
        "r_hat": result.r_hat,
        "clustered": result.clustered,
        "success": result.success,
        "solve": result.solve,
        "timings": result.timings,
    });
    println!("{summary:#}");
    Ok(())
}

fn io_err(path: &std::path::Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            error!("{e}");
            return ExitCode::from(2);
        }
    };
    match execute(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::Config(_) | Error::InvalidInput(_))) => {
            error!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
