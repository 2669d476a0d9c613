//! Seeded Monte Carlo experiments: phase grids, timing sweeps and sampling
//! balance diagnostics, plus their CSV and JSON reports.
//!
//! Every trial derives its seed from `seed_base` and its grid coordinates, so
//! a grid gives the same numbers whether it runs on one worker or many.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomposition::SolverConfig;
use crate::error::{Error, Result};
use crate::graph::{ObservedGraph, Partition, SketchIndex};
use crate::pipeline::{run, PipelineConfig, StageTimings};
use crate::rng::{derive_seed, seeded};
use crate::sampling::{precomplete, sample, SamplerConfig, Strategy};
use crate::sbm::{generate, unbalanced_sizes, SbmParams};
use crate::scalar::Scalar;
use crate::theory::TheoryBounds;

const STREAM_GRAPH: u64 = 0;
const STREAM_PIPELINE: u64 = 1;

/// Runs `f` on a pool of `workers` threads, or on the global pool when
/// `workers == 0`.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Graph and pipeline seeds for one trial.
pub fn trial_seeds(seed_base: u64, path: &[u64]) -> (u64, u64) {
    let s = derive_seed(seed_base, path);
    (
        derive_seed(s, &[STREAM_GRAPH]),
        derive_seed(s, &[STREAM_PIPELINE]),
    )
}

/// Phase-transition grid over the smallest cluster size and the sketch size.
///
/// Cell `(i, j)` uses `r_small` clusters of size `n_min_values[i]` plus one
/// large cluster, and samples `n_prime_values[j]` nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_min_values: Vec<usize>,
    pub n_prime_values: Vec<usize>,
    pub trials: usize,
    /// Supplies `n_nodes`, `p`, `q` and `rho`; its cluster sizes and seed are
    /// replaced per cell and trial.
    pub base: SbmParams,
    pub r_small: usize,
    pub pipeline: PipelineConfig,
    pub seed_base: u64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.n_min_values.is_empty() || self.n_prime_values.is_empty() {
            return Err(Error::Config("grid axes must be non-empty".into()));
        }
        if self.r_small == 0 {
            return Err(Error::Config("r_small must be at least 1".into()));
        }
        for &n_min in &self.n_min_values {
            unbalanced_sizes(n_min, self.base.n_nodes, self.r_small)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        for &np in &self.n_prime_values {
            if np == 0 || np > self.base.n_nodes {
                return Err(Error::Config(format!(
                    "sketch size {np} must lie in 1..={}",
                    self.base.n_nodes
                )));
            }
        }
        self.pipeline.solver.validate()
    }

    pub fn cell_params(&self, i: usize, trial: usize) -> Result<SbmParams> {
        let sizes = unbalanced_sizes(self.n_min_values[i], self.base.n_nodes, self.r_small)?;
        Ok(
            SbmParams::new(sizes, self.base.p, self.base.q, self.base.rho, 0)
                .with_seed(trial as u64),
        )
    }
}

/// Outcome of one pipeline run on one generated graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub success: bool,
    pub error: Option<String>,
    pub timings: StageTimings,
    /// Fewest sketch nodes drawn from any planted cluster.
    pub min_sketch_cluster: usize,
    /// Share of the sketch drawn from the smallest planted cluster.
    pub smallest_cluster_fraction: f64,
}

/// Generates a graph from `params` (seeded with `graph_seed`) and runs the
/// pipeline on it with sampler seed `pipeline_seed`.
pub fn run_trial<T: Scalar>(
    params: &SbmParams,
    cfg: &PipelineConfig,
    graph_seed: u64,
    pipeline_seed: u64,
) -> TrialOutcome {
    let params = params.clone().with_seed(graph_seed);
    let mut cfg = cfg.clone();
    cfg.sampler.seed = pipeline_seed;
    let failed = |e: Error| TrialOutcome {
        success: false,
        error: Some(e.to_string()),
        timings: StageTimings::default(),
        min_sketch_cluster: 0,
        smallest_cluster_fraction: 0.0,
    };
    let (graph, truth) = match generate(&params) {
        Ok(g) => g,
        Err(e) => return failed(e),
    };
    match run::<T>(&graph, Some(&truth), &cfg) {
        Ok(res) => {
            let (min_count, frac) = balance_stats(&truth.partition, &res.sketch_index);
            TrialOutcome {
                success: res.success.unwrap_or(false),
                error: None,
                timings: res.timings,
                min_sketch_cluster: min_count,
                smallest_cluster_fraction: frac,
            }
        }
        Err(e) => failed(e),
    }
}

fn balance_stats(truth: &Partition, idx: &SketchIndex) -> (usize, f64) {
    let counts = truth.sample_counts(idx);
    let min_count = counts.iter().copied().min().unwrap_or(0);
    let frac = counts[truth.smallest_cluster()] as f64 / idx.len().max(1) as f64;
    (min_count, frac)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub n_min: usize,
    pub n_prime: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub errors: usize,
    pub mean_timings: StageTimings,
    pub mean_min_sketch_cluster: f64,
    pub mean_smallest_cluster_fraction: f64,
}

impl CellResult {
    fn reduce(n_min: usize, n_prime: usize, outcomes: &[TrialOutcome]) -> Self {
        let n = outcomes.len();
        let successes = outcomes.iter().filter(|o| o.success).count();
        let mean = |f: &dyn Fn(&TrialOutcome) -> f64| {
            outcomes.iter().map(f).sum::<f64>() / n.max(1) as f64
        };
        Self {
            n_min,
            n_prime,
            trials: n,
            successes,
            success_rate: successes as f64 / n.max(1) as f64,
            errors: outcomes.iter().filter(|o| o.error.is_some()).count(),
            mean_timings: StageTimings {
                precomplete: mean(&|o| o.timings.precomplete),
                sample: mean(&|o| o.timings.sample),
                decompose: mean(&|o| o.timings.decompose),
                extract: mean(&|o| o.timings.extract),
                retrieve: mean(&|o| o.timings.retrieve),
            },
            mean_min_sketch_cluster: mean(&|o| o.min_sketch_cluster as f64),
            mean_smallest_cluster_fraction: mean(&|o| o.smallest_cluster_fraction),
        }
    }
}

/// Cells in row-major order: row `i` is `n_min_values[i]`, column `j` is
/// `n_prime_values[j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridResult {
    pub n_min_values: Vec<usize>,
    pub n_prime_values: Vec<usize>,
    pub cells: Vec<CellResult>,
}

impl GridResult {
    pub fn cell(&self, i: usize, j: usize) -> &CellResult {
        &self.cells[i * self.n_prime_values.len() + j]
    }

    pub fn success_rate(&self, i: usize, j: usize) -> f64 {
        self.cell(i, j).success_rate
    }

    /// Heatmap layout: header row of sketch sizes, one row per `n_min`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_min\\n_prime");
        for np in &self.n_prime_values {
            let _ = write!(out, ",{np}");
        }
        out.push('\n');
        for (i, n_min) in self.n_min_values.iter().enumerate() {
            let _ = write!(out, "{n_min}");
            for j in 0..self.n_prime_values.len() {
                let _ = write!(out, ",{}", self.success_rate(i, j));
            }
            out.push('\n');
        }
        out
    }

    /// One line per cell with mean timings and balance diagnostics.
    pub fn details_csv(&self) -> String {
        let mut out = String::from(
            "n_min,n_prime,trials,successes,success_rate,errors,\
             precomplete_s,sample_s,decompose_s,extract_s,retrieve_s,\
             mean_min_sketch_cluster,mean_smallest_cluster_fraction\n",
        );
        for c in &self.cells {
            let t = &c.mean_timings;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{},{}",
                c.n_min,
                c.n_prime,
                c.trials,
                c.successes,
                c.success_rate,
                c.errors,
                t.precomplete,
                t.sample,
                t.decompose,
                t.extract,
                t.retrieve,
                c.mean_min_sketch_cluster,
                c.mean_smallest_cluster_fraction
            );
        }
        out
    }
}

pub fn run_phase_grid<T: Scalar>(spec: &GridSpec, workers: usize) -> Result<GridResult> {
    spec.validate()?;
    let (rows, cols, trials) = (
        spec.n_min_values.len(),
        spec.n_prime_values.len(),
        spec.trials,
    );
    let jobs: Vec<(usize, usize, usize)> = (0..rows)
        .flat_map(|i| (0..cols).flat_map(move |j| (0..trials).map(move |t| (i, j, t))))
        .collect();
    info!(
        "phase grid: {rows} x {cols} cells, {trials} trials each, {} {}",
        spec.pipeline.sampler.strategy,
        if workers == 0 {
            "default workers".to_string()
        } else {
            format!("{workers} workers")
        }
    );
    let outcomes: Vec<TrialOutcome> = with_workers(workers, || {
        jobs.par_iter()
            .map(|&(i, j, t)| {
                let (gs, ps) = trial_seeds(spec.seed_base, &[i as u64, j as u64, t as u64]);
                let mut cfg = spec.pipeline.clone();
                cfg.sampler.n_samples = spec.n_prime_values[j];
                match spec.cell_params(i, t) {
                    Ok(params) => run_trial::<T>(&params, &cfg, gs, ps),
                    Err(e) => TrialOutcome {
                        success: false,
                        error: Some(e.to_string()),
                        timings: StageTimings::default(),
                        min_sketch_cluster: 0,
                        smallest_cluster_fraction: 0.0,
                    },
                }
            })
            .collect()
    })?;
    let cells = outcomes
        .chunks(trials)
        .enumerate()
        .map(|(k, chunk)| {
            let (i, j) = (k / cols, k % cols);
            let cell = CellResult::reduce(spec.n_min_values[i], spec.n_prime_values[j], chunk);
            if cell.errors > 0 {
                warn!(
                    "cell n_min={} n_prime={}: {} trial(s) errored",
                    cell.n_min, cell.n_prime, cell.errors
                );
            }
            cell
        })
        .collect();
    Ok(GridResult {
        n_min_values: spec.n_min_values.clone(),
        n_prime_values: spec.n_prime_values.clone(),
        cells,
    })
}

/// Wall time of the sketch pipeline against the full-graph baseline as the
/// graph grows. Clusters are balanced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSpec {
    pub n_values: Vec<usize>,
    pub r: usize,
    pub p: f64,
    pub q: f64,
    pub rho: f64,
    pub runs: usize,
    pub pipeline: PipelineConfig,
    /// Solver for the baseline, which decomposes the whole graph.
    pub baseline_solver: SolverConfig,
    /// Largest `N` for which the baseline runs.
    pub baseline_cap: usize,
    pub seed_base: u64,
}

impl Default for TimingSpec {
    fn default() -> Self {
        Self {
            n_values: vec![500, 1000, 2000],
            r: 2,
            p: 0.8,
            q: 0.1,
            rho: 0.7,
            runs: 5,
            pipeline: PipelineConfig::new(
                SamplerConfig::new(Strategy::Urs, 200),
                SolverConfig::default(),
            ),
            baseline_solver: SolverConfig::fixed(),
            baseline_cap: 2000,
            seed_base: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub n_nodes: usize,
    pub runs: usize,
    /// Mean end-to-end sketch pipeline time.
    pub sketch_seconds: f64,
    pub sketch_decompose_seconds: f64,
    pub sketch_success_rate: f64,
    pub baseline_seconds: Option<f64>,
    pub baseline_success_rate: Option<f64>,
}

/// Runs are sequential so that timings do not compete for cores.
pub fn run_timing_sweep<T: Scalar>(spec: &TimingSpec) -> Result<Vec<TimingRow>> {
    if spec.runs == 0 || spec.n_values.is_empty() || spec.r == 0 {
        return Err(Error::Config(
            "timing sweep needs runs >= 1, r >= 1 and N values".into(),
        ));
    }
    let mut rows = Vec::with_capacity(spec.n_values.len());
    for (k, &n) in spec.n_values.iter().enumerate() {
        if n < spec.r || n < spec.pipeline.sampler.n_samples {
            return Err(Error::Config(format!(
                "N = {n} is smaller than r = {} or the sketch size {}",
                spec.r, spec.pipeline.sampler.n_samples
            )));
        }
        let params = SbmParams::new(balanced_sizes(n, spec.r), spec.p, spec.q, spec.rho, 0);
        let with_baseline = n <= spec.baseline_cap;
        let mut baseline_cfg = spec.pipeline.clone();
        baseline_cfg.sampler = SamplerConfig::new(Strategy::Urs, n);
        baseline_cfg.solver = spec.baseline_solver.clone();
        baseline_cfg.precomplete_budget = None;

        let (mut sketch, mut decompose, mut sketch_ok) = (0.0, 0.0, 0usize);
        let (mut base, mut base_ok) = (0.0, 0usize);
        for run_id in 0..spec.runs {
            let (gs, ps) = trial_seeds(spec.seed_base, &[k as u64, run_id as u64]);
            let params = params.clone().with_seed(gs);
            let (graph, truth) = generate(&params)?;
            let mut cfg = spec.pipeline.clone();
            cfg.sampler.seed = ps;
            let t = Instant::now();
            let res = run::<T>(&graph, Some(&truth), &cfg)?;
            sketch += t.elapsed().as_secs_f64();
            decompose += res.timings.decompose;
            sketch_ok += usize::from(res.success == Some(true));
            if with_baseline {
                baseline_cfg.sampler.seed = ps;
                let t = Instant::now();
                let res = run::<T>(&graph, Some(&truth), &baseline_cfg)?;
                base += t.elapsed().as_secs_f64();
                base_ok += usize::from(res.success == Some(true));
            }
        }
        let runs = spec.runs as f64;
        let row = TimingRow {
            n_nodes: n,
            runs: spec.runs,
            sketch_seconds: sketch / runs,
            sketch_decompose_seconds: decompose / runs,
            sketch_success_rate: sketch_ok as f64 / runs,
            baseline_seconds: with_baseline.then(|| base / runs),
            baseline_success_rate: with_baseline.then(|| base_ok as f64 / runs),
        };
        info!(
            "timing N={n}: sketch {:.3}s, baseline {:?}",
            row.sketch_seconds, row.baseline_seconds
        );
        rows.push(row);
    }
    Ok(rows)
}

/// Sizes of `r` clusters as equal as possible, larger ones first.
pub fn balanced_sizes(n: usize, r: usize) -> Vec<usize> {
    (0..r).map(|c| n / r + usize::from(c < n % r)).collect()
}

pub fn timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from(
        "n_nodes,runs,sketch_seconds,sketch_decompose_seconds,sketch_success_rate,\
         baseline_seconds,baseline_success_rate\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{},{},{}",
            r.n_nodes,
            r.runs,
            r.sketch_seconds,
            r.sketch_decompose_seconds,
            r.sketch_success_rate,
            opt(r.baseline_seconds),
            r.baseline_success_rate
                .map_or(String::new(), |x| x.to_string())
        );
    }
    out
}

/// Sampling balance over the smallest cluster size at a fixed sketch size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSpec {
    pub n_min_values: Vec<usize>,
    pub n_prime: usize,
    pub trials: usize,
    pub base: SbmParams,
    pub r_small: usize,
    pub strategies: Vec<Strategy>,
    /// Template for sampler settings other than strategy and budget, and for
    /// the pre-completion solve used by SRS and MIXED.
    pub pipeline: PipelineConfig,
    pub seed_base: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceRow {
    pub n_min: usize,
    pub strategy: Strategy,
    pub trials: usize,
    /// Mean share of the sketch drawn from the smallest planted cluster.
    pub smallest_cluster_frequency: f64,
    /// Sample standard deviation of that share across trials.
    pub smallest_cluster_frequency_sd: f64,
    pub mean_min_sketch_cluster: f64,
    /// `n_min / N`, the uniform-sampling expectation.
    pub uniform_frequency: f64,
    /// `1 / r`.
    pub ideal_frequency: f64,
    /// `N' / r`.
    pub ideal_min_sketch_cluster: f64,
}

pub fn run_balance_diagnostics<T: Scalar>(
    spec: &BalanceSpec,
    workers: usize,
) -> Result<Vec<BalanceRow>> {
    if spec.trials == 0 || spec.n_min_values.is_empty() || spec.strategies.is_empty() {
        return Err(Error::Config(
            "balance diagnostics need trials >= 1, n_min values and strategies".into(),
        ));
    }
    let n = spec.base.n_nodes;
    let mut jobs = Vec::new();
    for (i, &n_min) in spec.n_min_values.iter().enumerate() {
        let sizes =
            unbalanced_sizes(n_min, n, spec.r_small).map_err(|e| Error::Config(e.to_string()))?;
        for &s in &spec.strategies {
            let mut sampler = spec.pipeline.sampler.clone();
            sampler.strategy = s;
            sampler.n_samples = spec.n_prime;
            sampler
                .validate(n)
                .map_err(|e| Error::Config(e.to_string()))?;
            jobs.push((i, sizes.clone(), sampler));
        }
    }
    let per_job: Vec<Vec<(usize, f64)>> = with_workers(workers, || {
        jobs.par_iter()
            .map(|(i, sizes, sampler)| {
                (0..spec.trials)
                    .into_par_iter()
                    .map(|t| {
                        // Graph seeds ignore the strategy so strategies see
                        // the same graphs.
                        let (gs, ps) = trial_seeds(spec.seed_base, &[*i as u64, t as u64]);
                        balance_trial::<T>(sizes, spec, sampler, gs, ps)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let r = spec.r_small + 1;
    Ok(jobs
        .iter()
        .zip(per_job)
        .map(|((i, _, sampler), stats)| {
            let k = stats.len() as f64;
            let mean = stats.iter().map(|s| s.1).sum::<f64>() / k;
            let var = if stats.len() > 1 {
                stats.iter().map(|s| (s.1 - mean).powi(2)).sum::<f64>() / (k - 1.0)
            } else {
                0.0
            };
            let n_min = spec.n_min_values[*i];
            BalanceRow {
                n_min,
                strategy: sampler.strategy,
                trials: stats.len(),
                smallest_cluster_frequency: mean,
                smallest_cluster_frequency_sd: var.sqrt(),
                mean_min_sketch_cluster: stats.iter().map(|s| s.0 as f64).sum::<f64>() / k,
                uniform_frequency: n_min as f64 / n as f64,
                ideal_frequency: 1.0 / r as f64,
                ideal_min_sketch_cluster: spec.n_prime as f64 / r as f64,
            }
        })
        .collect())
}

fn balance_trial<T: Scalar>(
    sizes: &[usize],
    spec: &BalanceSpec,
    sampler: &SamplerConfig,
    graph_seed: u64,
    sample_seed: u64,
) -> Result<(usize, f64)> {
    let params = SbmParams::new(
        sizes.to_vec(),
        spec.base.p,
        spec.base.q,
        spec.base.rho,
        graph_seed,
    );
    let (graph, truth) = generate(&params)?;
    let sampling_graph: ObservedGraph =
        if matches!(sampler.strategy, Strategy::Srs | Strategy::Mixed)
            && graph.observed_fraction() < 1.0
        {
            let budget = spec.pipeline.precomplete_budget.unwrap_or(spec.n_prime);
            let mut rng = seeded(derive_seed(sample_seed, &[0]));
            precomplete::<T, _>(&graph, budget, &spec.pipeline.solver, &mut rng)?.graph
        } else {
            graph
        };
    let mut rng = seeded(derive_seed(sample_seed, &[1]));
    let idx = sample(&sampling_graph, sampler, &mut rng)?;
    Ok(balance_stats(&truth.partition, &idx))
}

pub fn balance_csv(rows: &[BalanceRow]) -> String {
    let mut out = String::from(
        "n_min,strategy,trials,smallest_cluster_frequency,smallest_cluster_frequency_sd,\
         mean_min_sketch_cluster,uniform_frequency,ideal_frequency,ideal_min_sketch_cluster\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.4},{:.6},{:.6},{:.4}",
            r.n_min,
            r.strategy,
            r.trials,
            r.smallest_cluster_frequency,
            r.smallest_cluster_frequency_sd,
            r.mean_min_sketch_cluster,
            r.uniform_frequency,
            r.ideal_frequency,
            r.ideal_min_sketch_cluster
        );
    }
    out
}

/// Everything one harness invocation produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub grid: Option<GridResult>,
    pub timing: Option<Vec<TimingRow>>,
    pub balance: Option<Vec<BalanceRow>>,
    pub bounds: Vec<TheoryBounds<f64>>,
}

/// Writes `grid.csv` and `grid_details.csv`, `timing.csv`, `balance.csv` and
/// `bounds.json` for whichever parts of the report are present, and returns
/// the written paths.
pub fn emit_report(report: &Report, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: String| -> Result<()> {
        let path = out_dir.join(name);
        fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        written.push(path);
        Ok(())
    };
    if let Some(g) = &report.grid {
        put("grid.csv", g.to_csv())?;
        put("grid_details.csv", g.details_csv())?;
    }
    if let Some(t) = &report.timing {
        put("timing.csv", timing_csv(t))?;
    }
    if let Some(b) = &report.balance {
        put("balance.csv", balance_csv(b))?;
    }
    if !report.bounds.is_empty() {
        let json = serde_json::to_string_pretty(&report.bounds)
            .map_err(|e| Error::Serialize(e.to_string()))?;
        put("bounds.json", json + "\n")?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> GridSpec {
        let mut pipeline = PipelineConfig::default();
        pipeline.sampler.strategy = Strategy::Sbs;
        GridSpec {
            n_min_values: vec![10, 15],
            n_prime_values: vec![12, 18],
            trials: 3,
            base: SbmParams::new(vec![60], 1.0, 0.0, 1.0, 0),
            r_small: 2,
            pipeline,
            seed_base: 11,
        }
    }

    #[test]
    fn grid_csv_layout() {
        let empty = GridResult {
            n_min_values: vec![],
            n_prime_values: vec![],
            cells: vec![],
        };
        assert_eq!(empty.to_csv(), "n_min\\n_prime\n");
        let res = run_phase_grid::<f64>(&tiny_spec(), 1).unwrap();
        let csv = res.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "n_min\\n_prime,12,18");
        assert!(lines[1].starts_with("10,"));
        for c in &res.cells {
            assert_eq!(c.trials, 3);
            assert_eq!(c.success_rate * 3.0, c.successes as f64);
        }
    }

    #[test]
    fn grid_is_independent_of_worker_count() {
        let spec = tiny_spec();
        let a = run_phase_grid::<f64>(&spec, 1).unwrap();
        let b = run_phase_grid::<f64>(&spec, 3).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        let strip = |g: &GridResult| {
            g.cells
                .iter()
                .map(|c| (c.successes, c.mean_min_sketch_cluster.to_bits()))
                .collect::<Vec<_>>()
        };
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn invalid_grid_is_a_config_error() {
        let mut spec = tiny_spec();
        spec.trials = 0;
        assert!(matches!(
            run_phase_grid::<f64>(&spec, 1),
            Err(Error::Config(_))
        ));
        let mut spec = tiny_spec();
        spec.n_min_values = vec![40];
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn balanced_sizes_sum_to_n() {
        assert_eq!(balanced_sizes(7, 3), vec![3, 2, 2]);
        assert_eq!(balanced_sizes(500, 2), vec![250, 250]);
    }

    #[test]
    fn ideal_cliques_balance_under_sbs() {
        let spec = BalanceSpec {
            n_min_values: vec![10],
            n_prime: 3,
            trials: 4,
            base: SbmParams::new(vec![100], 1.0, 0.0, 1.0, 0),
            r_small: 2,
            strategies: vec![Strategy::Urs, Strategy::Sbs],
            pipeline: PipelineConfig::default(),
            seed_base: 5,
        };
        let rows = run_balance_diagnostics::<f64>(&spec, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].uniform_frequency, 0.1);
        assert!((rows[1].ideal_frequency - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn report_files_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let report = Report {
            timing: Some(vec![]),
            ..Report::default()
        };
        let paths = emit_report(&report, dir.path()).unwrap();
        assert_eq!(paths.len(), 1);
        let body = fs::read_to_string(&paths[0]).unwrap();
        assert_eq!(body.lines().count(), 1);
    }
}
