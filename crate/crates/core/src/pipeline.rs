//! End-to-end sketch clustering.
//!
//! [`run_algorithm1`] samples with URS or SbS, clusters the sketch and
//! retrieves labels for the whole graph. [`run_algorithm4`] first fills in
//! likely intra-cluster edges, samples spatially on the completed graph, and
//! then clusters the sketch taken from the original graph.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::clustering::{extract_clusters, retrieve_full, ClusterModel, ExtractionPath};
use crate::decomposition::{solve_sketch, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::{ObservedGraph, Partition, SketchIndex};
use crate::rng::{derive_seed, seeded};
use crate::sampling::{precomplete, sample, SamplerConfig, Strategy};
use crate::sbm::GroundTruth;
use crate::scalar::Scalar;

const STREAM_PRECOMPLETE: u64 = 0;
const STREAM_SAMPLE: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub sampler: SamplerConfig,
    pub solver: SolverConfig,
    /// Uniform sketch size for pre-completion. When unset, pre-completion
    /// runs with the main budget on partially observed graphs and is skipped
    /// on fully observed ones.
    pub precomplete_budget: Option<usize>,
    pub record_timings: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig::default(),
            solver: SolverConfig::default(),
            precomplete_budget: None,
            record_timings: true,
        }
    }
}

impl PipelineConfig {
    pub fn new(sampler: SamplerConfig, solver: SolverConfig) -> Self {
        Self {
            sampler,
            solver,
            ..Self::default()
        }
    }
}

/// Wall-clock seconds per stage. Zero when timings are not recorded.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub precomplete: f64,
    pub sample: f64,
    pub decompose: f64,
    pub extract: f64,
    pub retrieve: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.precomplete + self.sample + self.decompose + self.extract + self.retrieve
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveStats {
    pub lambda: f64,
    pub iterations: usize,
    /// Iterations summed over every lambda tried.
    pub total_iterations: usize,
    pub converged: bool,
    pub residual: f64,
    pub search_steps: usize,
    /// The low-rank part rounded to a valid cluster matrix.
    pub rounding_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineResult {
    pub partition: Partition,
    pub sketch_index: SketchIndex,
    pub sketch_partition: Option<Partition>,
    pub r_hat: usize,
    pub extraction: Option<ExtractionPath>,
    pub solve: Option<SolveStats>,
    pub timings: StageTimings,
    pub zero_correlation_nodes: usize,
    pub precompletion_added_ones: usize,
    /// Sketch clusters were extracted and used for retrieval.
    pub clustered: bool,
    /// Exact recovery of the planted partition, when it was supplied.
    pub success: Option<bool>,
}

impl PipelineResult {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// Clusters of one sketch together with solver statistics.
#[derive(Debug, Clone)]
pub struct SketchClustering {
    pub model: Option<ClusterModel>,
    pub stats: Option<SolveStats>,
    pub decompose_seconds: f64,
    pub extract_seconds: f64,
}

/// Decomposes a sketch and extracts its clusters. A one-node sketch is a
/// single cluster and skips the solver. Extraction failure leaves `model`
/// empty; solver errors propagate.
pub fn cluster_sketch<T: Scalar>(
    sketch: &ObservedGraph,
    solver: &SolverConfig,
) -> Result<SketchClustering> {
    if sketch.n_nodes() == 1 {
        return Ok(SketchClustering {
            model: Some(ClusterModel::from_partition(
                Partition::from_labels(vec![0])?,
                ExtractionPath::Rounding,
            )),
            stats: None,
            decompose_seconds: 0.0,
            extract_seconds: 0.0,
        });
    }
    let t0 = Instant::now();
    let outcome = solve_sketch::<T>(sketch, solver)?;
    let decompose_seconds = t0.elapsed().as_secs_f64();
    let dec = &outcome.decomposition;
    let stats = SolveStats {
        lambda: dec.lambda_used.to_f64_lossy(),
        iterations: dec.iterations,
        total_iterations: outcome.steps.iter().map(|s| s.iterations).sum(),
        converged: dec.converged,
        residual: dec.residual.to_f64_lossy(),
        search_steps: outcome.search_steps(),
        rounding_valid: outcome.is_valid(),
    };

    let t1 = Instant::now();
    let model = match outcome.partition {
        Some(p) => Some(ClusterModel::from_partition(p, ExtractionPath::Rounding)),
        None => match extract_clusters(&dec.low_rank, T::lit(solver.rounding_threshold)) {
            Ok(m) => Some(m),
            Err(Error::Numerical(msg)) => {
                log::warn!("sketch clustering failed: {msg}");
                None
            }
            Err(e) => return Err(e),
        },
    };
    Ok(SketchClustering {
        model,
        stats: Some(stats),
        decompose_seconds,
        extract_seconds: t1.elapsed().as_secs_f64(),
    })
}

fn finish<T: Scalar>(
    graph: &ObservedGraph,
    truth: Option<&GroundTruth>,
    cfg: &PipelineConfig,
    idx: SketchIndex,
    mut timings: StageTimings,
    precompletion_added_ones: usize,
) -> Result<PipelineResult> {
    let sketch = graph.subgraph(&idx)?;
    let clustering = cluster_sketch::<T>(&sketch, &cfg.solver)?;
    timings.decompose = clustering.decompose_seconds;
    timings.extract = clustering.extract_seconds;

    let t = Instant::now();
    let (partition, zero_correlation_nodes) = match &clustering.model {
        Some(model) => {
            let r = retrieve_full(graph, &idx, model)?;
            (r.partition, r.zero_correlation_nodes)
        }
        None => (Partition::from_labels(vec![0; graph.n_nodes()])?, 0),
    };
    timings.retrieve = t.elapsed().as_secs_f64();
    if !cfg.record_timings {
        timings = StageTimings::default();
    }

    let clustered = clustering.model.is_some();
    let success = truth.map(|t| clustered && t.partition.exact_match(&partition));
    Ok(PipelineResult {
        partition,
        sketch_index: idx,
        r_hat: clustering.model.as_ref().map_or(0, |m| m.r_hat()),
        extraction: clustering.model.as_ref().map(|m| m.path),
        sketch_partition: clustering.model.map(|m| m.sketch_partition().clone()),
        solve: clustering.stats,
        timings,
        zero_correlation_nodes,
        precompletion_added_ones,
        clustered,
        success,
    })
}

/// Sampling, sketch clustering and retrieval with URS or SbS.
pub fn run_algorithm1<T: Scalar>(
    graph: &ObservedGraph,
    truth: Option<&GroundTruth>,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    if !matches!(cfg.sampler.strategy, Strategy::Urs | Strategy::Sbs) {
        return Err(Error::Config(format!(
            "algorithm 1 samples with urs or sbs, got {}",
            cfg.sampler.strategy
        )));
    }
    check_truth(graph, truth)?;
    let mut timings = StageTimings::default();
    let t = Instant::now();
    let mut rng = seeded(derive_seed(cfg.sampler.seed, &[STREAM_SAMPLE]));
    let idx = sample(graph, &cfg.sampler, &mut rng)?;
    timings.sample = t.elapsed().as_secs_f64();
    finish::<T>(graph, truth, cfg, idx, timings, 0)
}

/// Pre-completion, spatial sampling on the completed graph, then sketch
/// clustering and retrieval on the original graph.
pub fn run_algorithm4<T: Scalar>(
    graph: &ObservedGraph,
    truth: Option<&GroundTruth>,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    if !matches!(cfg.sampler.strategy, Strategy::Srs | Strategy::Mixed) {
        return Err(Error::Config(format!(
            "algorithm 4 samples with srs or mixed, got {}",
            cfg.sampler.strategy
        )));
    }
    check_truth(graph, truth)?;
    cfg.sampler.validate(graph.n_nodes())?;
    let mut timings = StageTimings::default();

    let budget = match cfg.precomplete_budget {
        Some(b) => Some(b),
        None if graph.observed_fraction() < 1.0 => Some(cfg.sampler.n_samples),
        None => None,
    };
    let t = Instant::now();
    let completed = match budget {
        Some(b) => {
            let mut rng = seeded(derive_seed(cfg.sampler.seed, &[STREAM_PRECOMPLETE]));
            Some(precomplete::<T, _>(graph, b, &cfg.solver, &mut rng)?)
        }
        None => None,
    };
    timings.precomplete = t.elapsed().as_secs_f64();
    let sampling_graph = completed.as_ref().map_or(graph, |c| &c.graph);

    let t = Instant::now();
    let mut rng = seeded(derive_seed(cfg.sampler.seed, &[STREAM_SAMPLE]));
    let idx = sample(sampling_graph, &cfg.sampler, &mut rng)?;
    timings.sample = t.elapsed().as_secs_f64();
    let added = completed.as_ref().map_or(0, |c| c.added_ones);
    finish::<T>(graph, truth, cfg, idx, timings, added)
}

/// Runs algorithm 1 or 4 depending on the sampling strategy.
pub fn run<T: Scalar>(
    graph: &ObservedGraph,
    truth: Option<&GroundTruth>,
    cfg: &PipelineConfig,
) -> Result<PipelineResult> {
    match cfg.sampler.strategy {
        Strategy::Urs | Strategy::Sbs => run_algorithm1::<T>(graph, truth, cfg),
        Strategy::Srs | Strategy::Mixed => run_algorithm4::<T>(graph, truth, cfg),
    }
}

fn check_truth(graph: &ObservedGraph, truth: Option<&GroundTruth>) -> Result<()> {
    match truth {
        Some(t) if t.partition.n_nodes() != graph.n_nodes() => Err(Error::invalid(format!(
            "ground truth covers {} nodes, graph has {}",
            t.partition.n_nodes(),
            graph.n_nodes()
        ))),
        _ => Ok(()),
    }
}
