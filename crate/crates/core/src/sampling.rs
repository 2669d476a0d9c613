//! Node sampling strategies and the pre-completion pass used before spatial
//! sampling on partially observed graphs.

use log::warn;
use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::clustering::{extract_clusters, ClusterModel};
use crate::decomposition::{solve_sketch, SolverConfig};
use crate::error::{Error, Result};
use crate::graph::{Entry, ObservedGraph, Partition, SketchIndex};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Uniform without replacement.
    Urs,
    /// Inverse observed degree.
    Sbs,
    /// Spatial random sampling on a random sign embedding.
    Srs,
    /// A URS share followed by SRS on the remaining pool.
    Mixed,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "urs" => Ok(Strategy::Urs),
            "sbs" => Ok(Strategy::Sbs),
            "srs" => Ok(Strategy::Srs),
            "mixed" => Ok(Strategy::Mixed),
            other => Err(Error::Config(format!(
                "unknown sampling strategy {other:?}"
            ))),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Urs => "urs",
            Strategy::Sbs => "sbs",
            Strategy::Srs => "srs",
            Strategy::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub strategy: Strategy,
    pub n_samples: usize,
    /// Rows of the sign embedding (SRS and MIXED).
    pub embed_dim: usize,
    /// Share of the budget drawn uniformly in MIXED mode.
    pub urs_fraction: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Sbs,
            n_samples: 200,
            embed_dim: 500,
            urs_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn new(strategy: Strategy, n_samples: usize) -> Self {
        Self {
            strategy,
            n_samples,
            ..Self::default()
        }
    }

    pub fn validate(&self, n_nodes: usize) -> Result<()> {
        check_budget(n_nodes, self.n_samples)?;
        if matches!(self.strategy, Strategy::Srs | Strategy::Mixed) && self.embed_dim == 0 {
            return Err(Error::invalid("embedding dimension must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.urs_fraction) {
            return Err(Error::invalid(format!(
                "urs_fraction {} outside [0, 1]",
                self.urs_fraction
            )));
        }
        Ok(())
    }
}

fn check_budget(n: usize, n_samples: usize) -> Result<()> {
    if n_samples == 0 || n_samples > n {
        return Err(Error::invalid(format!(
            "sample budget {n_samples} must lie in 1..={n}"
        )));
    }
    Ok(())
}

/// Draws a sketch with the configured strategy.
pub fn sample<R: Rng + ?Sized>(
    graph: &ObservedGraph,
    cfg: &SamplerConfig,
    rng: &mut R,
) -> Result<SketchIndex> {
    cfg.validate(graph.n_nodes())?;
    match cfg.strategy {
        Strategy::Urs => sample_urs(graph.n_nodes(), cfg.n_samples, rng),
        Strategy::Sbs => sample_sbs(graph, cfg.n_samples, rng),
        Strategy::Srs => sample_srs(graph, cfg.n_samples, cfg.embed_dim, rng),
        Strategy::Mixed => sample_mixed(graph, cfg.n_samples, cfg.urs_fraction, cfg.embed_dim, rng),
    }
}

pub fn sample_urs<R: Rng + ?Sized>(n: usize, n_samples: usize, rng: &mut R) -> Result<SketchIndex> {
    check_budget(n, n_samples)?;
    SketchIndex::new(index::sample(rng, n, n_samples).into_vec(), n)
}

/// Sampling weights `1 / ||a_j||_0`.
pub fn sbs_weights(graph: &ObservedGraph) -> Vec<f64> {
    graph
        .degrees()
        .into_iter()
        .map(|d| 1.0 / d as f64)
        .collect()
}

/// Exact probability of each node being the first SbS draw.
pub fn sbs_first_draw_probabilities(graph: &ObservedGraph) -> Vec<f64> {
    let w = sbs_weights(graph);
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// First-draw SbS probability of each cluster of `partition`.
pub fn sbs_cluster_probabilities(graph: &ObservedGraph, partition: &Partition) -> Vec<f64> {
    let mut out = vec![0.0; partition.n_clusters()];
    for (j, pr) in sbs_first_draw_probabilities(graph).into_iter().enumerate() {
        out[partition.label(j)] += pr;
    }
    out
}

/// Weighted sampling without replacement with weights `1 / ||a_j||_0`,
/// renormalized over the remaining pool after each draw.
pub fn sample_sbs<R: Rng + ?Sized>(
    graph: &ObservedGraph,
    n_samples: usize,
    rng: &mut R,
) -> Result<SketchIndex> {
    let n = graph.n_nodes();
    check_budget(n, n_samples)?;
    let w = sbs_weights(graph);
    let picked = index::sample_weighted(rng, n, |j| w[j], n_samples)
        .map_err(|e| Error::invalid(format!("SbS weights: {e}")))?;
    SketchIndex::new(picked.into_vec(), n)
}

/// Unit-normalized columns of `Phi A` for a random `m x N` sign matrix
/// `Phi`, with `A` zero-filled. Column `j` is stored as row `j`.
fn sign_embedding<R: Rng + ?Sized>(graph: &ObservedGraph, m: usize, rng: &mut R) -> DMatrix<f64> {
    let n = graph.n_nodes();
    // phi_t[i] is column i of Phi
    let phi_t = DMatrix::<f64>::from_fn(m, n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
    let mut emb = DMatrix::<f64>::zeros(n, m);
    for j in 0..n {
        for (i, e) in graph.row(j).iter().enumerate() {
            if e.is_one() {
                for t in 0..m {
                    emb[(j, t)] += phi_t[(t, i)];
                }
            }
        }
        let norm = emb.row(j).norm();
        if norm > 0.0 {
            emb.row_mut(j).unscale_mut(norm);
        }
    }
    emb
}

/// Spatial random sampling.
///
/// Each draw picks a fresh isotropic Gaussian direction and takes the
/// not-yet-sampled embedded column with the largest inner product; the lowest
/// index wins ties.
pub fn sample_srs<R: Rng + ?Sized>(
    graph: &ObservedGraph,
    n_samples: usize,
    embed_dim: usize,
    rng: &mut R,
) -> Result<SketchIndex> {
    let n = graph.n_nodes();
    check_budget(n, n_samples)?;
    let picked = srs_draws(graph, n_samples, embed_dim, &mut vec![false; n], rng)?;
    SketchIndex::new(picked, n)
}

fn srs_draws<R: Rng + ?Sized>(
    graph: &ObservedGraph,
    count: usize,
    embed_dim: usize,
    taken: &mut [bool],
    rng: &mut R,
) -> Result<Vec<usize>> {
    if embed_dim == 0 {
        return Err(Error::invalid("embedding dimension must be at least 1"));
    }
    let n = graph.n_nodes();
    let free = taken.iter().filter(|t| !**t).count();
    if count > free {
        return Err(Error::invalid(format!(
            "cannot draw {count} nodes from a pool of {free}"
        )));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let emb = sign_embedding(graph, embed_dim, rng);
    let dirs = DMatrix::<f64>::from_fn(embed_dim, count, |_, _| rng.sample(StandardNormal));
    let scores = &emb * &dirs; // n x count
    let mut picked = Vec::with_capacity(count);
    for d in 0..count {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if taken[j] {
                continue;
            }
            let s = scores[(j, d)];
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((j, s));
            }
        }
        let (j, _) = best.expect("pool is non-empty");
        taken[j] = true;
        picked.push(j);
    }
    Ok(picked)
}

/// `floor(urs_fraction * N')` uniform draws, then SRS on the rest of the pool.
pub fn sample_mixed<R: Rng + ?Sized>(
    graph: &ObservedGraph,
    n_samples: usize,
    urs_fraction: f64,
    embed_dim: usize,
    rng: &mut R,
) -> Result<SketchIndex> {
    let n = graph.n_nodes();
    check_budget(n, n_samples)?;
    if !(0.0..=1.0).contains(&urs_fraction) {
        return Err(Error::invalid(format!(
            "urs_fraction {urs_fraction} outside [0, 1]"
        )));
    }
    let n_urs = ((urs_fraction * n_samples as f64).floor() as usize).min(n_samples);
    let mut picked = if n_urs > 0 {
        index::sample(rng, n, n_urs).into_vec()
    } else {
        Vec::new()
    };
    let mut taken = vec![false; n];
    for &j in &picked {
        taken[j] = true;
    }
    picked.extend(srs_draws(
        graph,
        n_samples - n_urs,
        embed_dim,
        &mut taken,
        rng,
    )?);
    SketchIndex::new(picked, n)
}

/// Graph after pre-completion.
#[derive(Debug, Clone)]
pub struct CompletedGraph {
    pub graph: ObservedGraph,
    /// Row of `U` for every node: the sketch cluster it was attached to, or
    /// `None` when the zero vector was closest.
    pub assignment: Vec<Option<usize>>,
    pub r_hat: usize,
    /// Pairs promoted to observed-one.
    pub added_ones: usize,
    pub sketch_index: Option<SketchIndex>,
}

impl CompletedGraph {
    fn unchanged(graph: &ObservedGraph) -> Self {
        Self {
            graph: graph.clone(),
            assignment: vec![None; graph.n_nodes()],
            r_hat: 0,
            added_ones: 0,
            sketch_index: None,
        }
    }

    /// Binary `N x r_hat` membership matrix `U`.
    pub fn completion_matrix<T: Scalar>(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.assignment.len(), self.r_hat, |k, c| {
            if self.assignment[k] == Some(c) {
                T::one()
            } else {
                T::zero()
            }
        })
    }
}

/// Attaches node `k` to `argmin_i ||a_k|_I - v_i||` over the sketch cluster
/// indicators and the zero vector (listed first, so it wins ties).
pub fn completion_assignment(
    graph: &ObservedGraph,
    idx: &SketchIndex,
    model: &ClusterModel,
) -> Vec<Option<usize>> {
    let labels = model.sketch_partition().labels();
    let sizes = model.sketch_sizes();
    (0..graph.n_nodes())
        .map(|k| {
            let row = graph.row(k);
            let mut overlap = vec![0usize; sizes.len()];
            let mut ones = 0usize;
            for (pos, &node) in idx.indices().iter().enumerate() {
                if row[node].is_one() {
                    ones += 1;
                    overlap[labels[pos]] += 1;
                }
            }
            // squared distance to indicator v_c is ones + n_c - 2 * overlap_c
            let mut best: Option<usize> = None;
            let mut best_d = ones;
            for (c, (&n_c, &o)) in sizes.iter().zip(&overlap).enumerate() {
                let d = ones + n_c - 2 * o;
                if d < best_d {
                    best = Some(c);
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Fills in likely intra-cluster edges before spatial sampling.
///
/// A uniform sketch of `pre_budget` nodes is decomposed and clustered; every
/// node is attached to its nearest sketch cluster indicator (or to none), and
/// each pair attached to the same cluster becomes observed-one. Existing ones
/// stay, nothing is ever turned into a zero.
pub fn precomplete<T: Scalar, R: Rng + ?Sized>(
    graph: &ObservedGraph,
    pre_budget: usize,
    solver: &SolverConfig,
    rng: &mut R,
) -> Result<CompletedGraph> {
    let n = graph.n_nodes();
    check_budget(n, pre_budget)?;
    let idx = sample_urs(n, pre_budget, rng)?;
    let model = if pre_budget == 1 {
        ClusterModel::from_partition(
            Partition::from_labels(vec![0])?,
            crate::clustering::ExtractionPath::Rounding,
        )
    } else {
        let sketch = graph.subgraph(&idx)?;
        let solved = solve_sketch::<T>(&sketch, solver)?;
        match solved.partition {
            Some(p) => ClusterModel::from_partition(p, crate::clustering::ExtractionPath::Rounding),
            None => match extract_clusters(
                &solved.decomposition.low_rank,
                T::lit(solver.rounding_threshold),
            ) {
                Ok(m) => m,
                Err(Error::Numerical(msg)) => {
                    warn!("pre-completion found no clusters ({msg}); graph left unchanged");
                    return Ok(CompletedGraph::unchanged(graph));
                }
                Err(e) => return Err(e),
            },
        }
    };

    let assignment = completion_assignment(graph, &idx, &model);
    let mut completed = graph.clone();
    let mut added_ones = 0;
    for c in 0..model.r_hat() {
        let members: Vec<usize> = (0..n).filter(|&k| assignment[k] == Some(c)).collect();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                if !completed.entry(i, j).is_one() {
                    completed.set(i, j, Entry::ObservedOne)?;
                    added_ones += 1;
                }
            }
        }
    }
    Ok(CompletedGraph {
        graph: completed,
        assignment,
        r_hat: model.r_hat(),
        added_ones,
        sketch_index: Some(idx),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::sbm::{generate, SbmParams};

    fn ideal(sizes: &[usize]) -> (ObservedGraph, Partition) {
        let p = Partition::from_sizes(sizes).unwrap();
        let g = ObservedGraph::from_adjacency(p.n_nodes(), |i, j| p.same_cluster(i, j)).unwrap();
        (g, p)
    }

    #[test]
    fn budgets_are_checked() {
        let (g, _) = ideal(&[3, 3]);
        let mut rng = seeded(0);
        assert!(sample_urs(6, 7, &mut rng).is_err());
        assert!(sample_urs(6, 0, &mut rng).is_err());
        assert!(sample_sbs(&g, 7, &mut rng).is_err());
        assert!(sample_srs(&g, 7, 4, &mut rng).is_err());
        assert!(sample_srs(&g, 2, 0, &mut rng).is_err());
        assert!(sample_mixed(&g, 3, 1.5, 4, &mut rng).is_err());
    }

    #[test]
    fn full_budget_returns_everything() {
        let (g, _) = ideal(&[3, 4]);
        let mut rng = seeded(1);
        let all = SketchIndex::all(7);
        assert_eq!(sample_urs(7, 7, &mut rng).unwrap(), all);
        assert_eq!(sample_sbs(&g, 7, &mut rng).unwrap(), all);
        assert_eq!(sample_srs(&g, 7, 3, &mut rng).unwrap(), all);
        assert_eq!(sample_mixed(&g, 7, 0.5, 3, &mut rng).unwrap(), all);
    }

    #[test]
    fn two_node_graph_sbs_takes_both() {
        let g = ObservedGraph::from_adjacency(2, |_, _| false).unwrap();
        let idx = sample_sbs(&g, 2, &mut seeded(3)).unwrap();
        assert_eq!(idx.indices(), &[0, 1]);
    }

    #[test]
    fn same_seed_same_sketch() {
        let (g, _) = ideal(&[10, 30]);
        for strategy in [Strategy::Urs, Strategy::Sbs, Strategy::Srs, Strategy::Mixed] {
            let cfg = SamplerConfig {
                embed_dim: 8,
                ..SamplerConfig::new(strategy, 12)
            };
            let a = sample(&g, &cfg, &mut seeded(9)).unwrap();
            let b = sample(&g, &cfg, &mut seeded(9)).unwrap();
            assert_eq!(a, b, "{strategy}");
            assert_eq!(a.len(), 12);
        }
    }

    #[test]
    fn ideal_graph_sbs_cluster_probabilities_are_uniform() {
        let (g, p) = ideal(&[10, 10, 80]);
        for pr in sbs_cluster_probabilities(&g, &p) {
            assert!((pr - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sbs_probability_monotone_in_degree() {
        let params = SbmParams::new(vec![20, 40], 0.8, 0.1, 0.7, 4);
        let (g, _) = generate(&params).unwrap();
        let deg = g.degrees();
        let pr = sbs_first_draw_probabilities(&g);
        for a in 0..deg.len() {
            for b in 0..deg.len() {
                if deg[a] > deg[b] {
                    assert!(pr[a] <= pr[b]);
                }
            }
        }
    }

    #[test]
    fn mixed_split_is_floor_of_fraction() {
        let (g, _) = ideal(&[30, 70]);
        let idx = sample_mixed(&g, 40, 0.5, 16, &mut seeded(5)).unwrap();
        assert_eq!(idx.len(), 40);
    }

    #[test]
    fn mixed_extremes_match_pure_strategies() {
        let (g, _) = ideal(&[30, 70]);
        let urs = sample_urs(100, 20, &mut seeded(6)).unwrap();
        let mixed = sample_mixed(&g, 20, 1.0, 16, &mut seeded(6)).unwrap();
        assert_eq!(urs, mixed);
        let srs = sample_srs(&g, 20, 16, &mut seeded(7)).unwrap();
        let mixed = sample_mixed(&g, 20, 0.0, 16, &mut seeded(7)).unwrap();
        assert_eq!(srs, mixed);
    }

    #[test]
    fn ideal_graph_precompletion_is_a_no_op() {
        let (g, _) = ideal(&[8, 12]);
        let c = precomplete::<f64, _>(&g, 10, &SolverConfig::default(), &mut seeded(2)).unwrap();
        assert_eq!(c.graph, g);
        assert_eq!(c.added_ones, 0);
    }

    #[test]
    fn node_without_sketch_edges_attaches_to_zero_vector() {
        let (g, _) = ideal(&[3, 3]);
        let mut g2 = ObservedGraph::new(7, Entry::Unobserved).unwrap();
        for (i, j, e) in g.pairs() {
            g2.set(i, j, e).unwrap();
        }
        let idx = SketchIndex::new(vec![0, 1, 3, 4], 7).unwrap();
        let model = ClusterModel::from_partition(
            Partition::from_labels(vec![0, 0, 1, 1]).unwrap(),
            crate::clustering::ExtractionPath::Rounding,
        );
        let u = completion_assignment(&g2, &idx, &model);
        assert_eq!(u[6], None);
        assert_eq!(u[2], Some(0));
        assert_eq!(u[5], Some(1));
    }
}
