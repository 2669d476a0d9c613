//! Partially observed stochastic block model.
//!
//! Nodes are split into planted clusters. A pair inside a cluster is an edge
//! with probability `p`, a pair across clusters with probability `q`, and
//! independently of its edge state each pair is revealed with probability
//! `rho`. The planted cluster matrix `L` (one on every intra-cluster pair,
//! diagonal included) and the corruption `S = A - L` on observed entries form
//! the ground truth.

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Entry, ObservedGraph, Partition, SketchIndex};
use crate::rng::seeded;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmParams {
    pub n_nodes: usize,
    pub cluster_sizes: Vec<usize>,
    pub p: f64,
    pub q: f64,
    pub rho: f64,
    pub seed: u64,
}

impl SbmParams {
    pub fn new(cluster_sizes: Vec<usize>, p: f64, q: f64, rho: f64, seed: u64) -> Self {
        Self {
            n_nodes: cluster_sizes.iter().sum(),
            cluster_sizes,
            p,
            q,
            rho,
            seed,
        }
    }

    /// `r` equal clusters of size `n_per_cluster`.
    pub fn balanced(r: usize, n_per_cluster: usize, p: f64, q: f64, rho: f64, seed: u64) -> Self {
        Self::new(vec![n_per_cluster; r], p, q, rho, seed)
    }

    /// `r_small` clusters of size `n_min` plus one cluster holding the rest.
    ///
    /// Edge parameters default to `p = 0.8`, `q = 0.1`, `rho = 0.7`; override
    /// them with [`with_probabilities`](Self::with_probabilities).
    pub fn unbalanced_preset(n_min: usize, n_nodes: usize, r_small: usize) -> Result<Self> {
        Ok(Self {
            n_nodes,
            cluster_sizes: unbalanced_sizes(n_min, n_nodes, r_small)?,
            p: 0.8,
            q: 0.1,
            rho: 0.7,
            seed: 0,
        })
    }

    pub fn with_probabilities(mut self, p: f64, q: f64, rho: f64) -> Self {
        self.p = p;
        self.q = q;
        self.rho = rho;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_clusters(&self) -> usize {
        self.cluster_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cluster_sizes.is_empty() || self.cluster_sizes.contains(&0) {
            return Err(Error::invalid(
                "cluster sizes must be non-empty and positive",
            ));
        }
        let total: usize = self.cluster_sizes.iter().sum();
        if total != self.n_nodes {
            return Err(Error::invalid(format!(
                "cluster sizes sum to {total}, expected n_nodes = {}",
                self.n_nodes
            )));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid(format!("p = {} must lie in (0, 1]", self.p)));
        }
        if !(self.q >= 0.0 && self.q < 1.0) {
            return Err(Error::invalid(format!("q = {} must lie in [0, 1)", self.q)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::invalid(format!(
                "rho = {} must lie in (0, 1]",
                self.rho
            )));
        }
        if !(self.p > 0.5 && self.q <= 0.5) {
            warn!(
                "p = {}, q = {}: the low-rank plus sparse model needs p > 1/2 >= q",
                self.p, self.q
            );
        }
        Ok(())
    }
}

/// Sizes `[n_min; r_small] ++ [n_nodes - r_small * n_min]`.
pub fn unbalanced_sizes(n_min: usize, n_nodes: usize, r_small: usize) -> Result<Vec<usize>> {
    let small_total = n_min
        .checked_mul(r_small)
        .ok_or_else(|| Error::invalid("cluster sizes overflow"))?;
    if n_min == 0 || n_nodes <= small_total {
        return Err(Error::invalid(format!(
            "need n_nodes > r_small * n_min, got {n_nodes} <= {r_small} * {n_min}"
        )));
    }
    let mut sizes = vec![n_min; r_small];
    sizes.push(n_nodes - small_total);
    Ok(sizes)
}

/// Planted structure behind a generated graph.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub partition: Partition,
    /// Observed pairs `i < j` where `A` differs from `L`.
    pub sparse_support: Vec<(usize, usize)>,
}

impl GroundTruth {
    /// Ground truth for an externally supplied graph and its planted
    /// partition.
    pub fn from_partition(graph: &ObservedGraph, partition: Partition) -> Result<Self> {
        if partition.n_nodes() != graph.n_nodes() {
            return Err(Error::invalid(format!(
                "partition covers {} nodes, graph has {}",
                partition.n_nodes(),
                graph.n_nodes()
            )));
        }
        let sparse_support = graph
            .pairs()
            .filter(|&(i, j, e)| e.is_observed() && e.is_one() != partition.same_cluster(i, j))
            .map(|(i, j, _)| (i, j))
            .collect();
        Ok(Self {
            partition,
            sparse_support,
        })
    }

    #[inline]
    pub fn low_rank_entry(&self, i: usize, j: usize) -> bool {
        self.partition.same_cluster(i, j)
    }

    pub fn low_rank_matrix<T: Scalar>(&self) -> DMatrix<T> {
        cluster_matrix(&self.partition)
    }
}

/// Binary cluster matrix: one iff the two nodes share a cluster.
pub fn cluster_matrix<T: Scalar>(partition: &Partition) -> DMatrix<T> {
    let n = partition.n_nodes();
    DMatrix::from_fn(n, n, |i, j| {
        if partition.same_cluster(i, j) {
            T::one()
        } else {
            T::zero()
        }
    })
}

/// Samples a graph. Pairs are visited in row-major `i < j` order and each
/// consumes exactly two uniforms (edge, then observation), so the output is a
/// pure function of the parameters.
pub fn generate(params: &SbmParams) -> Result<(ObservedGraph, GroundTruth)> {
    params.validate()?;
    let partition = Partition::from_sizes(&params.cluster_sizes)?;
    let mut rng = seeded(params.seed);
    let mut sparse_support = Vec::new();
    let graph = ObservedGraph::from_pairs(params.n_nodes, |i, j| {
        let same = partition.same_cluster(i, j);
        let prob = if same { params.p } else { params.q };
        let edge = rng.random::<f64>() < prob;
        let observed = rng.random::<f64>() < params.rho;
        if !observed {
            return Entry::Unobserved;
        }
        if edge != same {
            sparse_support.push((i, j));
        }
        if edge {
            Entry::ObservedOne
        } else {
            Entry::ObservedZero
        }
    })?;
    Ok((
        graph,
        GroundTruth {
            partition,
            sparse_support,
        },
    ))
}

/// Pair counts of a (sub-)graph split by planted cluster membership.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DensityCounts {
    pub intra_pairs: u64,
    pub intra_observed: u64,
    pub intra_edges: u64,
    pub inter_pairs: u64,
    pub inter_observed: u64,
    pub inter_edges: u64,
}

impl DensityCounts {
    /// Counts over the sub-graph on `idx` (pass [`SketchIndex::all`] for the full graph).
    pub fn measure(graph: &ObservedGraph, partition: &Partition, idx: &SketchIndex) -> Self {
        let ids = idx.indices();
        let mut c = DensityCounts::default();
        for (a, &i) in ids.iter().enumerate() {
            for &j in &ids[a + 1..] {
                let e = graph.entry(i, j);
                let (pairs, observed, edges) = if partition.same_cluster(i, j) {
                    (
                        &mut c.intra_pairs,
                        &mut c.intra_observed,
                        &mut c.intra_edges,
                    )
                } else {
                    (
                        &mut c.inter_pairs,
                        &mut c.inter_observed,
                        &mut c.inter_edges,
                    )
                };
                *pairs += 1;
                if e.is_observed() {
                    *observed += 1;
                    if e.is_one() {
                        *edges += 1;
                    }
                }
            }
        }
        c
    }

    pub fn accumulate(&mut self, other: &DensityCounts) {
        self.intra_pairs += other.intra_pairs;
        self.intra_observed += other.intra_observed;
        self.intra_edges += other.intra_edges;
        self.inter_pairs += other.inter_pairs;
        self.inter_observed += other.inter_observed;
        self.inter_edges += other.inter_edges;
    }

    /// Edge fraction among observed intra-cluster pairs.
    pub fn intra_density(&self) -> f64 {
        ratio(self.intra_edges, self.intra_observed)
    }

    /// Edge fraction among observed inter-cluster pairs.
    pub fn inter_density(&self) -> f64 {
        ratio(self.inter_edges, self.inter_observed)
    }

    pub fn observation_rate(&self) -> f64 {
        ratio(
            self.intra_observed + self.inter_observed,
            self.intra_pairs + self.inter_pairs,
        )
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        f64::NAN
    } else {
        a as f64 / b as f64
    }
}
