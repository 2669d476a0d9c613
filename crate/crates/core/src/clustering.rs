//! Cluster extraction from a recovered sketch and retrieval on the full graph.
//!
//! A sketch cluster is described by its characteristic vector, the 0/1
//! indicator of its members among the `N'` sampled nodes. Every node `k` of
//! the full graph is then assigned to the cluster maximizing the normalized
//! correlation `(a_k|_I)^T v_i / n'_i`, where `a_k|_I` is column `k` restricted
//! to the sampled rows with unobserved entries read as zero.

use std::cmp::Ordering;

use log::{debug, warn};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::decomposition::validate_cluster_matrix;
use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::graph::{ObservedGraph, Partition, SketchIndex};
use crate::sbm::cluster_matrix;
use crate::scalar::Scalar;

/// How the clusters of a sketch were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionPath {
    /// The rounded low-rank matrix was a union of disjoint cliques.
    Rounding,
    /// Rounding failed; clusters come from the leading eigenvectors.
    Spectral,
}

/// Clusters of the sketch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterModel {
    sketch_partition: Partition,
    pub path: ExtractionPath,
}

impl ClusterModel {
    pub fn from_partition(sketch_partition: Partition, path: ExtractionPath) -> Self {
        Self {
            sketch_partition,
            path,
        }
    }

    /// Detected number of clusters `r_hat`.
    pub fn r_hat(&self) -> usize {
        self.sketch_partition.n_clusters()
    }

    /// Cluster sizes `n'_i` inside the sketch.
    pub fn sketch_sizes(&self) -> &[usize] {
        self.sketch_partition.sizes()
    }

    pub fn sketch_partition(&self) -> &Partition {
        &self.sketch_partition
    }

    pub fn n_sketch(&self) -> usize {
        self.sketch_partition.n_nodes()
    }

    /// Indicator vector of sketch cluster `i`.
    pub fn characteristic_vector(&self, i: usize) -> Vec<u8> {
        self.sketch_partition
            .labels()
            .iter()
            .map(|&l| u8::from(l == i))
            .collect()
    }

    pub fn characteristic_vectors(&self) -> Vec<Vec<u8>> {
        (0..self.r_hat())
            .map(|i| self.characteristic_vector(i))
            .collect()
    }
}

/// Clusters a recovered low-rank sketch component.
///
/// Rounding at `rounding_threshold` is tried first. When the rounded matrix
/// is not a union of cliques, the number of clusters is taken at the largest
/// relative eigengap among eigenvalues of `L` above the threshold, and the rows of the leading eigenvectors are
/// grouped by farthest-point seeding followed by Lloyd refinement.
pub fn extract_clusters<T: Scalar>(l: &DMatrix<T>, rounding_threshold: T) -> Result<ClusterModel> {
    let n = l.nrows();
    if n == 0 || l.ncols() != n {
        return Err(Error::invalid(format!(
            "cluster extraction needs a non-empty square matrix, got {}x{}",
            n,
            l.ncols()
        )));
    }
    if l.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(
            "non-finite entry in low-rank matrix".into(),
        ));
    }
    if let Some(p) = validate_cluster_matrix(l, rounding_threshold) {
        return Ok(ClusterModel::from_partition(p, ExtractionPath::Rounding));
    }
    let labels = spectral_labels(l, rounding_threshold)?;
    let p = Partition::from_labels(labels)?;
    debug!(
        "spectral fallback found {} clusters on {n} nodes",
        p.n_clusters()
    );
    Ok(ClusterModel::from_partition(p, ExtractionPath::Spectral))
}

fn spectral_labels<T: Scalar>(l: &DMatrix<T>, floor: T) -> Result<Vec<usize>> {
    let n = l.nrows();
    let sym = (l + l.transpose()) * T::lit(0.5);
    let eig = symmetric_eigen(&sym)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    // A cluster of size n contributes eigenvalue n to an ideal cluster
    // matrix, so anything under the rounding threshold is treated as noise.
    if !(eig.eigenvalues[order[0]] > floor) {
        return Err(Error::Numerical(
            "low-rank matrix has no eigenvalue above the rounding threshold".into(),
        ));
    }
    let positive: Vec<T> = order
        .iter()
        .map(|&k| eig.eigenvalues[k])
        .take_while(|&v| v > floor)
        .collect();

    // relative gap (lam_k - lam_{k+1}) / lam_k, with eigenvalues under the
    // floor treated as zero
    let mut k = 1;
    let mut best_gap = T::zero() - T::one();
    for (idx, &v) in positive.iter().enumerate() {
        let next = positive.get(idx + 1).copied().unwrap_or_else(T::zero);
        let gap = (v - next) / v;
        if gap > best_gap {
            best_gap = gap;
            k = idx + 1;
        }
    }

    let rows: Vec<Vec<T>> = (0..n)
        .map(|i| {
            let mut row: Vec<T> = order[..k]
                .iter()
                .map(|&c| eig.eigenvectors[(i, c)])
                .collect();
            let norm = row.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
            if norm > T::zero() {
                row.iter_mut().for_each(|x| *x /= norm);
            }
            row
        })
        .collect();
    Ok(k_center_lloyd(&rows, k))
}

fn sq_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// Farthest-point seeding from row 0, then at most 50 Lloyd rounds.
/// Ties go to the lowest center index.
fn k_center_lloyd<T: Scalar>(rows: &[Vec<T>], k: usize) -> Vec<usize> {
    let n = rows.len();
    let dim = rows[0].len();
    let mut centers: Vec<Vec<T>> = vec![rows[0].clone()];
    let mut nearest: Vec<T> = rows.iter().map(|r| sq_dist(r, &rows[0])).collect();
    while centers.len() < k {
        let (far, &d) = nearest
            .iter()
            .enumerate()
            .fold(
                (0, &nearest[0]),
                |best, cur| if *cur.1 > *best.1 { cur } else { best },
            );
        if !(d > T::zero()) {
            break;
        }
        centers.push(rows[far].clone());
        for (i, r) in rows.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(r, &rows[far]));
        }
    }

    let assign = |centers: &[Vec<T>]| -> Vec<usize> {
        rows.iter()
            .map(|r| {
                let mut best = 0;
                let mut best_d = sq_dist(r, &centers[0]);
                for (c, center) in centers.iter().enumerate().skip(1) {
                    let d = sq_dist(r, center);
                    if d < best_d {
                        best = c;
                        best_d = d;
                    }
                }
                best
            })
            .collect()
    };

    let mut labels = assign(&centers);
    for _ in 0..50 {
        let mut sums = vec![vec![T::zero(); dim]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            for (s, &x) in sums[c].iter_mut().zip(&rows[i]) {
                *s += x;
            }
        }
        for (c, center) in centers.iter_mut().enumerate() {
            if counts[c] > 0 {
                let inv = T::one() / T::from_usize_lossy(counts[c]);
                for (x, &s) in center.iter_mut().zip(&sums[c]) {
                    *x = s * inv;
                }
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    debug_assert_eq!(labels.len(), n);
    labels
}

/// Labels of the full graph plus the number of nodes that had no observed
/// edge into any sketch cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Retrieval {
    pub partition: Partition,
    pub zero_correlation_nodes: usize,
}

/// Assigns every node of `graph` to a sketch cluster by normalized correlation.
///
/// Comparisons are done exactly on integer counts, so equal scores are true
/// ties and resolve to the lowest cluster index.
pub fn retrieve_full(
    graph: &ObservedGraph,
    idx: &SketchIndex,
    model: &ClusterModel,
) -> Result<Retrieval> {
    if idx.parent_size() != graph.n_nodes() {
        return Err(Error::invalid("sketch index does not belong to this graph"));
    }
    if idx.len() != model.n_sketch() {
        return Err(Error::invalid(format!(
            "cluster model covers {} sketch nodes but the index has {}",
            model.n_sketch(),
            idx.len()
        )));
    }
    let r = model.r_hat();
    let sizes = model.sketch_sizes();
    let sketch_labels = model.sketch_partition().labels();
    let ids = idx.indices();

    let assigned: Vec<(usize, bool)> = (0..graph.n_nodes())
        .into_par_iter()
        .map(|k| {
            let row = graph.row(k);
            let mut counts = vec![0usize; r];
            for (pos, &node) in ids.iter().enumerate() {
                if row[node].is_one() {
                    counts[sketch_labels[pos]] += 1;
                }
            }
            let mut best = 0;
            for c in 1..r {
                // counts[c] / sizes[c] > counts[best] / sizes[best]
                if counts[c] * sizes[best] > counts[best] * sizes[c] {
                    best = c;
                }
            }
            (best, counts.iter().all(|&c| c == 0))
        })
        .collect();

    let zero_correlation_nodes = assigned.iter().filter(|(_, z)| *z).count();
    if zero_correlation_nodes > 0 {
        warn!("{zero_correlation_nodes} nodes had zero correlation with every sketch cluster");
    }
    let partition = Partition::from_labels(assigned.into_iter().map(|(c, _)| c).collect())?;
    Ok(Retrieval {
        partition,
        zero_correlation_nodes,
    })
}

pub fn exact_match(a: &Partition, b: &Partition) -> bool {
    a.exact_match(b)
}

/// Ideal cluster matrix of a partition.
pub fn reconstruct_l<T: Scalar>(partition: &Partition) -> DMatrix<T> {
    cluster_matrix(partition)
}

/// Monte-Carlo estimate of the probability that retrieval misassigns a node
/// of the smallest sketch cluster.
///
/// The correct cluster's count is `Binomial(n'_l, p)`, every other cluster's
/// is `Binomial(n'_i, q)`. A trial fails when some other cluster's
/// normalized count reaches the correct one; reaching it exactly counts as a
/// failure.
pub fn retrieval_failure_rate_mc<R: Rng + ?Sized>(
    p: f64,
    q: f64,
    sketch_sizes: &[usize],
    trials: u64,
    rng: &mut R,
) -> Result<f64> {
    if sketch_sizes.is_empty() || sketch_sizes.contains(&0) {
        return Err(Error::invalid(
            "sketch cluster sizes must be non-empty and positive",
        ));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let own = smallest_index(sketch_sizes);
    let n_own = sketch_sizes[own] as u64;
    let own_dist = Binomial::new(n_own, p).map_err(|e| Error::invalid(e.to_string()))?;
    let others: Vec<(u64, Binomial)> = sketch_sizes
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != own)
        .map(|(_, &n)| {
            Ok((
                n as u64,
                Binomial::new(n as u64, q).map_err(|e| Error::invalid(e.to_string()))?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut failures = 0u64;
    for _ in 0..trials {
        let x_own = own_dist.sample(rng);
        // x_i / n_i >= x_own / n_own
        if others
            .iter()
            .any(|(n, d)| d.sample(rng) * n_own >= x_own * n)
        {
            failures += 1;
        }
    }
    Ok(failures as f64 / trials as f64)
}

/// Sum of the two Chernoff tail bounds controlling a misassignment of a node
/// from the smallest sketch cluster, using the midpoint `(p + q) / 2` as the
/// separating level.
pub fn retrieval_chernoff_bound(p: f64, q: f64, sketch_sizes: &[usize]) -> f64 {
    let own = smallest_index(sketch_sizes);
    let d = p - q;
    let lower = (-(d * d) / (8.0 * p) * sketch_sizes[own] as f64).exp();
    let upper: f64 = sketch_sizes
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != own)
        .map(|(_, &n)| (-3.0 * d * d / (24.0 * q + 4.0 * d) * n as f64).exp())
        .sum();
    lower + upper
}

fn smallest_index(sizes: &[usize]) -> usize {
    let m = sizes.iter().copied().min().unwrap_or(0);
    sizes.iter().position(|&s| s == m).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn block(sizes: &[usize]) -> DMatrix<f64> {
        reconstruct_l(&Partition::from_sizes(sizes).unwrap())
    }

    #[test]
    fn two_blocks_extract_by_rounding() {
        let m = extract_clusters(&block(&[3, 4]), 0.5).unwrap();
        assert_eq!(m.r_hat(), 2);
        assert_eq!(m.path, ExtractionPath::Rounding);
        assert_eq!(m.characteristic_vector(0), vec![1, 1, 1, 0, 0, 0, 0]);
        assert_eq!(m.characteristic_vector(1), vec![0, 0, 0, 1, 1, 1, 1]);
        assert_eq!(m.sketch_sizes(), &[3, 4]);
    }

    #[test]
    fn all_ones_is_one_cluster() {
        let m = extract_clusters(&DMatrix::<f64>::from_element(5, 5, 1.0), 0.5).unwrap();
        assert_eq!(m.r_hat(), 1);
        assert_eq!(m.characteristic_vectors(), vec![vec![1; 5]]);
    }

    #[test]
    fn empty_or_zero_matrix_is_rejected() {
        assert!(extract_clusters(&DMatrix::<f64>::zeros(0, 0), 0.5).is_err());
        // zero matrix rounds to a diagonal failure and has no spectrum to fall back on
        assert!(extract_clusters(&DMatrix::<f64>::zeros(4, 4), 0.5).is_err());
    }

    #[test]
    fn spectral_fallback_recovers_blocks_with_low_diagonal() {
        // blocks of 4, 6 and 3 scaled so a few diagonal entries fall under 0.5
        let mut l = block(&[4, 6, 3]) * 0.6;
        l[(0, 0)] = 0.45;
        l[(7, 7)] = 0.4;
        l[(5, 11)] = 0.05;
        l[(11, 5)] = 0.05;
        let m = extract_clusters(&l, 0.5).unwrap();
        assert_eq!(m.path, ExtractionPath::Spectral);
        let truth = Partition::from_sizes(&[4, 6, 3]).unwrap();
        assert!(m.sketch_partition().exact_match(&truth));
    }

    #[test]
    fn extract_then_reconstruct_is_idempotent() {
        for sizes in [vec![1, 1, 1], vec![5], vec![2, 7, 3, 1]] {
            let l = block(&sizes);
            let m = extract_clusters(&l, 0.5).unwrap();
            let back: DMatrix<f64> = reconstruct_l(m.sketch_partition());
            assert_eq!(back, l);
            assert_eq!(back.rank(1e-9), sizes.len());
        }
    }

    #[test]
    fn reconstruct_small_cases() {
        let singles: DMatrix<f64> = reconstruct_l(&Partition::from_sizes(&[1, 1, 1]).unwrap());
        assert_eq!(singles, DMatrix::identity(3, 3));
        let l: DMatrix<f64> = reconstruct_l(&Partition::from_sizes(&[2, 1]).unwrap());
        assert_eq!(
            l,
            DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0])
        );
    }

    fn ideal_graph(sizes: &[usize]) -> (ObservedGraph, Partition) {
        let p = Partition::from_sizes(sizes).unwrap();
        let g = ObservedGraph::from_adjacency(p.n_nodes(), |i, j| p.same_cluster(i, j)).unwrap();
        (g, p)
    }

    #[test]
    fn ideal_retrieval_reproduces_truth() {
        let (g, truth) = ideal_graph(&[5, 8, 3]);
        let idx = SketchIndex::new(vec![0, 2, 6, 9, 14], 16).unwrap();
        let model =
            ClusterModel::from_partition(truth.restrict(&idx).unwrap(), ExtractionPath::Rounding);
        let out = retrieve_full(&g, &idx, &model).unwrap();
        assert!(out.partition.exact_match(&truth));
        assert_eq!(out.zero_correlation_nodes, 0);
        let ids = idx.indices();
        for a in 0..ids.len() {
            for b in 0..ids.len() {
                assert_eq!(
                    out.partition.same_cluster(ids[a], ids[b]),
                    model.sketch_partition().same_cluster(a, b)
                );
            }
        }
    }

    #[test]
    fn ties_go_to_lowest_cluster() {
        // node 4 links to one member of each sketch cluster of equal size
        let mut g = ObservedGraph::from_adjacency(5, |i, j| {
            (i < 2 && j < 2) || (i >= 2 && j >= 2 && i < 4 && j < 4)
        })
        .unwrap();
        g.set(4, 1, crate::graph::Entry::ObservedOne).unwrap();
        g.set(4, 2, crate::graph::Entry::ObservedOne).unwrap();
        let idx = SketchIndex::new(vec![0, 1, 2, 3], 5).unwrap();
        let model = ClusterModel::from_partition(
            Partition::from_labels(vec![0, 0, 1, 1]).unwrap(),
            ExtractionPath::Rounding,
        );
        let out = retrieve_full(&g, &idx, &model).unwrap();
        assert_eq!(out.partition.label(4), out.partition.label(0));
    }

    #[test]
    fn isolated_node_is_counted_and_assigned_first_cluster() {
        let g =
            ObservedGraph::from_adjacency(5, |i, j| i < 4 && j < 4 && (i < 2) == (j < 2)).unwrap();
        let idx = SketchIndex::new(vec![0, 1, 2, 3], 5).unwrap();
        let model = ClusterModel::from_partition(
            Partition::from_labels(vec![0, 0, 1, 1]).unwrap(),
            ExtractionPath::Rounding,
        );
        let out = retrieve_full(&g, &idx, &model).unwrap();
        assert_eq!(out.zero_correlation_nodes, 1);
        assert_eq!(out.partition.label(4), out.partition.label(0));
    }

    #[test]
    fn retrieval_rejects_mismatched_model() {
        let (g, truth) = ideal_graph(&[2, 2]);
        let idx = SketchIndex::new(vec![0, 2], 4).unwrap();
        let model = ClusterModel::from_partition(truth, ExtractionPath::Rounding);
        assert!(retrieve_full(&g, &idx, &model).is_err());
    }

    #[test]
    fn noiseless_retrieval_never_fails() {
        let mut rng = seeded(1);
        assert_eq!(
            retrieval_failure_rate_mc(1.0, 0.0, &[10, 10], 10_000, &mut rng).unwrap(),
            0.0
        );
    }

    #[test]
    fn monte_carlo_below_chernoff_bound() {
        let mut rng = seeded(2);
        let sizes = [60, 60];
        let rate = retrieval_failure_rate_mc(0.8, 0.1, &sizes, 100_000, &mut rng).unwrap();
        let bound = retrieval_chernoff_bound(0.8, 0.1, &sizes);
        assert!(rate <= bound, "rate {rate} bound {bound}");
    }

    #[test]
    fn tiny_clusters_fail_often() {
        let mut rng = seeded(3);
        let rate = retrieval_failure_rate_mc(0.6, 0.4, &[2, 2], 20_000, &mut rng).unwrap();
        assert!(rate > 0.2, "rate {rate}");
    }
}
