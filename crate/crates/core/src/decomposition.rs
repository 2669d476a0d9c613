//! Low-rank plus sparse decomposition of a partially observed sketch.
//!
//! Solves
//!
//! ```text
//! minimize    lambda * ||S||_1 + ||L||_*
//! subject to  L + S = A   on observed entries
//! ```
//!
//! with an inexact augmented Lagrangian scheme. Unobserved entries carry no
//! constraint: `S` is pinned to zero there and `L` is free. Because the sketch
//! is symmetric, every iterate is symmetric and singular value thresholding
//! reduces to shrinking the magnitudes of the eigenvalues.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ObservedGraph, Partition};
use crate::scalar::Scalar;
use crate::svt::shrink;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Start at `1 / (32 sqrt(N' rho_bar))` and bisect until the low-rank
    /// part rounds to a valid cluster matrix.
    #[serde(alias = "search")]
    PaperInitWithSearch,
    /// Single solve at `1 / sqrt(N')`.
    #[serde(alias = "fixed")]
    FixedInvSqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub lambda_mode: LambdaMode,
    /// Replaces the mode's lambda for the single fixed solve.
    pub lambda_fixed_override: Option<f64>,
    pub max_iterations: usize,
    /// Relative feasibility residual at which the solver stops.
    pub tolerance: f64,
    /// Stationarity guard: the relative dual residual must also fall below
    /// this before the solver stops. Feasibility alone is reached spuriously
    /// early whenever the sparse part can absorb the remaining mismatch.
    pub dual_tolerance: f64,
    pub search_depth: usize,
    /// The search stops once a confirmed bracket `[lo, hi]` has
    /// `hi / lo` at or below this ratio.
    pub search_resolution: f64,
    pub rounding_threshold: f64,
    /// Per-iteration growth of the penalty parameter.
    pub penalty_growth: f64,
    /// Cap on the penalty as a multiple of its initial value.
    pub penalty_cap_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda_mode: LambdaMode::PaperInitWithSearch,
            lambda_fixed_override: None,
            max_iterations: 500,
            tolerance: 1e-6,
            dual_tolerance: 1e-4,
            search_depth: 12,
            search_resolution: 1.2,
            rounding_threshold: 0.5,
            penalty_growth: 1.1,
            penalty_cap_factor: 1e7,
        }
    }
}

impl SolverConfig {
    pub fn fixed() -> Self {
        Self {
            lambda_mode: LambdaMode::FixedInvSqrt,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !(self.dual_tolerance > 0.0) {
            return Err(Error::invalid("solver tolerances must be positive"));
        }
        if self.search_depth == 0 {
            return Err(Error::invalid("search_depth must be at least 1"));
        }
        if !(self.search_resolution >= 1.0) {
            return Err(Error::invalid("search_resolution must be at least 1"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("max_iterations must be at least 1"));
        }
        if !(self.rounding_threshold > 0.0 && self.rounding_threshold < 1.0) {
            return Err(Error::invalid("rounding_threshold must lie in (0, 1)"));
        }
        if !(self.penalty_growth >= 1.0) || !(self.penalty_cap_factor >= 1.0) {
            return Err(Error::invalid("penalty growth and cap factor must be >= 1"));
        }
        if let Some(l) = self.lambda_fixed_override {
            if !(l > 0.0) {
                return Err(Error::invalid("lambda override must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Decomposition<T: Scalar> {
    pub low_rank: DMatrix<T>,
    /// Zero on unobserved entries.
    pub sparse: DMatrix<T>,
    pub lambda_used: T,
    pub iterations: usize,
    pub converged: bool,
    /// Final `||P(L + S - A)||_F / ||P(A)||_F` over observed entries.
    pub residual: T,
    /// Relative residual after every iteration.
    pub residual_history: Vec<T>,
    /// Final dual residual `mu ||P(S_k - S_{k-1})||_F / ||P(A)||_F`.
    pub dual_residual: T,
}

impl<T: Scalar> Decomposition<T> {
    /// Largest `|L + S - A|` over observed entries.
    pub fn max_observed_violation(&self, sketch: &ObservedGraph) -> T {
        let n = sketch.n_nodes();
        let mut worst = T::zero();
        for i in 0..n {
            for (j, e) in sketch.row(i).iter().enumerate() {
                if e.is_observed() {
                    let a = T::from_usize_lossy(e.zero_filled() as usize);
                    let v = (self.low_rank[(i, j)] + self.sparse[(i, j)] - a).abs();
                    worst = worst.max(v);
                }
            }
        }
        worst
    }

    /// Writes `iteration,residual` rows.
    pub fn write_residual_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("iteration,residual\n");
        for (k, r) in self.residual_history.iter().enumerate() {
            let _ = writeln!(out, "{},{:e}", k + 1, r.to_f64_lossy());
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// `1 / (32 sqrt(N' rho_bar))` with `rho_bar` the observed fraction of
/// off-diagonal sketch entries.
pub fn initial_lambda<T: Scalar>(sketch: &ObservedGraph) -> Result<T> {
    let rho_bar = sketch.observed_fraction();
    if rho_bar <= 0.0 {
        return Err(Error::invalid(
            "sketch has no observed off-diagonal entries; lambda undefined",
        ));
    }
    let n = sketch.n_nodes() as f64;
    Ok(T::lit(1.0 / (32.0 * (n * rho_bar).sqrt())))
}

/// `1 / sqrt(N')`.
pub fn fixed_lambda<T: Scalar>(n_sketch: usize) -> Result<T> {
    if n_sketch == 0 {
        return Err(Error::invalid("empty sketch"));
    }
    Ok(T::one() / T::from_usize_lossy(n_sketch).sqrt())
}

const STALL_WINDOW: usize = 50;

/// Runs the augmented Lagrangian iteration at a fixed `lambda`.
///
/// Stops once the relative feasibility residual is at most `cfg.tolerance`
/// and the dual residual at most `cfg.dual_tolerance`. Hitting
/// `max_iterations`, or staying feasible for 50 iterations without the dual
/// residual improving by a tenth, is not an error; the result reports
/// `converged = false`.
pub fn decompose<T: Scalar>(
    sketch: &ObservedGraph,
    lambda: T,
    cfg: &SolverConfig,
) -> Result<Decomposition<T>> {
    cfg.validate()?;
    let n = sketch.n_nodes();
    if n < 2 {
        return Err(Error::invalid(
            "decomposition needs a sketch with at least 2 nodes",
        ));
    }
    if !(lambda > T::zero()) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }

    let observed: Vec<bool> = (0..n)
        .flat_map(|i| sketch.row(i).iter().map(|e| e.is_observed()))
        .collect();
    // nalgebra is column-major; the sketch is symmetric so (i,j) and (j,i) agree.
    let data = DMatrix::<T>::from_fn(n, n, |i, j| {
        T::from_usize_lossy(sketch.entry(i, j).zero_filled() as usize)
    });
    let data_norm = data.norm();

    let mut mu = T::one() / spectral_norm_estimate(&data);
    let mu_max = mu * T::lit(cfg.penalty_cap_factor);
    let growth = T::lit(cfg.penalty_growth);
    let tol = T::lit(cfg.tolerance);

    let mut low_rank = DMatrix::<T>::zeros(n, n);
    let mut sparse = DMatrix::<T>::zeros(n, n);
    let mut dual = DMatrix::<T>::zeros(n, n);
    let mut work = DMatrix::<T>::zeros(n, n);
    let mut history = Vec::new();
    let mut rank = 0;
    let mut converged = false;
    let mut residual = T::max_value().unwrap_or_else(T::one);
    let mut dual_residual = residual;
    let dual_tol = T::lit(cfg.dual_tolerance);
    // Once feasible, a dual residual that stops improving will not reach
    // its tolerance within the iteration budget either.
    let mut best_dual = T::max_value().unwrap_or_else(T::one);
    let mut best_dual_at = 0;

    for it in 0..cfg.max_iterations {
        let inv_mu = T::one() / mu;
        for j in 0..n {
            for i in 0..n {
                work[(i, j)] = if observed[i * n + j] {
                    data[(i, j)] - sparse[(i, j)] + dual[(i, j)] * inv_mu
                } else {
                    low_rank[(i, j)]
                };
            }
        }
        let (l, kept) = shrink(&work, inv_mu)?;
        low_rank = l;
        rank = kept;

        let shrink = lambda * inv_mu;
        let mut resid_sq = T::zero();
        let mut dual_sq = T::zero();
        for j in 0..n {
            for i in 0..n {
                if !observed[i * n + j] {
                    continue;
                }
                let target = data[(i, j)] - low_rank[(i, j)] + dual[(i, j)] * inv_mu;
                let s = soft_threshold(target, shrink);
                let ds = s - sparse[(i, j)];
                dual_sq += ds * ds;
                sparse[(i, j)] = s;
                let r = data[(i, j)] - low_rank[(i, j)] - s;
                dual[(i, j)] += mu * r;
                resid_sq += r * r;
            }
        }
        residual = resid_sq.sqrt() / data_norm;
        dual_residual = mu * dual_sq.sqrt() / data_norm;
        if !residual.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite residual at iteration {}",
                it + 1
            )));
        }
        history.push(residual);
        if residual <= tol && dual_residual <= dual_tol {
            converged = true;
            break;
        }
        if residual <= tol {
            if dual_residual < best_dual * T::lit(0.9) {
                best_dual = dual_residual;
                best_dual_at = it;
            } else if it - best_dual_at >= STALL_WINDOW {
                break;
            }
        }
        mu = (mu * growth).min(mu_max);
    }
    debug!(
        "decompose n={n} lambda={lambda} iterations={} residual={residual} converged={converged} rank={rank}",
        history.len()
    );
    Ok(Decomposition {
        low_rank,
        sparse,
        lambda_used: lambda,
        iterations: history.len(),
        converged,
        residual,
        residual_history: history,
        dual_residual,
    })
}

#[inline]
fn soft_threshold<T: Scalar>(x: T, tau: T) -> T {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        T::zero()
    }
}

/// Largest singular value by power iteration on the symmetric input.
fn spectral_norm_estimate<T: Scalar>(m: &DMatrix<T>) -> T {
    let n = m.nrows();
    let mut v = DVector::<T>::from_fn(n, |i, _| {
        T::one() + T::lit(1e-3) * T::from_usize_lossy(i % 7)
    });
    let mut est = T::zero();
    for _ in 0..50 {
        let norm = v.norm();
        if norm == T::zero() {
            break;
        }
        v /= norm;
        let w = m * &v;
        let next = w.norm();
        let done = (next - est).abs() <= T::lit(1e-6) * next;
        est = next;
        v = w;
        if done {
            break;
        }
    }
    if est > T::zero() {
        est
    } else {
        T::one()
    }
}

/// What rounding a candidate cluster matrix produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundingReport {
    pub partition: Option<Partition>,
    /// Diagonal entries that rounded to zero.
    pub diagonal_failures: usize,
    pub asymmetric_pairs: usize,
    /// Rows whose ones do not form the same clique as their neighbours.
    pub clique_violations: usize,
}

impl RoundingReport {
    pub fn is_valid(&self) -> bool {
        self.partition.is_some()
    }

    /// Valid but every cluster is a single node.
    pub fn is_all_singletons(&self) -> bool {
        self.partition
            .as_ref()
            .is_some_and(|p| p.n_clusters() == p.n_nodes())
    }

    pub fn violation_score(&self) -> usize {
        self.diagonal_failures + self.asymmetric_pairs + self.clique_violations
    }
}

/// Rounds `l` at `threshold` and checks that the result is the indicator
/// matrix of disjoint cliques covering every node.
pub fn inspect_rounding<T: Scalar>(l: &DMatrix<T>, threshold: T) -> RoundingReport {
    let n = l.nrows();
    let b = |i: usize, j: usize| l[(i, j)] > threshold;
    let diagonal_failures = (0..n).filter(|&i| !b(i, i)).count();
    let asymmetric_pairs = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .filter(|&(i, j)| b(i, j) != b(j, i))
        .count();

    // Each row's support must equal the support of every row it points to.
    let mut labels = vec![usize::MAX; n];
    let mut clique_violations = 0;
    let mut next = 0;
    for i in 0..n {
        if labels[i] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&j| b(i, j) || j == i).collect();
        let mut ok = true;
        for &j in &members {
            if labels[j] != usize::MAX || (0..n).any(|k| b(j, k) != b(i, k)) {
                ok = false;
            }
        }
        if !ok {
            clique_violations += 1;
        }
        for &j in &members {
            if labels[j] == usize::MAX {
                labels[j] = next;
            }
        }
        next += 1;
    }

    let partition = (diagonal_failures == 0 && asymmetric_pairs == 0 && clique_violations == 0)
        .then(|| Partition::from_labels(labels).expect("non-empty labels"));
    RoundingReport {
        partition,
        diagonal_failures,
        asymmetric_pairs,
        clique_violations,
    }
}

/// Partition implied by `l` if it rounds to a valid cluster matrix.
pub fn validate_cluster_matrix<T: Scalar>(
    l: &DMatrix<T>,
    rounding_threshold: T,
) -> Option<Partition> {
    if l.nrows() != l.ncols() || l.nrows() == 0 {
        return None;
    }
    inspect_rounding(l, rounding_threshold).partition
}

/// One solve inside the lambda search.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchStep {
    pub lambda: f64,
    pub valid: bool,
    pub diagonal_failures: usize,
    pub violation_score: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome<T: Scalar> {
    pub decomposition: Decomposition<T>,
    /// Present when the returned decomposition rounds to a valid cluster matrix.
    pub partition: Option<Partition>,
    pub steps: Vec<SearchStep>,
}

impl<T: Scalar> SearchOutcome<T> {
    pub fn is_valid(&self) -> bool {
        self.partition.is_some()
    }

    /// Bisection steps taken after the initial solve.
    pub fn search_steps(&self) -> usize {
        self.steps.len().saturating_sub(1)
    }
}

/// Solves at the initial lambda and, while the result is not a converged
/// solve rounding to a valid non-trivial cluster matrix, bisects lambda
/// geometrically inside `[lambda0 / 32, 32 lambda0]`.
///
/// A low-rank part that loses diagonal mass (or rounds to all singletons) is
/// under-connected and lambda moves up; anything else is over-connected and
/// lambda moves down. Until some lambda has come out over-connected, the
/// upper end of the bracket grows by a factor of 32 whenever the lower end
/// gets within a factor of 4 of it. The search ends after `search_depth`
/// bisections or once the bracket is narrower than `search_resolution`. If
/// nothing valid turns up, the attempt with the fewest rounding violations is
/// returned with `partition = None`.
pub fn solve_with_lambda_search<T: Scalar>(
    sketch: &ObservedGraph,
    cfg: &SolverConfig,
) -> Result<SearchOutcome<T>> {
    cfg.validate()?;
    if cfg.lambda_mode != LambdaMode::PaperInitWithSearch {
        return Err(Error::invalid(
            "lambda search requires PaperInitWithSearch mode",
        ));
    }
    let threshold = T::lit(cfg.rounding_threshold);
    let lambda0: T = initial_lambda(sketch)?;
    let bracket = T::lit(32.0);
    let (mut lo, mut hi) = (lambda0 / bracket, lambda0 * bracket);
    let mut hi_confirmed = false;
    let mut lambda = lambda0;
    let mut steps = Vec::new();
    let mut best: Option<(usize, Decomposition<T>)> = None;

    for step in 0..=cfg.search_depth {
        let dec = decompose(sketch, lambda, cfg)?;
        let report = inspect_rounding(&dec.low_rank, threshold);
        let degenerate = report.is_all_singletons() && sketch.n_nodes() > 1;
        let accepted = dec.converged && report.is_valid() && !degenerate;
        steps.push(SearchStep {
            lambda: lambda.to_f64_lossy(),
            valid: accepted,
            diagonal_failures: report.diagonal_failures,
            violation_score: report.violation_score(),
            iterations: dec.iterations,
        });
        if accepted {
            return Ok(SearchOutcome {
                decomposition: dec,
                partition: report.partition,
                steps,
            });
        }
        let score = report.violation_score();
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, dec));
        }
        if step == cfg.search_depth {
            break;
        }
        if report.diagonal_failures > 0 || degenerate {
            lo = lambda;
            // The upper end has never produced an over-connected result, so
            // it is a guess rather than a bound: widen it once the search
            // runs up against it.
            if !hi_confirmed && lo * T::lit(4.0) >= hi {
                hi *= bracket;
            }
        } else {
            hi = lambda;
            hi_confirmed = true;
        }
        if hi_confirmed && hi <= lo * T::lit(cfg.search_resolution) {
            break;
        }
        lambda = (lo * hi).sqrt();
    }
    let (_, decomposition) = best.expect("at least one solve ran");
    Ok(SearchOutcome {
        decomposition,
        partition: None,
        steps,
    })
}

/// Solves a sketch according to `cfg.lambda_mode`.
///
/// In fixed mode a single solve runs at `lambda_fixed_override` or
/// `1 / sqrt(N')`, and the partition is whatever rounding yields.
pub fn solve_sketch<T: Scalar>(
    sketch: &ObservedGraph,
    cfg: &SolverConfig,
) -> Result<SearchOutcome<T>> {
    match cfg.lambda_mode {
        LambdaMode::PaperInitWithSearch => solve_with_lambda_search(sketch, cfg),
        LambdaMode::FixedInvSqrt => {
            let lambda = match cfg.lambda_fixed_override {
                Some(l) => T::lit(l),
                None => fixed_lambda(sketch.n_nodes())?,
            };
            let dec = decompose(sketch, lambda, cfg)?;
            let report = inspect_rounding(&dec.low_rank, T::lit(cfg.rounding_threshold));
            let step = SearchStep {
                lambda: lambda.to_f64_lossy(),
                valid: report.is_valid(),
                diagonal_failures: report.diagonal_failures,
                violation_score: report.violation_score(),
                iterations: dec.iterations,
            };
            Ok(SearchOutcome {
                decomposition: dec,
                partition: report.partition,
                steps: vec![step],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Entry;
    use crate::sbm::{cluster_matrix, generate, SbmParams};

    fn ideal(sizes: &[usize]) -> (ObservedGraph, Partition) {
        let p = Partition::from_sizes(sizes).unwrap();
        let g = ObservedGraph::from_adjacency(p.n_nodes(), |i, j| p.same_cluster(i, j)).unwrap();
        (g, p)
    }

    #[test]
    fn initial_lambda_values() {
        // N' = 200 with half the off-diagonal entries observed
        let mut g = ObservedGraph::new(200, Entry::Unobserved).unwrap();
        let mut flip = false;
        for i in 0..200 {
            for j in (i + 1)..200 {
                if flip {
                    g.set(i, j, Entry::ObservedZero).unwrap();
                }
                flip = !flip;
            }
        }
        assert!((g.observed_fraction() - 0.5).abs() < 1e-15);
        let l: f64 = initial_lambda(&g).unwrap();
        assert!((l - 0.003125).abs() < 1e-15);

        let full = ObservedGraph::new(100, Entry::ObservedZero).unwrap();
        let l: f64 = initial_lambda(&full).unwrap();
        assert!((l - 1.0 / 320.0).abs() < 1e-15);

        let blind = ObservedGraph::new(10, Entry::Unobserved).unwrap();
        assert!(initial_lambda::<f64>(&blind).is_err());
    }

    #[test]
    fn fixed_lambda_values() {
        assert!((fixed_lambda::<f64>(400).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(fixed_lambda::<f64>(1).unwrap(), 1.0);
        assert!((fixed_lambda::<f64>(100).unwrap() - 0.1).abs() < 1e-15);
        assert!(fixed_lambda::<f64>(0).is_err());
    }

    #[test]
    fn zero_lambda_rejected() {
        let (g, _) = ideal(&[3, 3]);
        assert!(decompose(&g, 0.0f64, &SolverConfig::default()).is_err());
        assert!(decompose(&g, -1.0f64, &SolverConfig::default()).is_err());
    }

    #[test]
    fn ideal_sketch_is_its_own_low_rank_part() {
        let (g, p) = ideal(&[10, 10]);
        let dec = decompose(&g, fixed_lambda::<f64>(20).unwrap(), &SolverConfig::fixed()).unwrap();
        assert!(dec.converged);
        let truth: DMatrix<f64> = cluster_matrix(&p);
        assert!((&dec.low_rank - &truth).amax() < 1e-4);
        assert!(dec.sparse.amax() < 1e-4);
        assert_eq!(validate_cluster_matrix(&dec.low_rank, 0.5).unwrap(), p);
    }

    #[test]
    fn works_in_single_precision() {
        let (g, p) = ideal(&[6, 4]);
        let dec = decompose(&g, fixed_lambda::<f32>(10).unwrap(), &SolverConfig::fixed()).unwrap();
        assert!(validate_cluster_matrix(&dec.low_rank, 0.5f32)
            .unwrap()
            .exact_match(&p));
    }

    #[test]
    fn noisy_sketch_rounds_to_truth() {
        let params = SbmParams::balanced(2, 50, 0.9, 0.05, 1.0, 17);
        let (g, truth) = generate(&params).unwrap();
        let dec = decompose(
            &g,
            fixed_lambda::<f64>(100).unwrap(),
            &SolverConfig::fixed(),
        )
        .unwrap();
        assert!(dec.converged);
        let part = validate_cluster_matrix(&dec.low_rank, 0.5).expect("valid rounding");
        assert!(part.exact_match(&truth.partition));
        assert!(dec.max_observed_violation(&g) <= 10.0 * 1e-6 * 100.0);
    }

    #[test]
    fn validate_accepts_blocks_and_rejects_bridges() {
        let p = Partition::from_sizes(&[3, 2]).unwrap();
        let mut l: DMatrix<f64> = cluster_matrix(&p);
        assert_eq!(validate_cluster_matrix(&l, 0.5).unwrap().sizes(), &[3, 2]);
        l[(0, 3)] = 1.0;
        l[(3, 0)] = 1.0;
        assert!(validate_cluster_matrix(&l, 0.5).is_none());
        let report = inspect_rounding(&l, 0.5);
        assert!(report.clique_violations > 0);
    }

    #[test]
    fn validate_rejects_missing_diagonal_and_asymmetry() {
        let p = Partition::from_sizes(&[2, 2]).unwrap();
        let mut l: DMatrix<f64> = cluster_matrix(&p);
        l[(2, 2)] = 0.1;
        assert_eq!(inspect_rounding(&l, 0.5).diagonal_failures, 1);
        let mut l: DMatrix<f64> = cluster_matrix(&p);
        l[(0, 1)] = 0.0;
        assert!(inspect_rounding(&l, 0.5).asymmetric_pairs == 1);
        assert!(validate_cluster_matrix(&l, 0.5).is_none());
    }

    #[test]
    fn rounding_absorbs_small_perturbations() {
        let p = Partition::from_sizes(&[4, 3, 2]).unwrap();
        let base: DMatrix<f64> = cluster_matrix(&p);
        let n = base.nrows();
        let noise = DMatrix::from_fn(n, n, |i, j| {
            let k = (i.min(j) * 31 + i.max(j) * 17) % 7;
            0.3 * (k as f64 / 3.0 - 1.0)
        });
        let perturbed = &base + &noise;
        assert!(noise.amax() <= 0.3 + 1e-12);
        assert_eq!(validate_cluster_matrix(&perturbed, 0.5).unwrap(), p);
    }

    #[test]
    fn lambda_search_recovers_ideal_sketch() {
        let (g, p) = ideal(&[10, 10]);
        let out = solve_with_lambda_search::<f64>(&g, &SolverConfig::default()).unwrap();
        assert!(out.is_valid());
        assert!(out.partition.as_ref().unwrap().exact_match(&p));
        // the initial lambda is far below what a 20-node sketch needs
        assert!(out.search_steps() > 0);
        assert!(out.steps[0].diagonal_failures > 0);
    }

    #[test]
    fn lambda_search_requires_search_mode() {
        let (g, _) = ideal(&[3, 3]);
        assert!(solve_with_lambda_search::<f64>(&g, &SolverConfig::fixed()).is_err());
    }

    #[test]
    fn lambda_search_flags_noise_sketch_invalid() {
        // star with centre 1: every clique reading of it is equally poor
        let g = ObservedGraph::from_adjacency(4, |i, j| i.min(j) == 0).unwrap();
        let cfg = SolverConfig::default();
        let out = solve_with_lambda_search::<f64>(&g, &cfg).unwrap();
        assert!(!out.is_valid());
        assert!(out.steps.len() <= cfg.search_depth + 1);
        let exhaustive = SolverConfig {
            search_resolution: 1.0,
            ..cfg
        };
        let out = solve_with_lambda_search::<f64>(&g, &exhaustive).unwrap();
        assert!(!out.is_valid());
        assert_eq!(out.steps.len(), exhaustive.search_depth + 1);
    }

    #[test]
    fn path_graph_resolves_to_fewest_disagreements() {
        // 1-2-3-4: {1,2},{3,4} disagrees with A on one pair, every other
        // partition on at least two
        let g = ObservedGraph::from_adjacency(4, |i, j| i.abs_diff(j) == 1).unwrap();
        let out = solve_with_lambda_search::<f64>(&g, &SolverConfig::default()).unwrap();
        let expect = Partition::from_labels(vec![0, 0, 1, 1]).unwrap();
        assert!(out.partition.unwrap().exact_match(&expect));
        assert!(out.decomposition.converged);
    }

    #[test]
    fn residual_csv_dump() {
        let (g, _) = ideal(&[3, 3]);
        let dec = decompose(&g, 0.4f64, &SolverConfig::fixed()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("res.csv");
        dec.write_residual_csv(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), dec.iterations + 1);
    }
}
