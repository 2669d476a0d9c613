//! Closed-form recovery bounds.
//!
//! Every quantity here is a direct formula evaluation with natural
//! logarithms. Sufficient conditions come back as [`Condition`] records that
//! carry both evaluated sides, so reports can show how far an experiment sits
//! from the predicted threshold and not only a yes/no verdict.
//!
//! The constant `C` inside `zeta` is not pinned down by the analysis; it
//! defaults to 1 and is echoed in every report.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs<T> {
    pub n_nodes: usize,
    pub r: usize,
    pub n_min: usize,
    pub p: T,
    pub q: T,
    pub rho: T,
    pub n_sketch: usize,
    /// Unspecified constant in `zeta`.
    pub c: T,
    /// Target number of sketch samples from the smallest cluster.
    pub b: usize,
}

impl<T: Scalar> TheoryInputs<T> {
    /// Inputs with `C = 1` and `b = 1`.
    pub fn new(
        n_nodes: usize,
        r: usize,
        n_min: usize,
        p: T,
        q: T,
        rho: T,
        n_sketch: usize,
    ) -> Self {
        Self {
            n_nodes,
            r,
            n_min,
            p,
            q,
            rho,
            n_sketch,
            c: T::one(),
            b: 1,
        }
    }

    pub fn with_b(mut self, b: usize) -> Self {
        self.b = b;
        self
    }

    pub fn with_c(mut self, c: T) -> Self {
        self.c = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        if self.n_nodes == 0 || self.r == 0 || self.n_min == 0 {
            return Err(Error::invalid("N, r and n_min must be positive"));
        }
        if self.n_min * self.r > self.n_nodes {
            return Err(Error::invalid(format!(
                "n_min = {} exceeds N / r = {} / {}",
                self.n_min, self.n_nodes, self.r
            )));
        }
        if !(self.p > zero && self.p <= one) || !(self.q >= zero && self.q < one) {
            return Err(Error::invalid("need 0 < p <= 1 and 0 <= q < 1"));
        }
        if !(self.rho > zero && self.rho <= one) {
            return Err(Error::invalid("need 0 < rho <= 1"));
        }
        if !(self.c > zero) {
            return Err(Error::invalid("constant C must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `q * f <= 1`.
    SmallQ,
    LargeQ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = "<")]
    Below,
}

/// One evaluated inequality `lhs (relation) rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition<T> {
    pub name: &'static str,
    pub lhs: T,
    pub relation: Relation,
    pub rhs: T,
    pub holds: bool,
}

impl<T: Scalar> Condition<T> {
    fn new(name: &'static str, lhs: T, relation: Relation, rhs: T) -> Self {
        let holds = match relation {
            Relation::AtLeast => lhs >= rhs,
            Relation::AtMost => lhs <= rhs,
            Relation::Below => lhs < rhs,
        };
        Self {
            name,
            lhs,
            relation,
            rhs,
            holds,
        }
    }

    fn and(mut self, extra: bool) -> Self {
        self.holds &= extra;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryBounds<T> {
    pub inputs: TheoryInputs<T>,
    pub gamma: T,
    pub f: T,
    pub mu_min: T,
    pub eta: T,
    pub alpha: T,
    pub beta: T,
    pub g: T,
    pub g_prime: T,
    pub zeta: T,
    pub zeta_prime: T,
    pub eps1: T,
    pub eps2: T,
    pub p_minus: T,
    pub q_minus: T,
    pub rho_minus: T,
    pub gamma_prime: T,
    /// Lower bound on the per-draw probability of hitting the smallest
    /// cluster under SbS with replacement (meaningful when `alpha < 1`).
    pub sbs_min_probability: T,
    /// Smallest-cluster sketch size targeted by the SbS cluster-size result.
    pub target_sketch_cluster: T,
    pub regime: Regime,
    /// Violated preconditions, e.g. `beta >= 1`.
    pub flags: Vec<String>,
    pub conditions: Vec<Condition<T>>,
    pub verdicts: BTreeMap<String, bool>,
}

impl<T: Scalar> TheoryBounds<T> {
    pub fn condition(&self, name: &str) -> Option<&Condition<T>> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String>
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }
}

/// `1 - 2 max(1 - p, q)`.
pub fn density_difference<T: Scalar>(p: T, q: T) -> T {
    T::one() - T::lit(2.0) * (T::one() - p).max(q)
}

fn usize_t<T: Scalar>(n: usize) -> T {
    T::from_usize_lossy(n)
}

/// Sketch densities `(p-, q-, rho-)` with `eps1` clamped into `[0, 1]`.
pub fn sketch_probability_bounds<T: Scalar>(inputs: &TheoryInputs<T>) -> (T, T, T) {
    let (eps1, eps2) = epsilons(inputs);
    minus_values(inputs, eps1, eps2)
}

fn epsilons<T: Scalar>(i: &TheoryInputs<T>) -> (T, T) {
    let n: T = usize_t(i.n_nodes);
    let n_min = i.n_min as i32;
    let eps1 = n * (T::one() - i.rho * i.p).powi(n_min) * (T::one() - i.rho * i.q).powi(n_min);
    let eps2 = n * (T::one() - i.rho).powi(i.n_nodes as i32);
    (eps1, eps2)
}

fn minus_values<T: Scalar>(i: &TheoryInputs<T>, eps1: T, eps2: T) -> (T, T, T) {
    let clamp = |e: T| e.max(T::zero()).min(T::one());
    let s1 = (T::one() - clamp(eps1)).powi(2);
    let s2 = (T::one() - clamp(eps2)).powi(2);
    (i.p * s1, i.q * s1, i.rho * s2)
}

/// `N >= N' >= 2 f [b + ln(2 r N)]`.
pub fn check_urs_sampling<T: Scalar>(inputs: &TheoryInputs<T>) -> Result<Condition<T>> {
    inputs.validate()?;
    Ok(urs_condition(inputs, &Core::new(inputs)))
}

/// Conditions on `n_min` and both sides of `N'` for uniform sampling.
pub fn check_theorem1<T: Scalar>(inputs: &TheoryInputs<T>) -> Result<Vec<Condition<T>>> {
    inputs.validate()?;
    Ok(theorem1_conditions(inputs, &Core::new(inputs)))
}

/// Conditions of the SbS sampling-size lemma, the SbS cluster-size theorem
/// and the SbS main theorem.
pub fn check_sbs_theorems<T: Scalar>(inputs: &TheoryInputs<T>) -> Result<Vec<Condition<T>>> {
    inputs.validate()?;
    Ok(sbs_conditions(inputs, &Core::new(inputs)))
}

/// `(8 p / gamma^2) ln(r N^2)`: sketch smallest-cluster size sufficient for retrieval.
pub fn retrieval_threshold<T: Scalar>(p: T, q: T, r: usize, n_nodes: usize) -> T {
    let gamma = density_difference(p, q);
    let n: T = usize_t(n_nodes);
    T::lit(8.0) * p / (gamma * gamma) * (usize_t::<T>(r) * n * n).ln()
}

struct Core<T> {
    n: T,
    r: T,
    n_min: T,
    n_sketch: T,
    gamma: T,
    f: T,
    zeta: T,
    ln_2rn: T,
    ln_rn2: T,
}

impl<T: Scalar> Core<T> {
    fn new(i: &TheoryInputs<T>) -> Self {
        let n: T = usize_t(i.n_nodes);
        let r: T = usize_t(i.r);
        let n_min: T = usize_t(i.n_min);
        let gamma = density_difference(i.p, i.q);
        let ln_n = n.ln();
        Self {
            n,
            r,
            n_min,
            n_sketch: usize_t(i.n_sketch),
            gamma,
            f: n / n_min,
            zeta: i.c * ln_n * ln_n / (i.rho * gamma * gamma),
            ln_2rn: (T::lit(2.0) * r * n).ln(),
            ln_rn2: (r * n * n).ln(),
        }
    }

    fn in_range(&self) -> bool {
        self.n_sketch >= T::one() && self.n_sketch <= self.n
    }
}

fn urs_condition<T: Scalar>(i: &TheoryInputs<T>, k: &Core<T>) -> Condition<T> {
    let rhs = T::lit(2.0) * k.f * (usize_t::<T>(i.b) + k.ln_2rn);
    Condition::new("urs_sampling_size", k.n_sketch, Relation::AtLeast, rhs).and(k.in_range())
}

fn theorem1_conditions<T: Scalar>(i: &TheoryInputs<T>, k: &Core<T>) -> Vec<Condition<T>> {
    let four = T::lit(4.0);
    let retrieval = T::lit(8.0) * i.p / (k.gamma * k.gamma) * k.ln_rn2;
    let upper = (k.n_min * k.n_min / k.zeta).min(k.n);
    let lower = four * k.f * (k.f * k.zeta).max(four * i.p / (k.gamma * k.gamma) * k.ln_rn2)
        + four * k.f * k.ln_2rn;
    let decomposition = four * k.f * (k.f * k.zeta + k.ln_2rn);
    let positive_gamma = k.gamma > T::zero();
    vec![
        Condition::new("thm1_n_min", k.n_min, Relation::AtLeast, retrieval).and(positive_gamma),
        Condition::new("thm1_sketch_upper", k.n_sketch, Relation::AtMost, upper)
            .and(positive_gamma),
        Condition::new("thm1_sketch_lower", k.n_sketch, Relation::AtLeast, lower)
            .and(positive_gamma && k.in_range()),
        Condition::new(
            "sketch_decomposition_lower",
            k.n_sketch,
            Relation::AtLeast,
            decomposition,
        )
        .and(positive_gamma && k.in_range()),
    ]
}

struct SbsCore<T> {
    eta: T,
    alpha: T,
    beta: T,
    g: T,
    g_prime: T,
    zeta_prime: T,
    gamma_prime: T,
    rho_prime: T,
}

impl<T: Scalar> SbsCore<T> {
    fn new(i: &TheoryInputs<T>, k: &Core<T>) -> Self {
        let one = T::one();
        let two = T::lit(2.0);
        let mu_min = mu_min(i);
        let eta = one + i.q / i.p * (k.f - one);
        let alpha = (T::lit(6.0) * (two * k.n).ln() / mu_min).sqrt();
        let beta = (T::lit(6.0) * k.ln_2rn / mu_min).sqrt();
        let ratio = (one + beta) / (one - beta);
        let b: T = usize_t(i.b);
        let g = eta * ratio / (one - b / k.n_min);
        let g_prime = two * eta * ratio;
        let (p_m, q_m, rho_m) = sketch_probability_bounds(i);
        let gamma_prime = density_difference(p_m, q_m);
        let ln_n = k.n.ln();
        let zeta_prime = i.c * ln_n * ln_n / (rho_m * gamma_prime * gamma_prime);
        Self {
            eta,
            alpha,
            beta,
            g,
            g_prime,
            zeta_prime,
            gamma_prime,
            rho_prime: rho_m,
        }
    }

    fn usable(&self, i: &TheoryInputs<T>) -> bool {
        self.beta < T::one() && i.b < i.n_min && self.gamma_prime > T::zero()
    }
}

fn mu_min<T: Scalar>(i: &TheoryInputs<T>) -> T {
    i.rho * ((i.p - i.q) * usize_t::<T>(i.n_min) + i.q * usize_t::<T>(i.n_nodes))
}

fn sbs_conditions<T: Scalar>(i: &TheoryInputs<T>, k: &Core<T>) -> Vec<Condition<T>> {
    let s = SbsCore::new(i, k);
    let (two, four, sixteen) = (T::lit(2.0), T::lit(4.0), T::lit(16.0));
    let ln_n = k.n.ln();
    let ok = s.usable(i);
    let rg = k.r * s.g;
    let rgp = k.r * s.g_prime;
    let sampling = rg * (usize_t::<T>(i.b) * ln_n + k.ln_2rn);
    let cs_upper = (k.n_min * k.n_min / (four * s.zeta_prime)).min(k.n);
    // evaluated exactly as printed, including the repeated ln^2 N factor
    let cs_lower = rgp * (rgp * s.zeta_prime * ln_n * ln_n + two * k.ln_2rn);
    let main_n_min = sixteen * i.p / (k.gamma * k.gamma) * k.ln_rn2;
    let main_sketch = rgp * k.ln_2rn * (sixteen * i.p / (k.gamma * k.gamma) * ln_n + T::one());
    let gamma_ok = k.gamma > T::zero();
    vec![
        Condition::new("sbs_alpha_below_one", s.alpha, Relation::Below, T::one()),
        Condition::new("sbs_beta_below_one", s.beta, Relation::Below, T::one()),
        Condition::new("sbs_sampling_size", k.n_sketch, Relation::AtLeast, sampling)
            .and(ok && k.in_range()),
        Condition::new(
            "sbs_cluster_size_upper",
            k.n_sketch,
            Relation::AtMost,
            cs_upper,
        )
        .and(ok),
        Condition::new(
            "sbs_cluster_size_lower",
            k.n_sketch,
            Relation::AtLeast,
            cs_lower,
        )
        .and(ok && k.in_range()),
        Condition::new("sbs_main_n_min", k.n_min, Relation::AtLeast, main_n_min).and(gamma_ok),
        Condition::new(
            "sbs_main_sketch",
            k.n_sketch,
            Relation::AtLeast,
            main_sketch,
        )
        .and(ok && gamma_ok && k.in_range()),
    ]
}

/// Evaluates every derived quantity and every sufficient condition.
pub fn compute_bounds<T: Scalar>(inputs: &TheoryInputs<T>) -> Result<TheoryBounds<T>> {
    inputs.validate()?;
    let k = Core::new(inputs);
    let s = SbsCore::new(inputs, &k);
    let (eps1, eps2) = epsilons(inputs);
    let (p_minus, q_minus, rho_minus) = minus_values(inputs, eps1, eps2);
    let one = T::one();

    let mut flags = Vec::new();
    if s.alpha >= one {
        flags.push(format!("alpha = {} >= 1", s.alpha));
    }
    if s.beta >= one {
        flags.push(format!("beta = {} >= 1", s.beta));
    }
    if inputs.b >= inputs.n_min {
        flags.push(format!("b = {} >= n_min = {}", inputs.b, inputs.n_min));
    }
    if k.gamma <= T::zero() {
        flags.push(format!("gamma = {} <= 0", k.gamma));
    }
    if s.gamma_prime <= T::zero() {
        flags.push(format!("gamma' = {} <= 0", s.gamma_prime));
    }
    if eps1 > one {
        flags.push(format!("eps1 = {eps1} > 1, clamped"));
    }

    let mut conditions = vec![urs_condition(inputs, &k)];
    conditions.extend(theorem1_conditions(inputs, &k));
    conditions.extend(sbs_conditions(inputs, &k));
    let verdicts = conditions
        .iter()
        .map(|c| (c.name.to_string(), c.holds))
        .collect();

    let n_sketch: T = usize_t(inputs.n_sketch);
    let target_sketch_cluster =
        (inputs.c * n_sketch).sqrt() * n_sketch.ln() / (s.rho_prime.sqrt() * s.gamma_prime);
    let sbs_min_probability = (one - s.alpha) / (one + s.alpha) / (k.r * s.eta);

    Ok(TheoryBounds {
        inputs: *inputs,
        gamma: k.gamma,
        f: k.f,
        mu_min: mu_min(inputs),
        eta: s.eta,
        alpha: s.alpha,
        beta: s.beta,
        g: s.g,
        g_prime: s.g_prime,
        zeta: k.zeta,
        zeta_prime: s.zeta_prime,
        eps1,
        eps2,
        p_minus,
        q_minus,
        rho_minus,
        gamma_prime: s.gamma_prime,
        sbs_min_probability,
        target_sketch_cluster,
        regime: if inputs.q * k.f <= one {
            Regime::SmallQ
        } else {
            Regime::LargeQ
        },
        flags,
        conditions,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(
        n: usize,
        r: usize,
        n_min: usize,
        p: f64,
        q: f64,
        rho: f64,
        n_sketch: usize,
    ) -> TheoryInputs<f64> {
        TheoryInputs::new(n, r, n_min, p, q, rho, n_sketch)
    }

    #[test]
    fn frozen_values() {
        assert!((density_difference(0.8f64, 0.1) - 0.6).abs() < 1e-12);
        let b = compute_bounds(&inputs(5000, 2, 200, 0.8, 0.0, 0.7, 200)).unwrap();
        assert!((b.f - 25.0).abs() < 1e-12);
        assert_eq!(b.eta, 1.0);
        assert!((b.mu_min - 0.7 * 0.8 * 200.0).abs() < 1e-9);
    }

    #[test]
    fn urs_lemma_example() {
        // f = 2 via N = 100, n_min = 50, r = 2
        let i = inputs(100, 2, 50, 0.8, 0.1, 1.0, 100).with_b(10);
        let c = check_urs_sampling(&i).unwrap();
        assert!((c.rhs - 4.0 * (10.0 + 400f64.ln())).abs() < 1e-12);
        assert!((c.rhs - 63.96).abs() < 0.01);
        assert!(c.holds);
        assert!(
            !check_urs_sampling(&inputs(100, 2, 50, 0.8, 0.1, 1.0, 101))
                .unwrap()
                .holds
        );
        assert!(
            !check_urs_sampling(&inputs(100, 2, 50, 0.8, 0.1, 1.0, 0))
                .unwrap()
                .holds
        );
    }

    #[test]
    fn theorem1_large_balanced_instance() {
        let conds = check_theorem1(&inputs(10_000, 2, 5000, 0.9, 0.05, 1.0, 500)).unwrap();
        let get = |n: &str| conds.iter().find(|c| c.name == n).unwrap().clone();
        assert!(get("thm1_n_min").holds);
        assert!(get("thm1_sketch_upper").holds);
        // the lower bound evaluates to roughly 2205 > 500
        let lower = get("thm1_sketch_lower");
        assert!(!lower.holds);
        assert!((lower.rhs - 2205.0).abs() < 5.0, "{}", lower.rhs);
    }

    #[test]
    fn theorem1_failures() {
        let conds = check_theorem1(&inputs(1000, 2, 1, 0.9, 0.05, 1.0, 10)).unwrap();
        assert!(!conds[0].holds);
        let conds = check_theorem1(&inputs(1000, 2, 30, 0.9, 0.05, 1.0, 900)).unwrap();
        let upper = conds
            .iter()
            .find(|c| c.name == "thm1_sketch_upper")
            .unwrap();
        assert!(upper.rhs < 900.0 && !upper.holds);
    }

    #[test]
    fn sketch_probability_cases() {
        let (p, _, _) = sketch_probability_bounds(&inputs(100, 2, 20, 1.0, 0.1, 1.0, 10));
        assert_eq!(p, 1.0);
        let i = inputs(100, 2, 20, 0.5, 0.0, 0.5, 10);
        let b = compute_bounds(&i).unwrap();
        assert!((b.eps1 - 100.0 * 0.75f64.powi(20)).abs() < 1e-12);
        let (_, _, rho) = sketch_probability_bounds(&inputs(100, 2, 20, 0.8, 0.1, 1.0, 10));
        assert_eq!(rho, 1.0);
    }

    #[test]
    fn tiny_mean_degree_flags_beta() {
        let b = compute_bounds(&inputs(50, 2, 3, 0.6, 0.0, 0.2, 10)).unwrap();
        assert!(b.beta >= 1.0);
        assert!(b.flags.iter().any(|f| f.starts_with("beta")));
        assert!(!b.verdicts["sbs_sampling_size"]);
    }

    #[test]
    fn clean_regime_sbs_bound_below_urs_bound() {
        let i = inputs(20_000, 3, 200, 0.9, 0.0, 1.0, 1000).with_b(20);
        let b = compute_bounds(&i).unwrap();
        let urs = b.condition("urs_sampling_size").unwrap().rhs;
        let sbs = b.condition("sbs_sampling_size").unwrap().rhs;
        assert!(sbs < urs, "sbs {sbs} urs {urs}");
    }

    #[test]
    fn fig3_parameters_evaluate() {
        let b = compute_bounds(&inputs(5000, 3, 120, 0.6, 0.01, 0.4, 400)).unwrap();
        assert_eq!(b.regime, Regime::SmallQ);
        assert_eq!(b.verdicts.len(), b.conditions.len());
        assert!(b.p_minus <= 0.6 && b.q_minus <= 0.01 && b.rho_minus <= 0.4);
        assert!(b.to_json().unwrap().contains("\"gamma\""));
    }

    #[test]
    fn f32_evaluation_agrees() {
        let b32 =
            compute_bounds(&TheoryInputs::<f32>::new(5000, 2, 200, 0.8, 0.1, 0.7, 200)).unwrap();
        let b64 = compute_bounds(&inputs(5000, 2, 200, 0.8, 0.1, 0.7, 200)).unwrap();
        assert!((b32.eta as f64 - b64.eta).abs() < 1e-5);
        assert_eq!(b32.verdicts, b64.verdicts);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(compute_bounds(&inputs(100, 3, 40, 0.8, 0.1, 1.0, 10)).is_err());
        assert!(compute_bounds(&inputs(100, 2, 10, 0.0, 0.1, 1.0, 10)).is_err());
        assert!(compute_bounds(&inputs(100, 2, 10, 0.8, 0.1, 0.0, 10)).is_err());
    }
}
