use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sketchclust::decomposition::{LambdaMode, SolverConfig};
use sketchclust::harness::{BalanceSpec, GridSpec, TimingSpec};
use sketchclust::pipeline::PipelineConfig;
use sketchclust::sampling::{SamplerConfig, Strategy};
use sketchclust::sbm::{unbalanced_sizes, SbmParams};
use sketchclust::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub seed: u64,
    pub trials: usize,
    /// Worker threads; 0 lets the pool decide.
    pub parallelism: usize,
    pub out_dir: PathBuf,
    pub sbm: SbmSection,
    pub sampler: SamplerConfig,
    pub solver: SolverConfig,
    pub precomplete_budget: Option<usize>,
    pub grid: GridSection,
    pub timing: TimingSection,
    pub balance: BalanceSection,
    pub bounds: BoundsSection,
    pub input: InputSection,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            trials: 20,
            parallelism: 0,
            out_dir: PathBuf::from("out"),
            sbm: SbmSection::default(),
            sampler: SamplerConfig::default(),
            solver: SolverConfig::default(),
            precomplete_budget: None,
            grid: GridSection::default(),
            timing: TimingSection::default(),
            balance: BalanceSection::default(),
            bounds: BoundsSection::default(),
            input: InputSection::default(),
        }
    }
}

/// Graph model. `cluster_sizes`, when non-empty, wins over the
/// `n_min`/`r_small` preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SbmSection {
    pub n_nodes: usize,
    pub cluster_sizes: Vec<usize>,
    pub n_min: usize,
    pub r_small: usize,
    pub p: f64,
    pub q: f64,
    pub rho: f64,
}

impl Default for SbmSection {
    fn default() -> Self {
        Self {
            n_nodes: 800,
            cluster_sizes: Vec::new(),
            n_min: 80,
            r_small: 2,
            p: 0.8,
            q: 0.1,
            rho: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub n_min_values: Vec<usize>,
    pub n_prime_values: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_min_values: vec![40, 80, 120, 160],
            n_prime_values: vec![80, 160, 240],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingSection {
    pub n_values: Vec<usize>,
    pub n_prime: usize,
    pub r: usize,
    pub runs: usize,
    pub baseline_cap: usize,
    pub baseline_lambda_mode: LambdaMode,
}

impl Default for TimingSection {
    fn default() -> Self {
        Self {
            n_values: vec![500, 1000, 2000],
            n_prime: 200,
            r: 2,
            runs: 5,
            baseline_cap: 2000,
            baseline_lambda_mode: LambdaMode::FixedInvSqrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceSection {
    pub n_min_values: Vec<usize>,
    pub n_prime: usize,
    pub strategies: Vec<Strategy>,
}

impl Default for BalanceSection {
    fn default() -> Self {
        Self {
            n_min_values: vec![40, 80, 120, 160],
            n_prime: 160,
            strategies: vec![Strategy::Urs, Strategy::Sbs],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    /// Constant in the sketch-decomposition condition.
    pub c: f64,
    /// Target sketch samples from the smallest cluster.
    pub b: usize,
}

impl Default for BoundsSection {
    fn default() -> Self {
        Self { c: 1.0, b: 1 }
    }
}

/// External graph for `run-once`; when absent a graph is generated.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub edge_list: Option<PathBuf>,
    pub partition: Option<PathBuf>,
    /// Pairs missing from the edge list count as unobserved instead of
    /// observed non-edges.
    pub missing_unobserved: bool,
}

fn config_err(msg: impl std::fmt::Display) -> Error {
    Error::Config(msg.to_string())
}

impl HarnessConfig {
    /// Overlays the TOML file at `path`; keys present in the file replace the
    /// current values, absent keys keep them.
    pub fn overlay_file(self, path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let file: toml::Table = text
            .parse()
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        let mut base = toml::Table::try_from(&self).map_err(config_err)?;
        merge(&mut base, file);
        toml::Value::Table(base)
            .try_into()
            .map_err(|e| config_err(format!("{}: {e}", path.display())))
    }

    /// Checks the settings every subcommand shares.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        self.solver.validate().map_err(config_err)?;
        self.base_params().validate().map_err(config_err)
    }

    /// Checks the single graph model used by `bounds` and `run-once`.
    pub fn validate_model(&self) -> Result<()> {
        self.sbm_params(self.seed)?.validate().map_err(config_err)
    }

    pub fn cluster_sizes(&self) -> Result<Vec<usize>> {
        if self.sbm.cluster_sizes.is_empty() {
            unbalanced_sizes(self.sbm.n_min, self.sbm.n_nodes, self.sbm.r_small).map_err(config_err)
        } else {
            Ok(self.sbm.cluster_sizes.clone())
        }
    }

    pub fn sbm_params(&self, seed: u64) -> Result<SbmParams> {
        let sizes = self.cluster_sizes()?;
        let total: usize = sizes.iter().sum();
        if !self.sbm.cluster_sizes.is_empty() && total != self.sbm.n_nodes {
            return Err(config_err(format!(
                "cluster sizes sum to {total} but n_nodes is {}",
                self.sbm.n_nodes
            )));
        }
        Ok(SbmParams::new(
            sizes,
            self.sbm.p,
            self.sbm.q,
            self.sbm.rho,
            seed,
        ))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut sampler = self.sampler.clone();
        sampler.seed = self.seed;
        PipelineConfig {
            sampler,
            solver: self.solver.clone(),
            precomplete_budget: self.precomplete_budget,
            record_timings: true,
        }
    }

    fn base_params(&self) -> SbmParams {
        SbmParams::new(
            vec![self.sbm.n_nodes],
            self.sbm.p,
            self.sbm.q,
            self.sbm.rho,
            0,
        )
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            n_min_values: self.grid.n_min_values.clone(),
            n_prime_values: self.grid.n_prime_values.clone(),
            trials: self.trials,
            base: self.base_params(),
            r_small: self.sbm.r_small,
            pipeline: self.pipeline(),
            seed_base: self.seed,
        }
    }

    pub fn timing_spec(&self) -> TimingSpec {
        let mut pipeline = self.pipeline();
        pipeline.sampler.n_samples = self.timing.n_prime;
        TimingSpec {
            n_values: self.timing.n_values.clone(),
            r: self.timing.r,
            p: self.sbm.p,
            q: self.sbm.q,
            rho: self.sbm.rho,
            runs: self.timing.runs,
            pipeline,
            baseline_solver: SolverConfig {
                lambda_mode: self.timing.baseline_lambda_mode,
                ..self.solver.clone()
            },
            baseline_cap: self.timing.baseline_cap,
            seed_base: self.seed,
        }
    }

    pub fn balance_spec(&self) -> BalanceSpec {
        BalanceSpec {
            n_min_values: self.balance.n_min_values.clone(),
            n_prime: self.balance.n_prime,
            trials: self.trials,
            base: self.base_params(),
            r_small: self.sbm.r_small,
            strategies: self.balance.strategies.clone(),
            pipeline: self.pipeline(),
            seed_base: self.seed,
        }
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_values_replace_only_their_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(
            &path,
            "seed = 9\n[sbm]\np = 0.9\n[sampler]\nstrategy = \"urs\"\n[solver]\nlambda_mode = \"fixed_inv_sqrt\"\n",
        )
        .unwrap();
        let mut cfg = HarnessConfig::default();
        cfg.trials = 3;
        cfg.sbm.q = 0.05;
        let cfg = cfg.overlay_file(&path).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.sbm.p, 0.9);
        assert_eq!(cfg.sbm.q, 0.05);
        assert_eq!(cfg.sampler.strategy, Strategy::Urs);
        assert_eq!(cfg.solver.lambda_mode, LambdaMode::FixedInvSqrt);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "[sbm]\nsize = 3\n").unwrap();
        let err = HarnessConfig::default().overlay_file(&path).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn defaults_validate() {
        HarnessConfig::default().validate().unwrap();
        HarnessConfig::default().validate_model().unwrap();
        assert_eq!(
            HarnessConfig::default().cluster_sizes().unwrap(),
            vec![80, 80, 640]
        );
    }
}
