//! TOML run configuration.
//!
//! Every table is optional and unknown keys are rejected. A minimal file is
//!
//! ```toml
//! [problem]
//! preset = "science-policy"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use podrbf_core::bench::{self, PopulationDynamicsParams, SciencePolicyParams};
use podrbf_core::integrator::{IntegratorOptions, TimeGrid};
use podrbf_core::optimizer::NlpOptions;
use podrbf_core::problem::ProblemDef;
use podrbf_core::rbf::KernelKind;
use podrbf_core::refine::RefineConfig;
use podrbf_core::sampling::Strategy;

use crate::error::CliError;
use crate::expr::InlineProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    SciencePolicy,
    PopulationDynamics,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub preset: Option<Preset>,
    /// Parameter overrides for the science-policy preset.
    pub science_policy: Option<SciencePolicyParams>,
    /// Parameter overrides for the population-dynamics preset.
    pub population_dynamics: Option<PopulationDynamicsParams>,
    pub inline: Option<InlineProblem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub strategy: Strategy,
    pub n_s: usize,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::LatinHypercube,
            n_s: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SurrogateConfig {
    pub eps_pod: f64,
    pub kernel: KernelKind,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            eps_pod: 0.01,
            kernel: KernelKind::LinearSpline,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub n_t: usize,
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let o = IntegratorOptions::default();
        Self {
            n_t: 100,
            rtol: o.rtol,
            atol: o.atol,
            max_steps: o.max_steps,
        }
    }
}

impl IntegratorConfig {
    pub fn options(&self) -> IntegratorOptions {
        IntegratorOptions {
            rtol: self.rtol,
            atol: self.atol,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptPath {
    Surrogate,
    Original,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Paths run by the `optimize` stage.
    pub paths: Vec<OptPath>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            paths: vec![OptPath::Surrogate, OptPath::Original],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineSettings {
    pub width0: Option<Vec<f64>>,
    pub shrink: f64,
    pub widen: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub compare_original: bool,
}

impl Default for RefineSettings {
    fn default() -> Self {
        let d = RefineConfig::default();
        Self {
            width0: d.width0,
            shrink: d.shrink,
            widen: d.widen,
            tol: d.tol,
            max_iters: d.max_iters,
            compare_original: true,
        }
    }
}

/// Design sweep run by `evaluate`: every strategy × kernel × sample count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub strategies: Vec<Strategy>,
    pub kernels: Vec<KernelKind>,
    pub n_s: Vec<usize>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            strategies: vec![
                Strategy::LatinHypercube,
                Strategy::SymmetricLatinHypercube,
                Strategy::Random,
            ],
            kernels: KernelKind::ALL.to_vec(),
            n_s: vec![40, 60, 80],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub n_g: usize,
    /// Seed of the test design; defaults to the sampling seed plus 1000.
    pub test_seed: Option<u64>,
    pub sweep: Option<SweepConfig>,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            n_g: 10,
            test_seed: None,
            sweep: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub sampling: SamplingConfig,
    pub surrogate: SurrogateConfig,
    pub integrator: IntegratorConfig,
    pub optimizer: NlpOptions,
    pub optimize: OptimizeConfig,
    pub refine: RefineSettings,
    pub evaluate: EvaluateConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn check(&self) -> Result<(), CliError> {
        let p = &self.problem;
        let bad = |msg: &str| Err(CliError::Config(msg.into()));
        match (p.preset, &p.inline) {
            (None, None) => return bad("problem needs either `preset` or an `inline` definition"),
            (Some(_), Some(_)) => return bad("problem `preset` and `inline` are mutually exclusive"),
            _ => {}
        }
        if p.science_policy.is_some() && p.preset != Some(Preset::SciencePolicy) {
            return bad("`problem.science_policy` only applies to the science-policy preset");
        }
        if p.population_dynamics.is_some() && p.preset != Some(Preset::PopulationDynamics) {
            return bad("`problem.population_dynamics` only applies to the population-dynamics preset");
        }
        if self.sampling.n_s == 0 {
            return bad("sampling.n_s must be positive");
        }
        if self.evaluate.n_g == 0 {
            return bad("evaluate.n_g must be positive");
        }
        if !(self.surrogate.eps_pod > 0.0 && self.surrogate.eps_pod < 1.0) {
            return bad("surrogate.eps_pod must lie in (0, 1)");
        }
        if self.optimize.paths.is_empty() {
            return bad("optimize.paths must name at least one path");
        }
        self.optimizer.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = &self.evaluate.sweep {
            if s.strategies.is_empty() || s.kernels.is_empty() || s.n_s.is_empty() || s.n_s.contains(&0) {
                return bad("evaluate.sweep needs nonempty strategies, kernels and positive n_s values");
            }
        }
        Ok(())
    }

    pub fn problem(&self) -> Result<ProblemDef, CliError> {
        let p = &self.problem;
        let def = match (p.preset, &p.inline) {
            (Some(Preset::SciencePolicy), _) => bench::science_policy(&p.science_policy.clone().unwrap_or_default()),
            (Some(Preset::PopulationDynamics), _) => {
                bench::population_dynamics(&p.population_dynamics.clone().unwrap_or_default())
            }
            (None, Some(inline)) => return inline.build(),
            (None, None) => unreachable!("checked on load"),
        };
        def.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn grid(&self, def: &ProblemDef) -> Result<TimeGrid, CliError> {
        TimeGrid::new(def.t_span.0, def.t_span.1, self.integrator.n_t).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn test_seed(&self) -> u64 {
        self.evaluate.test_seed.unwrap_or(self.sampling.seed.wrapping_add(1000))
    }

    pub fn refine_config(&self) -> RefineConfig {
        let r = &self.refine;
        RefineConfig {
            width0: r.width0.clone(),
            shrink: r.shrink,
            widen: r.widen,
            tol: r.tol,
            max_iters: r.max_iters,
            strategy: self.sampling.strategy,
            n_s: self.sampling.n_s,
            kernel: self.surrogate.kernel,
            eps_pod: self.surrogate.eps_pod,
            base_seed: self.sampling.seed,
            n_t: self.integrator.n_t,
            integrator: self.integrator.options(),
            nlp: self.optimizer.clone(),
            start: None,
            compare_original: r.compare_original,
        }
    }
}
