//! Experiment configuration: a JSON document whose every field is optional,
//! resolved against per-experiment defaults and command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bo_loops::Algorithm;
use crate::dynamics::IntegratorConfig;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::objectives::{ObjectiveId, SearchDomain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "bench")]
    Bench,
    #[serde(rename = "filldist")]
    Filldist,
    #[serde(rename = "infer-rossler")]
    InferRossler,
    #[serde(rename = "infer-lorenz")]
    InferLorenz,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Bench => "bench",
            Self::Filldist => "filldist",
            Self::InferRossler => "infer-rossler",
            Self::InferLorenz => "infer-lorenz",
        }
    }

    pub fn is_inference(self) -> bool {
        matches!(self, Self::InferRossler | Self::InferLorenz)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bench" => Ok(Self::Bench),
            "filldist" => Ok(Self::Filldist),
            "infer-rossler" | "rossler" => Ok(Self::InferRossler),
            "infer-lorenz" | "lorenz" => Ok(Self::InferLorenz),
            other => Err(Error::Config(format!("unknown experiment `{other}`"))),
        }
    }
}

/// UCB weight specification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaSpec {
    /// Constant `beta^{1/2}`.
    Sqrt(f64),
    /// `beta^{1/2} = max |f|` over this many Latin hypercube points.
    SupNorm { points: usize },
}

/// Black-box objective served by an external process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    pub command: Vec<String>,
    pub domain: SearchDomain,
    /// Known optimum; regret is reported against 0 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_star: Option<f64>,
}

/// A configuration file as written by a user. Absent fields take defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<ExperimentKind>,
    pub paper_scale: Option<bool>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub eval_budget: Option<usize>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub kernel: Option<KernelSpec>,
    pub beta: Option<BetaSpec>,
    pub output_dir: Option<PathBuf>,
    pub dimension: Option<usize>,
    pub benchmarks: Option<Vec<ObjectiveId>>,
    pub external: Option<ExternalSpec>,
    pub initial_design: Option<usize>,
    pub refit_every: Option<usize>,
    pub maximizer_pool: Option<usize>,
    pub maximizer_starts: Option<usize>,
    pub reference_points: Option<usize>,
    pub grid_size: Option<usize>,
    pub comparison_nodes: Option<usize>,
    pub normalizer_grid: Option<usize>,
    pub rejection_samples: Option<usize>,
    pub mcmc_iterations: Option<usize>,
    pub mcmc_burn_in: Option<usize>,
    pub mcmc_step: Option<f64>,
    pub integrator: Option<IntegratorConfig>,
    pub dump_replications: Option<usize>,
}

impl RawConfig {
    /// Parse a JSON document; errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Config(format!("line {} column {}: {}", e.line(), e.column(), strip_position(&e)))
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

/// Command-line overrides, applied on top of the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub experiment: Option<ExperimentKind>,
    pub eval_budget: Option<usize>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub output_dir: Option<PathBuf>,
    pub paper_scale: bool,
}

/// Fully resolved configuration. Fields that do not apply to the chosen
/// experiment are omitted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub paper_scale: bool,
    pub algorithms: Vec<Algorithm>,
    pub eval_budget: usize,
    pub replications: usize,
    pub seed: u64,
    pub kernel: KernelSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaSpec>,
    pub output_dir: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmarks: Option<Vec<ObjectiveId>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalSpec>,
    pub initial_design: usize,
    pub refit_every: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maximizer_pool: Option<usize>,
    pub maximizer_starts: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison_nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalizer_grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcmc_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcmc_burn_in: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mcmc_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
    pub dump_replications: usize,
}

const INFERENCE_ALGORITHMS: [Algorithm; 4] = [
    Algorithm::GpUcb,
    Algorithm::Uniform,
    Algorithm::ExploitPlus,
    Algorithm::GpUcbPlus,
];

impl ExperimentConfig {
    pub fn resolve(raw: RawConfig, ov: &Overrides) -> Result<Self> {
        let experiment = ov
            .experiment
            .or(raw.experiment)
            .ok_or_else(|| Error::Config("no experiment selected".into()))?;
        let paper = ov.paper_scale || raw.paper_scale.unwrap_or(false);
        let pick = |desk: usize, full: usize| if paper { full } else { desk };
        use ExperimentKind::*;

        let default_algorithms: Vec<Algorithm> = match experiment {
            Bench => vec![
                Algorithm::GpUcbPlus,
                Algorithm::GpUcb,
                Algorithm::ExploitPlus,
                Algorithm::Exploit,
                Algorithm::Ei,
                Algorithm::Pi,
            ],
            Filldist => vec![
                Algorithm::GpUcb,
                Algorithm::Exploit,
                Algorithm::Explore,
                Algorithm::Uniform,
                Algorithm::GpUcbPlus,
                Algorithm::ExploitPlus,
            ],
            InferRossler | InferLorenz => INFERENCE_ALGORITHMS.to_vec(),
        };
        let (budget, reps) = match experiment {
            Bench => (pick(100, 400), pick(10, 20)),
            Filldist => (100, pick(20, 100)),
            InferRossler => (20, 20),
            InferLorenz => (pick(200, 400), pick(5, 10)),
        };
        let dimension = match experiment {
            Bench | Filldist => Some(raw.dimension.unwrap_or(10)),
            _ => None,
        };
        let initial_design = raw.initial_design.unwrap_or(match experiment {
            InferRossler => 2,
            InferLorenz => 20,
            _ => crate::bo_loops::default_initial_design_size(dimension.unwrap_or(1)),
        });
        let reference_points = (experiment == Filldist).then(|| raw.reference_points.unwrap_or(100));
        let beta = match experiment {
            Filldist => Some(raw.beta.unwrap_or(BetaSpec::SupNorm {
                points: reference_points.unwrap_or(100),
            })),
            _ => Some(raw.beta.unwrap_or(BetaSpec::Sqrt(2.0))),
        };
        let inference = experiment.is_inference();
        let lorenz = experiment == InferLorenz;

        let cfg = Self {
            experiment,
            paper_scale: paper,
            algorithms: ov
                .algorithms
                .clone()
                .or(raw.algorithms)
                .unwrap_or(default_algorithms),
            eval_budget: ov.eval_budget.or(raw.eval_budget).unwrap_or(budget),
            replications: ov.replications.or(raw.replications).unwrap_or(reps),
            seed: ov.seed.or(raw.seed).unwrap_or(0),
            kernel: raw
                .kernel
                .unwrap_or(KernelSpec::matern(2.5, 1.0).expect("valid default kernel")),
            beta,
            output_dir: ov
                .output_dir
                .clone()
                .or(raw.output_dir)
                .unwrap_or_else(|| PathBuf::from("results")),
            dimension,
            benchmarks: match experiment {
                Bench => Some(raw.benchmarks.unwrap_or_else(|| {
                    vec![ObjectiveId::Ackley, ObjectiveId::Rastrigin, ObjectiveId::Levy]
                })),
                _ => None,
            },
            external: raw.external,
            initial_design,
            refit_every: raw.refit_every.unwrap_or(5),
            maximizer_pool: raw.maximizer_pool,
            maximizer_starts: raw.maximizer_starts.unwrap_or(5),
            reference_points,
            grid_size: (experiment == InferRossler).then(|| raw.grid_size.unwrap_or(1401)),
            comparison_nodes: lorenz.then(|| raw.comparison_nodes.unwrap_or(pick(5000, 30000))),
            normalizer_grid: lorenz.then(|| raw.normalizer_grid.unwrap_or(64)),
            rejection_samples: (experiment == InferRossler)
                .then(|| raw.rejection_samples.unwrap_or(2000)),
            mcmc_iterations: lorenz.then(|| raw.mcmc_iterations.unwrap_or(20000)),
            mcmc_burn_in: lorenz.then(|| raw.mcmc_burn_in.unwrap_or(10000)),
            mcmc_step: lorenz.then(|| raw.mcmc_step.unwrap_or(0.3)),
            integrator: inference.then(|| raw.integrator.unwrap_or_default()),
            dump_replications: raw.dump_replications.unwrap_or(1),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        if self.initial_design == 0 {
            return bad("initial_design must be at least 1".into());
        }
        if self.kernel.validate().is_err() {
            return bad(format!("invalid kernel {:?}", self.kernel));
        }
        if let Some(BetaSpec::Sqrt(b)) = self.beta {
            if !(b >= 0.0 && b.is_finite()) {
                return bad(format!("beta sqrt must be nonnegative, got {b}"));
            }
        }
        if let Some(BetaSpec::SupNorm { points: 0 }) = self.beta {
            return bad("sup-norm beta needs at least one point".into());
        }
        if self.dimension == Some(0) {
            return bad("dimension must be at least 1".into());
        }
        if self.experiment.is_inference() {
            if self.eval_budget < self.initial_design {
                return bad(format!(
                    "eval_budget {} is below the initial design size {}",
                    self.eval_budget, self.initial_design
                ));
            }
            if let Some(a) = self.algorithms.iter().find(|a| !INFERENCE_ALGORITHMS.contains(a)) {
                return bad(format!("algorithm {a} is not an inference design strategy"));
            }
        }
        if let (Some(n), Some(b)) = (self.mcmc_iterations, self.mcmc_burn_in) {
            if b >= n {
                return bad("mcmc_burn_in must be below mcmc_iterations".into());
            }
        }
        if let Some(s) = self.mcmc_step {
            if !(s > 0.0 && s.is_finite()) {
                return bad("mcmc_step must be positive".into());
            }
        }
        if self.grid_size.is_some_and(|n| n < 2) || self.normalizer_grid == Some(0) {
            return bad("quadrature grids need at least 2 nodes".into());
        }
        if self.comparison_nodes == Some(0) || self.reference_points == Some(0) {
            return bad("comparison sets must be nonempty".into());
        }
        if self.maximizer_pool == Some(0) {
            return bad("maximizer_pool must be positive".into());
        }
        if let Some(b) = &self.benchmarks {
            if b.contains(&ObjectiveId::ExternalProcess) && self.external.is_none() {
                return bad("external_process benchmark needs an `external` section".into());
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
