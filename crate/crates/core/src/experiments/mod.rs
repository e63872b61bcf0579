//! Experiment runners: benchmark regret curves, the fill-distance study and
//! the two inference pipelines. Every runner returns an in-memory report
//! and can write plot-ready CSV/JSON files.

pub mod bench;
pub mod config;
pub mod filldist;
pub mod infer;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

pub use config::{BetaSpec, ExperimentConfig, ExperimentKind, Overrides, RawConfig};

use crate::acquisition::{BetaSchedule, MaximizerBudget};
use crate::bo_loops::{Algorithm, BoConfig};
use crate::design::{latin_hypercube, stream};
use crate::error::Result;
use crate::objectives::SearchDomain;

/// Random stream ids used by the runners, on top of those of a BO run.
pub mod streams {
    pub const BETA_DESIGN: u64 = 4;
    pub const REFERENCE: u64 = 5;
    pub const DATA: u64 = 6;
    pub const COMPARISON: u64 = 7;
    pub const SAMPLER: u64 = 8;
    pub const ENVELOPE: u64 = 9;
}

/// Package version plus the source revision when built from a git checkout.
pub fn version() -> String {
    match option_env!("NOISEFREE_BO_GIT_DESCRIBE") {
        Some(rev) if !rev.is_empty() => format!("{} ({rev})", env!("CARGO_PKG_VERSION")),
        _ => env!("CARGO_PKG_VERSION").to_string(),
    }
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn beta_schedule(spec: Option<BetaSpec>, domain: &SearchDomain, run_seed: u64) -> BetaSchedule {
    match spec.unwrap_or(BetaSpec::Sqrt(2.0)) {
        BetaSpec::Sqrt(b) => BetaSchedule::from_sqrt(b),
        BetaSpec::SupNorm { points } => BetaSchedule::SupNormEstimate(latin_hypercube(
            domain,
            points,
            &mut stream(run_seed, streams::BETA_DESIGN),
        )),
    }
}

/// BO settings shared by all runners.
fn bo_config(
    cfg: &ExperimentConfig,
    algorithm: Algorithm,
    domain: &SearchDomain,
    initial: Vec<Vec<f64>>,
    beta: BetaSchedule,
    evaluations: usize,
    seed: u64,
) -> BoConfig {
    let mut maximizer = MaximizerBudget::for_dim(domain.dim());
    if let Some(p) = cfg.maximizer_pool {
        maximizer.pool = p;
    }
    maximizer.starts = cfg.maximizer_starts;
    let mut c = BoConfig::new(algorithm, domain.clone(), initial).with_evaluations(evaluations);
    c.kernel = cfg.kernel;
    c.beta = beta;
    c.refit_every = cfg.refit_every;
    c.maximizer = maximizer;
    c.seed = seed;
    c
}

/// A CSV result file: comment header with version and resolved config.
pub struct CsvOutput {
    pub name: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvOutput {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self, cfg: &ExperimentConfig) -> String {
        let mut s = String::new();
        writeln!(s, "# noisefree-bo {}", version()).unwrap();
        writeln!(s, "# config: {}", cfg.to_json()).unwrap();
        for (k, v) in &self.meta {
            writeln!(s, "# {k}: {v}").unwrap();
        }
        s.push_str(&self.body());
        s
    }

    /// Everything after the comment header.
    pub fn body(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }
}

/// A JSON result document with `version` and `config` fields.
pub struct JsonOutput {
    pub name: String,
    pub value: Value,
}

impl JsonOutput {
    pub fn new(name: impl Into<String>, value: impl Serialize) -> Self {
        Self {
            name: name.into(),
            value: serde_json::to_value(value).expect("report serializes"),
        }
    }

    pub fn render(&self, cfg: &ExperimentConfig) -> String {
        let doc = json!({
            "version": version(),
            "config": cfg,
            "results": self.value,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Files produced by one experiment.
#[derive(Default)]
pub struct Outputs {
    pub csv: Vec<CsvOutput>,
    pub json: Vec<JsonOutput>,
}

impl Outputs {
    pub fn write(&self, cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for f in &self.csv {
            let p = dir.join(&f.name);
            fs::write(&p, f.render(cfg))?;
            paths.push(p);
        }
        for f in &self.json {
            let p = dir.join(&f.name);
            fs::write(&p, f.render(cfg))?;
            paths.push(p);
        }
        Ok(paths)
    }
}

/// Run the configured experiment and write its outputs under
/// `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let outputs = match cfg.experiment {
        ExperimentKind::Bench => bench::run_bench(cfg)?.outputs(cfg),
        ExperimentKind::Filldist => filldist::run_filldist(cfg)?.outputs(cfg),
        ExperimentKind::InferRossler | ExperimentKind::InferLorenz => infer::run_infer(cfg)?.outputs(cfg),
    };
    outputs.write(cfg, &cfg.output_dir)
}
