//! Simple-regret curves on the benchmark objectives.

use rayon::prelude::*;
use serde::Serialize;

use super::{beta_schedule, bo_config, mean_sd, CsvOutput, ExperimentConfig, JsonOutput, Outputs};
use crate::bo_loops::{run, streams, Algorithm};
use crate::design::{latin_hypercube, mix_seed, stream};
use crate::error::{Error, Result};
use crate::metrics::RegretCurve;
use crate::objectives::{ExternalObjective, Objective, ObjectiveId, Oracle, SearchDomain};

/// One algorithm run on one benchmark in one replication.
#[derive(Clone, Debug)]
pub struct BenchCurve {
    pub benchmark: ObjectiveId,
    pub algorithm: Algorithm,
    pub replication: usize,
    pub seed: u64,
    /// Evaluations used after each iteration, initial design excluded.
    pub observations: Vec<usize>,
    pub regret: RegretCurve,
    pub evaluations_used: usize,
}

impl BenchCurve {
    pub fn final_simple_regret(&self) -> f64 {
        self.regret.simple.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BenchSummary {
    pub benchmark: ObjectiveId,
    pub algorithm: Algorithm,
    pub mean_final_simple_regret: f64,
    pub sd_final_simple_regret: f64,
    /// Mean divided by the worst algorithm's mean on this benchmark.
    pub normalized_mean: f64,
    /// Standard deviation divided by the largest one on this benchmark.
    pub normalized_sd: f64,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub curves: Vec<BenchCurve>,
    pub summary: Vec<BenchSummary>,
    pub replication_seeds: Vec<u64>,
}

impl BenchReport {
    pub fn summary_for(&self, benchmark: ObjectiveId, algorithm: Algorithm) -> Option<&BenchSummary> {
        self.summary
            .iter()
            .find(|s| s.benchmark == benchmark && s.algorithm == algorithm)
    }

    pub fn outputs(&self, cfg: &ExperimentConfig) -> Outputs {
        let mut out = Outputs::default();
        for b in cfg.benchmarks.iter().flatten() {
            for &a in &cfg.algorithms {
                let mut csv = CsvOutput::new(
                    format!("bench_{}_{}.csv", b.name(), a.name()),
                    &["replication", "observations", "simple_regret", "cumulative_regret"],
                )
                .meta("benchmark", b.name())
                .meta("algorithm", a.name())
                .meta("replication_seeds", format!("{:?}", self.replication_seeds));
                for c in self.curves.iter().filter(|c| c.benchmark == *b && c.algorithm == a) {
                    for (i, &obs) in c.observations.iter().enumerate() {
                        csv.rows.push(vec![
                            c.replication.to_string(),
                            obs.to_string(),
                            c.regret.simple[i].to_string(),
                            c.regret.cumulative[i].to_string(),
                        ]);
                    }
                }
                out.csv.push(csv);
            }
        }
        out.json.push(JsonOutput::new(
            "bench_summary.json",
            serde_json::json!({
                "replication_seeds": self.replication_seeds,
                "summary": self.summary,
            }),
        ));
        out
    }
}

fn objective(cfg: &ExperimentConfig, id: ObjectiveId) -> Result<(Box<dyn Oracle + Send>, SearchDomain, f64)> {
    if id == ObjectiveId::ExternalProcess {
        let ext = cfg
            .external
            .as_ref()
            .ok_or_else(|| Error::Config("external objective is not configured".into()))?;
        let (program, args) = ext
            .command
            .split_first()
            .ok_or_else(|| Error::Config("external command is empty".into()))?;
        let obj = ExternalObjective::spawn(program, args, ext.domain.clone())?;
        return Ok((Box::new(obj), ext.domain.clone(), ext.f_star.unwrap_or(0.0)));
    }
    let obj = Objective::benchmark(id, cfg.dimension.unwrap_or(10))?;
    let domain = obj.domain.clone();
    let f_star = obj.f_star.unwrap_or(0.0);
    Ok((Box::new(obj), domain, f_star))
}

fn run_one(
    cfg: &ExperimentConfig,
    bench_index: usize,
    id: ObjectiveId,
    algorithm: Algorithm,
    replication: usize,
) -> Result<BenchCurve> {
    let run_seed = mix_seed(mix_seed(cfg.seed, replication as u64), bench_index as u64);
    let (oracle, domain, f_star) = objective(cfg, id)?;
    let initial = latin_hypercube(
        &domain,
        cfg.initial_design,
        &mut stream(run_seed, streams::INITIAL_DESIGN),
    );
    let beta = beta_schedule(cfg.beta, &domain, run_seed);
    let bo = bo_config(cfg, algorithm, &domain, initial, beta, cfg.eval_budget, run_seed);
    let result = run(&bo, oracle)?;
    let regret = RegretCurve::new(f_star, &result.iterate_values);
    if id != ObjectiveId::ExternalProcess {
        let monotone = regret.simple.windows(2).all(|w| w[1] <= w[0])
            && regret.cumulative.windows(2).all(|w| w[1] >= w[0]);
        if !monotone {
            return Err(Error::External(format!(
                "regret monotonicity violated for {} on {}",
                algorithm,
                id.name()
            )));
        }
    }
    Ok(BenchCurve {
        benchmark: id,
        algorithm,
        replication,
        seed: run_seed,
        observations: result.evaluations_at_iteration,
        regret,
        evaluations_used: result.evaluations_used,
    })
}

/// Run every (benchmark, algorithm, replication) combination. Algorithms
/// share initial designs and random streams within a replication.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    let benchmarks = cfg.benchmarks.clone().unwrap_or_default();
    let mut tasks = Vec::new();
    for (bi, &b) in benchmarks.iter().enumerate() {
        for &a in &cfg.algorithms {
            for r in 0..cfg.replications {
                tasks.push((bi, b, a, r));
            }
        }
    }
    let curves: Vec<BenchCurve> = tasks
        .par_iter()
        .map(|&(bi, b, a, r)| run_one(cfg, bi, b, a, r))
        .collect::<Result<_>>()?;

    let mut summary = Vec::new();
    for &b in &benchmarks {
        let start = summary.len();
        for &a in &cfg.algorithms {
            let finals: Vec<f64> = curves
                .iter()
                .filter(|c| c.benchmark == b && c.algorithm == a)
                .map(BenchCurve::final_simple_regret)
                .collect();
            let (mean, sd) = mean_sd(&finals);
            summary.push(BenchSummary {
                benchmark: b,
                algorithm: a,
                mean_final_simple_regret: mean,
                sd_final_simple_regret: sd,
                normalized_mean: f64::NAN,
                normalized_sd: f64::NAN,
            });
        }
        let rows = &mut summary[start..];
        let worst = rows.iter().map(|s| s.mean_final_simple_regret).fold(0.0, f64::max);
        let worst_sd = rows.iter().map(|s| s.sd_final_simple_regret).fold(0.0, f64::max);
        for s in rows {
            s.normalized_mean = if worst > 0.0 { s.mean_final_simple_regret / worst } else { 0.0 };
            s.normalized_sd = if worst_sd > 0.0 { s.sd_final_simple_regret / worst_sd } else { 0.0 };
        }
    }
    Ok(BenchReport {
        curves,
        summary,
        replication_seeds: (0..cfg.replications)
            .map(|r| mix_seed(cfg.seed, r as u64))
            .collect(),
    })
}
