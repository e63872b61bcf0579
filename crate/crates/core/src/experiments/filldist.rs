//! How well each strategy's query set covers the domain, measured by fill
//! distance against a fixed Latin hypercube reference set.

use rayon::prelude::*;
use serde::Serialize;

use super::{bo_config, mean_sd, streams as exp_streams, BetaSpec, CsvOutput, ExperimentConfig, JsonOutput, Outputs};
use crate::acquisition::BetaSchedule;
use crate::bo_loops::{run, streams, Algorithm};
use crate::design::{latin_hypercube, mix_seed, stream};
use crate::error::Result;
use crate::kernels::squared_distance;
use crate::objectives::{Objective, ObjectiveId};

#[derive(Clone, Debug)]
pub struct FillCurve {
    pub algorithm: Algorithm,
    pub replication: usize,
    /// Fill distance after each query (initial design always included).
    pub fill: Vec<f64>,
}

impl FillCurve {
    pub fn final_fill(&self) -> f64 {
        self.fill.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FillSummary {
    pub algorithm: Algorithm,
    pub mean_final_fill_distance: f64,
    pub sd_final_fill_distance: f64,
    /// Share of replications where this algorithm ends below GP-UCB.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fraction_below_gp_ucb: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct FillReport {
    pub curves: Vec<FillCurve>,
    pub summary: Vec<FillSummary>,
    pub replication_seeds: Vec<u64>,
}

impl FillReport {
    pub fn finals(&self, algorithm: Algorithm) -> Vec<f64> {
        let mut c: Vec<&FillCurve> = self.curves.iter().filter(|c| c.algorithm == algorithm).collect();
        c.sort_by_key(|c| c.replication);
        c.iter().map(|c| c.final_fill()).collect()
    }

    pub fn outputs(&self, cfg: &ExperimentConfig) -> Outputs {
        let mut out = Outputs::default();
        for &a in &cfg.algorithms {
            let mut csv = CsvOutput::new(
                format!("filldist_{}.csv", a.name()),
                &["replication", "queries", "fill_distance"],
            )
            .meta("algorithm", a.name())
            .meta("objective", "rastrigin")
            .meta(
                "reference_set",
                format!("{} latin hypercube points per replication", cfg.reference_points.unwrap_or(100)),
            )
            .meta("initial_design", "shared across strategies within a replication")
            .meta("replication_seeds", format!("{:?}", self.replication_seeds));
            for c in self.curves.iter().filter(|c| c.algorithm == a) {
                for (q, h) in c.fill.iter().enumerate() {
                    csv.rows.push(vec![c.replication.to_string(), (q + 1).to_string(), h.to_string()]);
                }
            }
            out.csv.push(csv);
        }
        out.json.push(JsonOutput::new(
            "filldist_summary.json",
            serde_json::json!({
                "replication_seeds": self.replication_seeds,
                "summary": self.summary,
            }),
        ));
        out
    }
}

/// Fill distance of the growing design after each query; the first
/// `initial` points are present from the start.
fn incremental_fill(reference: &[Vec<f64>], queried: &[Vec<f64>], initial: usize) -> Vec<f64> {
    let mut nearest = vec![f64::INFINITY; reference.len()];
    let mut out = Vec::with_capacity(queried.len().saturating_sub(initial));
    for (i, p) in queried.iter().enumerate() {
        for (n, r) in nearest.iter_mut().zip(reference) {
            *n = n.min(squared_distance(p, r));
        }
        if i >= initial {
            out.push(nearest.iter().copied().fold(0.0, f64::max).sqrt());
        }
    }
    out
}

fn run_one(cfg: &ExperimentConfig, algorithm: Algorithm, replication: usize) -> Result<FillCurve> {
    let seed = mix_seed(cfg.seed, replication as u64);
    let objective = Objective::benchmark(ObjectiveId::Rastrigin, cfg.dimension.unwrap_or(10))?;
    let domain = objective.domain.clone();
    let reference = latin_hypercube(
        &domain,
        cfg.reference_points.unwrap_or(100),
        &mut stream(seed, exp_streams::REFERENCE),
    );
    let initial = latin_hypercube(&domain, cfg.initial_design, &mut stream(seed, streams::INITIAL_DESIGN));
    let beta = match cfg.beta {
        Some(BetaSpec::SupNorm { points }) if points == reference.len() => {
            BetaSchedule::SupNormEstimate(reference.clone())
        }
        other => super::beta_schedule(other, &domain, seed),
    };
    let bo = bo_config(cfg, algorithm, &domain, initial, beta, cfg.eval_budget, seed);
    let result = run(&bo, objective)?;
    Ok(FillCurve {
        algorithm,
        replication,
        fill: incremental_fill(&reference, &result.queried, cfg.initial_design),
    })
}

pub fn run_filldist(cfg: &ExperimentConfig) -> Result<FillReport> {
    let tasks: Vec<(Algorithm, usize)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| (0..cfg.replications).map(move |r| (a, r)))
        .collect();
    let curves: Vec<FillCurve> = tasks
        .par_iter()
        .map(|&(a, r)| run_one(cfg, a, r))
        .collect::<Result<_>>()?;
    let mut report = FillReport {
        curves,
        summary: Vec::new(),
        replication_seeds: (0..cfg.replications)
            .map(|r| mix_seed(cfg.seed, r as u64))
            .collect(),
    };
    let baseline = cfg
        .algorithms
        .contains(&Algorithm::GpUcb)
        .then(|| report.finals(Algorithm::GpUcb));
    for &a in &cfg.algorithms {
        let finals = report.finals(a);
        let (mean, sd) = mean_sd(&finals);
        let fraction_below_gp_ucb = baseline.as_ref().filter(|_| a != Algorithm::GpUcb).map(|b| {
            finals.iter().zip(b).filter(|(x, y)| x < y).count() as f64 / finals.len() as f64
        });
        report.summary.push(FillSummary {
            algorithm: a,
            mean_final_fill_distance: mean,
            sd_final_fill_distance: sd,
            fraction_below_gp_ucb,
        });
    }
    Ok(report)
}
