//! Surrogate-posterior pipelines for the Rossler and Lorenz-63 parameter
//! inference problems.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{bo_config, mean_sd, streams as exp_streams, CsvOutput, ExperimentConfig, ExperimentKind, JsonOutput, Outputs};
use crate::bo_loops::{streams, Algorithm, BoRun};
use crate::design::{latin_hypercube, mix_seed, stream};
use crate::dynamics::{
    estimate_gamma, make_data, ForwardMap, ForwardMapSpec, IntegratorConfig, MomentSummary,
    LORENZ_GAMMA_SCALE, LORENZ_GAMMA_WINDOW, ROSSLER_GAMMA_SCALE, ROSSLER_GAMMA_WINDOW,
};
use crate::error::{Error, Result};
use crate::inference::{
    build_surrogate, hellinger, l2_grid_difference, log_density_on, rejection_envelope, rejection_sample,
    rwmh_sample, true_density_oracle, EnergyForm, EnergyFunction, QuadratureGrid, QuadratureRule,
    SurrogatePosterior,
};
use crate::objectives::SearchDomain;

pub const ROSSLER_X_STAR: f64 = 5.7;
pub const ROSSLER_PRIOR_MEAN: f64 = 6.0;
pub const ROSSLER_PRIOR_VAR: f64 = 4.0;
pub const ROSSLER_DOMAIN: (f64, f64) = (1.0, 14.0);

pub const LORENZ_X_STAR: [f64; 3] = [10.0, 28.0, 8.0 / 3.0];
pub const LORENZ_PRIOR_MEAN: [f64; 3] = [10.0, 28.5, 2.7];
pub const LORENZ_PRIOR_VAR: [f64; 3] = [0.25, 2.25, 0.49];
pub const LORENZ_LO: [f64; 3] = [8.72, 24.66, 0.908];
pub const LORENZ_HI: [f64; 3] = [11.28, 32.34, 4.492];

/// Energy, reference density and comparison nodes for one experiment.
/// Built once and shared by every strategy and replication.
pub struct InferenceProblem {
    pub kind: ExperimentKind,
    pub energy: EnergyFunction,
    pub x_star: Vec<f64>,
    pub g_star: MomentSummary,
    pub comparison_nodes: Vec<Vec<f64>>,
    /// Quadrature weights of the comparison nodes (normalized comparisons only).
    pub comparison_weights: Option<Vec<f64>>,
    /// Normalized (Rossler) or unnormalized (Lorenz) true density at the nodes.
    pub true_density: Vec<f64>,
    pub normalizer: QuadratureGrid,
}

impl InferenceProblem {
    pub fn from_config(cfg: &ExperimentConfig) -> Result<Self> {
        let integrator = cfg.integrator.unwrap_or_default();
        match cfg.experiment {
            ExperimentKind::InferRossler => Self::rossler(cfg.grid_size.unwrap_or(1401), integrator, cfg.seed),
            ExperimentKind::InferLorenz => Self::lorenz(
                cfg.comparison_nodes.unwrap_or(5000),
                cfg.normalizer_grid.unwrap_or(64),
                integrator,
                cfg.seed,
            ),
            other => Err(Error::Config(format!("{other} is not an inference experiment"))),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        kind: ExperimentKind,
        form: EnergyForm,
        spec: ForwardMapSpec,
        domain: SearchDomain,
        x_star: Vec<f64>,
        prior_mean: Vec<f64>,
        prior_var: Vec<f64>,
        gamma_window: (f64, f64),
        gamma_scale: f64,
        seed: u64,
    ) -> Result<(EnergyFunction, MomentSummary)> {
        let forward = Arc::new(ForwardMap::new(spec));
        let gamma = estimate_gamma(&spec, &x_star, gamma_window, gamma_scale)?;
        let g_star = forward.eval(&x_star)?;
        let data = make_data(&g_star, &gamma, &mut stream(seed, exp_streams::DATA))?;
        let _ = kind;
        let energy = EnergyFunction::new(form, data, gamma, prior_mean, prior_var, domain, forward)?;
        Ok((energy, g_star))
    }

    pub fn rossler(grid_size: usize, integrator: IntegratorConfig, seed: u64) -> Result<Self> {
        let domain = SearchDomain::new(vec![ROSSLER_DOMAIN.0], vec![ROSSLER_DOMAIN.1])?;
        let spec = ForwardMapSpec {
            integrator,
            ..ForwardMapSpec::rossler()
        };
        let (energy, g_star) = Self::assemble(
            ExperimentKind::InferRossler,
            EnergyForm::Rossler,
            spec,
            domain.clone(),
            vec![ROSSLER_X_STAR],
            vec![ROSSLER_PRIOR_MEAN],
            vec![ROSSLER_PRIOR_VAR],
            ROSSLER_GAMMA_WINDOW,
            ROSSLER_GAMMA_SCALE,
            seed,
        )?;
        let grid = QuadratureGrid::new(&domain, QuadratureRule::Trapezoid { n: grid_size })?;
        let true_density = true_density_oracle(&energy, &grid.nodes, Some(&grid.weights))?;
        Ok(Self {
            kind: ExperimentKind::InferRossler,
            energy,
            x_star: vec![ROSSLER_X_STAR],
            g_star,
            comparison_nodes: grid.nodes.clone(),
            comparison_weights: Some(grid.weights.clone()),
            true_density,
            normalizer: grid,
        })
    }

    pub fn lorenz(nodes: usize, normalizer_grid: usize, integrator: IntegratorConfig, seed: u64) -> Result<Self> {
        let domain = SearchDomain::new(LORENZ_LO.to_vec(), LORENZ_HI.to_vec())?;
        let spec = ForwardMapSpec {
            integrator,
            ..ForwardMapSpec::lorenz()
        };
        let (energy, g_star) = Self::assemble(
            ExperimentKind::InferLorenz,
            EnergyForm::Lorenz,
            spec,
            domain.clone(),
            LORENZ_X_STAR.to_vec(),
            LORENZ_PRIOR_MEAN.to_vec(),
            LORENZ_PRIOR_VAR.to_vec(),
            LORENZ_GAMMA_WINDOW,
            LORENZ_GAMMA_SCALE,
            seed,
        )?;
        let comparison_nodes = latin_hypercube(&domain, nodes, &mut stream(seed, exp_streams::COMPARISON));
        let true_density = true_density_oracle(&energy, &comparison_nodes, None)?;
        Ok(Self {
            kind: ExperimentKind::InferLorenz,
            energy,
            x_star: LORENZ_X_STAR.to_vec(),
            g_star,
            comparison_nodes,
            comparison_weights: None,
            true_density,
            normalizer: QuadratureGrid::new(&domain, QuadratureRule::Midpoint { n: normalizer_grid })?,
        })
    }

    pub fn domain(&self) -> &SearchDomain {
        &self.energy.domain
    }

    /// Shared initial design of a replication.
    pub fn initial_design(&self, size: usize, replication_seed: u64) -> Vec<Vec<f64>> {
        latin_hypercube(self.domain(), size, &mut stream(replication_seed, streams::INITIAL_DESIGN))
    }

    /// Run one design strategy with a total budget (initial design
    /// included) and fit the surrogate on every evaluated point.
    pub fn surrogate(
        &self,
        cfg: &ExperimentConfig,
        algorithm: Algorithm,
        budget: usize,
        replication_seed: u64,
    ) -> Result<(SurrogatePosterior, BoRun)> {
        let initial = self.initial_design(cfg.initial_design, replication_seed);
        if budget < initial.len() {
            return Err(Error::Config(format!(
                "budget {budget} is below the initial design size {}",
                initial.len()
            )));
        }
        let evaluations = budget - initial.len();
        let beta = super::beta_schedule(cfg.beta, self.domain(), replication_seed);
        let bo = bo_config(cfg, algorithm, self.domain(), initial, beta, evaluations, replication_seed);
        let (post, run) = build_surrogate(&self.energy, &bo, &self.normalizer)?;
        if run.evaluations_used != budget {
            return Err(Error::External(format!(
                "{algorithm} used {} evaluations for a budget of {budget}",
                run.evaluations_used
            )));
        }
        self.check_normalizer_bounds(&post)?;
        Ok((post, run))
    }

    /// `min mu + ln vol <= ln Z <= max mu + ln vol` on the quadrature grid.
    fn check_normalizer_bounds(&self, post: &SurrogatePosterior) -> Result<()> {
        let mu = log_density_on(&post.model, &self.normalizer.nodes);
        let lv = self.domain().volume().ln();
        let lo = mu.iter().copied().fold(f64::INFINITY, f64::min) + lv;
        let hi = mu.iter().copied().fold(f64::NEG_INFINITY, f64::max) + lv;
        let slack = 1e-9 * (1.0 + post.log_z.abs());
        if post.log_z < lo - slack || post.log_z > hi + slack {
            return Err(Error::Overflow(format!(
                "log Z = {} outside [{lo}, {hi}]",
                post.log_z
            )));
        }
        Ok(())
    }

    /// Surrogate density in the same form as [`true_density`](Self::true_density).
    pub fn surrogate_density(&self, post: &SurrogatePosterior) -> Vec<f64> {
        match self.comparison_weights {
            Some(_) => post.density_on(&self.comparison_nodes),
            None => post.unnormalized_on(&self.comparison_nodes),
        }
    }

    /// Full assessment of one strategy in one replication.
    pub fn assess(
        &self,
        cfg: &ExperimentConfig,
        algorithm: Algorithm,
        replication: usize,
    ) -> Result<StrategyResult> {
        let seed = mix_seed(cfg.seed, replication as u64);
        let (post, run) = self.surrogate(cfg, algorithm, cfg.eval_budget, seed)?;
        let density = self.surrogate_density(&post);
        let l2 = l2_grid_difference(&self.true_density, &density)?;
        let hellinger = match &self.comparison_weights {
            Some(w) => Some(hellinger(&self.true_density, &density, w)?),
            None => None,
        };
        let mut sampler_rng = stream(seed, exp_streams::SAMPLER);
        let (samples, acceptance_rate) = match self.kind {
            ExperimentKind::InferRossler => {
                let log_m = rejection_envelope(&post.model, self.domain(), &mut stream(seed, exp_streams::ENVELOPE))?;
                let n = cfg.rejection_samples.unwrap_or(2000);
                let r = rejection_sample(&post.model, self.domain(), log_m, n, &mut sampler_rng)?;
                (r.samples, r.acceptance_rate)
            }
            _ => {
                let step = vec![cfg.mcmc_step.unwrap_or(0.3); self.domain().dim()];
                let chain = rwmh_sample(
                    &post.model,
                    self.domain(),
                    cfg.mcmc_iterations.unwrap_or(20000),
                    cfg.mcmc_burn_in.unwrap_or(10000),
                    &step,
                    &self.domain().center(),
                    &mut sampler_rng,
                )?;
                (chain.samples, chain.acceptance_rate)
            }
        };
        Ok(StrategyResult {
            algorithm,
            replication,
            seed,
            l2,
            hellinger,
            log_z: post.log_z,
            acceptance_rate,
            evaluations_used: run.evaluations_used,
            lengthscale: post.model.kernel().lengthscale,
            density,
            samples,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StrategyResult {
    pub algorithm: Algorithm,
    pub replication: usize,
    pub seed: u64,
    pub l2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hellinger: Option<f64>,
    pub log_z: f64,
    pub acceptance_rate: f64,
    pub evaluations_used: usize,
    pub lengthscale: f64,
    #[serde(skip)]
    pub density: Vec<f64>,
    #[serde(skip)]
    pub samples: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrategySummary {
    pub algorithm: Algorithm,
    pub l2_mean: f64,
    pub l2_sd: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hellinger_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hellinger_sd: Option<f64>,
}

pub struct InferReport {
    pub problem: InferenceProblem,
    pub results: Vec<StrategyResult>,
    pub summary: Vec<StrategySummary>,
}

impl InferReport {
    pub fn summary_for(&self, algorithm: Algorithm) -> Option<&StrategySummary> {
        self.summary.iter().find(|s| s.algorithm == algorithm)
    }

    pub fn outputs(&self, cfg: &ExperimentConfig) -> Outputs {
        let p = &self.problem;
        let tag = p.kind.name().replace('-', "_");
        let coords: Vec<String> = if p.x_star.len() == 1 {
            vec!["x".into()]
        } else {
            (1..=p.x_star.len()).map(|i| format!("x{i}")).collect()
        };
        let coord_refs: Vec<&str> = coords.iter().map(String::as_str).collect();
        let density_kind = if p.comparison_weights.is_some() {
            "normalized"
        } else {
            "unnormalized"
        };
        let mut out = Outputs::default();

        let mut cols = coord_refs.clone();
        cols.push("density");
        let mut truth = CsvOutput::new(format!("{tag}_true_density.csv"), &cols).meta("density", density_kind);
        for (x, d) in p.comparison_nodes.iter().zip(&p.true_density) {
            let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
            row.push(d.to_string());
            truth.rows.push(row);
        }
        out.csv.push(truth);

        for &a in &cfg.algorithms {
            let mut dcols = vec!["replication"];
            dcols.extend(&coord_refs);
            dcols.push("density");
            let mut dens = CsvOutput::new(format!("{tag}_{}_density.csv", a.name()), &dcols)
                .meta("algorithm", a.name())
                .meta("density", density_kind);
            let mut scols = vec!["replication"];
            scols.extend(&coord_refs);
            let sampler = if p.kind == ExperimentKind::InferRossler {
                "rejection"
            } else {
                "random-walk metropolis-hastings (post burn-in)"
            };
            let mut samp = CsvOutput::new(format!("{tag}_{}_samples.csv", a.name()), &scols)
                .meta("algorithm", a.name())
                .meta("sampler", sampler);
            for r in self
                .results
                .iter()
                .filter(|r| r.algorithm == a && r.replication < cfg.dump_replications)
            {
                for (x, d) in p.comparison_nodes.iter().zip(&r.density) {
                    let mut row = vec![r.replication.to_string()];
                    row.extend(x.iter().map(f64::to_string));
                    row.push(d.to_string());
                    dens.rows.push(row);
                }
                for s in &r.samples {
                    let mut row = vec![r.replication.to_string()];
                    row.extend(s.iter().map(f64::to_string));
                    samp.rows.push(row);
                }
            }
            out.csv.push(dens);
            out.csv.push(samp);
        }

        out.json.push(JsonOutput::new(
            format!("{tag}_metrics.json"),
            serde_json::json!({
                "x_star": p.x_star,
                "forward_map_at_x_star": p.g_star.0,
                "data": p.energy.data.0,
                "gamma": p.energy.gamma,
                "summary": self.summary,
                "replications": self.results,
            }),
        ));
        out
    }
}

pub fn run_infer(cfg: &ExperimentConfig) -> Result<InferReport> {
    let problem = InferenceProblem::from_config(cfg)?;
    let tasks: Vec<(Algorithm, usize)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| (0..cfg.replications).map(move |r| (a, r)))
        .collect();
    let results: Vec<StrategyResult> = tasks
        .par_iter()
        .map(|&(a, r)| problem.assess(cfg, a, r))
        .collect::<Result<_>>()?;
    let summary = cfg
        .algorithms
        .iter()
        .map(|&a| {
            let rs: Vec<&StrategyResult> = results.iter().filter(|r| r.algorithm == a).collect();
            let l2: Vec<f64> = rs.iter().map(|r| r.l2).collect();
            let h: Vec<f64> = rs.iter().filter_map(|r| r.hellinger).collect();
            let (l2_mean, l2_sd) = mean_sd(&l2);
            let (hm, hs) = if h.is_empty() { (None, None) } else {
                let (m, s) = mean_sd(&h);
                (Some(m), Some(s))
            };
            StrategySummary {
                algorithm: a,
                l2_mean,
                l2_sd,
                hellinger_mean: hm,
                hellinger_sd: hs,
            }
        })
        .collect();
    Ok(InferReport {
        problem,
        results,
        summary,
    })
}
