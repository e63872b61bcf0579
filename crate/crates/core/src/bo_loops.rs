//! Optimization drivers: GP-UCB, GP-UCB+, EXPLOIT+ and the baselines they
//! are compared against.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize, AcquisitionKind, AcquisitionSpec, BetaSchedule, MaximizerBudget};
use crate::design::{stream, uniform_point, RandomStream};
use crate::error::{Error, Result};
use crate::gp::{GpModel, TrainingSet, DUPLICATE_RELATIVE_TOLERANCE};
use crate::kernels::{fit_hyperparameters, KernelSpec, LengthscaleGrid};
use crate::objectives::{Oracle, SearchDomain};

/// Stream ids carved out of one run seed so that each source of randomness
/// is independent of how often the others are consumed.
pub mod streams {
    pub const INITIAL_DESIGN: u64 = 0;
    pub const EXPLORATION: u64 = 1;
    pub const MAXIMIZER: u64 = 2;
    pub const RESAMPLE: u64 = 3;
}

/// Resampling attempts for a proposal that collides with existing data.
const MAX_RESAMPLES: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "gp-ucb")]
    GpUcb,
    #[serde(rename = "gp-ucb+")]
    GpUcbPlus,
    #[serde(rename = "exploit+")]
    ExploitPlus,
    #[serde(rename = "exploit")]
    Exploit,
    #[serde(rename = "explore")]
    Explore,
    #[serde(rename = "uniform")]
    Uniform,
    #[serde(rename = "ei")]
    Ei,
    #[serde(rename = "pi")]
    Pi,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Self::GpUcb,
        Self::GpUcbPlus,
        Self::ExploitPlus,
        Self::Exploit,
        Self::Explore,
        Self::Uniform,
        Self::Ei,
        Self::Pi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::GpUcb => "gp-ucb",
            Self::GpUcbPlus => "gp-ucb+",
            Self::ExploitPlus => "exploit+",
            Self::Exploit => "exploit",
            Self::Explore => "explore",
            Self::Uniform => "uniform",
            Self::Ei => "ei",
            Self::Pi => "pi",
        }
    }

    /// Objective evaluations consumed by one iteration.
    pub fn queries_per_iteration(self) -> usize {
        match self {
            Self::GpUcbPlus | Self::ExploitPlus => 2,
            _ => 1,
        }
    }

    pub fn uses_beta(self) -> bool {
        matches!(self, Self::GpUcb | Self::GpUcbPlus)
    }

    /// Split an evaluation budget (excluding the initial design) into
    /// iterations.
    pub fn plan(self, evaluations: usize) -> IterationPlan {
        let q = self.queries_per_iteration();
        IterationPlan {
            iterations: evaluations.div_ceil(q),
            lone_final_iterate: evaluations % q != 0,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .into_iter()
            .find(|a| a.name() == key || a.name().replace('+', "-plus") == key)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Iteration count for a given evaluation budget. With an odd budget, the
/// two-query algorithms spend the last evaluation on an acquisition point
/// alone.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IterationPlan {
    pub iterations: usize,
    pub lone_final_iterate: bool,
}

/// Sampler for user-supplied exploration measures.
pub type CustomSampler = Arc<dyn Fn(&SearchDomain, &mut RandomStream) -> Vec<f64> + Send + Sync>;

/// The measure `P` that random exploration points are drawn from.
#[derive(Clone, Default)]
pub enum ExplorationDistribution {
    #[default]
    Uniform,
    Custom(CustomSampler),
}

impl fmt::Debug for ExplorationDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Uniform => f.write_str("Uniform"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl ExplorationDistribution {
    pub fn sample(&self, domain: &SearchDomain, rng: &mut RandomStream) -> Result<Vec<f64>> {
        match self {
            Self::Uniform => Ok(uniform_point(domain, rng)),
            Self::Custom(f) => {
                let x = f(domain, rng);
                if x.len() != domain.dim() || !domain.contains(&x) {
                    return Err(Error::InvalidArgument(
                        "exploration sampler returned a point outside the domain".into(),
                    ));
                }
                Ok(x)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct BoConfig {
    pub algorithm: Algorithm,
    pub iterations: usize,
    /// Skip the random point in the last iteration of GP-UCB+ / EXPLOIT+.
    pub lone_final_iterate: bool,
    pub initial_design: Vec<Vec<f64>>,
    pub domain: SearchDomain,
    /// Starting kernel; its lengthscale is replaced by grid MLE when
    /// `refit_every > 0`.
    pub kernel: KernelSpec,
    pub lengthscale_grid: Option<LengthscaleGrid>,
    pub beta: BetaSchedule,
    pub exploration: ExplorationDistribution,
    /// Re-fit the lengthscale every this many iterations; 0 never re-fits.
    pub refit_every: usize,
    pub maximizer: MaximizerBudget,
    /// Improvement margin for EI and PI.
    pub xi: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl BoConfig {
    /// Defaults for `algorithm` on `domain`; the initial design must still
    /// be supplied.
    pub fn new(algorithm: Algorithm, domain: SearchDomain, initial_design: Vec<Vec<f64>>) -> Self {
        let d = domain.dim();
        Self {
            algorithm,
            iterations: 0,
            lone_final_iterate: false,
            initial_design,
            domain,
            kernel: KernelSpec::matern(2.5, 1.0).expect("valid default kernel"),
            lengthscale_grid: None,
            beta: BetaSchedule::from_sqrt(2.0),
            exploration: ExplorationDistribution::Uniform,
            refit_every: 5,
            maximizer: MaximizerBudget::for_dim(d),
            xi: 0.0,
            lambda: 0.0,
            seed: 0,
        }
    }

    /// Set the iteration count from an evaluation budget that excludes the
    /// initial design.
    pub fn with_evaluations(mut self, evaluations: usize) -> Self {
        let plan = self.algorithm.plan(evaluations);
        self.iterations = plan.iterations;
        self.lone_final_iterate = plan.lone_final_iterate;
        self
    }

    /// Evaluations the run will make, initial design included.
    pub fn planned_evaluations(&self) -> usize {
        let per = self.algorithm.queries_per_iteration();
        let mut n = self.initial_design.len() + self.iterations * per;
        if self.lone_final_iterate && per == 2 && self.iterations > 0 {
            n -= 1;
        }
        n
    }

    fn validate(&self) -> Result<()> {
        if self.initial_design.is_empty() {
            return Err(Error::InvalidArgument("initial design must be nonempty".into()));
        }
        for p in &self.initial_design {
            if p.len() != self.domain.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.domain.dim(),
                    got: p.len(),
                });
            }
        }
        self.kernel.validate()
    }

    fn grid(&self) -> LengthscaleGrid {
        self.lengthscale_grid
            .clone()
            .unwrap_or_else(|| LengthscaleGrid::for_diameter(self.domain.diameter()))
    }
}

/// Default initial-design size for dimension `d`.
pub fn default_initial_design_size(d: usize) -> usize {
    if d <= 1 {
        2
    } else {
        d.max(2)
    }
}

/// Trace of one optimization run.
#[derive(Clone, Debug)]
pub struct BoRun {
    pub algorithm: Algorithm,
    pub iterates: Vec<Vec<f64>>,
    pub iterate_values: Vec<f64>,
    pub exploration_points: Vec<Vec<f64>>,
    /// Every queried point in query order, initial design first.
    pub queried: Vec<Vec<f64>>,
    /// Observations aligned with `queried`.
    pub observations: Vec<f64>,
    /// Objective evaluations used, initial design included.
    pub evaluations_used: usize,
    /// Objective evaluations spent resolving the UCB weight.
    pub design_evaluations: usize,
    /// Largest observation seen through each iteration.
    pub per_iteration_best: Vec<f64>,
    /// Evaluations used (initial design excluded) at the end of each iteration.
    pub evaluations_at_iteration: Vec<usize>,
    pub beta: f64,
    pub resampled_proposals: usize,
    pub final_model: GpModel,
}

/// Counts calls and refuses any past the budget.
pub struct BudgetedOracle<O> {
    inner: O,
    budget: usize,
    used: usize,
}

impl<O: Oracle> BudgetedOracle<O> {
    pub fn used(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.used
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<O: Oracle> Oracle for BudgetedOracle<O> {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        if self.used >= self.budget {
            return Err(Error::BudgetExhausted {
                budget: self.budget,
            });
        }
        self.used += 1;
        self.inner.evaluate(x)
    }
}

pub fn evaluate_with_budget<O: Oracle>(objective: O, budget: usize) -> BudgetedOracle<O> {
    BudgetedOracle {
        inner: objective,
        budget,
        used: 0,
    }
}

struct Loop<'a, O: Oracle> {
    config: &'a BoConfig,
    objective: BudgetedOracle<O>,
    explore_rng: RandomStream,
    maximizer_rng: RandomStream,
    resample_rng: RandomStream,
    grid: LengthscaleGrid,
    kernel: KernelSpec,
    model: GpModel,
    queried: Vec<Vec<f64>>,
    observations: Vec<f64>,
    best: f64,
    resampled: usize,
}

impl<O: Oracle> Loop<'_, O> {
    fn observe(&mut self, x: &[f64]) -> Result<f64> {
        let f = self.objective.evaluate(x)?;
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("objective value {f} at {x:?}")));
        }
        self.queried.push(x.to_vec());
        self.observations.push(f);
        self.best = self.best.max(f);
        Ok(f)
    }

    fn propose(&mut self, beta: f64) -> Result<Vec<f64>> {
        let c = self.config;
        let kind = match c.algorithm {
            Algorithm::Uniform => return c.exploration.sample(&c.domain, &mut self.explore_rng),
            Algorithm::GpUcb | Algorithm::GpUcbPlus => AcquisitionKind::Ucb { beta },
            Algorithm::Exploit | Algorithm::ExploitPlus => AcquisitionKind::PosteriorMean,
            Algorithm::Explore => AcquisitionKind::PosteriorSd,
            Algorithm::Ei => AcquisitionKind::ExpectedImprovement,
            Algorithm::Pi => AcquisitionKind::ProbabilityOfImprovement,
        };
        let acq = AcquisitionSpec { kind, xi: c.xi };
        let m = maximize(&acq, &self.model, &c.domain, &c.maximizer, self.best, &mut self.maximizer_rng)?;
        Ok(m.point)
    }

    /// Replace `x` by fresh draws from `P` while it collides with `data` or
    /// with `pending` points of the same iteration.
    fn deduplicate(&mut self, mut x: Vec<f64>, data: &TrainingSet, pending: &[Vec<f64>]) -> Result<Vec<f64>> {
        let tol = data.tolerance();
        let clash = |x: &[f64]| {
            data.check_candidate(x).is_err()
                || pending
                    .iter()
                    .any(|p| crate::kernels::distance(p, x) <= tol)
        };
        let mut tries = 0;
        while clash(&x) {
            if tries == MAX_RESAMPLES {
                return Err(Error::DuplicatePoints {
                    distance: data.nearest_distance(&x).unwrap_or(0.0),
                    tolerance: tol,
                });
            }
            log::info!("{}: proposal {x:?} duplicates existing data, resampling", self.config.algorithm);
            x = self.config.exploration.sample(&self.config.domain, &mut self.resample_rng)?;
            tries += 1;
            self.resampled += 1;
        }
        Ok(x)
    }

    fn refit_kernel(&mut self) -> Result<()> {
        let data = self.model.data();
        if data.len() >= 2 {
            self.kernel = fit_hyperparameters(&self.kernel, &data.points(), data.values(), &self.grid)?;
            self.model = self.model.refit(self.kernel)?;
        }
        Ok(())
    }

    fn absorb(&mut self, new_points: &[(Vec<f64>, f64)]) -> Result<()> {
        for (x, f) in new_points {
            match self.model.update(x, *f) {
                Ok(m) => self.model = m,
                Err(Error::FactorizationFailure { .. }) if self.config.refit_every > 0 => {
                    // Re-selecting the lengthscale usually restores conditioning.
                    let mut data = self.model.data().clone();
                    data.push(x, *f)?;
                    self.kernel = fit_hyperparameters(&self.kernel, &data.points(), data.values(), &self.grid)?;
                    self.model = GpModel::fit(self.kernel, data, self.config.lambda)?;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// Run the configured algorithm against `objective`.
pub fn run<O: Oracle>(config: &BoConfig, mut objective: O) -> Result<BoRun> {
    config.validate()?;
    let resolved = if config.algorithm.uses_beta() {
        config.beta.resolve(&mut objective)?
    } else {
        crate::acquisition::ResolvedBeta {
            beta: 0.0,
            design_evaluations: 0,
        }
    };
    let budgeted = evaluate_with_budget(objective, config.planned_evaluations());
    let tolerance = DUPLICATE_RELATIVE_TOLERANCE * config.domain.diameter();

    let mut data = TrainingSet::new(config.domain.dim(), tolerance);
    let mut lp = Loop {
        config,
        objective: budgeted,
        explore_rng: stream(config.seed, streams::EXPLORATION),
        maximizer_rng: stream(config.seed, streams::MAXIMIZER),
        resample_rng: stream(config.seed, streams::RESAMPLE),
        grid: config.grid(),
        kernel: config.kernel,
        // Placeholder until the initial design is observed.
        model: GpModel::fit(
            config.kernel,
            TrainingSet::from_points(&config.initial_design[..1], &[0.0], tolerance)?,
            config.lambda,
        )?,
        queried: Vec::new(),
        observations: Vec::new(),
        best: f64::NEG_INFINITY,
        resampled: 0,
    };
    for x in &config.initial_design {
        data.check_candidate(x)?;
        let f = lp.observe(x)?;
        data.push(x, f)?;
    }
    lp.model = GpModel::fit(config.kernel, data, config.lambda)?;
    if config.refit_every > 0 {
        lp.refit_kernel()?;
    }

    let two_query = config.algorithm.queries_per_iteration() == 2;
    let mut iterates = Vec::with_capacity(config.iterations);
    let mut iterate_values = Vec::with_capacity(config.iterations);
    let mut exploration_points = Vec::new();
    let mut per_iteration_best = Vec::with_capacity(config.iterations);
    let mut evaluations_at_iteration = Vec::with_capacity(config.iterations);
    let initial = config.initial_design.len();

    for t in 1..=config.iterations {
        let proposal = lp.propose(resolved.beta)?;
        let data = lp.model.data().clone();
        let x = lp.deduplicate(proposal, &data, &[])?;
        let f = lp.observe(&x)?;
        let mut new_points = vec![(x.clone(), f)];
        iterates.push(x.clone());
        iterate_values.push(f);
        let lone = config.lone_final_iterate && t == config.iterations;
        if two_query && !lone {
            let draw = config.exploration.sample(&config.domain, &mut lp.explore_rng)?;
            let xt = lp.deduplicate(draw, &data, std::slice::from_ref(&x))?;
            let ft = lp.observe(&xt)?;
            exploration_points.push(xt.clone());
            new_points.push((xt, ft));
        }
        lp.absorb(&new_points)?;
        if config.refit_every > 0 && t % config.refit_every == 0 {
            lp.refit_kernel()?;
        }
        per_iteration_best.push(lp.best);
        evaluations_at_iteration.push(lp.objective.used() - initial);
    }
    // The final surrogate uses hyperparameters chosen on all the data.
    if config.refit_every > 0 && config.iterations % config.refit_every != 0 {
        lp.refit_kernel()?;
    }

    Ok(BoRun {
        algorithm: config.algorithm,
        iterates,
        iterate_values,
        exploration_points,
        evaluations_used: lp.objective.used(),
        design_evaluations: resolved.design_evaluations,
        queried: lp.queried,
        observations: lp.observations,
        per_iteration_best,
        evaluations_at_iteration,
        beta: resolved.beta,
        resampled_proposals: lp.resampled,
        final_model: lp.model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::latin_hypercube;
    use crate::objectives::FnOracle;

    fn quad_config(algorithm: Algorithm, evaluations: usize) -> BoConfig {
        let dom = SearchDomain::cube(0.0, 1.0, 1).unwrap();
        let init = latin_hypercube(&dom, 2, &mut stream(9, streams::INITIAL_DESIGN));
        let mut c = BoConfig::new(algorithm, dom, init).with_evaluations(evaluations);
        c.maximizer.pool = 100;
        c.seed = 9;
        c
    }

    fn quad() -> FnOracle<impl FnMut(&[f64]) -> f64> {
        FnOracle(|x: &[f64]| -(x[0] - 0.3).powi(2))
    }

    #[test]
    fn planning() {
        assert_eq!(Algorithm::GpUcbPlus.plan(400).iterations, 200);
        assert_eq!(Algorithm::GpUcb.plan(400).iterations, 400);
        let odd = Algorithm::ExploitPlus.plan(23);
        assert_eq!((odd.iterations, odd.lone_final_iterate), (12, true));
        for alg in Algorithm::ALL {
            assert_eq!(alg.to_string().parse::<Algorithm>().unwrap(), alg);
        }
        assert_eq!("GP_UCB_PLUS".parse::<Algorithm>().unwrap(), Algorithm::GpUcbPlus);
    }

    #[test]
    fn budget_wrapper() {
        let mut b = evaluate_with_budget(quad(), 0);
        assert!(matches!(b.evaluate(&[0.1]), Err(Error::BudgetExhausted { budget: 0 })));
        let mut b = evaluate_with_budget(quad(), 1);
        assert!(b.evaluate(&[0.1]).is_ok());
        assert!(b.evaluate(&[0.1]).is_err());
        assert_eq!(b.used(), 1);
    }

    #[test]
    fn empty_loop() {
        let run = run(&quad_config(Algorithm::GpUcb, 0), quad()).unwrap();
        assert!(run.iterates.is_empty());
        assert_eq!(run.evaluations_used, 2);
    }

    #[test]
    fn evaluation_accounting() {
        for alg in Algorithm::ALL {
            for n in [5, 6] {
                let c = quad_config(alg, n);
                let r = run(&c, quad()).unwrap();
                assert_eq!(r.evaluations_used, 2 + n, "{alg} {n}");
                assert_eq!(r.final_model.data().len(), 2 + n);
                assert_eq!(r.queried.len(), r.observations.len());
                assert!(r.per_iteration_best.windows(2).all(|w| w[0] <= w[1]));
                assert_eq!(*r.evaluations_at_iteration.last().unwrap(), n);
            }
        }
    }

    #[test]
    fn exploit_plus_converges_on_quadratic() {
        let r = run(&quad_config(Algorithm::ExploitPlus, 20), quad()).unwrap();
        assert_eq!(r.iterates.len(), 10);
        assert_eq!(r.exploration_points.len(), 10);
        assert!(*r.per_iteration_best.last().unwrap() > -1e-4);
    }
}
