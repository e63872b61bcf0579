//! Surrogate posteriors `pi_t ∝ exp(mu_t^V)` for parameter inference, with
//! quadrature, density diagnostics and two samplers.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{maximize, AcquisitionKind, AcquisitionSpec, MaximizerBudget};
use crate::bo_loops::{run, BoConfig, BoRun};
use crate::design::RandomStream;
use crate::dynamics::{ForwardMap, MomentSummary};
use crate::error::{check_dim, Error, Result};
use crate::gp::GpModel;
use crate::objectives::{Oracle, SearchDomain};

/// Rejection sampling gives up when fewer than this fraction of proposals
/// is accepted after [`REJECTION_CHECK_AFTER`] proposals.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
pub const REJECTION_CHECK_AFTER: usize = 1_000_000;

/// Envelope inflation over the optimizer-found maximum.
pub const ENVELOPE_FACTOR: f64 = 1.05;

/// Unnormalized log density on a box.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

impl LogDensity for GpModel {
    fn dim(&self) -> usize {
        GpModel::dim(self)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.mean_unchecked(x)
    }
}

/// Closure-backed log density.
pub struct FnLogDensity<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> LogDensity for FnLogDensity<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyForm {
    Rossler,
    Lorenz,
}

/// `V(x) = -1/2 |D - G(x)|^2_Gamma - 1/2 |x - m0|^2_P` with diagonal
/// `Gamma` and `P`.
#[derive(Clone, Debug)]
pub struct EnergyFunction {
    pub form: EnergyForm,
    pub data: MomentSummary,
    pub gamma: [f64; 9],
    pub prior_mean: Vec<f64>,
    pub prior_var: Vec<f64>,
    pub domain: SearchDomain,
    pub forward: Arc<ForwardMap>,
}

impl EnergyFunction {
    pub fn new(
        form: EnergyForm,
        data: MomentSummary,
        gamma: [f64; 9],
        prior_mean: Vec<f64>,
        prior_var: Vec<f64>,
        domain: SearchDomain,
        forward: Arc<ForwardMap>,
    ) -> Result<Self> {
        check_dim(domain.dim(), prior_mean.len())?;
        check_dim(domain.dim(), prior_var.len())?;
        check_dim(forward.spec().family.parameter_dim(), domain.dim())?;
        if gamma.iter().chain(&prior_var).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument(
                "noise and prior variances must be positive".into(),
            ));
        }
        Ok(Self {
            form,
            data,
            gamma,
            prior_mean,
            prior_var,
            domain,
            forward,
        })
    }

    /// Energy given an already computed `G(x)`.
    pub fn energy_from(&self, g: &MomentSummary, x: &[f64]) -> f64 {
        let misfit: f64 = self
            .data
            .0
            .iter()
            .zip(&g.0)
            .zip(&self.gamma)
            .map(|((d, g), s)| (d - g).powi(2) / s)
            .sum();
        let prior: f64 = x
            .iter()
            .zip(&self.prior_mean)
            .zip(&self.prior_var)
            .map(|((x, m), p)| (x - m).powi(2) / p)
            .sum();
        -0.5 * misfit - 0.5 * prior
    }

    pub fn energy(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.domain.dim(), x.len())?;
        let g = self.forward.eval(x)?;
        Ok(self.energy_from(&g, x))
    }
}

impl Oracle for &EnergyFunction {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        self.energy(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Composite trapezoid on `n` equispaced nodes (1-d only).
    Trapezoid { n: usize },
    /// Midpoint rule on an `n^d` tensor grid of cell centers.
    Midpoint { n: usize },
}

/// Nodes and weights of a quadrature rule over a box.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    pub rule: QuadratureRule,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn new(domain: &SearchDomain, rule: QuadratureRule) -> Result<Self> {
        match rule {
            QuadratureRule::Trapezoid { n } => {
                if domain.dim() != 1 || n < 2 {
                    return Err(Error::InvalidArgument(
                        "trapezoid grids are 1-d with at least 2 nodes".into(),
                    ));
                }
                let (lo, h) = (domain.lo()[0], domain.width(0) / (n - 1) as f64);
                let nodes = (0..n)
                    .map(|i| vec![if i == n - 1 { domain.hi()[0] } else { lo + i as f64 * h }])
                    .collect();
                let mut weights = vec![h; n];
                weights[0] = 0.5 * h;
                weights[n - 1] = 0.5 * h;
                Ok(Self { rule, nodes, weights })
            }
            QuadratureRule::Midpoint { n } => {
                let d = domain.dim();
                let total = n
                    .checked_pow(d as u32)
                    .filter(|&t| t > 0 && t <= 50_000_000)
                    .ok_or_else(|| Error::InvalidArgument(format!("midpoint grid {n}^{d} is unusable")))?;
                let mut nodes = Vec::with_capacity(total);
                let mut idx = vec![0usize; d];
                for _ in 0..total {
                    nodes.push(
                        (0..d)
                            .map(|j| domain.lo()[j] + (idx[j] as f64 + 0.5) / n as f64 * domain.width(j))
                            .collect(),
                    );
                    for slot in idx.iter_mut().rev() {
                        *slot += 1;
                        if *slot < n {
                            break;
                        }
                        *slot = 0;
                    }
                }
                let w = domain.volume() / total as f64;
                Ok(Self {
                    rule,
                    nodes,
                    weights: vec![w; total],
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Log-density values at the grid nodes.
pub fn log_density_on(target: &dyn LogDensity, nodes: &[Vec<f64>]) -> Vec<f64> {
    nodes.par_iter().map(|x| target.log_density(x)).collect()
}

/// `ln sum_i w_i exp(v_i)`, stabilized by the largest `v_i`.
pub fn log_integral(log_values: &[f64], weights: &[f64]) -> Result<f64> {
    check_dim(weights.len(), log_values.len())?;
    let max = log_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Overflow("log density is not finite on the grid".into()));
    }
    let s: f64 = log_values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v - max).exp())
        .sum();
    let log_z = max + s.ln();
    if !(s > 0.0) || !log_z.is_finite() {
        return Err(Error::Overflow(format!("normalizing constant is degenerate (log Z = {log_z})")));
    }
    Ok(log_z)
}

/// `ln Z` for `exp(target)` by the given quadrature.
pub fn normalize(target: &dyn LogDensity, grid: &QuadratureGrid) -> Result<f64> {
    log_integral(&log_density_on(target, &grid.nodes), &grid.weights)
}

/// `pi_t = exp(mu_t^V) / Z` together with what is needed to evaluate it.
#[derive(Clone, Debug)]
pub struct SurrogatePosterior {
    pub model: GpModel,
    pub domain: SearchDomain,
    pub log_z: f64,
    pub rule: QuadratureRule,
}

impl SurrogatePosterior {
    pub fn from_model(model: GpModel, domain: SearchDomain, grid: &QuadratureGrid) -> Result<Self> {
        check_dim(domain.dim(), model.dim())?;
        let log_z = normalize(&model, grid)?;
        Ok(Self {
            model,
            domain,
            log_z,
            rule: grid.rule,
        })
    }

    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        (self.model.log_density(x) - self.log_z).exp()
    }

    /// Normalized density at each node.
    pub fn density_on(&self, nodes: &[Vec<f64>]) -> Vec<f64> {
        nodes.par_iter().map(|x| self.density(x)).collect()
    }

    /// `exp(mu_t^V)` at each node.
    pub fn unnormalized_on(&self, nodes: &[Vec<f64>]) -> Vec<f64> {
        nodes.par_iter().map(|x| self.model.log_density(x).exp()).collect()
    }
}

/// Run the design strategy on `V` and fit the surrogate on every queried
/// point. The budget is the configured initial design plus iterations.
pub fn build_surrogate(
    energy: &EnergyFunction,
    strategy: &BoConfig,
    grid: &QuadratureGrid,
) -> Result<(SurrogatePosterior, BoRun)> {
    let bo = run(strategy, energy)?;
    let post = SurrogatePosterior::from_model(bo.final_model.clone(), energy.domain.clone(), grid)?;
    Ok((post, bo))
}

/// `d_H = sqrt(1/2 sum_i w_i (sqrt p_i - sqrt q_i)^2)`, clamped to `[0, 1]`.
pub fn hellinger(p: &[f64], q: &[f64], weights: &[f64]) -> Result<f64> {
    check_dim(p.len(), q.len())?;
    check_dim(p.len(), weights.len())?;
    if let Some(v) = p.iter().chain(q).find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("densities must be nonnegative, got {v}")));
    }
    let s: f64 = p
        .iter()
        .zip(q)
        .zip(weights)
        .map(|((a, b), w)| w * (a.sqrt() - b.sqrt()).powi(2))
        .sum();
    Ok((0.5 * s).sqrt().clamp(0.0, 1.0))
}

/// Euclidean norm of the pointwise difference of two density vectors.
pub fn l2_grid_difference(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim(a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
}

/// Envelope `ln M` for rejection sampling from `exp(mu)`: the maximizer's
/// best posterior mean inflated by [`ENVELOPE_FACTOR`].
pub fn rejection_envelope(model: &GpModel, domain: &SearchDomain, rng: &mut RandomStream) -> Result<f64> {
    let acq = AcquisitionSpec::new(AcquisitionKind::PosteriorMean);
    let m = maximize(&acq, model, domain, &MaximizerBudget::for_dim(domain.dim()), 0.0, rng)?;
    Ok(m.score + ENVELOPE_FACTOR.ln())
}

#[derive(Clone, Debug)]
pub struct RejectionSamples {
    pub samples: Vec<Vec<f64>>,
    pub proposals: usize,
    pub acceptance_rate: f64,
    /// Proposals whose log density exceeded the envelope.
    pub envelope_violations: usize,
}

/// Rejection sampling from `exp(target)` with a uniform proposal on `domain`.
pub fn rejection_sample(
    target: &dyn LogDensity,
    domain: &SearchDomain,
    log_envelope: f64,
    n: usize,
    rng: &mut RandomStream,
) -> Result<RejectionSamples> {
    check_dim(domain.dim(), target.dim())?;
    let mut samples = Vec::with_capacity(n);
    let mut proposals = 0usize;
    let mut violations = 0usize;
    while samples.len() < n {
        let x = crate::design::uniform_point(domain, rng);
        proposals += 1;
        let log_ratio = target.log_density(&x) - log_envelope;
        if log_ratio > 0.0 {
            violations += 1;
        }
        let u: f64 = rng.random();
        if u.ln() < log_ratio {
            samples.push(x);
        }
        if proposals % REJECTION_CHECK_AFTER == 0
            && (samples.len() as f64) < MIN_ACCEPTANCE * proposals as f64
        {
            return Err(Error::Sampler(format!(
                "acceptance rate {} after {proposals} proposals",
                samples.len() as f64 / proposals as f64
            )));
        }
    }
    if violations > 0 {
        log::warn!("{violations} proposals exceeded the rejection envelope");
    }
    Ok(RejectionSamples {
        samples,
        proposals,
        acceptance_rate: n as f64 / proposals.max(1) as f64,
        envelope_violations: violations,
    })
}

#[derive(Clone, Debug)]
pub struct Chain {
    /// Post burn-in states.
    pub samples: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
}

/// Random-walk Metropolis–Hastings on `exp(target)` restricted to `domain`,
/// with Gaussian steps of diagonal covariance `step_var`, starting at `start`.
pub fn rwmh_sample(
    target: &dyn LogDensity,
    domain: &SearchDomain,
    n_iter: usize,
    burn_in: usize,
    step_var: &[f64],
    start: &[f64],
    rng: &mut RandomStream,
) -> Result<Chain> {
    check_dim(domain.dim(), target.dim())?;
    check_dim(domain.dim(), step_var.len())?;
    check_dim(domain.dim(), start.len())?;
    if step_var.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument("step variances must be positive".into()));
    }
    if burn_in > n_iter {
        return Err(Error::InvalidArgument("burn-in exceeds chain length".into()));
    }
    let sd: Vec<f64> = step_var.iter().map(|v| v.sqrt()).collect();
    let mut x = start.to_vec();
    let mut lx = target.log_density(&x);
    let mut prop = x.clone();
    let mut accepted = 0usize;
    let mut samples = Vec::with_capacity(n_iter - burn_in);
    for i in 0..n_iter {
        for ((p, xi), s) in prop.iter_mut().zip(&x).zip(&sd) {
            let e: f64 = rng.sample(StandardNormal);
            *p = xi + s * e;
        }
        let u: f64 = rng.random();
        if domain.contains(&prop) {
            let lp = target.log_density(&prop);
            if u.ln() < lp - lx {
                x.copy_from_slice(&prop);
                lx = lp;
                accepted += 1;
            }
        }
        if i >= burn_in {
            samples.push(x.clone());
        }
    }
    Ok(Chain {
        samples,
        acceptance_rate: accepted as f64 / n_iter.max(1) as f64,
    })
}

/// Reference density `exp(V)` on `nodes`, normalized by the quadrature
/// weights when given. Nodes where the forward map fails get density 0;
/// more than 1% failures is an error.
pub fn true_density_oracle(
    energy: &EnergyFunction,
    nodes: &[Vec<f64>],
    weights: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let values: Vec<Result<f64>> = nodes.par_iter().map(|x| energy.energy(x)).collect();
    let mut failures = 0;
    let log_v: Vec<f64> = values
        .into_iter()
        .zip(nodes)
        .map(|(v, x)| match v {
            Ok(v) => v,
            Err(e) => {
                log::warn!("energy failed at {x:?}: {e}");
                failures += 1;
                f64::NEG_INFINITY
            }
        })
        .collect();
    if failures * 100 > nodes.len() {
        return Err(Error::External(format!(
            "energy failed at {failures} of {} nodes",
            nodes.len()
        )));
    }
    let shift = match weights {
        Some(w) => log_integral(&log_v, w)?,
        None => 0.0,
    };
    Ok(log_v.iter().map(|v| (v - shift).exp()).collect())
}
