//! Acquisition functions and their maximization over a box.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::design::latin_hypercube;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::objectives::{Oracle, SearchDomain};

/// How the UCB weight `beta_t` is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSchedule {
    /// Fixed `beta`.
    Constant(f64),
    /// `beta^{1/2} = max_{x in X_D} |f(x)|` over the given discretization.
    SupNormEstimate(Vec<Vec<f64>>),
}

/// A resolved weight together with the number of objective calls spent
/// obtaining it (kept apart from the optimization budget).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolvedBeta {
    pub beta: f64,
    pub design_evaluations: usize,
}

impl BetaSchedule {
    /// Constant schedule from `beta^{1/2}`.
    pub fn from_sqrt(sqrt_beta: f64) -> Self {
        Self::Constant(sqrt_beta * sqrt_beta)
    }

    pub fn resolve(&self, objective: &mut dyn Oracle) -> Result<ResolvedBeta> {
        match self {
            Self::Constant(beta) => {
                if !(*beta >= 0.0 && beta.is_finite()) {
                    return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
                }
                Ok(ResolvedBeta {
                    beta: *beta,
                    design_evaluations: 0,
                })
            }
            Self::SupNormEstimate(points) => {
                if points.is_empty() {
                    return Err(Error::InvalidArgument(
                        "sup-norm beta needs a nonempty discretization".into(),
                    ));
                }
                let mut sup: f64 = 0.0;
                for p in points {
                    sup = sup.max(objective.evaluate(p)?.abs());
                }
                Ok(ResolvedBeta {
                    beta: sup * sup,
                    design_evaluations: points.len(),
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionKind {
    /// `mu + beta^{1/2} sigma` with a resolved `beta`.
    Ucb { beta: f64 },
    PosteriorMean,
    PosteriorSd,
    ExpectedImprovement,
    ProbabilityOfImprovement,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    /// Improvement margin for EI and PI, in objective units.
    #[serde(default)]
    pub xi: f64,
}

impl AcquisitionSpec {
    pub fn new(kind: AcquisitionKind) -> Self {
        Self { kind, xi: 0.0 }
    }

    pub fn ucb(beta: f64) -> Self {
        Self::new(AcquisitionKind::Ucb { beta })
    }

    fn needs_variance(&self) -> bool {
        !matches!(self.kind, AcquisitionKind::PosteriorMean)
    }

    /// Score from a posterior mean and variance.
    #[inline]
    pub fn score_from(&self, mean: f64, var: f64, best: f64) -> f64 {
        let sd = var.max(0.0).sqrt();
        match self.kind {
            AcquisitionKind::Ucb { beta } => mean + beta.sqrt() * sd,
            AcquisitionKind::PosteriorMean => mean,
            AcquisitionKind::PosteriorSd => sd,
            AcquisitionKind::ExpectedImprovement => {
                let gain = mean - best - self.xi;
                if sd > 0.0 {
                    let z = gain / sd;
                    gain * normal_cdf(z) + sd * normal_pdf(z)
                } else {
                    gain.max(0.0)
                }
            }
            AcquisitionKind::ProbabilityOfImprovement => {
                let gain = mean - best - self.xi;
                if sd > 0.0 {
                    normal_cdf(gain / sd)
                } else if gain > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Acquisition value at `x`. `best` is the incumbent (largest observed value).
pub fn score(acq: &AcquisitionSpec, model: &GpModel, x: &[f64], best: f64) -> Result<f64> {
    let (mean, var) = if acq.needs_variance() {
        model.predict(x)?
    } else {
        (model.posterior_mean(x)?, 0.0)
    };
    Ok(acq.score_from(mean, var, best))
}

/// Effort spent by [`maximize`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaximizerBudget {
    /// Latin hypercube candidates scored up front.
    pub pool: usize,
    /// Best candidates refined by coordinate search.
    pub starts: usize,
    /// Step halvings in the coordinate search (starting at 10% of each side).
    pub halvings: usize,
}

impl MaximizerBudget {
    pub fn for_dim(d: usize) -> Self {
        Self {
            pool: (500 * d).min(5000),
            starts: 5,
            halvings: 10,
        }
    }
}

/// Result of [`maximize`].
#[derive(Clone, Debug, PartialEq)]
pub struct Maximum {
    pub point: Vec<f64>,
    pub score: f64,
}

struct Scorer<'a> {
    acq: &'a AcquisitionSpec,
    model: &'a GpModel,
    best: f64,
    buf: Vec<f64>,
}

impl Scorer<'_> {
    fn score(&mut self, x: &[f64]) -> Result<f64> {
        if self.acq.needs_variance() {
            let (m, v) = self.model.predict_with(x, &mut self.buf)?;
            Ok(self.acq.score_from(m, v, self.best))
        } else {
            Ok(self.model.mean_unchecked(x))
        }
    }
}

/// Maximize the acquisition over `domain`: score a Latin hypercube pool, then
/// refine the best `starts` candidates by a shrinking-step coordinate search
/// clipped to the box. Ties keep the earliest point found.
pub fn maximize(
    acq: &AcquisitionSpec,
    model: &GpModel,
    domain: &SearchDomain,
    budget: &MaximizerBudget,
    best: f64,
    rng: &mut impl Rng,
) -> Result<Maximum> {
    if domain.dim() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: domain.dim(),
        });
    }
    if budget.pool == 0 {
        return Err(Error::InvalidArgument("maximizer pool must be nonempty".into()));
    }
    let mut scorer = Scorer {
        acq,
        model,
        best,
        buf: Vec::with_capacity(model.data().len()),
    };
    let pool = latin_hypercube(domain, budget.pool, rng);
    let mut scores = Vec::with_capacity(pool.len());
    for p in &pool {
        scores.push(scorer.score(p)?);
    }
    let mut order: Vec<usize> = (0..pool.len()).collect();
    // Stable sort: equal scores keep pool order.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut best_max = Maximum {
        point: pool[order[0]].clone(),
        score: scores[order[0]],
    };
    for &idx in order.iter().take(budget.starts) {
        let refined = coordinate_search(&mut scorer, domain, &pool[idx], scores[idx], budget.halvings)?;
        if refined.score > best_max.score {
            best_max = refined;
        }
    }
    Ok(best_max)
}

fn coordinate_search(
    scorer: &mut Scorer<'_>,
    domain: &SearchDomain,
    start: &[f64],
    start_score: f64,
    halvings: usize,
) -> Result<Maximum> {
    const MAX_SWEEPS: usize = 4;
    let d = domain.dim();
    let mut x = start.to_vec();
    let mut fx = start_score;
    let mut trial = x.clone();
    for level in 0..=halvings {
        let frac = 0.1 / (1u64 << level) as f64;
        for _ in 0..MAX_SWEEPS {
            let mut improved = false;
            for j in 0..d {
                let step = frac * domain.width(j);
                for sign in [1.0, -1.0] {
                    let v = (x[j] + sign * step).clamp(domain.lo()[j], domain.hi()[j]);
                    if v == x[j] {
                        continue;
                    }
                    trial.copy_from_slice(&x);
                    trial[j] = v;
                    let s = scorer.score(&trial)?;
                    if s > fx {
                        x[j] = v;
                        fx = s;
                        improved = true;
                        break;
                    }
                }
            }
            if !improved {
                break;
            }
        }
    }
    Ok(Maximum { point: x, score: fx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::stream;
    use crate::gp::TrainingSet;
    use crate::kernels::KernelSpec;
    use crate::objectives::FnOracle;

    fn model(points: &[Vec<f64>], values: &[f64]) -> GpModel {
        let k = KernelSpec::squared_exponential(0.2).unwrap();
        GpModel::fit(k, TrainingSet::from_points(points, values, 1e-12).unwrap(), 0.0).unwrap()
    }

    #[test]
    fn ucb_zero_beta_is_mean() {
        let m = model(&[vec![0.1], vec![0.6]], &[1.0, -0.5]);
        for x in [0.0, 0.3, 0.77] {
            let a = score(&AcquisitionSpec::ucb(0.0), &m, &[x], 0.0).unwrap();
            let b = score(&AcquisitionSpec::new(AcquisitionKind::PosteriorMean), &m, &[x], 0.0)
                .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ucb_combines_mean_and_sd() {
        let m = model(&[vec![0.1]], &[1.0]);
        let (mu, var) = m.predict(&[0.4]).unwrap();
        let s = score(&AcquisitionSpec::ucb(4.0), &m, &[0.4], 0.0).unwrap();
        assert!((s - (mu + 2.0 * var.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn ei_and_pi_closed_forms() {
        let ei = AcquisitionSpec::new(AcquisitionKind::ExpectedImprovement);
        assert!((ei.score_from(0.0, 1.0, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(ei.score_from(1.0, 0.0, 1.0), 0.0);
        assert_eq!(ei.score_from(1.5, 0.0, 1.0), 0.5);
        let pi = AcquisitionSpec::new(AcquisitionKind::ProbabilityOfImprovement);
        assert_eq!(pi.score_from(0.0, 1.0, 0.0), 0.5);
        assert_eq!(pi.score_from(2.0, 0.0, 1.0), 1.0);
        assert_eq!(pi.score_from(1.0, 0.0, 1.0), 0.0);
        let m = model(&[vec![0.5]], &[2.0]);
        assert!(score(&ei, &m, &[0.5], 2.0).unwrap().abs() < 1e-6);
    }

    #[test]
    fn resolve_beta_examples() {
        let mut f = FnOracle(|x: &[f64]| -x[0] * x[0]);
        let r = BetaSchedule::Constant(4.0).resolve(&mut f).unwrap();
        assert_eq!((r.beta, r.design_evaluations), (4.0, 0));
        let sup = BetaSchedule::SupNormEstimate(vec![vec![-2.0], vec![1.0]]);
        let r = sup.resolve(&mut f).unwrap();
        assert_eq!((r.beta, r.design_evaluations), (16.0, 2));
        let mut zero = FnOracle(|_: &[f64]| 0.0);
        assert_eq!(sup.resolve(&mut zero).unwrap().beta, 0.0);
        assert!(BetaSchedule::SupNormEstimate(vec![]).resolve(&mut zero).is_err());
        assert_eq!(BetaSchedule::from_sqrt(2.0), BetaSchedule::Constant(4.0));
    }

    #[test]
    fn mean_maximizer_finds_datum() {
        let dom = SearchDomain::cube(0.0, 1.0, 1).unwrap();
        let m = model(&[vec![0.37]], &[1.0]);
        let acq = AcquisitionSpec::new(AcquisitionKind::PosteriorMean);
        let got = maximize(&acq, &m, &dom, &MaximizerBudget::for_dim(1), 1.0, &mut stream(1, 0))
            .unwrap();
        assert!((got.point[0] - 0.37).abs() < 1e-3);
    }

    #[test]
    fn sd_maximizer_goes_to_boundary() {
        let dom = SearchDomain::cube(0.0, 1.0, 1).unwrap();
        let m = model(&[vec![0.5]], &[1.0]);
        let acq = AcquisitionSpec::new(AcquisitionKind::PosteriorSd);
        let got = maximize(&acq, &m, &dom, &MaximizerBudget::for_dim(1), 1.0, &mut stream(2, 0))
            .unwrap();
        assert!(got.point[0] == 0.0 || got.point[0] == 1.0, "{:?}", got.point);
    }

    #[test]
    fn single_candidate_no_refinement() {
        let dom = SearchDomain::cube(0.0, 1.0, 2).unwrap();
        let m = model(&[vec![0.5, 0.5]], &[1.0]);
        let budget = MaximizerBudget {
            pool: 1,
            starts: 0,
            halvings: 10,
        };
        let mut rng = stream(3, 0);
        let expected = latin_hypercube(&dom, 1, &mut rng.clone())[0].clone();
        let acq = AcquisitionSpec::ucb(1.0);
        let got = maximize(&acq, &m, &dom, &budget, 1.0, &mut rng).unwrap();
        assert_eq!(got.point, expected);
    }

    #[test]
    fn rejects_wrong_domain() {
        let dom = SearchDomain::cube(0.0, 1.0, 2).unwrap();
        let m = model(&[vec![0.5]], &[1.0]);
        let acq = AcquisitionSpec::ucb(1.0);
        assert!(maximize(&acq, &m, &dom, &MaximizerBudget::for_dim(2), 1.0, &mut stream(0, 0))
            .is_err());
    }
}
