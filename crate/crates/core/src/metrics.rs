//! Regret, fill distance and empirical convergence rates.

use crate::error::{check_dim, Error, Result};
use crate::kernels::squared_distance;

/// Simple and cumulative regret traces of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretCurve {
    pub f_star: f64,
    pub simple: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl RegretCurve {
    pub fn new(f_star: f64, values: &[f64]) -> Self {
        Self {
            f_star,
            simple: simple_regret(f_star, values),
            cumulative: cumulative_regret(f_star, values),
        }
    }
}

/// `S_T = f* - max_{t <= T} f(x_t)` for every prefix.
pub fn simple_regret(f_star: f64, values: &[f64]) -> Vec<f64> {
    let mut best = f64::NEG_INFINITY;
    values
        .iter()
        .map(|&v| {
            best = best.max(v);
            f_star - best
        })
        .collect()
}

/// Running sum of the instantaneous regrets `f* - f(x_t)`.
pub fn cumulative_regret(f_star: f64, values: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    values
        .iter()
        .map(|&v| {
            sum += f_star - v;
            sum
        })
        .collect()
}

/// Largest distance from a reference point to its nearest design point,
/// a finite stand-in for the supremum over the whole domain.
pub fn fill_distance(reference: &[Vec<f64>], design: &[Vec<f64>]) -> Result<f64> {
    let Some(first) = design.first() else {
        return Err(Error::InvalidArgument("fill distance of an empty design".into()));
    };
    if reference.is_empty() {
        return Err(Error::InvalidArgument("fill distance over an empty reference set".into()));
    }
    let d = first.len();
    for p in design.iter().chain(reference) {
        check_dim(d, p.len())?;
    }
    let worst = reference
        .iter()
        .map(|r| {
            design
                .iter()
                .map(|p| squared_distance(r, p))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(worst.sqrt())
}

/// Least-squares slope of `ln values` against `ln counts`.
pub fn fit_rate(counts: &[usize], values: &[f64]) -> Result<f64> {
    check_dim(counts.len(), values.len())?;
    if counts.len() < 3 {
        return Err(Error::InvalidArgument("rate fit needs at least 3 points".into()));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!("rate fit needs positive values, got {v}")));
    }
    if counts.contains(&0) {
        return Err(Error::InvalidArgument("rate fit needs positive counts".into()));
    }
    let xs: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate fit needs distinct counts".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}
