//! Stationary unit-amplitude kernels, Gram matrices and lengthscale fitting
//! by maximum marginal likelihood.

mod bessel;

pub use bessel::{bessel_k, bessel_k_scaled};

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{Cholesky, Matrix};

/// Relative jitter levels (times the mean Gram diagonal) tried in order
/// before a factorization is declared failed.
pub const JITTER_LADDER: [f64; 4] = [1e-12, 1e-10, 1e-8, 1e-6];

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Matern,
    SquaredExponential,
}

/// Prior covariance of the Gaussian process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub lengthscale: f64,
    /// Matérn smoothness; ignored for the squared exponential family.
    #[serde(default = "default_smoothness")]
    pub smoothness: f64,
}

fn default_smoothness() -> f64 {
    2.5
}

impl KernelSpec {
    pub fn matern(smoothness: f64, lengthscale: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::Matern,
            lengthscale,
            smoothness,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn squared_exponential(lengthscale: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::SquaredExponential,
            lengthscale,
            smoothness: f64::INFINITY,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lengthscale must be positive and finite, got {}",
                self.lengthscale
            )));
        }
        if self.family == KernelFamily::Matern
            && !(self.smoothness > 0.0 && self.smoothness.is_finite())
        {
            return Err(Error::InvalidArgument(format!(
                "Matérn smoothness must be positive and finite, got {}",
                self.smoothness
            )));
        }
        Ok(())
    }

    pub fn with_lengthscale(&self, lengthscale: f64) -> Self {
        Self {
            lengthscale,
            ..*self
        }
    }

    /// Kernel value as a function of the Euclidean distance `r >= 0`.
    #[inline]
    pub fn correlation(&self, r: f64) -> f64 {
        let s = r / self.lengthscale;
        match self.family {
            KernelFamily::SquaredExponential => (-0.5 * s * s).exp(),
            KernelFamily::Matern => matern(self.smoothness, s),
        }
    }

    /// Kernel value from a squared distance; avoids the square root for the
    /// squared exponential family.
    #[inline]
    pub fn correlation_sq(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => {
                (-0.5 * r2 / (self.lengthscale * self.lengthscale)).exp()
            }
            KernelFamily::Matern => matern(self.smoothness, r2.sqrt() / self.lengthscale),
        }
    }

    /// k(x, y).
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        check_dim(x.len(), y.len())?;
        check_finite(x, "kernel argument")?;
        check_finite(y, "kernel argument")?;
        Ok(self.correlation_sq(squared_distance(x, y)))
    }
}

/// Matérn correlation at scaled distance `s = r / lengthscale`.
fn matern(nu: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    if nu == 0.5 {
        (-s).exp()
    } else if nu == 1.5 {
        let z = 3f64.sqrt() * s;
        (1.0 + z) * (-z).exp()
    } else if nu == 2.5 {
        let z = 5f64.sqrt() * s;
        (1.0 + z + z * z / 3.0) * (-z).exp()
    } else {
        matern_bessel(nu, s)
    }
}

/// General-order Matérn through the Bessel function, evaluated in log space.
pub fn matern_bessel(nu: f64, s: f64) -> f64 {
    if s == 0.0 {
        return 1.0;
    }
    let z = (2.0 * nu).sqrt() * s;
    let log_k = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * z.ln() - z
        + bessel_k_scaled(nu, z).ln();
    log_k.exp().min(1.0)
}

#[inline]
pub fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    squared_distance(x, y).sqrt()
}

fn check_points(points: &[Vec<f64>]) -> Result<usize> {
    let d = points.first().map_or(0, Vec::len);
    for p in points {
        check_dim(d, p.len())?;
        check_finite(p, "point")?;
    }
    Ok(d)
}

/// Gram matrix `K_ij = k(x_i, x_j)`.
pub fn gram_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<Matrix> {
    check_points(points)?;
    let n = points.len();
    let mut k = Matrix::zeros(n);
    for i in 0..n {
        k.set(i, i, 1.0);
        for j in 0..i {
            let v = spec.correlation_sq(squared_distance(&points[i], &points[j]));
            k.set(i, j, v);
            k.set(j, i, v);
        }
    }
    Ok(k)
}

/// Factor `K + shift * I`, escalating through [`JITTER_LADDER`] (scaled by the
/// mean diagonal), skipping levels below `min_jitter`. Returns the factor and
/// the jitter that was used.
pub(crate) fn factor_with_jitter(
    k: &Matrix,
    shift: f64,
    min_jitter: f64,
) -> Result<(Cholesky, f64)> {
    let scale = k.mean_diagonal().max(f64::MIN_POSITIVE);
    if min_jitter > 0.0 && !JITTER_LADDER.iter().any(|j| j * scale >= min_jitter) {
        if let Some(c) = Cholesky::factor(k, shift + min_jitter) {
            return Ok((c, min_jitter));
        }
        return Err(Error::FactorizationFailure {
            last_jitter: min_jitter,
        });
    }
    let mut last = 0.0;
    for level in JITTER_LADDER.iter().map(|j| j * scale) {
        if level < min_jitter {
            continue;
        }
        last = level;
        if let Some(c) = Cholesky::factor(k, shift + level) {
            return Ok((c, level));
        }
    }
    Err(Error::FactorizationFailure { last_jitter: last })
}

/// Zero-mean GP log evidence
/// `-1/2 F^T (K + jitter I)^{-1} F - 1/2 log|K + jitter I| - t/2 log 2 pi`.
///
/// If `K + jitter I` cannot be factored the jitter is escalated through the
/// ladder before giving up.
pub fn log_marginal_likelihood(
    spec: &KernelSpec,
    points: &[Vec<f64>],
    values: &[f64],
    jitter: f64,
) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("log likelihood of empty data".into()));
    }
    check_dim(points.len(), values.len())?;
    check_finite(values, "observation")?;
    let k = gram_matrix(spec, points)?;
    let chol = match Cholesky::factor(&k, jitter) {
        Some(c) => c,
        None => factor_with_jitter(&k, 0.0, jitter)?.0,
    };
    Ok(log_evidence(&chol, values))
}

fn log_evidence(chol: &Cholesky, values: &[f64]) -> f64 {
    let mut w = values.to_vec();
    chol.forward_in_place(&mut w);
    let quad: f64 = w.iter().map(|v| v * v).sum();
    -0.5 * quad - 0.5 * chol.log_det() - 0.5 * values.len() as f64 * LN_2PI
}

/// Candidate lengthscales for the maximum-likelihood search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthscaleGrid {
    pub values: Vec<f64>,
}

impl LengthscaleGrid {
    pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo > 0.0 && hi >= lo && n >= 1) {
            return Err(Error::InvalidArgument(format!(
                "bad lengthscale grid [{lo}, {hi}] x {n}"
            )));
        }
        let values = if n == 1 {
            vec![lo]
        } else {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        };
        Ok(Self { values })
    }

    /// 25 log-spaced values spanning `[1e-2, 1e2]` times the domain diameter.
    pub fn for_diameter(diameter: f64) -> Self {
        Self::log_spaced(1e-2 * diameter, 1e2 * diameter, 25)
            .expect("diameter must be positive")
    }
}

/// Select the lengthscale with maximal log marginal likelihood over `grid`,
/// keeping the family and smoothness of `spec`. Ties go to the smallest
/// lengthscale.
pub fn fit_hyperparameters(
    spec: &KernelSpec,
    points: &[Vec<f64>],
    values: &[f64],
    grid: &LengthscaleGrid,
) -> Result<KernelSpec> {
    check_dim(points.len(), values.len())?;
    if points.len() < 2 {
        return Err(Error::InvalidArgument(
            "hyperparameter fitting needs at least two points".into(),
        ));
    }
    let mut candidates = grid.values.clone();
    candidates.sort_by(f64::total_cmp);
    let mut best: Option<(f64, f64)> = None;
    let mut last_jitter = 0.0;
    for ell in candidates {
        let cand = spec.with_lengthscale(ell);
        if cand.validate().is_err() {
            continue;
        }
        let k = gram_matrix(&cand, points)?;
        match factor_with_jitter(&k, 0.0, 0.0) {
            Ok((chol, _)) => {
                let lml = log_evidence(&chol, values);
                if lml.is_finite() && best.map_or(true, |(b, _)| lml > b) {
                    best = Some((lml, ell));
                }
            }
            Err(Error::FactorizationFailure { last_jitter: j }) => last_jitter = j,
            Err(e) => return Err(e),
        }
    }
    best.map(|(_, ell)| spec.with_lengthscale(ell))
        .ok_or(Error::FactorizationFailure { last_jitter })
}
