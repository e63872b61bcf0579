//! Gaussian process interpolation of exact (noise-free) observations.
//!
//! With `lambda = 0` the posterior is
//! `mu(x) = k_t(x)^T K^{-1} F` and `sigma^2(x) = k(x,x) - k_t(x)^T K^{-1} k_t(x)`;
//! a positive `lambda` gives the regularized variant with `K + lambda I`.
//! A floor jitter from the kernel ladder is always added for conditioning.

use crate::error::{check_dim, check_finite, Error, Result};
use crate::kernels::{factor_with_jitter, gram_matrix, squared_distance, KernelSpec};
use crate::linalg::Cholesky;

/// Duplicate tolerance relative to the search-domain diameter.
pub const DUPLICATE_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Negative variances above this are rounding noise and clamped to zero.
const VARIANCE_CLAMP: f64 = 1e-8;

/// Design points and their exact observations.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    dim: usize,
    flat: Vec<f64>,
    values: Vec<f64>,
    tolerance: f64,
}

impl TrainingSet {
    /// Empty set; points closer than `tolerance` to an existing point are
    /// rejected as duplicates.
    pub fn new(dim: usize, tolerance: f64) -> Self {
        Self {
            dim,
            flat: Vec::new(),
            values: Vec::new(),
            tolerance,
        }
    }

    pub fn from_points(points: &[Vec<f64>], values: &[f64], tolerance: f64) -> Result<Self> {
        check_dim(points.len(), values.len())?;
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidArgument("empty training set".into()))?;
        let mut set = Self::new(dim, tolerance);
        for (p, &f) in points.iter().zip(values) {
            set.push(p, f)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, x: &[f64], f: f64) -> Result<()> {
        self.check_candidate(x)?;
        if !f.is_finite() {
            return Err(Error::NonFinite(format!("observation {f}")));
        }
        self.flat.extend_from_slice(x);
        self.values.push(f);
        Ok(())
    }

    /// Validate a prospective new point without inserting it.
    pub fn check_candidate(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim, x.len())?;
        check_finite(x, "training point")?;
        if let Some(d) = self.nearest_distance(x) {
            if d <= self.tolerance {
                return Err(Error::DuplicatePoints {
                    distance: d,
                    tolerance: self.tolerance,
                });
            }
        }
        Ok(())
    }

    pub fn nearest_distance(&self, x: &[f64]) -> Option<f64> {
        self.iter_points()
            .map(|p| squared_distance(p, x))
            .min_by(f64::total_cmp)
            .map(f64::sqrt)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.flat[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.flat.chunks_exact(self.dim.max(1)).take(self.values.len())
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.iter_points().map(<[f64]>::to_vec).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Fitted GP interpolant.
#[derive(Clone, Debug)]
pub struct GpModel {
    kernel: KernelSpec,
    data: TrainingSet,
    chol: Cholesky,
    alpha: Vec<f64>,
    jitter_used: f64,
    lambda: f64,
}

impl GpModel {
    pub fn fit(kernel: KernelSpec, data: TrainingSet, lambda: f64) -> Result<Self> {
        Self::fit_from(kernel, data, lambda, 0.0)
    }

    fn fit_from(kernel: KernelSpec, data: TrainingSet, lambda: f64, min_jitter: f64) -> Result<Self> {
        kernel.validate()?;
        if data.is_empty() {
            return Err(Error::InvalidArgument("cannot fit a GP to no data".into()));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        let k = gram_matrix(&kernel, &data.points())?;
        let (chol, jitter_used) = factor_with_jitter(&k, lambda, min_jitter)?;
        let alpha = chol.solve(data.values());
        Ok(Self {
            kernel,
            data,
            chol,
            alpha,
            jitter_used,
            lambda,
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn data(&self) -> &TrainingSet {
        &self.data
    }

    pub fn factor(&self) -> &Cholesky {
        &self.chol
    }

    pub fn weights(&self) -> &[f64] {
        &self.alpha
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter_used
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    fn cross_covariance_into(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.data
                .iter_points()
                .map(|p| self.kernel.correlation_sq(squared_distance(p, x))),
        );
    }

    fn check_query(&self, x: &[f64]) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        check_finite(x, "query point")
    }

    pub fn posterior_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_query(x)?;
        Ok(self.mean_unchecked(x))
    }

    pub(crate) fn mean_unchecked(&self, x: &[f64]) -> f64 {
        self.data
            .iter_points()
            .zip(&self.alpha)
            .map(|(p, a)| a * self.kernel.correlation_sq(squared_distance(p, x)))
            .sum()
    }

    pub fn posterior_var(&self, x: &[f64]) -> Result<f64> {
        Ok(self.predict(x)?.1)
    }

    pub fn posterior_sd(&self, x: &[f64]) -> Result<f64> {
        Ok(self.posterior_var(x)?.sqrt())
    }

    /// Posterior mean and variance together.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_query(x)?;
        let mut buf = Vec::with_capacity(self.data.len());
        self.predict_with(x, &mut buf)
    }

    /// Like [`predict`](Self::predict) but reuses `buf` as scratch space and
    /// skips input validation.
    pub(crate) fn predict_with(&self, x: &[f64], buf: &mut Vec<f64>) -> Result<(f64, f64)> {
        self.cross_covariance_into(x, buf);
        let mean: f64 = buf.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        self.chol.forward_in_place(buf);
        let explained: f64 = buf.iter().map(|v| v * v).sum();
        let var = 1.0 - explained;
        if var < -VARIANCE_CLAMP {
            return Err(Error::NegativeVariance(var));
        }
        Ok((mean, var.clamp(0.0, 1.0)))
    }

    /// Add one observation, extending the Cholesky factor by a row when the
    /// extension stays positive definite and refactoring with more jitter
    /// otherwise.
    pub fn update(&self, x: &[f64], f: f64) -> Result<Self> {
        let mut data = self.data.clone();
        data.push(x, f)?;
        let mut cross = Vec::with_capacity(self.data.len());
        self.cross_covariance_into(x, &mut cross);
        let mut chol = self.chol.clone();
        if chol.extend(&cross, 1.0 + self.lambda + self.jitter_used) {
            let alpha = chol.solve(data.values());
            Ok(Self {
                kernel: self.kernel,
                data,
                chol,
                alpha,
                jitter_used: self.jitter_used,
                lambda: self.lambda,
            })
        } else {
            Self::fit_from(self.kernel, data, self.lambda, self.jitter_used)
        }
    }

    /// Same data, different kernel.
    pub fn refit(&self, kernel: KernelSpec) -> Result<Self> {
        Self::fit(kernel, self.data.clone(), self.lambda)
    }
}
