//! Rossler and Lorenz-63 dynamics, the time-averaging operator and the
//! forward map `G = A ∘ S` from parameters to moment summaries.

pub mod dopri;

use std::collections::HashMap;
use std::io::{self, Write};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// Initial state shared by both systems.
pub const Z0: [f64; 3] = [1.0, 0.0, 1.0];

pub const ROSSLER_WINDOW: (f64, f64) = (20.0, 50.0);
pub const ROSSLER_GAMMA_WINDOW: (f64, f64) = (20.0, 500.0);
pub const ROSSLER_GAMMA_SCALE: f64 = 1.0;
pub const LORENZ_WINDOW: (f64, f64) = (10.0, 200.0);
pub const LORENZ_GAMMA_WINDOW: (f64, f64) = (10.0, 2000.0);
pub const LORENZ_GAMMA_SCALE: f64 = 0.25;

/// Names of the summary components, in wire order.
pub const COMPONENTS: [&str; 9] = [
    "z1", "z2", "z3", "z1^2", "z2^2", "z3^2", "z1*z2", "z1*z3", "z2*z3",
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OdeSystem {
    Rossler { x: f64 },
    Lorenz63 { x: [f64; 3] },
}

impl OdeSystem {
    #[inline]
    fn rhs_into(&self, z: &[f64], dz: &mut [f64]) {
        match *self {
            Self::Rossler { x } => {
                dz[0] = -z[1] - z[2];
                dz[1] = z[0] + 0.2 * z[1];
                dz[2] = 0.2 + z[2] * (z[0] - x);
            }
            Self::Lorenz63 { x } => {
                dz[0] = x[0] * (z[1] - z[0]);
                dz[1] = x[1] * z[0] - z[1] - z[0] * z[2];
                dz[2] = z[0] * z[1] - x[2] * z[2];
            }
        }
    }

    pub fn rhs(&self, z: &[f64; 3]) -> Result<[f64; 3]> {
        check_finite(z, "state")?;
        let mut dz = [0.0; 3];
        self.rhs_into(z, &mut dz);
        Ok(dz)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Spacing of the uniform output grid used for averaging.
    pub output_dt: f64,
    pub max_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-9,
            output_dt: 0.01,
            max_step: 1.0,
        }
    }
}

impl IntegratorConfig {
    /// Same grid, tolerances divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rtol: self.rtol / factor,
            atol: self.atol / factor,
            ..*self
        }
    }

    pub fn tolerances(&self) -> dopri::Tolerances {
        dopri::Tolerances {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("output_dt", self.output_dt),
            ("max_step", self.max_step),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// States sampled at increasing times.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<[f64; 3]>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<[f64; 3]>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: states.len(),
            });
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("trajectory times must increase".into()));
        }
        Ok(Self { times, states })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[[f64; 3]] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index range of samples inside `window`, allowing for grid rounding.
    fn window_range(&self, window: (f64, f64)) -> Result<std::ops::Range<usize>> {
        let (a, b) = window;
        if !(a < b) {
            return Err(Error::InvalidArgument(format!("empty window [{a}, {b}]")));
        }
        let slack = 1e-9 * (b - a).max(1.0);
        let start = self.times.partition_point(|&t| t < a - slack);
        let end = self.times.partition_point(|&t| t <= b + slack);
        let covered = start < end
            && self.times[start] <= a + slack
            && self.times[end - 1] >= b - slack
            && end - start >= 2;
        if !covered {
            return Err(Error::InvalidArgument(format!(
                "window [{a}, {b}] is not covered by the trajectory"
            )));
        }
        Ok(start..end)
    }
}

/// Uniform grid `t0, t0 + dt, ...` up to `t1`.
pub fn uniform_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt + 1e-9).floor() as usize;
    (0..=n).map(|k| (t0 + k as f64 * dt).min(t1)).collect()
}

fn check_span(t_span: (f64, f64)) -> Result<()> {
    if t_span.0 < t_span.1 && t_span.0.is_finite() && t_span.1.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "integration span [{}, {}] is empty",
            t_span.0, t_span.1
        )))
    }
}

fn integrate_on(
    system: &OdeSystem,
    z0: [f64; 3],
    t0: f64,
    times: &[f64],
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    config.validate()?;
    check_finite(&z0, "initial state")?;
    let t1 = *times.last().expect("nonempty output grid");
    let mut states = Vec::with_capacity(times.len());
    dopri::solve(
        |z, dz| system.rhs_into(z, dz),
        &z0,
        t0,
        t1,
        times,
        &config.tolerances(),
        |_, z| states.push([z[0], z[1], z[2]]),
    )?;
    Trajectory::new(times.to_vec(), states)
}

/// Integrate from `z0` at `t_span.0`, sampling the dense output on the
/// uniform `output_dt` grid over the span.
pub fn integrate(
    system: &OdeSystem,
    z0: [f64; 3],
    t_span: (f64, f64),
    config: &IntegratorConfig,
) -> Result<Trajectory> {
    check_span(t_span)?;
    config.validate()?;
    let times = uniform_grid(t_span.0, t_span.1, config.output_dt);
    integrate_on(system, z0, t_span.0, &times, config)
}

/// Time averages of `(z, z^2, cross products)` over a window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary(pub [f64; 9]);

impl MomentSummary {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
fn integrands(z: &[f64; 3]) -> [f64; 9] {
    [
        z[0],
        z[1],
        z[2],
        z[0] * z[0],
        z[1] * z[1],
        z[2] * z[2],
        z[0] * z[1],
        z[0] * z[2],
        z[1] * z[2],
    ]
}

/// Trapezoid-rule time average of the nine summary integrands over `window`.
pub fn averaging_operator(traj: &Trajectory, window: (f64, f64)) -> Result<MomentSummary> {
    let r = traj.window_range(window)?;
    let (t, s) = (&traj.times[r.clone()], &traj.states[r]);
    let mut acc = [0.0; 9];
    let mut prev = integrands(&s[0]);
    for i in 1..t.len() {
        let cur = integrands(&s[i]);
        let h = t[i] - t[i - 1];
        for j in 0..9 {
            acc[j] += 0.5 * h * (prev[j] + cur[j]);
        }
        prev = cur;
    }
    let len = t[t.len() - 1] - t[0];
    Ok(MomentSummary(acc.map(|a| a / len)))
}

/// Scale times the sample variance of each summary integrand over `window`.
pub fn gamma_from_trajectory(traj: &Trajectory, window: (f64, f64), scale: f64) -> Result<[f64; 9]> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise scale must be positive, got {scale}")));
    }
    let r = traj.window_range(window)?;
    let n = r.len() as f64;
    let mut mean = [0.0; 9];
    for s in &traj.states[r.clone()] {
        for (m, v) in mean.iter_mut().zip(integrands(s)) {
            *m += v;
        }
    }
    let mean = mean.map(|m| m / n);
    let mut var = [0.0; 9];
    for s in &traj.states[r] {
        for ((acc, v), m) in var.iter_mut().zip(integrands(s)).zip(mean) {
            *acc += (v - m).powi(2);
        }
    }
    let mut gamma = [0.0; 9];
    for j in 0..9 {
        let v = var[j] / (n - 1.0);
        // Rounding noise around a constant signal counts as zero.
        if !(v > (1e-12 * mean[j]).powi(2)) {
            return Err(Error::ZeroVariance {
                component: COMPONENTS[j],
            });
        }
        gamma[j] = scale * v;
    }
    Ok(gamma)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemFamily {
    Rossler,
    Lorenz63,
}

impl SystemFamily {
    pub fn parameter_dim(self) -> usize {
        match self {
            Self::Rossler => 1,
            Self::Lorenz63 => 3,
        }
    }

    pub fn system(self, x: &[f64]) -> Result<OdeSystem> {
        crate::error::check_dim(self.parameter_dim(), x.len())?;
        check_finite(x, "parameter")?;
        Ok(match self {
            Self::Rossler => OdeSystem::Rossler { x: x[0] },
            Self::Lorenz63 => OdeSystem::Lorenz63 {
                x: [x[0], x[1], x[2]],
            },
        })
    }
}

/// What a forward-map evaluation integrates and averages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardMapSpec {
    pub family: SystemFamily,
    pub window: (f64, f64),
    pub integrator: IntegratorConfig,
    pub z0: [f64; 3],
}

impl ForwardMapSpec {
    pub fn rossler() -> Self {
        Self {
            family: SystemFamily::Rossler,
            window: ROSSLER_WINDOW,
            integrator: IntegratorConfig::default(),
            z0: Z0,
        }
    }

    pub fn lorenz() -> Self {
        Self {
            family: SystemFamily::Lorenz63,
            window: LORENZ_WINDOW,
            integrator: IntegratorConfig::default(),
            z0: Z0,
        }
    }

    fn trajectory(&self, x: &[f64], window: (f64, f64)) -> Result<Trajectory> {
        check_span(window)?;
        self.integrator.validate()?;
        let system = self.family.system(x)?;
        let times = uniform_grid(window.0, window.1, self.integrator.output_dt);
        integrate_on(&system, self.z0, window.0.min(0.0), &times, &self.integrator)
    }
}

/// `G(x)`: integrate from `z0` at time 0 and average over the window.
pub fn forward_map(x: &[f64], spec: &ForwardMapSpec) -> Result<MomentSummary> {
    let traj = spec.trajectory(x, spec.window)?;
    averaging_operator(&traj, spec.window)
}

/// Diagonal observation covariance from a long run at `x_star`.
pub fn estimate_gamma(
    spec: &ForwardMapSpec,
    x_star: &[f64],
    long_window: (f64, f64),
    scale: f64,
) -> Result<[f64; 9]> {
    if long_window.0 > spec.window.0 || long_window.1 < spec.window.1 {
        return Err(Error::InvalidArgument(
            "variance window must contain the averaging window".into(),
        ));
    }
    let traj = spec.trajectory(x_star, long_window)?;
    gamma_from_trajectory(&traj, long_window, scale)
}

/// Synthetic data `D = G(x*) + eta`, `eta ~ N(0, diag(gamma))`.
pub fn make_data(g_star: &MomentSummary, gamma: &[f64; 9], rng: &mut impl Rng) -> Result<MomentSummary> {
    if gamma.iter().any(|g| !(*g >= 0.0 && g.is_finite())) {
        return Err(Error::InvalidArgument("noise variances must be nonnegative".into()));
    }
    let mut d = g_star.0;
    for (v, g) in d.iter_mut().zip(gamma) {
        let e: f64 = rng.sample(StandardNormal);
        *v += g.sqrt() * e;
    }
    Ok(MomentSummary(d))
}

/// Forward map with a per-experiment cache keyed on the exact parameter bits.
#[derive(Debug)]
pub struct ForwardMap {
    spec: ForwardMapSpec,
    cache: Mutex<HashMap<Vec<u64>, MomentSummary>>,
    integrations: AtomicUsize,
}

impl ForwardMap {
    pub fn new(spec: ForwardMapSpec) -> Self {
        Self {
            spec,
            cache: Mutex::new(HashMap::new()),
            integrations: AtomicUsize::new(0),
        }
    }

    pub fn spec(&self) -> &ForwardMapSpec {
        &self.spec
    }

    pub fn eval(&self, x: &[f64]) -> Result<MomentSummary> {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        if let Some(g) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(*g);
        }
        let g = forward_map(x, &self.spec)?;
        self.integrations.fetch_add(1, Ordering::Relaxed);
        self.cache.lock().expect("cache lock").insert(key, g);
        Ok(g)
    }

    /// Number of integrations actually performed (cache misses).
    pub fn integrations(&self) -> usize {
        self.integrations.load(Ordering::Relaxed)
    }
}

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> io::Result<()> {
    writeln!(w, "time,z1,z2,z3")?;
    for (t, z) in traj.times.iter().zip(&traj.states) {
        writeln!(w, "{t},{},{},{}", z[0], z[1], z[2])?;
    }
    Ok(())
}

pub fn write_moments_csv<W: Write>(rows: &[MomentSummary], mut w: W) -> io::Result<()> {
    writeln!(w, "{}", COMPONENTS.join(","))?;
    for m in rows {
        let cells: Vec<String> = m.0.iter().map(f64::to_string).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
