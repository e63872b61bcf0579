//! Search domains, the objective-oracle interface and the benchmark functions.
//!
//! Benchmarks are stated for maximization: each function returns the negated
//! textbook (minimization) expression so that the optimum value is `f* = 0`.

use std::f64::consts::{E, PI};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, check_finite, Error, Result};

/// Axis-aligned box `[lo_1, hi_1] x ... x [lo_d, hi_d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDomain", into = "RawDomain")]
pub struct SearchDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl TryFrom<RawDomain> for SearchDomain {
    type Error = Error;
    fn try_from(r: RawDomain) -> Result<Self> {
        SearchDomain::new(r.lo, r.hi)
    }
}

impl From<SearchDomain> for RawDomain {
    fn from(d: SearchDomain) -> Self {
        RawDomain { lo: d.lo, hi: d.hi }
    }
}

impl SearchDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() {
            return Err(Error::DegenerateDomain("dimension must be at least 1".into()));
        }
        check_dim(lo.len(), hi.len())?;
        for (i, (a, b)) in lo.iter().zip(&hi).enumerate() {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::DegenerateDomain(format!(
                    "axis {i}: lo = {a}, hi = {b}"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[lo, hi]^d`.
    pub fn cube(lo: f64, hi: f64, d: usize) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    pub fn diameter(&self) -> f64 {
        (0..self.dim())
            .map(|j| self.width(j).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.width(j)).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn clip(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (a, b))| v.clamp(*a, *b))
            .collect()
    }
}

/// A black-box objective `point -> real`. Exact (noise-free) evaluations.
pub trait Oracle {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64>;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

impl<O: Oracle + ?Sized> Oracle for Box<O> {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        (**self).evaluate(x)
    }
}

/// Adapts a closure to [`Oracle`].
pub struct FnOracle<F>(pub F);

impl<F: FnMut(&[f64]) -> f64> Oracle for FnOracle<F> {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        Ok((self.0)(x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveId {
    Ackley,
    Rastrigin,
    Levy,
    #[serde(rename = "quadratic1d")]
    Quadratic1D,
    ExternalProcess,
}

impl ObjectiveId {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Ackley => "ackley",
            Self::Rastrigin => "rastrigin",
            Self::Levy => "levy",
            Self::Quadratic1D => "quadratic1d",
            Self::ExternalProcess => "external_process",
        }
    }
}

impl std::str::FromStr for ObjectiveId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ackley" => Ok(Self::Ackley),
            "rastrigin" => Ok(Self::Rastrigin),
            "levy" => Ok(Self::Levy),
            "quadratic1d" => Ok(Self::Quadratic1D),
            "external_process" | "external" => Ok(Self::ExternalProcess),
            other => Err(Error::Config(format!("unknown objective '{other}'"))),
        }
    }
}

/// Standard search box for a benchmark in dimension `d`.
/// `Quadratic1D` is always one-dimensional.
pub fn domain_for(id: ObjectiveId, d: usize) -> Result<SearchDomain> {
    match id {
        ObjectiveId::Ackley => SearchDomain::cube(-32.768, 32.768, d),
        ObjectiveId::Rastrigin => SearchDomain::cube(-5.12, 5.12, d),
        ObjectiveId::Levy => SearchDomain::cube(-10.0, 10.0, d),
        ObjectiveId::Quadratic1D => SearchDomain::cube(0.0, 1.0, 1),
        ObjectiveId::ExternalProcess => Err(Error::Config(
            "external objectives have no built-in domain".into(),
        )),
    }
}

/// An analytic benchmark objective with known optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct Objective {
    pub id: ObjectiveId,
    pub domain: SearchDomain,
    pub f_star: Option<f64>,
    pub x_star: Option<Vec<f64>>,
}

impl Objective {
    pub fn benchmark(id: ObjectiveId, d: usize) -> Result<Self> {
        let domain = domain_for(id, d)?;
        let d = domain.dim();
        let x_star = match id {
            ObjectiveId::Ackley | ObjectiveId::Rastrigin => vec![0.0; d],
            ObjectiveId::Levy => vec![1.0; d],
            ObjectiveId::Quadratic1D => vec![0.3],
            ObjectiveId::ExternalProcess => unreachable!("rejected by domain_for"),
        };
        Ok(Self {
            id,
            domain,
            f_star: Some(0.0),
            x_star: Some(x_star),
        })
    }

    /// Evaluate at `x`; points outside the domain are clipped with a warning.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.domain.dim(), x.len())?;
        check_finite(x, "objective argument")?;
        let clipped;
        let x = if self.domain.contains(x) {
            x
        } else {
            log::warn!("{} evaluated outside its domain; clipping {:?}", self.id.name(), x);
            clipped = self.domain.clip(x);
            &clipped
        };
        match self.id {
            ObjectiveId::Ackley => Ok(-ackley(x)),
            ObjectiveId::Rastrigin => Ok(-rastrigin(x)),
            ObjectiveId::Levy => Ok(-levy(x)),
            ObjectiveId::Quadratic1D => Ok(-(x[0] - 0.3).powi(2)),
            ObjectiveId::ExternalProcess => Err(Error::External(
                "use ExternalObjective for process-backed objectives".into(),
            )),
        }
    }
}

impl Oracle for Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        self.eval(x)
    }
}

/// Minimization form of the Ackley function.
pub fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

/// Minimization form of the Rastrigin function.
pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}

/// Minimization form of the Levy function.
pub fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let d = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let mid: f64 = w[..d - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let wd = w[d - 1];
    let tail = (wd - 1.0).powi(2) * (1.0 + (2.0 * PI * wd).sin().powi(2));
    head + mid + tail
}

/// Objective served by a child process over a line protocol: one request
/// line of whitespace-separated decimals, one response line holding a
/// single decimal.
pub struct ExternalObjective {
    pub domain: SearchDomain,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl ExternalObjective {
    pub fn spawn(program: &str, args: &[String], domain: SearchDomain) -> Result<Self> {
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::External(format!("cannot start '{program}': {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self {
            domain,
            child,
            stdin,
            stdout,
        })
    }
}

impl Oracle for ExternalObjective {
    fn evaluate(&mut self, x: &[f64]) -> Result<f64> {
        check_dim(self.domain.dim(), x.len())?;
        check_finite(x, "objective argument")?;
        let line = x
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Error::External(format!("write failed: {e}")))?;
        let mut reply = String::new();
        let n = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| Error::External(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(Error::External("objective process exited mid-run".into()));
        }
        let v: f64 = reply
            .trim()
            .parse()
            .map_err(|_| Error::External(format!("unparseable reply '{}'", reply.trim())))?;
        if !v.is_finite() {
            return Err(Error::External(format!("non-finite reply {v}")));
        }
        Ok(v)
    }
}

impl Drop for ExternalObjective {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
