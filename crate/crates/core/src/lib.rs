//! Noise-free Bayesian optimization with random exploration.
//!
//! The crate covers GP interpolation of exact observations, acquisition
//! maximization, the GP-UCB family of loops with their exploration variants,
//! regret and fill-distance metrics, benchmark objectives, and a surrogate
//! posterior pipeline for parameter inference in chaotic ODE systems.

pub mod acquisition;
pub mod bo_loops;
pub mod design;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod gp;
pub mod inference;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod objectives;

pub use error::{Error, Result};
