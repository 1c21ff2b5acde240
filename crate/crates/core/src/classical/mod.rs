//! Classical Hamiltonian flows and their high-energy limits.
//!
//! All flows are written for general dimension `d`; the quantum side only uses `d = 1`.

mod flows;
mod limit;
mod mourre;
mod symbol;

pub use flows::*;
pub use limit::*;
pub use mourre::*;
pub use symbol::*;

use crate::ode::{OdeConfig, OdeError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, xi: Vec<f64>) -> Self {
        Self { x, xi }
    }

    pub fn scalar(x: f64, xi: f64) -> Self {
        Self { x: vec![x], xi: vec![xi] }
    }

    pub(crate) fn from_state(state: &[f64], d: usize) -> Self {
        Self { x: state[..d].to_vec(), xi: state[d..2 * d].to_vec() }
    }

    pub(crate) fn to_state(&self) -> Vec<f64> {
        let mut s = self.x.clone();
        s.extend_from_slice(&self.xi);
        s
    }

    pub fn distance(&self, other: &PhasePoint) -> f64 {
        let dx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| (a - b).powi(2)).sum();
        let dxi: f64 = self.xi.iter().zip(&other.xi).map(|(a, b)| (a - b).powi(2)).sum();
        (dx + dxi).sqrt()
    }
}

/// Point `(t, x, τ, ξ)` of the extended phase space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtendedPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub tau: f64,
    pub xi: Vec<f64>,
}

impl ExtendedPoint {
    pub fn new(t: f64, x: Vec<f64>, tau: f64, xi: Vec<f64>) -> Self {
        Self { t, x, tau, xi }
    }

    pub fn scalar(t: f64, x: f64, tau: f64, xi: f64) -> Self {
        Self::new(t, vec![x], tau, vec![xi])
    }

    /// Flattened as `(t, x…, τ, ξ…)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.t];
        v.extend_from_slice(&self.x);
        v.push(self.tau);
        v.extend_from_slice(&self.xi);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let d = (v.len() - 2) / 2;
        Self { t: v[0], x: v[1..1 + d].to_vec(), tau: v[1 + d], xi: v[2 + d..].to_vec() }
    }

    pub fn distance(&self, other: &ExtendedPoint) -> f64 {
        crate::numerics::dist2(&self.to_vec(), &other.to_vec())
    }
}

/// Point of `R^{1+d} × S^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub tau_hat: f64,
    pub xi_hat: Vec<f64>,
}

impl DirectionPoint {
    /// Projects an arbitrary nonzero dual vector onto the unit sphere.
    pub fn normalized(t: f64, x: Vec<f64>, tau: f64, xi: Vec<f64>) -> Self {
        let n = (tau * tau + xi.iter().map(|v| v * v).sum::<f64>()).sqrt();
        Self { t, x, tau_hat: tau / n, xi_hat: xi.iter().map(|v| v / n).collect() }
    }

    pub fn sphere_defect(&self) -> f64 {
        (self.tau_hat * self.tau_hat + self.xi_hat.iter().map(|v| v * v).sum::<f64>() - 1.0).abs()
    }

    /// Euclidean distance of the dual parts.
    pub fn dual_distance(&self, other: &DirectionPoint) -> f64 {
        let dt = self.tau_hat - other.tau_hat;
        let dx: f64 = self.xi_hat.iter().zip(&other.xi_hat).map(|(a, b)| (a - b).powi(2)).sum();
        (dt * dt + dx).sqrt()
    }
}

fn default_schedule() -> Vec<f64> {
    vec![100.0, 300.0, 1000.0, 3000.0, 10000.0, 30000.0, 100000.0]
}

fn default_kappa_samples() -> usize {
    2001
}

fn default_nontrap_slope() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    #[serde(default)]
    pub ode: OdeConfig,
    #[serde(default = "default_schedule")]
    pub lambda_schedule: Vec<f64>,
    #[serde(default = "default_kappa_samples")]
    pub kappa_samples: usize,
    /// Minimum log-log growth slope of `|x(0)|` accepted as escape.
    #[serde(default = "default_nontrap_slope")]
    pub nontrap_slope: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            ode: OdeConfig::default(),
            lambda_schedule: default_schedule(),
            kappa_samples: default_kappa_samples(),
            nontrap_slope: default_nontrap_slope(),
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<(), ClassicalError> {
        match self.ode.method {
            crate::ode::Method::Rk4 { dt } if !(dt > 0.0) => {
                return Err(ClassicalError::Config(format!("rk4 step must be positive, got {dt}")))
            }
            crate::ode::Method::Rk45 { rtol, atol } if !(rtol > 0.0 && atol > 0.0) => {
                return Err(ClassicalError::Config("rk45 tolerances must be positive".into()))
            }
            _ => {}
        }
        if self.lambda_schedule.len() < 3 {
            return Err(ClassicalError::Config("lambda schedule needs at least three entries".into()));
        }
        if self.lambda_schedule.windows(2).any(|w| !(w[1] > w[0])) || self.lambda_schedule[0] < 1.0 {
            return Err(ClassicalError::Config("lambda schedule must be strictly increasing and ≥ 1".into()));
        }
        if self.kappa_samples < 5 {
            return Err(ClassicalError::Config("kappa grid needs at least five samples".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassicalError {
    #[error("integration failed: {0}")]
    Integration(#[from] OdeError),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("trajectory is not certified non-trapping (radii {radii:?})")]
    Trapping { radii: Vec<f64> },
    #[error("λ-limit did not converge; residuals {residuals:?}")]
    NonConvergence { residuals: Vec<f64> },
}

// Small dense helpers. Matrices are row-major `d × d`, gradients `[k][i][j]`.

pub(crate) fn mat_vec(a: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|i| (0..d).map(|j| a[i * d + j] * v[j]).sum()).collect()
}

pub(crate) fn quad(a: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let d = u.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += a[i * d + j] * u[i] * v[j];
        }
    }
    s
}

/// `k ↦ Σ_ij ∂_k a_ij u_i u_j`.
pub(crate) fn grad_quad(da: &[f64], u: &[f64]) -> Vec<f64> {
    let d = u.len();
    (0..d).map(|k| quad(&da[k * d * d..(k + 1) * d * d], u, u)).collect()
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}
