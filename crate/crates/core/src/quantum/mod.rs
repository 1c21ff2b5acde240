//! One-dimensional quantum evolution: exact oscillator flow and perturbed numerical flow.

mod io;
mod krylov;
mod mehler;
mod propagate;
mod states;

pub use io::*;
pub use mehler::*;
pub use propagate::*;
pub use states::*;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

#[derive(Debug, Error)]
pub enum QuantumError {
    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid too small: edge amplitude {edge:e} exceeds {limit:e}")]
    GridTooSmall { edge: f64, limit: f64 },
    #[error("tridiagonal solve failed at row {0}")]
    LinearSolve(usize),
    #[error("field dimension {0} unsupported; quantum grids are one-dimensional")]
    Dimension(usize),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("metadata: {0}")]
    Json(#[from] serde_json::Error),
}

/// Uniform grid `x_j = -L + j dx`, `dx = 2L/N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub half_width: f64,
    pub n_points: usize,
}

impl SpatialGrid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self, QuantumError> {
        if !n_points.is_power_of_two() || n_points < 2 {
            return Err(QuantumError::NotPowerOfTwo(n_points));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(QuantumError::InvalidParameter(format!("half width {half_width} must be positive")));
        }
        Ok(Self { half_width, n_points })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.x(j)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let scale = 2.0 * std::f64::consts::PI / (n as f64 * self.dx());
        (0..n).map(|k| if k < n / 2 { k as f64 } else { k as f64 - n as f64 } * scale).collect()
    }

    /// Largest resolved wavenumber `π/dx`.
    pub fn nyquist(&self) -> f64 {
        std::f64::consts::PI / self.dx()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub grid: SpatialGrid,
    pub values: Vec<C64>,
}

impl WaveFunction {
    pub fn new(grid: SpatialGrid, values: Vec<C64>) -> Self {
        assert_eq!(values.len(), grid.n_points);
        Self { grid, values }
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self { grid, values: vec![C64::new(0.0, 0.0); grid.n_points] }
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> C64) -> Self {
        Self { grid, values: (0..grid.n_points).map(|j| f(grid.x(j))).collect() }
    }

    /// Trapezoid-rule `L²` norm (end points carry the Dirichlet zeros).
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()).sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for v in &mut self.values {
                *v /= n;
            }
        }
    }

    pub fn distance(&self, other: &WaveFunction) -> f64 {
        (self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * self.grid.dx()).sqrt()
    }

    pub fn inner(&self, other: &WaveFunction) -> C64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<C64>() * self.grid.dx()
    }

    pub fn scale(&mut self, c: C64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// Largest `|u|` over the outermost `m` nodes on either side.
    pub fn edge_amplitude(&self, m: usize) -> f64 {
        let n = self.values.len();
        let m = m.min(n / 2);
        self.values[..m].iter().chain(&self.values[n - m..]).map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn position_mean(&self) -> f64 {
        let w: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        self.values.iter().enumerate().map(|(j, v)| self.grid.x(j) * v.norm_sqr()).sum::<f64>() / w
    }
}

/// Complex field on a uniform `(t, x)` rectangle; row `k` holds `u(t_k, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub t0: f64,
    pub t1: f64,
    pub grid: SpatialGrid,
    pub values: Array2<C64>,
}

impl SpaceTimeField {
    pub fn n_t(&self) -> usize {
        self.values.nrows()
    }

    pub fn dt(&self) -> f64 {
        if self.n_t() < 2 {
            0.0
        } else {
            (self.t1 - self.t0) / (self.n_t() - 1) as f64
        }
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_t()).map(|k| self.time(k)).collect()
    }

    pub fn row(&self, k: usize) -> WaveFunction {
        WaveFunction::new(self.grid, self.values.row(k).to_vec())
    }

    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.n_t()).map(|k| self.row(k).norm()).collect()
    }

    /// Space-time `L²` norm by the rectangle rule.
    pub fn norm(&self) -> f64 {
        let dt = if self.n_t() < 2 { 1.0 } else { self.dt() };
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dt * self.grid.dx()).sqrt()
    }

    pub fn from_rows(t0: f64, t1: f64, rows: &[WaveFunction]) -> Self {
        let grid = rows[0].grid;
        let mut values = Array2::zeros((rows.len(), grid.n_points));
        for (k, r) in rows.iter().enumerate() {
            for (j, v) in r.values.iter().enumerate() {
                values[[k, j]] = *v;
            }
        }
        Self { t0, t1, grid, values }
    }

    pub fn from_fn(t0: f64, t1: f64, n_t: usize, grid: SpatialGrid, f: impl Fn(f64, f64) -> C64) -> Self {
        let dt = if n_t < 2 { 0.0 } else { (t1 - t0) / (n_t - 1) as f64 };
        let values = Array2::from_shape_fn((n_t, grid.n_points), |(k, j)| f(t0 + k as f64 * dt, grid.x(j)));
        Self { t0, t1, grid, values }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Cayley stepping of the finite-difference divergence-form Hamiltonian.
    #[default]
    CrankNicolson,
    /// Strang splitting: exact oscillator steps around a Krylov step of the perturbation.
    SplitMehler,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    Dirichlet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MehlerQuadrature {
    /// `O(N²)` kernel sum.
    KernelDirect,
    /// Quarter-period reduction with chirp-z evaluation of the kernel sum.
    #[default]
    QuarterPeriodComposition,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_krylov_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default)]
    pub mehler_quadrature: MehlerQuadrature,
    #[serde(default = "default_krylov_tol")]
    pub krylov_tol: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            scheme: Scheme::default(),
            boundary: Boundary::default(),
            mehler_quadrature: MehlerQuadrature::default(),
            krylov_tol: default_krylov_tol(),
        }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<(), QuantumError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(QuantumError::InvalidParameter(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.krylov_tol > 0.0) {
            return Err(QuantumError::InvalidParameter("krylov tolerance must be positive".into()));
        }
        Ok(())
    }
}
