use super::krylov::expm_hermitian;
use super::mehler::MehlerEngine;
use super::{PropagatorConfig, QuantumError, Scheme, SpaceTimeField, SpatialGrid, WaveFunction, C64};
use crate::model::PerturbationField;
use log::warn;
use rayon::prelude::*;

/// Edge density `|u|²` above which a run is reported as feeling the Dirichlet walls.
pub const BOUNDARY_DENSITY_LIMIT: f64 = 1e-8;

/// Largest `|u|²` over the four outermost nodes on either side.
pub fn boundary_density(u: &WaveFunction) -> f64 {
    u.edge_amplitude(4).powi(2)
}

fn check_field(field: &dyn PerturbationField) -> Result<(), QuantumError> {
    if field.dim() != 1 {
        return Err(QuantumError::Dimension(field.dim()));
    }
    Ok(())
}

/// Time stepper for `i∂_t u = H(t)u`, `H = ½p a p + ½x² + V`, on one grid.
pub struct Stepper<'a> {
    field: &'a dyn PerturbationField,
    cfg: PropagatorConfig,
    grid: SpatialGrid,
    engine: Option<MehlerEngine>,
    max_edge: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(field: &'a dyn PerturbationField, grid: SpatialGrid, cfg: &PropagatorConfig) -> Result<Self, QuantumError> {
        check_field(field)?;
        cfg.validate()?;
        let engine = match cfg.scheme {
            Scheme::SplitMehler => Some(MehlerEngine::new(grid)),
            Scheme::CrankNicolson => None,
        };
        Ok(Self { field, cfg: *cfg, grid, engine, max_edge: 0.0 })
    }

    /// Largest boundary density seen so far.
    pub fn max_boundary_density(&self) -> f64 {
        self.max_edge
    }

    /// Advances `u` from `t_from` to `t_to` in equal steps no longer than `cfg.dt`.
    pub fn advance(&mut self, u: &mut WaveFunction, t_from: f64, t_to: f64) -> Result<(), QuantumError> {
        let span = t_to - t_from;
        if span == 0.0 {
            return Ok(());
        }
        let n = (span.abs() / self.cfg.dt - 1e-9).ceil().max(1.0) as usize;
        let dt = span / n as f64;
        for k in 0..n {
            let t = t_from + k as f64 * dt;
            match self.cfg.scheme {
                Scheme::CrankNicolson => self.cayley_step(&mut u.values, t, dt)?,
                Scheme::SplitMehler => self.split_step(&mut u.values, t, dt),
            }
        }
        self.max_edge = self.max_edge.max(boundary_density(u));
        Ok(())
    }

    /// `(1 + i dt H/2) u⁺ = (1 − i dt H/2) u` with `H` frozen at `t + dt/2`.
    fn cayley_step(&self, u: &mut [C64], t: f64, dt: f64) -> Result<(), QuantumError> {
        let g = self.grid;
        let n = g.n_points;
        let dx = g.dx();
        let tm = t + 0.5 * dt;
        let c = 0.5 / (dx * dx);
        // a at midpoints x_{j+1/2}, j = -1..n-1
        let am: Vec<f64> = (0..=n).map(|j| self.field.metric_1d(tm, g.x(0) + (j as f64 - 0.5) * dx)).collect();
        let diag: Vec<f64> = (0..n)
            .map(|j| {
                let x = g.x(j);
                c * (am[j] + am[j + 1]) + 0.5 * x * x + self.field.potential_1d(tm, x)
            })
            .collect();
        // Off-diagonal between j and j+1 is -c a_{j+1/2} = -c am[j+1].
        let off = |j: usize| -c * am[j + 1];
        let half = C64::new(0.0, 0.5 * dt);
        let mut rhs = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            let mut hu = u[j] * diag[j];
            if j > 0 {
                hu += u[j - 1] * off(j - 1);
            }
            if j + 1 < n {
                hu += u[j + 1] * off(j);
            }
            rhs[j] = u[j] - half * hu;
        }
        // Thomas solve of the tridiagonal system with diagonal 1 + half*diag and off-diagonals half*off.
        let mut cp = vec![C64::new(0.0, 0.0); n];
        let mut dp = vec![C64::new(0.0, 0.0); n];
        let mut b0 = C64::new(1.0, 0.0) + half * diag[0];
        if b0.norm() == 0.0 {
            return Err(QuantumError::LinearSolve(0));
        }
        cp[0] = if n > 1 { half * off(0) / b0 } else { C64::new(0.0, 0.0) };
        dp[0] = rhs[0] / b0;
        for j in 1..n {
            let lower = half * off(j - 1);
            b0 = C64::new(1.0, 0.0) + half * diag[j] - lower * cp[j - 1];
            if !(b0.norm() > 0.0) || !b0.re.is_finite() {
                return Err(QuantumError::LinearSolve(j));
            }
            cp[j] = if j + 1 < n { half * off(j) / b0 } else { C64::new(0.0, 0.0) };
            dp[j] = (rhs[j] - lower * dp[j - 1]) / b0;
        }
        u[n - 1] = dp[n - 1];
        for j in (0..n - 1).rev() {
            u[j] = dp[j] - cp[j] * u[j + 1];
        }
        Ok(())
    }

    /// Strang step: exact oscillator half steps around `e^{-i dt W}`, `W = ½p(a−1)p + V` at the midpoint.
    fn split_step(&self, u: &mut [C64], t: f64, dt: f64) {
        let engine = self.engine.as_ref().expect("split scheme owns an engine");
        engine.shear_step(u, 0.5 * dt);
        if !self.field.is_unperturbed() {
            let g = self.grid;
            let n = g.n_points;
            let tm = t + 0.5 * dt;
            let am1: Vec<f64> = g.nodes().iter().map(|&x| self.field.metric_1d(tm, x) - 1.0).collect();
            let v: Vec<f64> = g.nodes().iter().map(|&x| self.field.potential_1d(tm, x)).collect();
            let k = g.wavenumbers();
            let inv_n = 1.0 / n as f64;
            let apply = |x: &[C64], y: &mut [C64]| {
                let mut buf = x.to_vec();
                engine.fft_forward(&mut buf);
                for (b, kk) in buf.iter_mut().zip(&k) {
                    *b *= kk * inv_n;
                }
                engine.fft_inverse(&mut buf);
                for (b, a) in buf.iter_mut().zip(&am1) {
                    *b *= 0.5 * a;
                }
                engine.fft_forward(&mut buf);
                for (b, kk) in buf.iter_mut().zip(&k) {
                    *b *= kk * inv_n;
                }
                engine.fft_inverse(&mut buf);
                for j in 0..n {
                    y[j] = buf[j] + x[j] * v[j];
                }
            };
            let out = expm_hermitian(&apply, u, dt, self.cfg.krylov_tol);
            u.copy_from_slice(&out);
        }
        engine.shear_step(u, 0.5 * dt);
    }
}

fn warn_boundary(stepper: &Stepper<'_>) {
    if stepper.max_boundary_density() > BOUNDARY_DENSITY_LIMIT {
        warn!(
            "boundary density {:.3e} exceeds {:.0e}; enlarge the grid",
            stepper.max_boundary_density(),
            BOUNDARY_DENSITY_LIMIT
        );
    }
}

/// `U(t)φ` at a single time, with `φ` the state at `t = 0`.
pub fn evolve_perturbed(
    phi: &WaveFunction,
    field: &dyn PerturbationField,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<WaveFunction, QuantumError> {
    let mut stepper = Stepper::new(field, phi.grid, cfg)?;
    let mut u = phi.clone();
    stepper.advance(&mut u, 0.0, t)?;
    warn_boundary(&stepper);
    Ok(u)
}

/// Snapshots of `U(t)φ` at `n_t` uniform times of `t_window`; `φ` is the state at `t = 0`.
pub fn propagate_perturbed(
    phi: &WaveFunction,
    field: &dyn PerturbationField,
    t_window: (f64, f64),
    n_t: usize,
    cfg: &PropagatorConfig,
) -> Result<SpaceTimeField, QuantumError> {
    if n_t == 0 {
        return Err(QuantumError::InvalidParameter("n_t must be positive".into()));
    }
    let (t0, t1) = t_window;
    let mut stepper = Stepper::new(field, phi.grid, cfg)?;
    let mut u = phi.clone();
    stepper.advance(&mut u, 0.0, t0)?;
    let dt = if n_t < 2 { 0.0 } else { (t1 - t0) / (n_t - 1) as f64 };
    let mut rows = Vec::with_capacity(n_t);
    rows.push(u.clone());
    for k in 1..n_t {
        stepper.advance(&mut u, t0 + (k - 1) as f64 * dt, t0 + k as f64 * dt)?;
        rows.push(u.clone());
    }
    warn_boundary(&stepper);
    Ok(SpaceTimeField::from_rows(t0, t1, &rows))
}

/// `e^{-iκtH_os} U((1−κ)t) φ`.
pub fn interpolated_state(
    phi: &WaveFunction,
    field: &dyn PerturbationField,
    kappa: f64,
    t: f64,
    cfg: &PropagatorConfig,
) -> Result<WaveFunction, QuantumError> {
    check_kappa(kappa)?;
    let u = evolve_perturbed(phi, field, (1.0 - kappa) * t, cfg)?;
    Ok(MehlerEngine::new(phi.grid).propagate(&u, kappa * t, cfg.mehler_quadrature))
}

fn check_kappa(kappa: f64) -> Result<(), QuantumError> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(QuantumError::InvalidParameter(format!("kappa = {kappa} outside [0, 1]")));
    }
    Ok(())
}

/// Rows `u_κ(t_k) = e^{-iκt_kH_os} U((1−κ)t_k) φ` on `n_t` uniform times of `t_window`.
pub fn interpolated_field(
    phi: &WaveFunction,
    field: &dyn PerturbationField,
    kappa: f64,
    t_window: (f64, f64),
    n_t: usize,
    cfg: &PropagatorConfig,
) -> Result<SpaceTimeField, QuantumError> {
    check_kappa(kappa)?;
    let (t0, t1) = t_window;
    let perturbed = propagate_perturbed(phi, field, ((1.0 - kappa) * t0, (1.0 - kappa) * t1), n_t, cfg)?;
    let engine = MehlerEngine::new(phi.grid);
    let dt = if n_t < 2 { 0.0 } else { (t1 - t0) / (n_t - 1) as f64 };
    let rows: Vec<WaveFunction> = (0..n_t)
        .into_par_iter()
        .map(|k| engine.propagate(&perturbed.row(k), kappa * (t0 + k as f64 * dt), cfg.mehler_quadrature))
        .collect();
    Ok(SpaceTimeField::from_rows(t0, t1, &rows))
}
