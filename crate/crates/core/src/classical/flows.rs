use super::{dot, grad_quad, mat_vec, quad, ClassicalError, ExtendedPoint, FlowConfig, PhasePoint};
use crate::model::PerturbationField;
use crate::ode::{solve, OdeConfig};

fn check_dim(field: &dyn PerturbationField, v: &[f64]) -> Result<(), ClassicalError> {
    if v.len() != field.dim() {
        return Err(ClassicalError::Domain(format!(
            "vector of length {} for a field of dimension {}",
            v.len(),
            field.dim()
        )));
    }
    Ok(())
}

/// `K_s(x, ξ) = ½ a_ij(s, x) ξ_i ξ_j`.
pub fn frozen_energy(field: &dyn PerturbationField, s: f64, point: &PhasePoint) -> f64 {
    0.5 * quad(&field.metric(s, &point.x), &point.xi, &point.xi)
}

fn frozen_rhs<'a>(field: &'a dyn PerturbationField, s: f64) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
    let d = field.dim();
    move |_t, y, dy| {
        let (x, xi) = y.split_at(d);
        let v = mat_vec(&field.metric(s, x), xi);
        let g = grad_quad(&field.metric_grad(s, x), xi);
        for k in 0..d {
            dy[k] = v[k];
            dy[d + k] = -0.5 * g[k];
        }
    }
}

/// Solution of the frozen-time Hamilton equations of `K_s` with `(x(s), ξ(s)) = (y, η)`, evaluated at `t_target`.
pub fn hamilton_flow(
    field: &dyn PerturbationField,
    s: f64,
    y: &[f64],
    eta: &[f64],
    t_target: f64,
    cfg: &FlowConfig,
) -> Result<PhasePoint, ClassicalError> {
    Ok(hamilton_trajectory(field, s, y, eta, &[t_target], cfg)?.pop().expect("one stop"))
}

/// Frozen-time flow sampled at monotone `times`.
pub fn hamilton_trajectory(
    field: &dyn PerturbationField,
    s: f64,
    y: &[f64],
    eta: &[f64],
    times: &[f64],
    cfg: &FlowConfig,
) -> Result<Vec<PhasePoint>, ClassicalError> {
    check_dim(field, y)?;
    check_dim(field, eta)?;
    let d = field.dim();
    let y0 = PhasePoint::new(y.to_vec(), eta.to_vec()).to_state();
    let out = solve(frozen_rhs(field, s), s, &y0, times, &cfg.ode)?;
    Ok(out.iter().map(|st| PhasePoint::from_state(st, d)).collect())
}

/// Samples of the high-energy frozen flow at time 0 for each `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeSample {
    pub lambda: f64,
    /// `x(0) + s ξ(0)` of the trajectory with initial momentum `λη`.
    pub x_plus: Vec<f64>,
    /// `λ⁻¹ ξ(0)`.
    pub xi_plus: Vec<f64>,
    /// `|x(0)|`.
    pub radius: f64,
}

/// Integrates the unit-momentum trajectory once and reads off every `λ` by homogeneity.
///
/// `K_s` is quadratic in `ξ`, so `x(0; s, y, λη) = x₁((1-λ)s)` and `ξ(0; s, y, λη) = λ ξ₁((1-λ)s)`
/// where `(x₁, ξ₁)` starts at `(y, η)`. The state is carried as `(q, ξ)` with
/// `q = x - (t - s) ξ`, which stays bounded and equals the bracket `x(0) + s ξ(0)` at `t = (1-λ)s`.
pub fn escape_samples(
    field: &dyn PerturbationField,
    s: f64,
    y: &[f64],
    eta: &[f64],
    lambdas: &[f64],
    ode: &OdeConfig,
) -> Result<Vec<EscapeSample>, ClassicalError> {
    check_dim(field, y)?;
    check_dim(field, eta)?;
    let d = field.dim();
    let stops: Vec<f64> = lambdas.iter().map(|l| (1.0 - l) * s).collect();
    let y0 = PhasePoint::new(y.to_vec(), eta.to_vec()).to_state();
    let mut x = vec![0.0; d];
    let rhs = |t: f64, st: &[f64], dy: &mut [f64]| {
        let (q, xi) = st.split_at(d);
        let lag = t - s;
        for k in 0..d {
            x[k] = q[k] + lag * xi[k];
        }
        let a = field.metric(s, &x);
        let g = grad_quad(&field.metric_grad(s, &x), xi);
        let v = mat_vec(&a, xi);
        for k in 0..d {
            let xidot = -0.5 * g[k];
            dy[d + k] = xidot;
            dy[k] = v[k] - xi[k] - lag * xidot;
        }
    };
    let out = solve(rhs, s, &y0, &stops, ode)?;
    Ok(lambdas
        .iter()
        .zip(&out)
        .map(|(&lambda, st)| {
            let (q, xi) = st.split_at(d);
            let lag = -lambda * s;
            let radius = q.iter().zip(xi).map(|(a, b)| (a + lag * b).powi(2)).sum::<f64>().sqrt();
            EscapeSample { lambda, x_plus: q.to_vec(), xi_plus: xi.to_vec(), radius }
        })
        .collect())
}

fn reduced_rhs<'a>(field: &'a dyn PerturbationField, s: f64) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
    let d = field.dim();
    move |kappa, st, dy| {
        let (z, g) = st.split_at(d);
        let theta = (1.0 - kappa) * s;
        let ag = mat_vec(&field.metric(theta, z), g);
        let da = grad_quad(&field.metric_grad(theta, z), g);
        let dv = field.potential_grad(theta, z);
        for k in 0..d {
            dy[k] = -s * ag[k];
            dy[d + k] = 0.5 * s * da[k] + s * dv[k] + s * z[k];
        }
    }
}

/// The `(z, γ)` system with frozen base time `s`, started at `(y, γ0)` for `κ = 0`.
pub fn reduced_flow(
    field: &dyn PerturbationField,
    s: f64,
    y: &[f64],
    gamma0: &[f64],
    kappa_target: f64,
    cfg: &FlowConfig,
) -> Result<PhasePoint, ClassicalError> {
    Ok(reduced_trajectory(field, s, y, gamma0, &[kappa_target], cfg)?.pop().expect("one stop"))
}

pub fn reduced_trajectory(
    field: &dyn PerturbationField,
    s: f64,
    y: &[f64],
    gamma0: &[f64],
    kappas: &[f64],
    cfg: &FlowConfig,
) -> Result<Vec<PhasePoint>, ClassicalError> {
    check_dim(field, y)?;
    check_dim(field, gamma0)?;
    let d = field.dim();
    let y0 = PhasePoint::new(y.to_vec(), gamma0.to_vec()).to_state();
    let out = solve(reduced_rhs(field, s), 0.0, &y0, kappas, &cfg.ode)?;
    Ok(out.iter().map(|st| PhasePoint::from_state(st, d)).collect())
}

fn scaled_rhs<'a>(
    field: &'a dyn PerturbationField,
    lambda: f64,
    s: f64,
) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
    let d = field.dim();
    let inv2 = 1.0 / (lambda * lambda);
    move |kappa, st, dy| {
        let (z, g) = st.split_at(d);
        let theta = (1.0 - kappa / lambda) * s;
        let ag = mat_vec(&field.metric(theta, z), g);
        let da = grad_quad(&field.metric_grad(theta, z), g);
        let dv = field.potential_grad(theta, z);
        for k in 0..d {
            dy[k] = -s * ag[k];
            dy[d + k] = 0.5 * s * da[k] + s * inv2 * (dv[k] + z[k]);
        }
    }
}

/// The scaled `(z_λ, γ_λ)` system, `κ ∈ [0, λ]`, started at `(y, η)`.
pub fn scaled_flow(
    field: &dyn PerturbationField,
    lambda: f64,
    s: f64,
    y: &[f64],
    eta: &[f64],
    kappa_target: f64,
    cfg: &FlowConfig,
) -> Result<PhasePoint, ClassicalError> {
    Ok(scaled_trajectory(field, lambda, s, y, eta, &[kappa_target], cfg)?.pop().expect("one stop"))
}

pub fn scaled_trajectory(
    field: &dyn PerturbationField,
    lambda: f64,
    s: f64,
    y: &[f64],
    eta: &[f64],
    kappas: &[f64],
    cfg: &FlowConfig,
) -> Result<Vec<PhasePoint>, ClassicalError> {
    check_dim(field, y)?;
    check_dim(field, eta)?;
    if !(lambda >= 1.0) {
        return Err(ClassicalError::Precondition(format!("λ = {lambda} must be ≥ 1")));
    }
    if kappas.iter().any(|k| *k < 0.0 || *k > lambda * (1.0 + 1e-12)) {
        return Err(ClassicalError::Precondition("κ must lie in [0, λ]".into()));
    }
    let d = field.dim();
    let y0 = PhasePoint::new(y.to_vec(), eta.to_vec()).to_state();
    let out = solve(scaled_rhs(field, lambda, s), 0.0, &y0, kappas, &cfg.ode)?;
    Ok(out.iter().map(|st| PhasePoint::from_state(st, d)).collect())
}

/// `(z_λ, γ_λ) ↦ (ẑ, γ̂)`, the rotation that removes the unperturbed scaled dynamics.
pub fn hat_transform(lambda: f64, s: f64, kappa: f64, point: &PhasePoint) -> PhasePoint {
    let (sn, c) = (s * kappa / lambda).sin_cos();
    PhasePoint {
        x: point.x.iter().zip(&point.xi).map(|(z, g)| c * z + lambda * sn * g).collect(),
        xi: point.x.iter().zip(&point.xi).map(|(z, g)| -sn / lambda * z + c * g).collect(),
    }
}

/// `(ẑ, γ̂) ↦ (z_λ, γ_λ)`.
pub fn inverse_hat_transform(lambda: f64, s: f64, kappa: f64, point: &PhasePoint) -> PhasePoint {
    let (sn, c) = (s * kappa / lambda).sin_cos();
    PhasePoint {
        x: point.x.iter().zip(&point.xi).map(|(z, g)| c * z - lambda * sn * g).collect(),
        xi: point.x.iter().zip(&point.xi).map(|(z, g)| sn / lambda * z + c * g).collect(),
    }
}

/// Interaction-frame form of the scaled system: the right-hand side vanishes identically when `a = I`, `V = 0`.
fn hat_rhs<'a>(field: &'a dyn PerturbationField, lambda: f64, s: f64) -> impl FnMut(f64, &[f64], &mut [f64]) + 'a {
    let d = field.dim();
    let inv2 = 1.0 / (lambda * lambda);
    let mut z = vec![0.0; d];
    let mut g = vec![0.0; d];
    move |kappa, st, dy| {
        let (zh, gh) = st.split_at(d);
        let (sn, c) = (s * kappa / lambda).sin_cos();
        for k in 0..d {
            z[k] = c * zh[k] - lambda * sn * gh[k];
            g[k] = sn / lambda * zh[k] + c * gh[k];
        }
        let theta = (1.0 - kappa / lambda) * s;
        let ag = mat_vec(&field.metric(theta, &z), &g);
        let da = grad_quad(&field.metric_grad(theta, &z), &g);
        let dv = field.potential_grad(theta, &z);
        for k in 0..d {
            let pz = -s * (ag[k] - g[k]);
            let pg = 0.5 * s * da[k] + s * inv2 * dv[k];
            dy[k] = c * pz + lambda * sn * pg;
            dy[d + k] = -sn / lambda * pz + c * pg;
        }
    }
}

/// `(ẑ, γ̂)` along the scaled flow at monotone `kappas ⊂ [0, λ]`.
pub fn hat_trajectory(
    field: &dyn PerturbationField,
    lambda: f64,
    s: f64,
    y: &[f64],
    eta: &[f64],
    kappas: &[f64],
    cfg: &FlowConfig,
) -> Result<Vec<PhasePoint>, ClassicalError> {
    check_dim(field, y)?;
    check_dim(field, eta)?;
    let d = field.dim();
    let y0 = PhasePoint::new(y.to_vec(), eta.to_vec()).to_state();
    if field.is_unperturbed() {
        return Ok(kappas.iter().map(|_| PhasePoint::from_state(&y0, d)).collect());
    }
    let out = solve(hat_rhs(field, lambda, s), 0.0, &y0, kappas, &cfg.ode)?;
    Ok(out.iter().map(|st| PhasePoint::from_state(st, d)).collect())
}

/// Conserved quantity of the full system used to recover `τ`.
pub(crate) fn rho_invariant(field: &dyn PerturbationField, kappa: f64, s: f64, z: &[f64], g: &[f64], tau: f64) -> f64 {
    let theta = (1.0 - kappa) * s;
    tau + (1.0 - kappa) * (0.5 * quad(&field.metric(theta, z), g, g) + field.potential(theta, z))
        + 0.5 * kappa * dot(g, g)
        + 0.5 * dot(z, z)
}

fn reduced_to_full(field: &dyn PerturbationField, kappa: f64, s: f64, zg: &PhasePoint, rho: f64) -> ExtendedPoint {
    let (sn, c) = (kappa * s).sin_cos();
    let x = zg.x.iter().zip(&zg.xi).map(|(z, g)| c * z + sn * g).collect();
    let xi = zg.x.iter().zip(&zg.xi).map(|(z, g)| -sn * z + c * g).collect();
    let tau = rho - rho_invariant(field, kappa, s, &zg.x, &zg.xi, 0.0);
    ExtendedPoint { t: s, x, tau, xi }
}

fn full_to_reduced(kappa: f64, p: &ExtendedPoint) -> PhasePoint {
    let (sn, c) = (kappa * p.t).sin_cos();
    PhasePoint {
        x: p.x.iter().zip(&p.xi).map(|(x, xi)| c * x - sn * xi).collect(),
        xi: p.x.iter().zip(&p.xi).map(|(x, xi)| sn * x + c * xi).collect(),
    }
}

/// `F_l(κ)` through the reduced system and the conserved quantity; `t` never moves.
pub fn interpolated_flow(
    field: &dyn PerturbationField,
    kappa: f64,
    start: &ExtendedPoint,
    cfg: &FlowConfig,
) -> Result<ExtendedPoint, ClassicalError> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(ClassicalError::Precondition(format!("κ = {kappa} outside [0, 1]")));
    }
    let s = start.t;
    let rho = rho_invariant(field, 0.0, s, &start.x, &start.xi, start.tau);
    let zg = reduced_flow(field, s, &start.x, &start.xi, kappa, cfg)?;
    Ok(reduced_to_full(field, kappa, s, &zg, rho))
}

/// Maps `end` at `κ` back to `κ0` along `F_l`; `κ0 = 0` gives `F_l(κ)⁻¹`.
pub fn interpolated_flow_between(
    field: &dyn PerturbationField,
    kappa_from: f64,
    kappa_to: f64,
    end: &ExtendedPoint,
    cfg: &FlowConfig,
) -> Result<ExtendedPoint, ClassicalError> {
    for k in [kappa_from, kappa_to] {
        if !(0.0..=1.0).contains(&k) {
            return Err(ClassicalError::Precondition(format!("κ = {k} outside [0, 1]")));
        }
    }
    let s = end.t;
    let zg = full_to_reduced(kappa_from, end);
    let rho = rho_invariant(field, kappa_from, s, &zg.x, &zg.xi, end.tau);
    let d = field.dim();
    let out = solve(reduced_rhs(field, s), kappa_from, &zg.to_state(), &[kappa_to], &cfg.ode)?;
    Ok(reduced_to_full(field, kappa_to, s, &PhasePoint::from_state(&out[0], d), rho))
}

pub fn interpolated_flow_inverse(
    field: &dyn PerturbationField,
    kappa: f64,
    end: &ExtendedPoint,
    cfg: &FlowConfig,
) -> Result<ExtendedPoint, ClassicalError> {
    interpolated_flow_between(field, kappa, 0.0, end, cfg)
}
