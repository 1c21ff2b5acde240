use super::{dot, grad_quad, mat_vec, quad, ClassicalError, DirectionPoint, ExtendedPoint};
use crate::model::PerturbationField;
use crate::ode::{solve, OdeConfig};

/// Positive root of `¼ μ⁴ (a ξ ξ)² + μ² |ξ|² = 1`.
pub fn normalization_mu(field: &dyn PerturbationField, t: f64, x: &[f64], xi: &[f64]) -> Result<f64, ClassicalError> {
    let q = quad(&field.metric(t, x), xi, xi);
    mu_from(q, dot(xi, xi))
}

fn mu_from(q: f64, n: f64) -> Result<f64, ClassicalError> {
    if n == 0.0 {
        return Err(ClassicalError::Domain("ξ = 0 has no direction".into()));
    }
    // Rationalized root of (q²/4) m² + n m - 1 = 0 with m = μ².
    let m = 2.0 / (n + (n * n + q * q).sqrt());
    Ok(m.sqrt())
}

/// `(t, x, -½ μ² a ξ ξ, μ ξ)`.
pub fn pi_map(field: &dyn PerturbationField, t: f64, x: &[f64], xi: &[f64]) -> Result<DirectionPoint, ClassicalError> {
    let q = quad(&field.metric(t, x), xi, xi);
    Ok(pi_from(t, x, xi, q)?)
}

/// [`pi_map`] with `a = I`.
pub fn pi_os_map(t: f64, x: &[f64], xi: &[f64]) -> Result<DirectionPoint, ClassicalError> {
    pi_from(t, x, xi, dot(xi, xi))
}

fn pi_from(t: f64, x: &[f64], xi: &[f64], q: f64) -> Result<DirectionPoint, ClassicalError> {
    let mu = mu_from(q, dot(xi, xi))?;
    Ok(DirectionPoint {
        t,
        x: x.to_vec(),
        tau_hat: -0.5 * mu * mu * q,
        xi_hat: xi.iter().map(|v| mu * v).collect(),
    })
}

/// Rotated coordinates `X = cos(κt) x - sin(κt) ξ`, `ζ = sin(κt) x + cos(κt) ξ`.
fn rotated(kappa: f64, t: f64, x: &[f64], xi: &[f64]) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let (sn, c) = (kappa * t).sin_cos();
    let big_x = x.iter().zip(xi).map(|(a, b)| c * a - sn * b).collect();
    let zeta = x.iter().zip(xi).map(|(a, b)| sn * a + c * b).collect();
    (big_x, zeta, sn, c)
}

/// Exact symbol of the conjugated generator,
/// `l = -½ t (a((1-κ)t, X) - I) ζ ζ - t V((1-κ)t, X)`.
pub fn exact_symbol(field: &dyn PerturbationField, kappa: f64, t: f64, x: &[f64], xi: &[f64]) -> f64 {
    let (bx, zeta, _, _) = rotated(kappa, t, x, xi);
    let theta = (1.0 - kappa) * t;
    let a = field.metric(theta, &bx);
    -0.5 * t * (quad(&a, &zeta, &zeta) - dot(&zeta, &zeta)) - t * field.potential(theta, &bx)
}

/// `(∂_t l, ∂_x l, ∂_ξ l)`; `l` does not depend on `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGradient {
    pub dt: f64,
    pub dx: Vec<f64>,
    pub dxi: Vec<f64>,
}

pub fn exact_symbol_gradient(field: &dyn PerturbationField, kappa: f64, t: f64, x: &[f64], xi: &[f64]) -> SymbolGradient {
    let d = x.len();
    let (bx, zeta, sn, c) = rotated(kappa, t, x, xi);
    let theta = (1.0 - kappa) * t;
    let a = field.metric(theta, &bx);
    let mut am = a.clone();
    for i in 0..d {
        am[i * d + i] -= 1.0;
    }
    let da = field.metric_grad(theta, &bx);
    let dzz = grad_quad(&da, &zeta); // ∂_X (a ζ ζ)
    let amz = mat_vec(&am, &zeta); // (a - I) ζ
    let dv = field.potential_grad(theta, &bx);
    // With respect to X and ζ:
    // ∂_X l = -t (½ ∂a ζζ + ∇V),  ∂_ζ l = -t (a - I) ζ.
    let lx: Vec<f64> = (0..d).map(|k| -t * (0.5 * dzz[k] + dv[k])).collect();
    let lz: Vec<f64> = amz.iter().map(|v| -t * v).collect();
    let dx = (0..d).map(|k| c * lx[k] + sn * lz[k]).collect();
    let dxi = (0..d).map(|k| -sn * lx[k] + c * lz[k]).collect();

    // ∂X/∂t = -κ ζ, ∂ζ/∂t = κ X, and the time slot moves with (1 - κ).
    let a_t = field.metric_dt(theta, &bx);
    let explicit = -(0.5 * quad(&am, &zeta, &zeta) + field.potential(theta, &bx));
    let time_slot = -t * (1.0 - kappa) * (0.5 * quad(&a_t, &zeta, &zeta) + field.potential_dt(theta, &bx));
    let rotation: f64 = (0..d).map(|k| lx[k] * (-kappa * zeta[k]) + lz[k] * (kappa * bx[k])).sum();
    SymbolGradient { dt: explicit + time_slot + rotation, dx, dxi }
}

/// Direct integration of `dx/dκ = ∂_ξ l`, `dξ/dκ = -∂_x l`, `dτ/dκ = -∂_t l`, `dt/dκ = 0`.
///
/// Kept as an independent check of [`super::interpolated_flow`].
pub fn direct_interpolated_flow(
    field: &dyn PerturbationField,
    kappa: f64,
    start: &ExtendedPoint,
    ode: &OdeConfig,
) -> Result<ExtendedPoint, ClassicalError> {
    let d = field.dim();
    let t = start.t;
    let mut y0 = start.x.clone();
    y0.extend_from_slice(&start.xi);
    y0.push(start.tau);
    let rhs = |k: f64, st: &[f64], dy: &mut [f64]| {
        let g = exact_symbol_gradient(field, k, t, &st[..d], &st[d..2 * d]);
        for i in 0..d {
            dy[i] = g.dxi[i];
            dy[d + i] = -g.dx[i];
        }
        dy[2 * d] = -g.dt;
    };
    let out = solve(rhs, 0.0, &y0, &[kappa], ode)?.pop().expect("one stop");
    Ok(ExtendedPoint { t, x: out[..d].to_vec(), tau: out[2 * d], xi: out[d..2 * d].to_vec() })
}
