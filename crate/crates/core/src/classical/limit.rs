use super::flows::{escape_samples, hat_trajectory, inverse_hat_transform};
use super::{dot, quad, ClassicalError, ExtendedPoint, FlowConfig, PhasePoint};
use crate::model::PerturbationField;
use crate::numerics::{dist2, loglog_slope, richardson_lambda};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Radial escape evidence for non-trapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NontrapWitness {
    pub lambdas: Vec<f64>,
    pub radii: Vec<f64>,
    /// Log-log slope of the radius over the three largest `λ`.
    pub slope: f64,
    pub increasing: bool,
    pub nontrapping: bool,
}

fn witness(samples: &[super::flows::EscapeSample], min_slope: f64) -> NontrapWitness {
    let lambdas: Vec<f64> = samples.iter().map(|s| s.lambda).collect();
    let radii: Vec<f64> = samples.iter().map(|s| s.radius).collect();
    let n = radii.len();
    let tail = n.saturating_sub(3);
    let increasing = radii.windows(2).all(|w| w[1] > w[0]);
    let slope = loglog_slope(&lambdas[tail..], &radii[tail..]).unwrap_or(f64::NAN);
    NontrapWitness { lambdas, radii, slope, increasing, nontrapping: increasing && slope >= min_slope }
}

/// Numerical certificate that `|x(0; s, y, λη)| → ∞`.
pub fn is_nontrapping(
    field: &dyn PerturbationField,
    s: f64,
    y: &[f64],
    eta: &[f64],
    cfg: &FlowConfig,
) -> Result<NontrapWitness, ClassicalError> {
    cfg.validate()?;
    let samples = escape_samples(field, s, y, eta, &cfg.lambda_schedule, &cfg.ode)?;
    Ok(witness(&samples, cfg.nontrap_slope))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringDatum {
    pub x_plus: Vec<f64>,
    pub xi_plus: Vec<f64>,
    pub sigma_limit: f64,
    pub lambda_schedule: Vec<f64>,
    /// Per-`λ` values of `x(0) + s ξ(0)`.
    pub x_samples: Vec<Vec<f64>>,
    /// Per-`λ` values of `λ⁻¹ ξ(0)`.
    pub xi_samples: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub witness: NontrapWitness,
}

fn extrapolate_components(lambdas: &[f64], values: &[Vec<f64>], epsilon: f64) -> Vec<f64> {
    let d = values[0].len();
    (0..d)
        .map(|k| {
            let col: Vec<f64> = values.iter().map(|v| v[k]).collect();
            richardson_lambda(lambdas, &col, epsilon)
        })
        .collect()
}

fn tail_monotone(residuals: &[f64], scale: f64) -> bool {
    let n = residuals.len();
    let slack = 1e-12 * (1.0 + scale);
    residuals[n.saturating_sub(3)..].windows(2).all(|w| w[1] <= w[0] + slack)
}

/// High-energy limits `(x₊, ξ₊)` with `Σ = σ + ½ a(s,y) η η - ½ |ξ₊|²`.
pub fn scattering_data(
    field: &dyn PerturbationField,
    s: f64,
    y: &[f64],
    sigma: f64,
    eta: &[f64],
    cfg: &FlowConfig,
) -> Result<ScatteringDatum, ClassicalError> {
    cfg.validate()?;
    let lambdas = cfg.lambda_schedule.clone();
    let samples = escape_samples(field, s, y, eta, &lambdas, &cfg.ode)?;
    let witness = witness(&samples, cfg.nontrap_slope);
    if !witness.nontrapping {
        return Err(ClassicalError::Trapping { radii: witness.radii });
    }
    let eps = field.certificate().epsilon;
    let x_samples: Vec<Vec<f64>> = samples.iter().map(|s| s.x_plus.clone()).collect();
    let xi_samples: Vec<Vec<f64>> = samples.iter().map(|s| s.xi_plus.clone()).collect();
    let x_plus = extrapolate_components(&lambdas, &x_samples, eps);
    let xi_plus = extrapolate_components(&lambdas, &xi_samples, eps);
    let residuals: Vec<f64> = x_samples
        .iter()
        .zip(&xi_samples)
        .map(|(x, xi)| PhasePoint::new(x.clone(), xi.clone()).distance(&PhasePoint::new(x_plus.clone(), xi_plus.clone())))
        .collect();
    let scale = crate::numerics::norm2(&x_plus) + crate::numerics::norm2(&xi_plus);
    if !tail_monotone(&residuals, scale) {
        return Err(ClassicalError::NonConvergence { residuals });
    }
    let sigma_limit = sigma + 0.5 * quad(&field.metric(s, y), eta, eta) - 0.5 * dot(&xi_plus, &xi_plus);
    Ok(ScatteringDatum { x_plus, xi_plus, sigma_limit, lambda_schedule: lambdas, x_samples, xi_samples, residuals, witness })
}

/// `Θ_λ⁻¹ F_l(κ) Θ_λ (s, y, σ, η)` at one `λ` for each `κ` in `kappas` (monotone, in `[0, 1]`).
pub fn limit_map_at_lambda(
    field: &dyn PerturbationField,
    lambda: f64,
    kappas: &[f64],
    s: f64,
    y: &[f64],
    sigma: f64,
    eta: &[f64],
    cfg: &FlowConfig,
) -> Result<Vec<ExtendedPoint>, ClassicalError> {
    let stops: Vec<f64> = kappas.iter().map(|k| k * lambda).collect();
    let hats = hat_trajectory(field, lambda, s, y, eta, &stops, cfg)?;
    let inv2 = 1.0 / (lambda * lambda);
    let base = sigma + 0.5 * quad(&field.metric(s, y), eta, eta) + inv2 * (field.potential(s, y) + 0.5 * dot(y, y));
    Ok(kappas
        .iter()
        .zip(&stops)
        .zip(&hats)
        .map(|((&k, &kk), h)| {
            let zg = inverse_hat_transform(lambda, s, kk, h);
            let theta = (1.0 - k) * s;
            let (z, g) = (&zg.x, &zg.xi);
            let tau = base
                - (1.0 - k) * (0.5 * quad(&field.metric(theta, z), g, g) + inv2 * field.potential(theta, z))
                - 0.5 * k * dot(g, g)
                - 0.5 * inv2 * dot(z, z);
            ExtendedPoint { t: s, x: h.x.clone(), tau, xi: h.xi.clone() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitMap {
    pub kappa: f64,
    pub lambdas: Vec<f64>,
    pub per_lambda: Vec<ExtendedPoint>,
    pub limit: ExtendedPoint,
    pub residuals: Vec<f64>,
}

fn check_limit_preconditions(s: f64, kappas: &[f64]) -> Result<(), ClassicalError> {
    if !(s.abs() < std::f64::consts::PI) {
        return Err(ClassicalError::Precondition(format!("|s| = {} must be < π", s.abs())));
    }
    if kappas.iter().any(|k| !(*k > 0.0 && *k <= 1.0)) {
        return Err(ClassicalError::Precondition("κ must lie in (0, 1]".into()));
    }
    if kappas.windows(2).any(|w| w[1] < w[0]) {
        return Err(ClassicalError::Precondition("κ values must be increasing".into()));
    }
    Ok(())
}

/// Per-`λ` samples for every `κ`, indexed `[λ][κ]`; no preconditions checked.
fn limit_samples(
    field: &dyn PerturbationField,
    kappas: &[f64],
    s: f64,
    y: &[f64],
    sigma: f64,
    eta: &[f64],
    cfg: &FlowConfig,
) -> Result<Vec<Vec<ExtendedPoint>>, ClassicalError> {
    cfg.lambda_schedule
        .par_iter()
        .map(|&lam| limit_map_at_lambda(field, lam, kappas, s, y, sigma, eta, cfg))
        .collect()
}

fn extrapolate_points(lambdas: &[f64], pts: &[ExtendedPoint], eps: f64) -> ExtendedPoint {
    let vals: Vec<Vec<f64>> = pts.iter().map(ExtendedPoint::to_vec).collect();
    ExtendedPoint::from_slice(&extrapolate_components(lambdas, &vals, eps))
}

/// Scaling-limit map for several `κ` at once, sharing one integration per `λ`.
pub fn scaled_limit_maps(
    field: &dyn PerturbationField,
    kappas: &[f64],
    s: f64,
    y: &[f64],
    sigma: f64,
    eta: &[f64],
    cfg: &FlowConfig,
) -> Result<Vec<LimitMap>, ClassicalError> {
    cfg.validate()?;
    check_limit_preconditions(s, kappas)?;
    let w = is_nontrapping(field, s, y, eta, cfg)?;
    if !w.nontrapping {
        return Err(ClassicalError::Trapping { radii: w.radii });
    }
    let samples = limit_samples(field, kappas, s, y, sigma, eta, cfg)?;
    let eps = field.certificate().epsilon;
    let lambdas = cfg.lambda_schedule.clone();
    kappas
        .iter()
        .enumerate()
        .map(|(j, &kappa)| {
            let per_lambda: Vec<ExtendedPoint> = samples.iter().map(|row| row[j].clone()).collect();
            let limit = extrapolate_points(&lambdas, &per_lambda, eps);
            let residuals: Vec<f64> = per_lambda.iter().map(|p| p.distance(&limit)).collect();
            if !tail_monotone(&residuals, crate::numerics::norm2(&limit.to_vec())) {
                return Err(ClassicalError::NonConvergence { residuals });
            }
            Ok(LimitMap { kappa, lambdas: lambdas.clone(), per_lambda, limit, residuals })
        })
        .collect()
}

pub fn scaled_limit_map(
    field: &dyn PerturbationField,
    kappa: f64,
    s: f64,
    y: &[f64],
    sigma: f64,
    eta: &[f64],
    cfg: &FlowConfig,
) -> Result<LimitMap, ClassicalError> {
    Ok(scaled_limit_maps(field, &[kappa], s, y, sigma, eta, cfg)?.pop().expect("one κ"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    /// Row-major `(2+2d)²` Jacobian of `(s, y, σ, η) ↦ (t, x, τ, ξ)`.
    pub matrix: Vec<f64>,
    pub size: usize,
    pub det: f64,
    pub singular: bool,
    /// Same Jacobian at fixed `λ` for each schedule entry.
    pub per_lambda: Vec<(f64, Vec<f64>)>,
}

impl JacobianReport {
    pub fn max_deviation_from_identity(&self) -> f64 {
        let n = self.size;
        (0..n * n)
            .map(|i| (self.matrix[i] - if i / n == i % n { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    pub fn lambda_matrix(&self, lambda: f64) -> Option<&[f64]> {
        self.per_lambda.iter().find(|(l, _)| *l == lambda).map(|(_, m)| m.as_slice())
    }
}

/// Central-difference Jacobian of the extrapolated limit map.
pub fn limit_jacobian(
    field: &dyn PerturbationField,
    kappa: f64,
    s: f64,
    y: &[f64],
    sigma: f64,
    eta: &[f64],
    cfg: &FlowConfig,
) -> Result<JacobianReport, ClassicalError> {
    limit_jacobian_with_step(field, kappa, s, y, sigma, eta, cfg, 1e-3)
}

#[allow(clippy::too_many_arguments)]
pub fn limit_jacobian_with_step(
    field: &dyn PerturbationField,
    kappa: f64,
    s: f64,
    y: &[f64],
    sigma: f64,
    eta: &[f64],
    cfg: &FlowConfig,
    step: f64,
) -> Result<JacobianReport, ClassicalError> {
    cfg.validate()?;
    check_limit_preconditions(s, &[kappa])?;
    let w = is_nontrapping(field, s, y, eta, cfg)?;
    if !w.nontrapping {
        return Err(ClassicalError::Trapping { radii: w.radii });
    }
    let base = ExtendedPoint::new(s, y.to_vec(), sigma, eta.to_vec()).to_vec();
    let n = base.len();
    let eps = field.certificate().epsilon;
    let lambdas = &cfg.lambda_schedule;
    let eval = |p: &[f64]| -> Result<Vec<Vec<f64>>, ClassicalError> {
        let q = ExtendedPoint::from_slice(p);
        let rows = limit_samples(field, &[kappa], q.t, &q.x, q.tau, &q.xi, cfg)?;
        Ok(rows.into_iter().map(|mut r| r.pop().expect("one κ").to_vec()).collect())
    };
    let mut matrix = vec![0.0; n * n];
    let mut per_lambda: Vec<(f64, Vec<f64>)> = lambdas.iter().map(|&l| (l, vec![0.0; n * n])).collect();
    for j in 0..n {
        let mut plus = base.clone();
        let mut minus = base.clone();
        plus[j] += step;
        minus[j] -= step;
        let fp = eval(&plus)?;
        let fm = eval(&minus)?;
        for (li, (_, m)) in per_lambda.iter_mut().enumerate() {
            for i in 0..n {
                m[i * n + j] = (fp[li][i] - fm[li][i]) / (2.0 * step);
            }
        }
        let col: Vec<f64> = (0..n)
            .map(|i| {
                let v: Vec<f64> = (0..lambdas.len()).map(|li| per_lambda[li].1[i * n + j]).collect();
                richardson_lambda(lambdas, &v, eps)
            })
            .collect();
        for i in 0..n {
            matrix[i * n + j] = col[i];
        }
    }
    let det = DMatrix::from_row_slice(n, n, &matrix).determinant();
    Ok(JacobianReport { matrix, size: n, det, singular: det.abs() < 1e-8, per_lambda })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub theta: f64,
    pub lambdas: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// `|ẑ(θλ) - x₊|` across `lambdas` with its log-log slope.
pub fn convergence_rate(
    field: &dyn PerturbationField,
    s: f64,
    y: &[f64],
    eta: &[f64],
    theta: f64,
    lambdas: &[f64],
    x_plus: &[f64],
    cfg: &FlowConfig,
) -> Result<ConvergenceReport, ClassicalError> {
    let errors: Vec<f64> = lambdas
        .par_iter()
        .map(|&lam| {
            let h = hat_trajectory(field, lam, s, y, eta, &[theta * lam], cfg)?;
            Ok(dist2(&h[0].x, x_plus))
        })
        .collect::<Result<_, ClassicalError>>()?;
    let slope = loglog_slope(lambdas, &errors).unwrap_or(f64::NAN);
    Ok(ConvergenceReport { theta, lambdas: lambdas.to_vec(), errors, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_family, FamilySpec};

    fn family() -> crate::model::FamilyField {
        make_family(&FamilySpec::new(0.3, 0.0, 0.5)).unwrap()
    }

    fn free() -> crate::model::FamilyField {
        make_family(&FamilySpec::unperturbed()).unwrap()
    }

    /// `x₊ = y - ∫_{-∞}^{y} (1 - a(s,u)^{-1/2}) du` for the leftward escape in one dimension.
    /// Gauss–Legendre on doubling panels out to `|u - y| = 2^28`, then the two leading tail terms
    /// of `1 - (1+g)^{-1/2} = g/2 - 3g²/8 + …` with `g = c_a |u|^{-1-ε}`.
    pub(crate) fn quadrature_x_plus(f: &dyn PerturbationField, c_a: f64, eps: f64, s: f64, y: f64) -> f64 {
        let nodes = [
            (-0.906_179_845_938_664, 0.236_926_885_056_189),
            (-0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.0, 0.568_888_888_888_889),
            (0.538_469_310_105_683, 0.478_628_670_499_366),
            (0.906_179_845_938_664, 0.236_926_885_056_189),
        ];
        let g = |w: f64| 1.0 - f.metric_1d(s, y - w).powf(-0.5);
        let mut total = 0.0;
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        while hi < 2f64.powi(28) {
            let m = 50;
            for i in 0..m {
                let a = lo + (hi - lo) * i as f64 / m as f64;
                let b = lo + (hi - lo) * (i + 1) as f64 / m as f64;
                for (x, w) in nodes {
                    total += 0.5 * (b - a) * w * g(0.5 * (a + b) + 0.5 * (b - a) * x);
                }
            }
            lo = hi;
            hi *= 2.0;
        }
        let u = (y - lo).abs();
        total += 0.5 * c_a * u.powf(-eps) / eps - 0.375 * c_a * c_a * u.powf(-1.0 - 2.0 * eps) / (1.0 + 2.0 * eps);
        y - total
    }

    #[test]
    fn unperturbed_scattering_is_identity() {
        let d = scattering_data(&free(), 0.5, &[1.0], 0.2, &[1.0], &FlowConfig::default()).unwrap();
        assert!((d.x_plus[0] - 1.0).abs() < 1e-10);
        assert!((d.xi_plus[0] - 1.0).abs() < 1e-10);
        assert!((d.sigma_limit - 0.2).abs() < 1e-10);
    }

    #[test]
    fn nontrapping_witness() {
        let cfg = FlowConfig::default();
        let w = is_nontrapping(&free(), 0.5, &[1.0], &[1.0], &cfg).unwrap();
        assert!(w.nontrapping);
        let w0 = is_nontrapping(&family(), 0.0, &[1.0], &[1.0], &cfg).unwrap();
        assert!(!w0.nontrapping);
        let wf = is_nontrapping(&family(), 0.5, &[1.0], &[1.0], &cfg).unwrap();
        assert!(wf.nontrapping);
        // Escape speed is η √a(s,y), so the radius at λ tends to λ s η √a(s,y) rather than λ s η.
        let i = cfg.lambda_schedule.iter().position(|l| *l == 1000.0).unwrap();
        let asymptote = 0.5 * 1000.0 * family().metric_1d(0.5, 1.0).sqrt();
        assert!((wf.radii[i] - asymptote).abs() / asymptote < 0.01);
        assert!(matches!(
            scattering_data(&family(), 0.0, &[1.0], 0.2, &[1.0], &cfg),
            Err(ClassicalError::Trapping { .. })
        ));
    }

    #[test]
    fn perturbed_scattering_matches_quadrature() {
        let f = family();
        let cfg = FlowConfig::default();
        let d = scattering_data(&f, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
        let oracle = quadrature_x_plus(&f, 0.3, 0.5, 0.5, 1.0);
        assert!((d.x_plus[0] - oracle).abs() < 1e-8, "{} vs {}", d.x_plus[0], oracle);
        // Energy conservation gives ξ₊ = η √a(s,y) in one dimension, so Σ = σ.
        assert!((d.xi_plus[0] - f.metric_1d(0.5, 1.0).sqrt()).abs() < 1e-9);
        assert!((d.sigma_limit - 0.2).abs() < 1e-8);
        assert!(d.residuals.last().unwrap() < &d.residuals[d.residuals.len() - 3]);
    }

    #[test]
    fn large_lambda_sample_consistent_with_rate() {
        // The raw λ = 1e5 value is still ~λ^{-ε} away from the limit.
        let f = family();
        let cfg = FlowConfig::default();
        let d = scattering_data(&f, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
        let raw = escape_samples(&f, 0.5, &[1.0], &[1.0], &[1e4, 1e6], &cfg.ode).unwrap();
        let e4 = (raw[0].x_plus[0] - d.x_plus[0]).abs();
        let e6 = (raw[1].x_plus[0] - d.x_plus[0]).abs();
        let ratio = e4 / e6;
        let predicted = 10.0;
        assert!((ratio / predicted - 1.0).abs() < 0.05, "{ratio} vs {predicted}");
    }

    #[test]
    fn limit_map_identity_when_unperturbed() {
        let cfg = FlowConfig::default();
        for m in scaled_limit_maps(&free(), &[0.25, 1.0], 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap() {
            assert!(m.limit.distance(&ExtendedPoint::scalar(0.5, 1.0, 0.2, 1.0)) < 1e-10);
        }
        let j = limit_jacobian(&free(), 0.5, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
        assert!(j.max_deviation_from_identity() < 1e-6);
        assert!((j.det - 1.0).abs() < 1e-6);
    }

    #[test]
    fn limit_map_preconditions() {
        let cfg = FlowConfig::default();
        assert!(matches!(
            scaled_limit_map(&family(), 0.5, 3.2, &[1.0], 0.2, &[1.0], &cfg),
            Err(ClassicalError::Precondition(_))
        ));
        assert!(scaled_limit_map(&family(), 0.0, 0.5, &[1.0], 0.2, &[1.0], &cfg).is_err());
    }

    #[test]
    fn limit_map_kappa_independent_and_matches_scattering() {
        let f = family();
        let cfg = FlowConfig::default();
        let d = scattering_data(&f, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
        let maps = scaled_limit_maps(&f, &[0.25, 0.5, 0.75, 1.0], 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
        for a in &maps {
            for b in &maps {
                assert!(a.limit.distance(&b.limit) < 1e-4);
            }
            let target = ExtendedPoint::new(0.5, d.x_plus.clone(), d.sigma_limit, d.xi_plus.clone());
            assert!(a.limit.distance(&target) < 1e-6, "κ={} {:?} {:?}", a.kappa, a.limit, target);
        }
    }

    #[test]
    fn perturbed_jacobian_nonsingular_and_uniform() {
        let f = family();
        let cfg = FlowConfig::default();
        let j = limit_jacobian(&f, 0.5, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
        assert!(!j.singular);
        assert!(j.det.abs() >= 1e-3);
        // Fixed-λ Jacobians approach the limit like λ^{-ε}.
        let dev = |l: f64| {
            j.lambda_matrix(l).unwrap().iter().zip(&j.matrix).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
        };
        let ratio = dev(1000.0) / dev(3000.0);
        assert!((ratio / 3f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
        assert!(dev(1e5) < 1e-3);
    }

    #[test]
    fn convergence_slope() {
        let f = family();
        let cfg = FlowConfig::default();
        let d = scattering_data(&f, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
        let r = convergence_rate(&f, 0.5, &[1.0], &[1.0], 1.0, &[100.0, 300.0, 1000.0, 3000.0], &d.x_plus, &cfg).unwrap();
        assert!(r.slope <= -0.4, "slope {}", r.slope);
    }
}
