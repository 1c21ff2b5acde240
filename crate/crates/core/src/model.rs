//! Time-dependent short-range perturbations `(a_ij, V)` of the harmonic oscillator.
//!
//! A [`PerturbationField`] supplies the metric `a(t,x)`, the potential `V(t,x)` and
//! the first derivatives the Hamiltonian flows need. [`FamilySpec`] builds the
//! closed-form isotropic family used throughout the experiments:
//!
//! ```text
//! a(t,x) = (1 + c_a ρ(t) <x - x_c>^{-1-ε}) I,      V(t,x) = c_V ρ(t) <x - x_c>^{1-ε}
//! ```

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("metric amplitude c_a = {0} must satisfy |c_a| < 1")]
    AmplitudeOutOfRange(f64),
    #[error("decay rate epsilon = {0} must be positive and finite")]
    InvalidEpsilon(f64),
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("x_center has {got} entries, expected {expected}")]
    CenterDimension { expected: usize, got: usize },
}

/// Decay constants `(ε, C)` of the short-range bounds, checked for derivatives of order ≤ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub epsilon: f64,
    pub bound_c: f64,
}

/// Evaluatable metric and potential with their first derivatives.
///
/// Matrices are flattened row-major; `metric_grad` is indexed `[k][i][j] = ∂_k a_ij`.
pub trait PerturbationField: Send + Sync {
    fn dim(&self) -> usize;
    fn metric(&self, t: f64, x: &[f64]) -> Vec<f64>;
    fn metric_grad(&self, t: f64, x: &[f64]) -> Vec<f64>;
    fn metric_dt(&self, t: f64, x: &[f64]) -> Vec<f64>;
    fn potential(&self, t: f64, x: &[f64]) -> f64;
    fn potential_grad(&self, t: f64, x: &[f64]) -> Vec<f64>;
    fn potential_dt(&self, t: f64, x: &[f64]) -> f64;
    fn certificate(&self) -> DecayCertificate;

    /// `a(t,x)` for `d = 1`.
    fn metric_1d(&self, t: f64, x: f64) -> f64 {
        self.metric(t, &[x])[0]
    }

    /// `V(t,x)` for `d = 1`.
    fn potential_1d(&self, t: f64, x: f64) -> f64 {
        self.potential(t, &[x])
    }

    /// True when `a ≡ I` and `V ≡ 0` identically.
    fn is_unperturbed(&self) -> bool {
        false
    }
}

/// Smooth bounded time profile `ρ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeShape {
    #[default]
    Constant,
    Gaussian,
}

impl TimeShape {
    pub fn value(self, t: f64) -> f64 {
        match self {
            TimeShape::Constant => 1.0,
            TimeShape::Gaussian => (-t * t).exp(),
        }
    }

    pub fn derivative(self, t: f64) -> f64 {
        match self {
            TimeShape::Constant => 0.0,
            TimeShape::Gaussian => -2.0 * t * (-t * t).exp(),
        }
    }

    /// `sup |ρ'|`.
    fn derivative_bound(self) -> f64 {
        match self {
            TimeShape::Constant => 0.0,
            TimeShape::Gaussian => (2.0 / std::f64::consts::E).sqrt(),
        }
    }
}

fn default_dim() -> usize {
    1
}

/// Parameters of the built-in perturbation family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub c_a: f64,
    pub c_v: f64,
    pub epsilon: f64,
    #[serde(default)]
    pub t_shape: TimeShape,
    /// Translation of the spatial profile; empty means the origin.
    #[serde(default)]
    pub x_center: Vec<f64>,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

impl FamilySpec {
    pub fn unperturbed() -> Self {
        Self {
            c_a: 0.0,
            c_v: 0.0,
            epsilon: 0.5,
            t_shape: TimeShape::Constant,
            x_center: Vec::new(),
            dim: 1,
        }
    }

    /// One-dimensional family with constant time profile centred at the origin.
    pub fn new(c_a: f64, c_v: f64, epsilon: f64) -> Self {
        Self {
            c_a,
            c_v,
            epsilon,
            ..Self::unperturbed()
        }
    }
}

/// Closed-form instance of [`FamilySpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyField {
    spec: FamilySpec,
    center: Vec<f64>,
    certificate: DecayCertificate,
}

/// Builds the closed-form field for `spec` after checking `|c_a| < 1` and `ε > 0`.
pub fn make_family(spec: &FamilySpec) -> Result<FamilyField, ModelError> {
    if !(spec.c_a.abs() < 1.0) {
        return Err(ModelError::AmplitudeOutOfRange(spec.c_a));
    }
    if !(spec.epsilon > 0.0 && spec.epsilon.is_finite()) {
        return Err(ModelError::InvalidEpsilon(spec.epsilon));
    }
    if spec.dim == 0 {
        return Err(ModelError::ZeroDimension);
    }
    let center = if spec.x_center.is_empty() {
        vec![0.0; spec.dim]
    } else if spec.x_center.len() == spec.dim {
        spec.x_center.clone()
    } else {
        return Err(ModelError::CenterDimension {
            expected: spec.dim,
            got: spec.x_center.len(),
        });
    };

    // <x - c> and <x> differ by at most the factor 1 + |c| in either direction.
    let eps = spec.epsilon;
    let shift = 1.0 + center.iter().map(|c| c * c).sum::<f64>().sqrt();
    let rho_dt = spec.t_shape.derivative_bound();
    let ca = spec.c_a.abs();
    let cv = spec.c_v.abs();
    let bound_c = [
        ca * shift.powf(1.0 + eps),
        ca * rho_dt * shift.powf(1.0 + eps),
        ca * (1.0 + eps) * shift.powf(2.0 + eps),
        cv * shift.powf((1.0 - eps).abs()),
        cv * rho_dt * shift.powf((1.0 - eps).abs()),
        cv * (1.0 - eps).abs() * shift.powf(eps),
    ]
    .into_iter()
    .fold(0.0, f64::max);

    Ok(FamilyField {
        spec: spec.clone(),
        center,
        certificate: DecayCertificate {
            epsilon: eps,
            bound_c,
        },
    })
}

impl FamilyField {
    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    /// Returns `(r, <r>^2)` with `r = x - x_c`.
    fn offset(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let r: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let jb2 = 1.0 + r.iter().map(|v| v * v).sum::<f64>();
        (r, jb2)
    }

    /// Spatial profile of the metric perturbation, `<r>^{-1-ε}`.
    fn metric_profile(&self, jb2: f64) -> f64 {
        jb2.powf(-0.5 * (1.0 + self.spec.epsilon))
    }

    fn scalar_metric(&self, t: f64, jb2: f64) -> f64 {
        1.0 + self.spec.c_a * self.spec.t_shape.value(t) * self.metric_profile(jb2)
    }

    fn diagonal(&self, value: f64) -> Vec<f64> {
        let d = self.spec.dim;
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = value;
        }
        m
    }
}

impl PerturbationField for FamilyField {
    fn dim(&self) -> usize {
        self.spec.dim
    }

    fn metric(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let (_, jb2) = self.offset(x);
        self.diagonal(self.scalar_metric(t, jb2))
    }

    fn metric_grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let d = self.spec.dim;
        let (r, jb2) = self.offset(x);
        let eps = self.spec.epsilon;
        // ∂_k <r>^{-1-ε} = -(1+ε) <r>^{-3-ε} r_k
        let coef = -self.spec.c_a
            * self.spec.t_shape.value(t)
            * (1.0 + eps)
            * jb2.powf(-0.5 * (3.0 + eps));
        let mut out = vec![0.0; d * d * d];
        for k in 0..d {
            for i in 0..d {
                out[k * d * d + i * d + i] = coef * r[k];
            }
        }
        out
    }

    fn metric_dt(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let (_, jb2) = self.offset(x);
        self.diagonal(self.spec.c_a * self.spec.t_shape.derivative(t) * self.metric_profile(jb2))
    }

    fn potential(&self, t: f64, x: &[f64]) -> f64 {
        let (_, jb2) = self.offset(x);
        self.spec.c_v * self.spec.t_shape.value(t) * jb2.powf(0.5 * (1.0 - self.spec.epsilon))
    }

    fn potential_grad(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let (r, jb2) = self.offset(x);
        let eps = self.spec.epsilon;
        let coef = self.spec.c_v
            * self.spec.t_shape.value(t)
            * (1.0 - eps)
            * jb2.powf(-0.5 * (1.0 + eps));
        r.iter().map(|rk| coef * rk).collect()
    }

    fn potential_dt(&self, t: f64, x: &[f64]) -> f64 {
        let (_, jb2) = self.offset(x);
        self.spec.c_v * self.spec.t_shape.derivative(t) * jb2.powf(0.5 * (1.0 - self.spec.epsilon))
    }

    fn certificate(&self) -> DecayCertificate {
        self.certificate
    }

    fn metric_1d(&self, t: f64, x: f64) -> f64 {
        let r = x - self.center[0];
        self.scalar_metric(t, 1.0 + r * r)
    }

    fn potential_1d(&self, t: f64, x: f64) -> f64 {
        if self.spec.c_v == 0.0 {
            return 0.0;
        }
        let r = x - self.center[0];
        self.spec.c_v * self.spec.t_shape.value(t) * (1.0 + r * r).powf(0.5 * (1.0 - self.spec.epsilon))
    }

    fn is_unperturbed(&self) -> bool {
        self.spec.c_a == 0.0 && self.spec.c_v == 0.0
    }
}

/// Rectangle `[t_min, t_max] × [x_min, x_max]^d` sampled on a tensor grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleBox {
    pub t_range: (f64, f64),
    pub x_range: (f64, f64),
}

/// Worst-case ratios of the sampled decay bounds. Passes iff every ratio is ≤ 1 and `a` stays positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub certificate: DecayCertificate,
    pub metric_ratio: f64,
    pub metric_dt_ratio: f64,
    pub metric_grad_ratio: f64,
    pub potential_ratio: f64,
    pub potential_dt_ratio: f64,
    pub potential_grad_ratio: f64,
    pub min_eigenvalue: f64,
    pub max_asymmetry: f64,
    pub samples: usize,
    pub passed: bool,
}

impl ValidationReport {
    pub fn worst_ratio(&self) -> f64 {
        [
            self.metric_ratio,
            self.metric_dt_ratio,
            self.metric_grad_ratio,
            self.potential_ratio,
            self.potential_dt_ratio,
            self.potential_grad_ratio,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Samples the decay bounds with the field's own certificate.
pub fn validate_decay(
    field: &dyn PerturbationField,
    sample_box: &SampleBox,
    n_samples: usize,
) -> ValidationReport {
    validate_decay_with(field, field.certificate(), sample_box, n_samples)
}

/// Samples the decay bounds against an explicitly supplied certificate.
pub fn validate_decay_with(
    field: &dyn PerturbationField,
    cert: DecayCertificate,
    sample_box: &SampleBox,
    n_samples: usize,
) -> ValidationReport {
    let n = n_samples.max(2);
    let d = field.dim();
    let axis = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;

    let ratio = |value: f64, weight: f64| -> f64 {
        let v = value * weight;
        if v == 0.0 {
            0.0
        } else if cert.bound_c > 0.0 {
            v / cert.bound_c
        } else {
            f64::INFINITY
        }
    };

    let mut report = ValidationReport {
        certificate: cert,
        metric_ratio: 0.0,
        metric_dt_ratio: 0.0,
        metric_grad_ratio: 0.0,
        potential_ratio: 0.0,
        potential_dt_ratio: 0.0,
        potential_grad_ratio: 0.0,
        min_eigenvalue: f64::INFINITY,
        max_asymmetry: 0.0,
        samples: 0,
        passed: false,
    };

    let eps = cert.epsilon;
    let total_x = n.pow(d as u32);
    let mut x = vec![0.0; d];
    for it in 0..n {
        let t = axis(sample_box.t_range, it);
        for flat in 0..total_x {
            let mut rem = flat;
            for xi in x.iter_mut() {
                *xi = axis(sample_box.x_range, rem % n);
                rem /= n;
            }
            let jb = (1.0 + x.iter().map(|v| v * v).sum::<f64>()).sqrt();

            let a = field.metric(t, &x);
            let mut dev = 0.0f64;
            for i in 0..d {
                for j in 0..d {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    dev = dev.max((a[i * d + j] - delta).abs());
                    report.max_asymmetry = report.max_asymmetry.max((a[i * d + j] - a[j * d + i]).abs());
                }
            }
            report.metric_ratio = report.metric_ratio.max(ratio(dev, jb.powf(1.0 + eps)));

            let a_dt = field.metric_dt(t, &x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            report.metric_dt_ratio = report.metric_dt_ratio.max(ratio(a_dt, jb.powf(1.0 + eps)));

            let a_dx = field.metric_grad(t, &x).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            report.metric_grad_ratio = report.metric_grad_ratio.max(ratio(a_dx, jb.powf(2.0 + eps)));

            let v = field.potential(t, &x).abs();
            report.potential_ratio = report.potential_ratio.max(ratio(v, jb.powf(eps - 1.0)));

            let v_dt = field.potential_dt(t, &x).abs();
            report.potential_dt_ratio = report.potential_dt_ratio.max(ratio(v_dt, jb.powf(eps - 1.0)));

            let v_dx = field.potential_grad(t, &x).iter().fold(0.0f64, |m, g| m.max(g.abs()));
            report.potential_grad_ratio = report.potential_grad_ratio.max(ratio(v_dx, jb.powf(eps)));

            let min_eig = if d == 1 {
                a[0]
            } else {
                let m = DMatrix::from_row_slice(d, d, &a);
                SymmetricEigen::new(m).eigenvalues.min()
            };
            report.min_eigenvalue = report.min_eigenvalue.min(min_eig);
            report.samples += 1;
        }
    }

    // Relative slack for rounding in the saturated case.
    const SLACK: f64 = 1.0 + 1e-12;
    report.passed = report.worst_ratio() <= SLACK && report.min_eigenvalue > 0.0;
    report
}
