use super::flows::scaled_trajectory;
use super::{dot, quad, ClassicalError, FlowConfig};
use crate::model::PerturbationField;
use crate::numerics::{linear_fit, median};
use serde::{Deserialize, Serialize};

/// Kinetic bounds and convexity of `|z_λ|²` along the scaled flow on `[0, δλ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MourreReport {
    pub lambda: f64,
    pub delta: f64,
    pub kappa: Vec<f64>,
    pub z: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    /// `a γ γ + λ⁻² |z|²`.
    pub energy: Vec<f64>,
    pub radius: Vec<f64>,
    /// Second central difference of `|z|²`; the two end samples are `NaN`.
    pub convexity: Vec<f64>,
    pub kappa0: f64,
    pub c_bounds: (f64, f64),
    /// Lower line `|z| ≥ slope κ + intercept` on `κ ≥ κ₀`: least-squares slope, intercept lowered until the line is below every sample.
    pub radius_slope: f64,
    pub radius_intercept: f64,
}

impl MourreReport {
    pub fn tail_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let start = self.kappa.iter().position(|k| *k >= self.kappa0).unwrap_or(self.kappa.len());
        start..self.kappa.len()
    }

    /// Smallest second difference over interior samples with `κ ≥ κ₀`.
    pub fn min_tail_convexity(&self) -> f64 {
        self.tail_indices().filter_map(|i| Some(self.convexity[i]).filter(|v| v.is_finite())).fold(f64::INFINITY, f64::min)
    }

    /// Whether `|z(κ)| ≥ factor · slope · κ + intercept` on the tail.
    pub fn lower_bound_holds(&self, factor: f64) -> bool {
        self.tail_indices()
            .all(|i| self.radius[i] >= factor * self.radius_slope * self.kappa[i] + self.radius_intercept)
    }
}

pub fn mourre_diagnostics(
    field: &dyn PerturbationField,
    lambda: f64,
    s: f64,
    y: &[f64],
    eta: &[f64],
    delta: f64,
    cfg: &FlowConfig,
) -> Result<MourreReport, ClassicalError> {
    cfg.validate()?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ClassicalError::Precondition(format!("δ = {delta} outside (0, 1)")));
    }
    let n = cfg.kappa_samples;
    let top = delta * lambda;
    let kappa: Vec<f64> = (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect();
    let traj = scaled_trajectory(field, lambda, s, y, eta, &kappa, cfg)?;
    let inv2 = 1.0 / (lambda * lambda);
    let mut energy = Vec::with_capacity(n);
    let mut radius = Vec::with_capacity(n);
    let mut r2 = Vec::with_capacity(n);
    for (k, p) in kappa.iter().zip(&traj) {
        let theta = (1.0 - k / lambda) * s;
        energy.push(quad(&field.metric(theta, &p.x), &p.xi, &p.xi) + inv2 * dot(&p.x, &p.x));
        r2.push(dot(&p.x, &p.x));
        radius.push(dot(&p.x, &p.x).sqrt());
    }
    let h = top / (n - 1) as f64;
    let mut convexity = vec![f64::NAN; n];
    for i in 1..n - 1 {
        convexity[i] = (r2[i + 1] - 2.0 * r2[i] + r2[i - 1]) / (h * h);
    }
    let interior = &convexity[1..n - 1];
    let tail_median = median(&interior[interior.len() / 2..]);
    let threshold = 0.5 * tail_median;
    // First index after which the second difference never drops below the threshold.
    let mut onset = n - 2;
    for i in (1..n - 1).rev() {
        if convexity[i] >= threshold {
            onset = i;
        } else {
            break;
        }
    }
    let kappa0 = kappa[onset];
    let (ks, rs): (Vec<f64>, Vec<f64>) = (onset..n).map(|i| (kappa[i], radius[i])).unzip();
    let fit = linear_fit(&ks, &rs).ok_or_else(|| ClassicalError::Domain("degenerate radius fit".into()))?;
    let intercept = ks.iter().zip(&rs).map(|(k, r)| r - fit.slope * k).fold(f64::INFINITY, f64::min);
    let c1 = energy.iter().copied().fold(f64::INFINITY, f64::min);
    let c2 = energy.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(MourreReport {
        lambda,
        delta,
        kappa,
        z: traj.iter().map(|p| p.x.clone()).collect(),
        gamma: traj.iter().map(|p| p.xi.clone()).collect(),
        energy,
        radius,
        convexity,
        kappa0,
        c_bounds: (c1, c2),
        radius_slope: fit.slope,
        radius_intercept: intercept,
    })
}
