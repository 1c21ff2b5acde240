use super::{MicrolocalError, ProbeWindow};
use crate::classical::{pi_map, pi_os_map, DirectionPoint};
use crate::model::PerturbationField;
use serde::{Deserialize, Serialize};

/// Widths shared by every probe of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeShape {
    pub space_time_width: (f64, f64),
    pub freq_width: f64,
    #[serde(default = "two")]
    pub theta: f64,
}

fn two() -> f64 {
    2.0
}

impl Default for ProbeShape {
    fn default() -> Self {
        Self { space_time_width: (0.05, 0.5), freq_width: 0.3, theta: 2.0 }
    }
}

impl ProbeShape {
    pub fn window(&self, center: DirectionPoint) -> Result<ProbeWindow, MicrolocalError> {
        let p = ProbeWindow { center, space_time_width: self.space_time_width, freq_width: self.freq_width, theta: self.theta };
        p.validate()?;
        Ok(p)
    }
}

fn pair_from(center: DirectionPoint, shape: &ProbeShape) -> Result<(ProbeWindow, ProbeWindow), MicrolocalError> {
    let off = DirectionPoint { tau_hat: -center.tau_hat, ..center.clone() };
    Ok((shape.window(center)?, shape.window(off)?))
}

/// Probes at `Π(s, y, η)` and at the same point with `τ̂` negated.
pub fn characteristic_probe_pair(
    field: &dyn PerturbationField,
    s: f64,
    y: f64,
    eta: f64,
    shape: &ProbeShape,
) -> Result<(ProbeWindow, ProbeWindow), MicrolocalError> {
    if eta == 0.0 {
        return Err(MicrolocalError::Precondition("η = 0 has no characteristic direction".into()));
    }
    pair_from(pi_map(field, s, &[y], &[eta])?, shape)
}

/// [`characteristic_probe_pair`] for the unperturbed oscillator.
pub fn characteristic_probe_pair_os(
    s: f64,
    x: f64,
    xi: f64,
    shape: &ProbeShape,
) -> Result<(ProbeWindow, ProbeWindow), MicrolocalError> {
    if xi == 0.0 {
        return Err(MicrolocalError::Precondition("ξ = 0 has no characteristic direction".into()));
    }
    pair_from(pi_os_map(s, &[x], &[xi])?, shape)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_family, FamilySpec};

    #[test]
    fn unperturbed_pair() {
        let free = make_family(&FamilySpec::unperturbed()).unwrap();
        let (on, off) = characteristic_probe_pair(&free, 0.5, 1.0, 1.0, &ProbeShape::default()).unwrap();
        assert!((on.center.tau_hat + 0.4142136).abs() < 1e-7);
        assert!((off.center.tau_hat - 0.4142136).abs() < 1e-7);
        assert!(on.center.sphere_defect() < 1e-12 && off.center.sphere_defect() < 1e-12);
        assert!(on.center.dual_distance(&off.center) >= 0.8);
        assert_eq!(on.space_time_width, off.space_time_width);
        assert_eq!(on.freq_width, off.freq_width);
        let (os, _) = characteristic_probe_pair_os(0.5, 1.0, 1.0, &ProbeShape::default()).unwrap();
        assert_eq!(os.center, on.center);
    }

    #[test]
    fn perturbed_pair_uses_metric() {
        let f = make_family(&FamilySpec::new(0.3, 0.0, 0.5)).unwrap();
        let (on, _) = characteristic_probe_pair(&f, 0.5, 1.0, 1.0, &ProbeShape::default()).unwrap();
        assert!(on.center.tau_hat < -0.4142136);
        assert!(on.center.sphere_defect() < 1e-12);
        assert!(characteristic_probe_pair(&f, 0.5, 1.0, 0.0, &ProbeShape::default()).is_err());
    }
}
