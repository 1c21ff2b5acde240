//! Numerical quasi-homogeneous wave front sets, symbol transport along `F_l`, and the Egorov check.

mod cutoff;
mod egorov;
mod fft2;
mod probes;
pub mod synthetic;

pub use cutoff::*;
pub use egorov::*;
pub use probes::*;

use crate::classical::{ClassicalError, DirectionPoint};
use crate::quantum::QuantumError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MicrolocalError {
    #[error("domain: {0}")]
    Domain(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error("degenerate fit: {0} usable h values, need at least 3")]
    DegenerateFit(usize),
    #[error("flow failed at {} sample(s), first at {:?}", .0.len(), .0.first())]
    FlowFailure(Vec<[f64; 4]>),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Classical(#[from] ClassicalError),
}

/// `exp(1 - 1/(1 - u²))` on `|u| < 1`, zero elsewhere; peak value 1.
pub fn smooth_bump(u: f64) -> f64 {
    let r = 1.0 - u * u;
    if r <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / r).exp()
    }
}

/// Number of widths beyond which the space-time Gaussian `χ` is treated as zero.
pub const SUPPORT_WIDTHS: f64 = 6.0;

fn default_theta() -> f64 {
    2.0
}

/// Localization `χ(t,x) ψ(h^θτ, hξ)` around a point of the space-time cosphere bundle (`d = 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeWindow {
    pub center: DirectionPoint,
    /// `(w_t, w_x)`: standard deviations of the Gaussian `χ`.
    pub space_time_width: (f64, f64),
    /// Chordal radius of the direction cap on the unit circle.
    pub freq_width: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

impl ProbeWindow {
    pub fn new(center: DirectionPoint, space_time_width: (f64, f64), freq_width: f64) -> Result<Self, MicrolocalError> {
        let p = Self { center, space_time_width, freq_width, theta: 2.0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MicrolocalError> {
        let (wt, wx) = self.space_time_width;
        if !(wt > 0.0 && wx > 0.0 && self.freq_width > 0.0 && self.theta > 0.0) {
            return Err(MicrolocalError::Precondition("probe widths and θ must be positive".into()));
        }
        if self.center.x.len() != 1 || self.center.xi_hat.len() != 1 {
            return Err(MicrolocalError::Precondition("probe windows are one-dimensional".into()));
        }
        if self.center.sphere_defect() > 1e-9 {
            return Err(MicrolocalError::Precondition(format!(
                "probe center off the unit sphere by {:e}",
                self.center.sphere_defect()
            )));
        }
        Ok(())
    }

    pub fn s(&self) -> f64 {
        self.center.t
    }

    pub fn y(&self) -> f64 {
        self.center.x[0]
    }

    pub fn chi(&self, t: f64, x: f64) -> f64 {
        let (wt, wx) = self.space_time_width;
        let a = (t - self.s()) / wt;
        let b = (x - self.y()) / wx;
        (-0.5 * (a * a + b * b)).exp()
    }

    /// Frequency bump at scaled frequencies `(T, Ξ) = (h^θ τ, h ξ)`: direction cap times the shell `|(T,Ξ)| ∈ [½, 2]`.
    pub fn psi(&self, big_t: f64, big_xi: f64) -> f64 {
        let r = big_t.hypot(big_xi);
        if r <= 0.5 || r >= 2.0 {
            return 0.0;
        }
        let d = (big_t / r - self.center.tau_hat).hypot(big_xi / r - self.center.xi_hat[0]);
        smooth_bump(d / self.freq_width) * smooth_bump(r.log2())
    }

    /// Principal symbol `χ⁴ψ²` of `(χψχ)*(χψχ)`.
    pub fn symbol(&self, t: f64, x: f64, big_t: f64, big_xi: f64) -> f64 {
        let p = self.psi(big_t, big_xi);
        if p == 0.0 {
            return 0.0;
        }
        self.chi(t, x).powi(4) * p * p
    }

    /// Same window centered at another point.
    pub fn recentered(&self, center: DirectionPoint) -> Self {
        Self { center, ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probe() -> ProbeWindow {
        let c = DirectionPoint::normalized(0.5, vec![1.0], -1.0, vec![2.0]);
        ProbeWindow::new(c, (0.1, 0.5), 0.3).unwrap()
    }

    #[test]
    fn bumps() {
        assert_eq!(smooth_bump(0.0), 1.0);
        assert_eq!(smooth_bump(1.0), 0.0);
        assert!(smooth_bump(0.99) > 0.0 && smooth_bump(0.99) < 1e-20);
        let p = probe();
        assert_eq!(p.chi(0.5, 1.0), 1.0);
        let (t, xi) = (p.center.tau_hat, p.center.xi_hat[0]);
        assert!((p.psi(t, xi) - 1.0).abs() < 1e-15);
        assert_eq!(p.psi(0.4 * t, 0.4 * xi), 0.0);
        assert_eq!(p.psi(-t, -xi), 0.0);
        assert!((p.symbol(0.5, 1.0, t, xi) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_windows() {
        let c = DirectionPoint { t: 0.0, x: vec![0.0], tau_hat: 1.0, xi_hat: vec![1.0] };
        assert!(ProbeWindow::new(c.clone(), (0.1, 0.1), 0.2).is_err());
        let c = DirectionPoint::normalized(0.0, vec![0.0], 1.0, vec![1.0]);
        assert!(ProbeWindow::new(c, (0.0, 0.1), 0.2).is_err());
    }
}
