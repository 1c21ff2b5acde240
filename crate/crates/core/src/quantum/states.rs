use super::{QuantumError, SpatialGrid, WaveFunction, C64};
use rustfft::FftPlanner;

/// Edge amplitude above which a state is considered to feel the box.
pub const EDGE_LIMIT: f64 = 1e-12;

/// `(πh)^{-1/4} exp(-(x-y)²/(2h)) exp(iηx/h)`, normalized on the grid.
pub fn coherent_state(grid: SpatialGrid, y: f64, eta: f64, h: f64) -> Result<WaveFunction, QuantumError> {
    if !(h > 0.0) {
        return Err(QuantumError::InvalidParameter(format!("h = {h} must be positive")));
    }
    let amp = (std::f64::consts::PI * h).powf(-0.25);
    let mut phi = WaveFunction::from_fn(grid, |x| {
        amp * (-(x - y).powi(2) / (2.0 * h)).exp() * C64::from_polar(1.0, eta * x / h)
    });
    let edge = phi.values[0].norm().max(phi.values[grid.n_points - 1].norm());
    if edge > EDGE_LIMIT {
        return Err(QuantumError::GridTooSmall { edge, limit: EDGE_LIMIT });
    }
    phi.normalize();
    Ok(phi)
}

/// `|x - y0|^{s0}` times the Gaussian cutoff `exp(-(x-y0)²/(2w²))`, normalized.
pub fn singular_state(grid: SpatialGrid, y0: f64, s0: f64, width: f64) -> Result<WaveFunction, QuantumError> {
    if !(s0 > 0.5 && s0 < 1.0) {
        return Err(QuantumError::InvalidParameter(format!("s0 = {s0} must lie in (0.5, 1)")));
    }
    if !(width > 0.0) {
        return Err(QuantumError::InvalidParameter(format!("cutoff width {width} must be positive")));
    }
    let mut phi = WaveFunction::from_fn(grid, |x| {
        let r = x - y0;
        C64::new(r.abs().powf(s0) * (-r * r / (2.0 * width * width)).exp(), 0.0)
    });
    let edge = phi.edge_amplitude(1);
    if edge > EDGE_LIMIT {
        return Err(QuantumError::GridTooSmall { edge, limit: EDGE_LIMIT });
    }
    phi.normalize();
    Ok(phi)
}

/// Unitary-normalized DFT coefficients `φ̂(k_m)` in FFT order, `dx/√(2π) Σ_j φ_j e^{-i k_m x_j}`.
pub fn spectrum(phi: &WaveFunction) -> Vec<C64> {
    let n = phi.grid.n_points;
    let mut buf = phi.values.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let x0 = phi.grid.x(0);
    let scale = phi.grid.dx() / (2.0 * std::f64::consts::PI).sqrt();
    phi.grid
        .wavenumbers()
        .iter()
        .zip(buf)
        .map(|(k, v)| v * C64::from_polar(scale, -k * x0))
        .collect()
}

/// Spectral mean of the wavenumber.
pub fn momentum_mean(phi: &WaveFunction) -> f64 {
    let s = spectrum(phi);
    let k = phi.grid.wavenumbers();
    let w: f64 = s.iter().map(|v| v.norm_sqr()).sum();
    s.iter().zip(&k).map(|(v, k)| k * v.norm_sqr()).sum::<f64>() / w
}

/// Multiplies the spectrum by the smooth taper `exp(-(k/k_cut)^8)`.
pub fn band_limit(phi: &WaveFunction, k_cut: f64) -> WaveFunction {
    let n = phi.grid.n_points;
    let mut planner = FftPlanner::new();
    let mut buf = phi.values.clone();
    planner.plan_fft_forward(n).process(&mut buf);
    for (v, k) in buf.iter_mut().zip(phi.grid.wavenumbers()) {
        *v *= (-(k / k_cut).powi(8)).exp() / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    WaveFunction::new(phi.grid, buf)
}

/// Finite-difference `H¹` seminorm `(Σ |Δφ/dx|² dx)^{1/2}`.
pub fn h1_seminorm(phi: &WaveFunction) -> f64 {
    let dx = phi.grid.dx();
    (phi.values.windows(2).map(|w| ((w[1] - w[0]) / dx).norm_sqr()).sum::<f64>() * dx).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::loglog_slope;

    #[test]
    fn coherent_moments() {
        let g = SpatialGrid::new(12.0, 1024).unwrap();
        let (y, eta, h) = (1.3, 0.7, 0.25);
        let phi = coherent_state(g, y, eta, h).unwrap();
        assert!((phi.norm() - 1.0).abs() < 1e-10);
        assert!((phi.position_mean() - y).abs() < g.dx());
        assert!((momentum_mean(&phi) - eta / h).abs() / (eta / h) < 1e-6);
    }

    #[test]
    fn coherent_rejects_small_box() {
        let g = SpatialGrid::new(3.0, 256).unwrap();
        assert!(matches!(coherent_state(g, 0.0, 0.0, 1.0), Err(QuantumError::GridTooSmall { .. })));
    }

    #[test]
    fn singular_vanishes_at_center() {
        let g = SpatialGrid::new(20.0, 1024).unwrap();
        let y0 = g.x(600);
        let phi = singular_state(g, y0, 0.75, 1.0).unwrap();
        assert_eq!(phi.values[600], C64::new(0.0, 0.0));
        assert!((phi.norm() - 1.0).abs() < 1e-12);
        assert!(singular_state(g, y0, 0.4, 1.0).is_err());
    }

    #[test]
    fn singular_h1_stable_under_refinement() {
        let a = singular_state(SpatialGrid::new(20.0, 2048).unwrap(), 0.5, 0.75, 1.0).unwrap();
        let b = singular_state(SpatialGrid::new(20.0, 4096).unwrap(), 0.5, 0.75, 1.0).unwrap();
        let ratio = h1_seminorm(&a) / h1_seminorm(&b);
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn singular_spectral_tail() {
        let g = SpatialGrid::new(20.0, 4096).unwrap();
        let phi = singular_state(g, 0.0, 0.75, 1.0).unwrap();
        let s = spectrum(&phi);
        let k = g.wavenumbers();
        let (ks, mags): (Vec<f64>, Vec<f64>) =
            k.iter().zip(&s).filter(|(k, _)| **k >= 5.0 && **k <= 50.0).map(|(k, v)| (*k, v.norm())).unzip();
        let slope = loglog_slope(&ks, &mags).unwrap();
        assert!((slope + 1.75).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn band_limit_keeps_low_modes() {
        let g = SpatialGrid::new(10.0, 512).unwrap();
        let phi = coherent_state(g, 0.0, 0.0, 1.0).unwrap();
        let d = band_limit(&phi, 40.0).distance(&phi);
        assert!(d < 1e-10, "{d}");
    }
}
