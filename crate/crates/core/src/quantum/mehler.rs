use super::{MehlerQuadrature, PropagatorConfig, SpaceTimeField, SpatialGrid, WaveFunction, C64};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::Arc;

/// Exact `e^{-itH_os}`, `H_os = ½p² + ½x²`, on a fixed grid.
///
/// The kernel sum `Σ_j K_t(x_k, x_j) φ_j dx` is evaluated by a chirp-z convolution. Times are first
/// reduced by quarter periods into `[π/4, 3π/4)`, where `|sin t| ≥ 1/√2` keeps the aliased copies of
/// the kernel quadrature at least `√2 π/dx` away. Short times `|t| < π/4` skip the rotation and use
/// [`MehlerEngine::shear_step`]: a quarter turn swaps position and momentum, so a packet of phase-space
/// radius above `L` would leave the grid on the way.
pub struct MehlerEngine {
    grid: SpatialGrid,
    m: usize,
    fwd_m: Arc<dyn Fft<f64>>,
    inv_m: Arc<dyn Fft<f64>>,
    fwd_n: Arc<dyn Fft<f64>>,
    inv_n: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for MehlerEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MehlerEngine").field("grid", &self.grid).finish()
    }
}

/// `(2πi sin t)^{-1/2}` on the branch continuous in `t` from `0⁺`.
fn kernel_prefactor(t: f64) -> C64 {
    let k = (t / PI).floor();
    C64::from_polar((2.0 * PI * t.sin().abs()).powf(-0.5), -FRAC_PI_4 - k * FRAC_PI_2)
}

impl MehlerEngine {
    pub fn new(grid: SpatialGrid) -> Self {
        let n = grid.n_points;
        let m = 2 * n;
        let mut planner = FftPlanner::new();
        Self {
            grid,
            m,
            fwd_m: planner.plan_fft_forward(m),
            inv_m: planner.plan_fft_inverse(m),
            fwd_n: planner.plan_fft_forward(n),
            inv_n: planner.plan_fft_inverse(n),
        }
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    /// `e^{-itH_os} φ`.
    pub fn propagate(&self, phi: &WaveFunction, t: f64, quadrature: MehlerQuadrature) -> WaveFunction {
        if t == 0.0 {
            return phi.clone();
        }
        if quadrature == MehlerQuadrature::QuarterPeriodComposition && t.abs() < FRAC_PI_4 {
            let mut values = phi.values.clone();
            self.shear_step(&mut values, t);
            return WaveFunction::new(self.grid, values);
        }
        let quarters = ((t - FRAC_PI_4) / FRAC_PI_2).floor();
        let rest = t - quarters * FRAC_PI_2;
        let mut values = phi.values.clone();
        let step = if quarters >= 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 };
        for _ in 0..quarters.abs() as usize {
            values = self.kernel(&values, step, quadrature);
        }
        values = self.kernel(&values, rest, quadrature);
        WaveFunction::new(self.grid, values)
    }

    /// Quarter period `e^{∓i(π/2)H_os} = e^{∓iπ/4} F^{±1}`.
    pub fn quarter(&self, phi: &WaveFunction, forward: bool) -> WaveFunction {
        let t = if forward { FRAC_PI_2 } else { -FRAC_PI_2 };
        WaveFunction::new(self.grid, self.kernel(&phi.values, t, MehlerQuadrature::QuarterPeriodComposition))
    }

    fn kernel(&self, values: &[C64], t: f64, quadrature: MehlerQuadrature) -> Vec<C64> {
        match quadrature {
            MehlerQuadrature::KernelDirect => self.kernel_direct(values, t),
            MehlerQuadrature::QuarterPeriodComposition => self.kernel_chirp(values, t),
        }
    }

    /// `O(N²)` reference evaluation of the kernel sum.
    pub fn kernel_direct(&self, values: &[C64], t: f64) -> Vec<C64> {
        let g = self.grid;
        let (sn, c) = t.sin_cos();
        let pre = kernel_prefactor(t) * g.dx();
        let xs = g.nodes();
        xs.par_iter()
            .map(|&x| {
                let mut acc = C64::new(0.0, 0.0);
                for (y, v) in xs.iter().zip(values) {
                    acc += C64::from_polar(1.0, ((x * x + y * y) * c - 2.0 * x * y) / (2.0 * sn)) * v;
                }
                pre * acc
            })
            .collect()
    }

    /// Chirp-z evaluation of the same sum in `O(N log N)`.
    ///
    /// With `x_j = -L + j dx`: `x_k x_j = L² - L dx (k + j) + dx² k j` and `kj = ½(k² + j² - (k-j)²)`.
    fn kernel_chirp(&self, values: &[C64], t: f64) -> Vec<C64> {
        let g = self.grid;
        let n = g.n_points;
        let (sn, c) = t.sin_cos();
        let (l, dx) = (g.half_width, g.dx());
        let alpha = c / (2.0 * sn);
        let beta = dx * dx / sn;
        let shift = l * dx / sn;
        // Exact integer squares keep the chirp phases accurate for large indices.
        let chirp = |j: usize| -> f64 { 0.5 * beta * (j * j) as f64 };
        let mut a = vec![C64::new(0.0, 0.0); self.m];
        for j in 0..n {
            let x = g.x(j);
            a[j] = values[j] * C64::from_polar(dx, alpha * x * x + shift * j as f64 - chirp(j));
        }
        let mut b = vec![C64::new(0.0, 0.0); self.m];
        for mm in 0..n {
            let w = C64::from_polar(1.0, chirp(mm));
            b[mm] = w;
            if mm > 0 {
                b[self.m - mm] = w;
            }
        }
        self.fwd_m.process(&mut a);
        self.fwd_m.process(&mut b);
        for (u, v) in a.iter_mut().zip(&b) {
            *u *= v / self.m as f64;
        }
        self.inv_m.process(&mut a);
        let pre = kernel_prefactor(t) * C64::from_polar(1.0, -l * l / sn);
        (0..n)
            .map(|k| {
                let x = g.x(k);
                pre * C64::from_polar(1.0, alpha * x * x + shift * k as f64 - chirp(k)) * a[k]
            })
            .collect()
    }

    /// `e^{-iτH_os}` for `|τ| < π` by the exact factorization
    /// `e^{-i tan(τ/2) x²/2} e^{-i sin(τ) p²/2} e^{-i tan(τ/2) x²/2}`, with `p²` applied spectrally.
    pub fn shear_step(&self, values: &mut [C64], tau: f64) {
        let g = self.grid;
        let n = g.n_points;
        let half = (0.5 * tau).tan();
        let kin = tau.sin();
        for (j, v) in values.iter_mut().enumerate() {
            let x = g.x(j);
            *v *= C64::from_polar(1.0, -0.5 * half * x * x);
        }
        self.fwd_n.process(values);
        for (v, k) in values.iter_mut().zip(g.wavenumbers()) {
            *v *= C64::from_polar(1.0 / n as f64, -0.5 * kin * k * k);
        }
        self.inv_n.process(values);
        for (j, v) in values.iter_mut().enumerate() {
            let x = g.x(j);
            *v *= C64::from_polar(1.0, -0.5 * half * x * x);
        }
    }

    pub(crate) fn fft_forward(&self, values: &mut [C64]) {
        self.fwd_n.process(values);
    }

    /// Unnormalized inverse; callers divide by `N`.
    pub(crate) fn fft_inverse(&self, values: &mut [C64]) {
        self.inv_n.process(values);
    }
}

/// `e^{-itH_os} φ` by Mehler-kernel quadrature.
pub fn mehler_propagate(phi: &WaveFunction, t: f64, cfg: &PropagatorConfig) -> WaveFunction {
    MehlerEngine::new(phi.grid).propagate(phi, t, cfg.mehler_quadrature)
}

/// `u_os(t_k, ·) = e^{-i t_k H_os} φ` on `n_t` uniform times of `t_window`.
pub fn evolve_spacetime_os(phi: &WaveFunction, t_window: (f64, f64), n_t: usize, cfg: &PropagatorConfig) -> SpaceTimeField {
    let engine = MehlerEngine::new(phi.grid);
    let (t0, t1) = t_window;
    let dt = if n_t < 2 { 0.0 } else { (t1 - t0) / (n_t - 1) as f64 };
    let rows: Vec<WaveFunction> =
        (0..n_t).into_par_iter().map(|k| engine.propagate(phi, t0 + k as f64 * dt, cfg.mehler_quadrature)).collect();
    SpaceTimeField::from_rows(t0, t1, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::coherent_state;

    fn gaussian_grid() -> SpatialGrid {
        SpatialGrid::new(16.0, 512).unwrap()
    }

    #[test]
    fn chirp_matches_direct_sum() {
        let g = gaussian_grid();
        let phi = coherent_state(g, 1.0, 0.8, 1.0).unwrap();
        let e = MehlerEngine::new(g);
        for &t in &[0.9, FRAC_PI_2, -FRAC_PI_2, 2.2] {
            let a = WaveFunction::new(g, e.kernel_chirp(&phi.values, t));
            let b = WaveFunction::new(g, e.kernel_direct(&phi.values, t));
            assert!(a.distance(&b) < 1e-11, "t={t}: {}", a.distance(&b));
        }
    }

    #[test]
    fn quarter_period_is_fourier_transform() {
        // On the self-dual grid dx² = 2π/N the continuous transform is a plain DFT.
        let n = 1024;
        let g = SpatialGrid::new((PI * n as f64 / 2.0).sqrt(), n).unwrap();
        let phi = coherent_state(g, 1.5, -0.6, 1.0).unwrap();
        let out = mehler_propagate(&phi, FRAC_PI_2, &PropagatorConfig::default());
        let l = g.half_width;
        let dx = g.dx();
        let mut buf: Vec<C64> =
            phi.values.iter().enumerate().map(|(j, v)| v * C64::from_polar(1.0, l * dx * j as f64)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let oracle: Vec<C64> = buf
            .iter()
            .enumerate()
            .map(|(k, v)| {
                C64::from_polar(dx / (2.0 * PI).sqrt(), -FRAC_PI_4 - l * l + l * dx * k as f64) * v
            })
            .collect();
        assert!(out.distance(&WaveFunction::new(g, oracle)) < 1e-8);
    }

    #[test]
    fn full_period_flips_sign() {
        let g = gaussian_grid();
        let phi = coherent_state(g, 1.0, 0.5, 1.0).unwrap();
        let out = mehler_propagate(&phi, 2.0 * PI, &PropagatorConfig::default());
        let mut neg = phi.clone();
        neg.scale(C64::new(-1.0, 0.0));
        assert!(out.distance(&neg) < 1e-8);
    }

    #[test]
    fn group_property_and_unitarity() {
        let g = gaussian_grid();
        let phi = coherent_state(g, -0.7, 1.1, 0.5).unwrap();
        let cfg = PropagatorConfig::default();
        for (t1, t2) in [(0.3, 0.45), (1.2, 2.5), (-0.4, 0.1)] {
            let a = mehler_propagate(&mehler_propagate(&phi, t1, &cfg), t2, &cfg);
            let b = mehler_propagate(&phi, t1 + t2, &cfg);
            assert!(a.distance(&b) < 1e-7);
            assert!((b.norm() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn coherent_center_follows_classical_orbit() {
        let g = gaussian_grid();
        let (y, p) = (1.5, 0.8);
        let phi = coherent_state(g, y, p, 1.0).unwrap();
        let cfg = PropagatorConfig::default();
        for &t in &[0.4, 1.0, 2.7] {
            let u = mehler_propagate(&phi, t, &cfg);
            // A unit-width Gaussian is a stationary coherent state: exact shape, moving center.
            let (xt, pt) = (y * t.cos() + p * t.sin(), -y * t.sin() + p * t.cos());
            let exact = coherent_state(g, xt, pt, 1.0).unwrap();
            // Global phase: -t/2 from the ground energy and the classical action term.
            let phase = (exact.inner(&u)).arg();
            let mut e = exact.clone();
            e.scale(C64::from_polar(1.0, phase));
            assert!(u.distance(&e) < 1e-6, "t={t}");
            assert!((u.position_mean() - xt).abs() < 1e-6);
        }
    }

    #[test]
    fn direct_and_composition_quadratures_agree() {
        let g = gaussian_grid();
        let phi = coherent_state(g, 0.3, 0.2, 1.0).unwrap();
        let e = MehlerEngine::new(g);
        for &t in &[0.05, 1.0, 3.0] {
            let a = e.propagate(&phi, t, MehlerQuadrature::KernelDirect);
            let b = e.propagate(&phi, t, MehlerQuadrature::QuarterPeriodComposition);
            assert!(a.distance(&b) < 1e-10);
        }
    }

    #[test]
    fn shear_step_matches_kernel() {
        let g = gaussian_grid();
        let phi = coherent_state(g, 0.3, 0.9, 0.7).unwrap();
        let e = MehlerEngine::new(g);
        for &t in &[0.01, 0.6, 2.0] {
            let mut v = phi.values.clone();
            e.shear_step(&mut v, t);
            let a = WaveFunction::new(g, v);
            let b = e.propagate(&phi, t, MehlerQuadrature::QuarterPeriodComposition);
            assert!(a.distance(&b) < 1e-9, "t={t}: {}", a.distance(&b));
        }
    }

    #[test]
    fn short_times_keep_wide_packets_on_grid() {
        // Phase-space radius 30 > L: a quarter-turn detour would wrap the packet.
        let g = SpatialGrid::new(20.0, 2048).unwrap();
        let phi = coherent_state(g, 0.5, 1.0, 1.0 / 30.0).unwrap();
        let e = MehlerEngine::new(g);
        let back = e.propagate(&phi, -0.4, MehlerQuadrature::QuarterPeriodComposition);
        assert!((back.norm() - 1.0).abs() < 1e-10);
        let there = e.propagate(&back, 0.4, MehlerQuadrature::QuarterPeriodComposition);
        assert!(there.distance(&phi) < 1e-9);
        let xt = 0.5 * 0.4f64.cos() - 30.0 * 0.4f64.sin();
        assert!((back.position_mean() - xt).abs() < 1e-6);
    }

    #[test]
    fn spacetime_rows() {
        let g = gaussian_grid();
        let phi = coherent_state(g, 0.3, 0.9, 1.0).unwrap();
        let cfg = PropagatorConfig::default();
        let f = evolve_spacetime_os(&phi, (0.0, 2.0 * PI), 9, &cfg);
        assert_eq!(f.row(0), phi);
        assert!(f.row_norms().iter().all(|n| (n - 1.0).abs() < 1e-8));
        let mut last = f.row(8);
        last.scale(C64::new(-1.0, 0.0));
        assert!(last.distance(&phi) < 1e-6);
    }
}
