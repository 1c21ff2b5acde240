use super::fft2::{fft2, frequencies};
use super::{cutoff_norm, MicrolocalError, ProbeWindow};
use crate::classical::{interpolated_flow_between, ExtendedPoint, FlowConfig};
use crate::model::PerturbationField;
use crate::ode::OdeConfig;
use crate::quantum::{interpolated_field, PropagatorConfig, QuantumError, SpaceTimeField, WaveFunction, C64};
use ndarray::{Array2, Array4};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// Tensor grid of sample points `(t, x, T, Ξ)` with scaled frequencies `T = h²τ`, `Ξ = hξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub tau: Vec<f64>,
    pub xi: Vec<f64>,
}

/// Image of `(t, x, ·, Ξ)` under `Θ_h F_l(κ)⁻¹ Θ_h⁻¹`. `t` is frozen and `T` is shifted by `d_tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulledPoint {
    pub x: f64,
    pub d_tau: f64,
    pub xi: f64,
}

/// `Θ_h F_l(κ_from → κ_to) Θ_h⁻¹` restricted to the `(x, Ξ)` slice; `T` enters only through an additive shift.
pub fn scaled_flow_between(
    field: &dyn PerturbationField,
    kappa_from: f64,
    kappa_to: f64,
    h: f64,
    t: f64,
    x: f64,
    xi: f64,
    cfg: &FlowConfig,
) -> Result<PulledPoint, MicrolocalError> {
    if field.is_unperturbed() || kappa_from == kappa_to {
        return Ok(PulledPoint { x, d_tau: 0.0, xi });
    }
    let end = ExtendedPoint::scalar(t, x, 0.0, xi / h);
    let p = interpolated_flow_between(field, kappa_from, kappa_to, &end, cfg)?;
    Ok(PulledPoint { x: p.x[0], d_tau: h * h * p.tau, xi: h * p.xi[0] })
}

/// `b₀(κ) = a₀ ∘ Θ_h F_l(κ)⁻¹ Θ_h⁻¹` sampled on `grid`; `a₀` is the window symbol `χ⁴ψ²`.
pub fn symbol_pullback(
    field: &dyn PerturbationField,
    a0_window: &ProbeWindow,
    kappa: f64,
    h: f64,
    grid: &SampleGrid,
    cfg: &FlowConfig,
) -> Result<Array4<f64>, MicrolocalError> {
    if !(h > 0.0) {
        return Err(MicrolocalError::Precondition(format!("h = {h} must be positive")));
    }
    let shape = (grid.t.len(), grid.x.len(), grid.tau.len(), grid.xi.len());
    let mut out = Array4::zeros(shape);
    let mut failed = Vec::new();
    for (i, &t) in grid.t.iter().enumerate() {
        for (j, &x) in grid.x.iter().enumerate() {
            for (l, &xi) in grid.xi.iter().enumerate() {
                match scaled_flow_between(field, kappa, 0.0, h, t, x, xi, cfg) {
                    Ok(p) => {
                        for (k, &tau) in grid.tau.iter().enumerate() {
                            out[[i, j, k, l]] = a0_window.symbol(t, p.x, tau + p.d_tau, p.xi);
                        }
                    }
                    Err(MicrolocalError::Classical(_)) => failed.push([t, x, f64::NAN, xi]),
                    Err(e) => return Err(e),
                }
            }
        }
    }
    if !failed.is_empty() {
        return Err(MicrolocalError::FlowFailure(failed));
    }
    Ok(out)
}

fn default_half_window() -> f64 {
    0.3
}
fn default_row_spacing() -> f64 {
    1.0
}
fn default_flow() -> FlowConfig {
    // The bump symbol needs far less than the classical suite's tolerance.
    FlowConfig { ode: OdeConfig::rk45(1e-8, 1e-8), ..FlowConfig::default() }
}
fn default_mass_tol() -> f64 {
    1e-13
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgorovConfig {
    #[serde(default)]
    pub propagator: PropagatorConfig,
    #[serde(default = "default_flow")]
    pub flow: FlowConfig,
    /// Fields are sampled on `[s - half_window, s + half_window]`.
    #[serde(default = "default_half_window")]
    pub half_window: f64,
    /// Row spacing in units of `h²`.
    #[serde(default = "default_row_spacing")]
    pub row_spacing: f64,
    /// Phase-space cells carrying less than this fraction of `‖u‖²` are skipped.
    #[serde(default = "default_mass_tol")]
    pub mass_tol: f64,
}

impl Default for EgorovConfig {
    fn default() -> Self {
        Self {
            propagator: PropagatorConfig::default(),
            flow: default_flow(),
            half_window: default_half_window(),
            row_spacing: default_row_spacing(),
            mass_tol: default_mass_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgorovResult {
    pub kappa: Vec<f64>,
    pub i_values: Vec<f64>,
    pub h: f64,
    /// `max_κ |I(κ) − I(0)|`.
    pub drift: f64,
    /// `drift / |I(0)|`.
    pub relative_drift: f64,
    /// `N(h)²` of `u` at the window, when the window fits the sampled field; otherwise NaN.
    pub cutoff_norm_sq: f64,
}

/// Gabor-frame (anti-Wick) expectation `Σ b(t₀,x₀,h²τ,hξ) |V_g u(t₀,x₀,τ,ξ)|² dt₀dx₀dτdξ/(2π)²`.
///
/// `g` is the coherent state of widths `(h/√2, √(h/2))` in `(t, x)`. `slice(t₀, x₀, Ξ)` returns the
/// symbol along `T` at fixed `(t₀, x₀, Ξ)`, or `None` when it vanishes identically.
pub fn anti_wick_expectation<'a, S>(u: &SpaceTimeField, h: f64, mass_tol: f64, slice: S) -> Result<f64, MicrolocalError>
where
    S: Fn(f64, f64, f64) -> Result<Option<Box<dyn Fn(f64) -> f64 + 'a>>, MicrolocalError>,
{
    let (n_t, n_x) = u.values.dim();
    let (dt, dx) = (u.dt(), u.grid.dx());
    let sig_t = h / std::f64::consts::SQRT_2;
    let sig_x = (0.5 * h).sqrt();
    let half_t = (6.0 * sig_t / dt).ceil() as usize;
    let half_x = (6.0 * sig_x / dx).ceil() as usize;
    if n_t < 2 {
        return Err(MicrolocalError::Domain("field needs at least two rows".into()));
    }
    let (m_t, m_x) = ((2 * half_t + 1).next_power_of_two(), (2 * half_x + 1).next_power_of_two());
    let stride_t = ((sig_t / dt).round() as usize).max(1);
    let stride_x = ((sig_x / dx).round() as usize).max(1);

    let mut window = Array2::from_shape_fn((2 * half_t + 1, 2 * half_x + 1), |(a, b)| {
        let tt = (a as f64 - half_t as f64) * dt;
        let xx = (b as f64 - half_x as f64) * dx;
        (-(tt * tt) / (4.0 * sig_t * sig_t) - xx * xx / (4.0 * sig_x * sig_x)).exp()
    });
    let wn = (window.iter().map(|v| v * v).sum::<f64>() * dt * dx).sqrt();
    window.mapv_inplace(|v| v / wn);

    // Summed-area table of |u|² for box-mass pruning.
    let mut sat = Array2::<f64>::zeros((n_t + 1, n_x + 1));
    for k in 0..n_t {
        for j in 0..n_x {
            sat[[k + 1, j + 1]] = u.values[[k, j]].norm_sqr() + sat[[k, j + 1]] + sat[[k + 1, j]] - sat[[k, j]];
        }
    }
    let total = sat[[n_t, n_x]] * dt * dx;
    let box_mass = |k0: usize, k1: usize, j0: usize, j1: usize| -> f64 {
        (sat[[k1, j1]] - sat[[k0, j1]] - sat[[k1, j0]] + sat[[k0, j0]]) * dt * dx
    };

    let tau = frequencies(m_t, dt);
    let xi = frequencies(m_x, dx);
    let spectral_cell = 1.0 / (m_t as f64 * dt * m_x as f64 * dx);
    let center_cell = stride_t as f64 * dt * stride_x as f64 * dx;
    let mut planner = FftPlanner::new();
    let mut acc = 0.0;
    let mut patch = Array2::<C64>::zeros((m_t, m_x));
    // Centers run past the field edges by a patch half-width so that Σ_c |g(· − c)|² is flat on the field.
    let (ht, hx) = (half_t as i64, half_x as i64);
    let mut kc = -ht;
    while kc < n_t as i64 + ht {
        let t0 = u.t0 + kc as f64 * dt;
        let (k0, k1) = ((kc - ht).max(0) as usize, ((kc + ht + 1).min(n_t as i64)).max(0) as usize);
        let mut jc = -hx;
        while jc < n_x as i64 + hx {
            let (j0, j1) = ((jc - hx).max(0) as usize, ((jc + hx + 1).min(n_x as i64)).max(0) as usize);
            if k1 > k0 && j1 > j0 && box_mass(k0, k1, j0, j1) > mass_tol * total {
                patch.fill(C64::new(0.0, 0.0));
                for k in k0..k1 {
                    let a = (k as i64 - kc + ht) as usize;
                    for j in j0..j1 {
                        let b = (j as i64 - jc + hx) as usize;
                        patch[[a, b]] = u.values[[k, j]] * window[[a, b]];
                    }
                }
                fft2(&mut planner, &mut patch, false);
                let x0 = -u.grid.half_width + jc as f64 * dx;
                for (n, &xin) in xi.iter().enumerate() {
                    let col: f64 = (0..m_t).map(|m| patch[[m, n]].norm_sqr()).sum::<f64>() * dt * dt * dx * dx;
                    if col * spectral_cell * center_cell <= mass_tol * total {
                        continue;
                    }
                    if let Some(f) = slice(t0, x0, h * xin)? {
                        let s: f64 = (0..m_t).map(|m| f(h * h * tau[m]) * patch[[m, n]].norm_sqr()).sum::<f64>();
                        acc += s * dt * dt * dx * dx * spectral_cell * center_cell;
                    }
                }
            }
            jc += stride_x as i64;
        }
        kc += stride_t as i64;
    }
    Ok(acc)
}

/// `I(κ) = ⟨u_κ, Op(b₀(κ)) u_κ⟩` with the Gabor-frame quantization.
pub fn interpolated_expectation(
    u: &SpaceTimeField,
    field: &dyn PerturbationField,
    a0_window: &ProbeWindow,
    kappa: f64,
    h: f64,
    cfg: &EgorovConfig,
) -> Result<f64, MicrolocalError> {
    let slice = |t0: f64, x0: f64, big_xi: f64| -> Result<Option<Box<dyn Fn(f64) -> f64 + '_>>, MicrolocalError> {
        // χ⁴ in time is frozen along the flow; skip slices where it is negligible.
        if a0_window.chi(t0, a0_window.y()).powi(4) < 1e-30 {
            return Ok(None);
        }
        let p = scaled_flow_between(field, kappa, 0.0, h, t0, x0, big_xi, &cfg.flow)?;
        if a0_window.chi(t0, p.x).powi(4) < 1e-30 {
            return Ok(None);
        }
        Ok(Some(Box::new(move |big_t| a0_window.symbol(t0, p.x, big_t + p.d_tau, p.xi))))
    };
    anti_wick_expectation(u, h, cfg.mass_tol, slice)
}

/// [`egorov_invariance_with`] for a fixed initial state.
pub fn egorov_invariance(
    phi: &WaveFunction,
    field: &dyn PerturbationField,
    a0_window: &ProbeWindow,
    kappa_grid: &[f64],
    h_list: &[f64],
    cfg: &EgorovConfig,
) -> Result<Vec<EgorovResult>, MicrolocalError> {
    egorov_invariance_with(&|_| Ok(phi.clone()), field, a0_window, kappa_grid, h_list, cfg)
}

/// `I(κ)` along `kappa_grid` for each `h`; the initial state may depend on `h`.
pub fn egorov_invariance_with(
    phi_of_h: &dyn Fn(f64) -> Result<WaveFunction, QuantumError>,
    field: &dyn PerturbationField,
    a0_window: &ProbeWindow,
    kappa_grid: &[f64],
    h_list: &[f64],
    cfg: &EgorovConfig,
) -> Result<Vec<EgorovResult>, MicrolocalError> {
    a0_window.validate()?;
    if kappa_grid.is_empty() || kappa_grid.iter().any(|k| !(0.0..=1.0).contains(k)) {
        return Err(MicrolocalError::Precondition("κ grid must be a non-empty subset of [0, 1]".into()));
    }
    let s = a0_window.s();
    let window = (s - cfg.half_window, s + cfg.half_window);
    if !(window.0 > -std::f64::consts::PI && window.1 < std::f64::consts::PI) {
        return Err(MicrolocalError::Precondition(format!("time window {window:?} not inside (-π, π)")));
    }
    let mut out = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let phi = phi_of_h(h)?;
        let n_t = (2.0 * cfg.half_window / (cfg.row_spacing * h * h)).ceil() as usize + 1;
        let mut i_values = Vec::with_capacity(kappa_grid.len());
        let mut cutoff_norm_sq = f64::NAN;
        for &kappa in kappa_grid {
            let u = interpolated_field(&phi, field, kappa, window, n_t, &cfg.propagator)?;
            i_values.push(interpolated_expectation(&u, field, a0_window, kappa, h, cfg)?);
            if kappa == 0.0 {
                if let Ok(n) = cutoff_norm(&u, a0_window, h) {
                    cutoff_norm_sq = n * n;
                }
            }
        }
        let i0 = i_values[0];
        let drift = i_values.iter().map(|v| (v - i0).abs()).fold(0.0, f64::max);
        log::info!("egorov h = {h}: I = {i_values:?}, drift {drift:.3e}");
        out.push(EgorovResult {
            kappa: kappa_grid.to_vec(),
            i_values,
            h,
            drift,
            relative_drift: if i0 != 0.0 { drift / i0.abs() } else { f64::NAN },
            cutoff_norm_sq,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::DirectionPoint;
    use crate::model::{make_family, FamilySpec};
    use crate::quantum::SpatialGrid;

    fn window() -> ProbeWindow {
        let c = DirectionPoint::normalized(0.5, vec![0.8], -0.4142135623730951, vec![0.9101797211244548]);
        ProbeWindow::new(c, (0.3, 0.6), 0.4).unwrap()
    }

    fn grid() -> SampleGrid {
        SampleGrid {
            t: vec![0.4, 0.5, 0.6],
            x: (0..9).map(|i| 0.2 + 0.15 * i as f64).collect(),
            tau: (0..9).map(|i| -0.7 + 0.07 * i as f64).collect(),
            xi: (0..9).map(|i| 0.6 + 0.08 * i as f64).collect(),
        }
    }

    #[test]
    fn zero_kappa_is_the_window_symbol() {
        let f = make_family(&FamilySpec::new(0.3, 0.1, 0.5)).unwrap();
        let w = window();
        let g = grid();
        let b = symbol_pullback(&f, &w, 0.0, 1.0 / 16.0, &g, &FlowConfig::default()).unwrap();
        for (i, &t) in g.t.iter().enumerate() {
            for (j, &x) in g.x.iter().enumerate() {
                for (k, &tau) in g.tau.iter().enumerate() {
                    for (l, &xi) in g.xi.iter().enumerate() {
                        assert_eq!(b[[i, j, k, l]], w.symbol(t, x, tau, xi));
                    }
                }
            }
        }
    }

    #[test]
    fn unperturbed_pullback_is_trivial() {
        let f = make_family(&FamilySpec::unperturbed()).unwrap();
        let w = window();
        let g = grid();
        let b0 = symbol_pullback(&f, &w, 0.0, 0.1, &g, &FlowConfig::default()).unwrap();
        let b1 = symbol_pullback(&f, &w, 0.7, 0.1, &g, &FlowConfig::default()).unwrap();
        let dev = b0.iter().zip(b1.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev <= 1e-10);
    }

    #[test]
    fn pullback_composes() {
        let f = make_family(&FamilySpec::new(0.3, 0.1, 0.5)).unwrap();
        let cfg = FlowConfig::default();
        let h = 1.0 / 16.0;
        let (k1, k2) = (0.3, 0.4);
        for &(t, x, xi) in &[(0.5, 0.8, 0.9), (0.4, 1.1, 0.7), (0.6, 0.3, 1.2)] {
            let direct = scaled_flow_between(&f, k1 + k2, 0.0, h, t, x, xi, &cfg).unwrap();
            let mid = scaled_flow_between(&f, k1 + k2, k1, h, t, x, xi, &cfg).unwrap();
            let back = scaled_flow_between(&f, k1, 0.0, h, t, mid.x, mid.xi, &cfg).unwrap();
            assert!((direct.x - back.x).abs() < 1e-6);
            assert!((direct.xi - back.xi).abs() < 1e-6);
            assert!((direct.d_tau - (mid.d_tau + back.d_tau)).abs() < 1e-6);
        }
    }

    #[test]
    fn transport_residual_is_second_order() {
        use crate::classical::exact_symbol_gradient;
        let f = make_family(&FamilySpec::new(0.3, 0.1, 0.5)).unwrap();
        let w = window();
        let cfg = FlowConfig::default();
        let h = 1.0 / 8.0;
        let b = |k: f64, t: f64, x: f64, tau: f64, xi: f64| {
            let p = scaled_flow_between(&f, k, 0.0, h, t, x, xi, &cfg).unwrap();
            w.symbol(t, p.x, tau + p.d_tau, p.xi)
        };
        let (k, t, x, tau, xi) = (0.4, 0.55, 0.9, -0.45, 0.85);
        let residual = |d: f64| {
            let dk = (b(k + d, t, x, tau, xi) - b(k - d, t, x, tau, xi)) / (2.0 * d);
            let dt = (b(k, t + d, x, tau, xi) - b(k, t - d, x, tau, xi)) / (2.0 * d);
            let dx = (b(k, t, x + d, tau, xi) - b(k, t, x - d, tau, xi)) / (2.0 * d);
            let dtau = (b(k, t, x, tau + d, xi) - b(k, t, x, tau - d, xi)) / (2.0 * d);
            let dxi = (b(k, t, x, tau, xi + d) - b(k, t, x, tau, xi - d)) / (2.0 * d);
            let g = exact_symbol_gradient(&f, k, t, &[x], &[xi / h]);
            // l has no τ dependence.
            dk + g.dxi[0] * dx - h * h * g.dt * dtau - h * g.dx[0] * dxi + 0.0 * dt
        };
        let (r1, r2) = (residual(2e-3).abs(), residual(1e-3).abs());
        assert!(r2 < 1e-4, "{r1} {r2}");
        assert!(r2 < 0.5 * r1 || r2 < 1e-8, "{r1} {r2}");
    }

    #[test]
    fn anti_wick_of_one_is_the_norm() {
        let g = SpatialGrid::new(6.0, 512).unwrap();
        let h = 1.0 / 8.0;
        let u = SpaceTimeField::from_fn(-0.6, 0.6, 400, g, |t, x| {
            C64::from_polar((-(t * t) / 0.02 - (x - 0.5).powi(2)).exp(), 8.0 * x - 30.0 * t)
        });
        let norm_sq = u.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * u.dt() * g.dx();
        let one = anti_wick_expectation(&u, h, 1e-16, |_, _, _| Ok(Some(Box::new(|_| 1.0)))).unwrap();
        assert!((one / norm_sq - 1.0).abs() < 1e-6, "{one} {norm_sq}");
    }

    #[test]
    fn unperturbed_drift_vanishes() {
        let free = make_family(&FamilySpec::unperturbed()).unwrap();
        let g = SpatialGrid::new(12.0, 1024).unwrap();
        let w = window();
        let phi = crate::quantum::coherent_state(g, 0.0, 0.5, 0.25).unwrap();
        let cfg = EgorovConfig {
            propagator: PropagatorConfig { dt: 1e-3, scheme: crate::quantum::Scheme::SplitMehler, ..Default::default() },
            half_window: 0.2,
            ..Default::default()
        };
        let res = egorov_invariance(&phi, &free, &w, &[0.0, 0.5, 1.0], &[0.25], &cfg).unwrap();
        assert!(res[0].i_values[0] > 0.0);
        assert!(res[0].drift <= 1e-4, "{:?}", res[0]);
    }
}
