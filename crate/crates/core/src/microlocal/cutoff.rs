use super::fft2::{fft2, frequencies};
use super::{MicrolocalError, ProbeWindow, SUPPORT_WIDTHS};
use crate::numerics::linear_fit;
use crate::quantum::{SpaceTimeField, C64};
use ndarray::Array2;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

fn default_alpha_high() -> f64 {
    3.0
}
fn default_alpha_low() -> f64 {
    1.0
}
fn default_floor() -> f64 {
    1e-9
}
fn default_noise_floor() -> f64 {
    1e-8
}

/// Decision thresholds of [`wf_indicator`]; copied into every result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    #[serde(default = "default_alpha_high")]
    pub alpha_high: f64,
    #[serde(default = "default_alpha_low")]
    pub alpha_low: f64,
    /// Absolute lower bound on `N(h_min)` for an `in_wf` call.
    #[serde(default = "default_floor")]
    pub floor: f64,
    /// `N(h_min)` below `noise_floor · ‖χ²u‖` counts as decayed regardless of the fitted slope.
    #[serde(default = "default_noise_floor")]
    pub noise_floor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            alpha_high: default_alpha_high(),
            alpha_low: default_alpha_low(),
            floor: default_floor(),
            noise_floor: default_noise_floor(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    InWf,
    NotInWf,
    Inconclusive,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::InWf => "in_wf",
            Classification::NotInWf => "not_in_wf",
            Classification::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorResult {
    pub h_list: Vec<f64>,
    pub norms: Vec<f64>,
    pub fitted_alpha: f64,
    pub classification: Classification,
    pub thresholds: Thresholds,
    /// `‖χ²u‖`, the cutoff norm with `ψ ≡ 1`.
    pub reference_norm: f64,
}

/// Default semiclassical scales `{1/8, 1/16, 1/32, 1/64}`; the smallest needs a fine grid.
pub fn default_h_list() -> Vec<f64> {
    vec![0.125, 0.0625, 0.03125, 0.015625]
}

/// Smallest `h` whose frequency shell `|(h^θτ, hξ)| ≤ 2` lies under both Nyquist limits.
pub fn resolvable_h_min(u: &SpaceTimeField, probe: &ProbeWindow) -> f64 {
    resolvable_h_min_for(u.dt(), u.grid.dx(), probe.theta)
}

/// [`resolvable_h_min`] from the sample spacings alone.
pub fn resolvable_h_min_for(dt: f64, dx: f64, theta: f64) -> f64 {
    let hx = 2.0 * dx / std::f64::consts::PI;
    let ht = if dt > 0.0 { (2.0 * dt / std::f64::consts::PI).powf(1.0 / theta) } else { f64::INFINITY };
    hx.max(ht)
}

/// `χ u` on the rows inside the probe support, transformed once and reused for every `h`.
struct CutoffPlan {
    t0: f64,
    t1: f64,
    chi: Array2<f64>,
    spectrum: Array2<C64>,
    tau: Vec<f64>,
    xi: Vec<f64>,
    cell: f64,
}

impl CutoffPlan {
    fn new(u: &SpaceTimeField, probe: &ProbeWindow) -> Result<Self, MicrolocalError> {
        probe.validate()?;
        let (wt, wx) = probe.space_time_width;
        let (s, y) = (probe.s(), probe.y());
        let (lo, hi) = (s - SUPPORT_WIDTHS * wt, s + SUPPORT_WIDTHS * wt);
        let slack = 1e-12 * (1.0 + u.t1.abs().max(u.t0.abs()));
        if lo < u.t0 - slack || hi > u.t1 + slack || u.n_t() < 2 {
            return Err(MicrolocalError::Domain(format!(
                "probe time support [{lo}, {hi}] exceeds the field window [{}, {}]",
                u.t0, u.t1
            )));
        }
        let l = u.grid.half_width;
        if (y - SUPPORT_WIDTHS * wx) < -l || (y + SUPPORT_WIDTHS * wx) > l {
            return Err(MicrolocalError::Domain(format!("probe space support around {y} exceeds the grid [-{l}, {l}]")));
        }
        let dt = u.dt();
        let k_lo = (((lo - u.t0) / dt) - 1e-9).ceil().max(0.0) as usize;
        let k_hi = ((((hi - u.t0) / dt) + 1e-9).floor() as usize).min(u.n_t() - 1);
        let rows = (k_lo, k_hi + 1);
        let n_x = u.grid.n_points;
        let chi = Array2::from_shape_fn((rows.1 - rows.0, n_x), |(k, j)| probe.chi(u.time(k + k_lo), u.grid.x(j)));
        Ok(Self::from_parts(u, rows, chi))
    }

    fn from_parts(u: &SpaceTimeField, rows: (usize, usize), chi: Array2<f64>) -> Self {
        let n_r = rows.1 - rows.0;
        let n_x = u.grid.n_points;
        let mut spectrum = Array2::from_shape_fn((n_r, n_x), |(k, j)| u.values[[k + rows.0, j]] * chi[[k, j]]);
        fft2(&mut FftPlanner::new(), &mut spectrum, false);
        Self {
            t0: u.time(rows.0),
            t1: u.time(rows.1 - 1),

            chi,
            spectrum,
            tau: frequencies(n_r, u.dt()),
            xi: frequencies(n_x, u.grid.dx()),
            cell: u.dt() * u.grid.dx(),
        }
    }

    fn apply(&self, psi: impl Fn(f64, f64) -> f64) -> Array2<C64> {
        let (n_r, n_x) = self.spectrum.dim();
        let mut out = self.spectrum.clone();
        for k in 0..n_r {
            for j in 0..n_x {
                out[[k, j]] *= psi(self.tau[k], self.xi[j]) / (n_r * n_x) as f64;
            }
        }
        fft2(&mut FftPlanner::new(), &mut out, true);
        out.zip_mut_with(&self.chi, |v, c| *v *= *c);
        out
    }

    fn norm_of(&self, a: &Array2<C64>) -> f64 {
        (a.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell).sqrt()
    }

    fn scaled_psi<'a>(probe: &'a ProbeWindow, h: f64) -> impl Fn(f64, f64) -> f64 + 'a {
        let ht = h.powf(probe.theta);
        move |tau, xi| probe.psi(ht * tau, h * xi)
    }
}

/// Split quasi-homogeneous cutoff `χ ψ(h^θD_t, hD_x) χ u`, returned on the rows of the probe support.
pub fn apply_quasi_cutoff(u: &SpaceTimeField, probe: &ProbeWindow, h: f64) -> Result<SpaceTimeField, MicrolocalError> {
    check_h(u, probe, h)?;
    let plan = CutoffPlan::new(u, probe)?;
    let values = plan.apply(CutoffPlan::scaled_psi(probe, h));
    Ok(SpaceTimeField { t0: plan.t0, t1: plan.t1, grid: u.grid, values })
}

/// `N(h) = ‖χψχu‖_{L²(t,x)}`.
pub fn cutoff_norm(u: &SpaceTimeField, probe: &ProbeWindow, h: f64) -> Result<f64, MicrolocalError> {
    check_h(u, probe, h)?;
    let plan = CutoffPlan::new(u, probe)?;
    Ok(plan.norm_of(&plan.apply(CutoffPlan::scaled_psi(probe, h))))
}

fn check_h(u: &SpaceTimeField, probe: &ProbeWindow, h: f64) -> Result<(), MicrolocalError> {
    let h_min = resolvable_h_min(u, probe);
    if !(h > 0.0) || h < h_min {
        return Err(MicrolocalError::Precondition(format!("h = {h} below the resolvable limit {h_min:.4e}")));
    }
    Ok(())
}

pub fn wf_indicator(u: &SpaceTimeField, probe: &ProbeWindow, h_list: &[f64]) -> Result<IndicatorResult, MicrolocalError> {
    wf_indicator_with(u, probe, h_list, &Thresholds::default())
}

pub fn wf_indicator_with(
    u: &SpaceTimeField,
    probe: &ProbeWindow,
    h_list: &[f64],
    thresholds: &Thresholds,
) -> Result<IndicatorResult, MicrolocalError> {
    if h_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(MicrolocalError::Precondition("h_list must be strictly decreasing".into()));
    }
    if h_list.len() < 3 {
        return Err(MicrolocalError::DegenerateFit(h_list.len()));
    }
    for &h in h_list {
        check_h(u, probe, h)?;
    }
    let plan = CutoffPlan::new(u, probe)?;
    let norms: Vec<f64> = h_list.iter().map(|&h| plan.norm_of(&plan.apply(CutoffPlan::scaled_psi(probe, h)))).collect();
    let reference_norm = plan.norm_of(&plan.apply(|_, _| 1.0));
    Ok(classify(h_list, norms, reference_norm, thresholds))
}

/// Least-squares slope of `log N` against `log h` and the threshold decision.
pub fn classify(h_list: &[f64], norms: Vec<f64>, reference_norm: f64, thresholds: &Thresholds) -> IndicatorResult {
    let lx: Vec<f64> = h_list.iter().map(|h| h.ln()).collect();
    let ly: Vec<f64> = norms.iter().map(|n| n.max(f64::MIN_POSITIVE).ln()).collect();
    let fitted_alpha = linear_fit(&lx, &ly).map_or(f64::NAN, |f| f.slope);
    let last = *norms.last().expect("non-empty h list");
    let classification = if last < thresholds.noise_floor * reference_norm || fitted_alpha >= thresholds.alpha_high {
        Classification::NotInWf
    } else if fitted_alpha <= thresholds.alpha_low && last >= thresholds.floor {
        Classification::InWf
    } else {
        Classification::Inconclusive
    };
    IndicatorResult {
        h_list: h_list.to_vec(),
        norms,
        fitted_alpha,
        classification,
        thresholds: *thresholds,
        reference_norm,
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::classical::DirectionPoint;
    use crate::quantum::SpatialGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use crate::microlocal::synthetic::{gaussian_field, oscillatory_field};

    fn probe_at(t: f64, x: f64, tau: f64, xi: f64, w: (f64, f64)) -> ProbeWindow {
        ProbeWindow::new(DirectionPoint::normalized(t, vec![x], tau, vec![xi]), w, 0.3).unwrap()
    }

    #[test]
    fn identity_with_trivial_cutoffs() {
        let u = gaussian_field();
        let plan = CutoffPlan::from_parts(&u, (0, u.n_t()), Array2::from_elem((u.n_t(), u.grid.n_points), 1.0));
        let out = plan.apply(|_, _| 1.0);
        let err = out.iter().zip(u.values.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn parseval_for_frequency_step() {
        let u = oscillatory_field(1.0 / 16.0, -0.4, 0.9);
        let probe = probe_at(0.0, 0.0, -0.4, 0.9, (0.05, 0.5));
        let plan = CutoffPlan::new(&u, &probe).unwrap();
        let psi = CutoffPlan::scaled_psi(&probe, 1.0 / 16.0);
        let (n_r, n_x) = plan.spectrum.dim();
        let spectral: f64 = (0..n_r)
            .flat_map(|k| (0..n_x).map(move |j| (k, j)))
            .map(|(k, j)| (plan.spectrum[[k, j]] * psi(plan.tau[k], plan.xi[j])).norm_sqr())
            .sum::<f64>()
            / (n_r * n_x) as f64;
        let mut mid = plan.spectrum.clone();
        for k in 0..n_r {
            for j in 0..n_x {
                mid[[k, j]] *= psi(plan.tau[k], plan.xi[j]) / (n_r * n_x) as f64;
            }
        }
        fft2(&mut FftPlanner::new(), &mut mid, true);
        let direct: f64 = mid.iter().map(|v| v.norm_sqr()).sum();
        assert!((direct - spectral).abs() <= 1e-12 * spectral.max(1e-300));
    }

    #[test]
    fn gaussian_is_smooth_at_small_h() {
        let u = gaussian_field();
        let probe = probe_at(0.0, 0.5, -0.4, 0.9, (0.1, 0.5));
        let n = cutoff_norm(&u, &probe, 1.0 / 32.0).unwrap();
        let input = (u.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * u.dt() * u.grid.dx()).sqrt();
        assert!(n <= 1e-3 * input, "{n}");
    }

    #[test]
    fn bounded_on_random_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = SpatialGrid::new(4.0, 256).unwrap();
        let probe = probe_at(0.0, 0.0, -0.4, 0.9, (0.1, 0.5));
        for _ in 0..5 {
            let vals: Vec<C64> = (0..256 * 256).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let u = SpaceTimeField {
                t0: -1.0,
                t1: 1.0,
                grid: g,
                values: Array2::from_shape_vec((256, 256), vals).unwrap(),
            };
            let out = apply_quasi_cutoff(&u, &probe, 0.25).unwrap();
            let n_out = (out.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * u.dt() * g.dx()).sqrt();
            let n_in = (u.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * u.dt() * g.dx()).sqrt();
            assert!(n_out <= n_in);
        }
    }

    #[test]
    fn oscillatory_field_direction_selectivity() {
        let (tau0, xi0) = (-0.4142135623730951, 0.9101797211244548);
        let h0 = 1.0 / 32.0;
        let u = oscillatory_field(h0, tau0, xi0);
        let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
        let on = wf_indicator(&u, &probe_at(0.0, 0.0, tau0, xi0, (0.05, 0.5)), &hs).unwrap();
        let off = wf_indicator(&u, &probe_at(0.0, 0.0, -tau0, -xi0, (0.05, 0.5)), &hs).unwrap();
        assert_eq!(on.classification, Classification::InWf, "{on:?}");
        assert_eq!(off.classification, Classification::NotInWf, "{off:?}");
        assert!(on.fitted_alpha < off.fitted_alpha - 1.0);
    }

    #[test]
    fn gaussian_not_in_wf_at_random_probes() {
        let u = gaussian_field();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let hs = [1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
        for _ in 0..20 {
            let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let p = probe_at(rng.random_range(-0.3..0.3), rng.random_range(-2.0..2.0), ang.cos(), ang.sin(), (0.1, 0.5));
            let r = wf_indicator(&u, &p, &hs).unwrap();
            assert_eq!(r.classification, Classification::NotInWf, "{r:?}");
        }
    }

    #[test]
    fn preconditions() {
        let u = gaussian_field();
        let p = probe_at(0.9, 0.0, -0.4, 0.9, (0.1, 0.5));
        assert!(matches!(cutoff_norm(&u, &p, 0.1), Err(MicrolocalError::Domain(_))));
        let p = probe_at(0.0, 0.0, -0.4, 0.9, (0.1, 0.5));
        assert!(matches!(wf_indicator(&u, &p, &[0.5, 0.25]), Err(MicrolocalError::DegenerateFit(2))));
        assert!(wf_indicator(&u, &p, &[0.25, 0.5, 0.125]).is_err());
        assert!(cutoff_norm(&u, &p, 1e-3).is_err());
    }
}
