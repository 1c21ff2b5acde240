use crate::HarnessError;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;
use wfqh_core::classical::FlowConfig;
use wfqh_core::microlocal::{default_h_list, resolvable_h_min_for, ProbeShape, Thresholds, SUPPORT_WIDTHS};
use wfqh_core::model::{make_family, FamilySpec};
use wfqh_core::quantum::{
    band_limit, coherent_state, singular_state, MehlerEngine, MehlerQuadrature, PropagatorConfig, SpatialGrid,
    WaveFunction,
};

/// Base point `(s, y, σ, η)` of an experiment (one space dimension).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPoint {
    pub s: f64,
    pub y: f64,
    #[serde(default)]
    pub sigma: f64,
    pub eta: f64,
}

/// Initial state at `t = 0`. `focus` is the time at which the named profile is reached under the
/// oscillator flow, `φ = e^{i focus H_os} profile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhiSpec {
    Coherent {
        y: f64,
        eta: f64,
        h: f64,
        #[serde(default)]
        focus: f64,
    },
    Singular {
        y0: f64,
        s0: f64,
        width: f64,
        /// Spectral cutoff `k_c` of the `exp(-(k/k_c)⁸)` filter; none keeps the raw profile.
        #[serde(default)]
        band_limit: Option<f64>,
        #[serde(default)]
        focus: f64,
    },
}

impl Default for PhiSpec {
    fn default() -> Self {
        PhiSpec::Coherent { y: 1.0, eta: 1.0, h: 0.5, focus: 0.0 }
    }
}

impl PhiSpec {
    pub fn focus(&self) -> f64 {
        match self {
            PhiSpec::Coherent { focus, .. } | PhiSpec::Singular { focus, .. } => *focus,
        }
    }

    pub fn build(&self, grid: SpatialGrid) -> Result<WaveFunction, HarnessError> {
        let profile = match self {
            PhiSpec::Coherent { y, eta, h, .. } => coherent_state(grid, *y, *eta, *h)?,
            PhiSpec::Singular { y0, s0, width, band_limit: kc, .. } => {
                let raw = singular_state(grid, *y0, *s0, *width)?;
                match kc {
                    Some(k) => band_limit(&raw, *k),
                    None => raw,
                }
            }
        };
        Ok(MehlerEngine::new(grid).propagate(&profile, -self.focus(), MehlerQuadrature::QuarterPeriodComposition))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub half_width: f64,
    pub n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { half_width: 24.0, n_points: 2048 }
    }
}

impl GridSpec {
    pub fn grid(&self) -> Result<SpatialGrid, HarnessError> {
        Ok(SpatialGrid::new(self.half_width, self.n_points)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub t_window: (f64, f64),
    pub n_t: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { t_window: (0.35, 0.65), n_t: 256 }
    }
}

impl WindowSpec {
    pub fn dt(&self) -> f64 {
        (self.t_window.1 - self.t_window.0) / (self.n_t - 1) as f64
    }
}

fn default_mourre_lambdas() -> Vec<f64> {
    vec![100.0, 1000.0]
}
fn default_delta() -> f64 {
    0.5
}
fn default_limit_kappas() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}
fn default_half() -> f64 {
    0.5
}
fn default_convergence_lambdas() -> Vec<f64> {
    vec![100.0, 300.0, 1000.0, 3000.0]
}
fn default_one() -> f64 {
    1.0
}
fn default_scaling_lambdas() -> Vec<f64> {
    vec![10.0, 100.0]
}

/// Settings of the classical suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalSpec {
    #[serde(default = "default_mourre_lambdas")]
    pub mourre_lambdas: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_limit_kappas")]
    pub limit_kappas: Vec<f64>,
    #[serde(default = "default_half")]
    pub jacobian_kappa: f64,
    #[serde(default = "default_convergence_lambdas")]
    pub convergence_lambdas: Vec<f64>,
    #[serde(default = "default_one")]
    pub convergence_theta: f64,
    #[serde(default = "default_scaling_lambdas")]
    pub scaling_lambdas: Vec<f64>,
}

impl Default for ClassicalSpec {
    fn default() -> Self {
        Self {
            mourre_lambdas: default_mourre_lambdas(),
            delta: default_delta(),
            limit_kappas: default_limit_kappas(),
            jacobian_kappa: default_half(),
            convergence_lambdas: default_convergence_lambdas(),
            convergence_theta: default_one(),
            scaling_lambdas: default_scaling_lambdas(),
        }
    }
}

fn default_probe() -> ProbeShape {
    ProbeShape { space_time_width: (0.025, 0.5), freq_width: 0.3, theta: 2.0 }
}

fn default_kappa_grid() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}
fn default_egorov_h() -> Vec<f64> {
    vec![0.125, 0.0625, 0.03125]
}
fn default_egorov_window() -> ProbeShape {
    ProbeShape { space_time_width: (0.25, 0.5), freq_width: 0.4, theta: 2.0 }
}
fn default_half_window() -> f64 {
    0.3
}
fn default_ratio_slack() -> f64 {
    1.5
}
fn default_control_drift() -> f64 {
    1e-4
}

/// Settings of the κ-invariance check. States are coherent at the scattering data of the base point
/// at time `s`, one per `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgorovSpec {
    #[serde(default = "default_kappa_grid")]
    pub kappa_grid: Vec<f64>,
    #[serde(default = "default_egorov_h")]
    pub h_list: Vec<f64>,
    #[serde(default = "default_egorov_window")]
    pub window: ProbeShape,
    #[serde(default = "default_half_window")]
    pub half_window: f64,
    #[serde(default = "default_one")]
    pub row_spacing: f64,
    /// Allowed factor over `(h_{k+1}/h_k)^ε` in the drift ratio.
    #[serde(default = "default_ratio_slack")]
    pub ratio_slack: f64,
    /// Drift bound for the unperturbed control run.
    #[serde(default = "default_control_drift")]
    pub control_drift: f64,
}

impl Default for EgorovSpec {
    fn default() -> Self {
        Self {
            kappa_grid: default_kappa_grid(),
            h_list: default_egorov_h(),
            window: default_egorov_window(),
            half_window: default_half_window(),
            row_spacing: default_one(),
            ratio_slack: default_ratio_slack(),
            control_drift: default_control_drift(),
        }
    }
}

fn default_y_offsets() -> Vec<f64> {
    vec![-1.0, -0.5, 0.0, 0.5, 1.0]
}
fn default_s_offsets() -> Vec<f64> {
    vec![0.0]
}
fn default_eta_signs() -> Vec<f64> {
    vec![1.0, -1.0]
}
fn default_min_agreement() -> f64 {
    0.9
}
fn default_max_inconclusive() -> f64 {
    0.3
}

/// Lattice `(s + Δs, y + Δy, ±η)` around the base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_s_offsets")]
    pub s_offsets: Vec<f64>,
    #[serde(default = "default_y_offsets")]
    pub y_offsets: Vec<f64>,
    #[serde(default = "default_eta_signs")]
    pub eta_signs: Vec<f64>,
    #[serde(default = "default_min_agreement")]
    pub min_agreement: f64,
    #[serde(default = "default_max_inconclusive")]
    pub max_inconclusive: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            s_offsets: default_s_offsets(),
            y_offsets: default_y_offsets(),
            eta_signs: default_eta_signs(),
            min_agreement: default_min_agreement(),
            max_inconclusive: default_max_inconclusive(),
        }
    }
}

impl SweepSpec {
    pub fn points(&self, base: &InitialPoint) -> Vec<InitialPoint> {
        let mut out = Vec::new();
        for ds in &self.s_offsets {
            for dy in &self.y_offsets {
                for sign in &self.eta_signs {
                    out.push(InitialPoint { s: base.s + ds, y: base.y + dy, sigma: base.sigma, eta: sign * base.eta });
                }
            }
        }
        out
    }
}

/// One experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub family: FamilySpec,
    pub initial_point: InitialPoint,
    #[serde(default)]
    pub phi: PhiSpec,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub window: WindowSpec,
    #[serde(default = "default_h_list")]
    pub h_list: Vec<f64>,
    /// Probe widths; the default time width fits six widths inside the default window.
    #[serde(default = "default_probe")]
    pub probe: ProbeShape,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub propagator: PropagatorConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub classical: ClassicalSpec,
    #[serde(default)]
    pub egorov: EgorovSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
}

fn config(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn inside_period(name: &str, t: f64) -> Result<(), HarnessError> {
    if t.abs() < PI {
        Ok(())
    } else {
        Err(config(format!("{name} = {t} must lie in (-π, π)")))
    }
}

fn decreasing_positive(name: &str, hs: &[f64], min_len: usize) -> Result<(), HarnessError> {
    if hs.len() < min_len {
        return Err(config(format!("{name} needs at least {min_len} entries")));
    }
    if hs.iter().any(|h| !(*h > 0.0)) || hs.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(config(format!("{name} must be positive and strictly decreasing")));
    }
    Ok(())
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let sc: Scenario = toml::from_str(text).map_err(|e| config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Re-checks the preconditions of every module the scenario feeds.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let p = &self.initial_point;
        inside_period("s", p.s)?;
        if p.eta == 0.0 {
            return Err(config("η must be nonzero"));
        }
        make_family(&self.family).map_err(|e| config(e.to_string()))?;
        if self.family.dim != 1 {
            return Err(config("experiments run in one space dimension"));
        }
        let grid = self.grid.grid().map_err(|e| config(e.to_string()))?;
        let (t0, t1) = self.window.t_window;
        inside_period("t_window start", t0)?;
        inside_period("t_window end", t1)?;
        if !(t0 < t1) || self.window.n_t < 2 {
            return Err(config("t_window must be increasing with n_t ≥ 2"));
        }
        self.propagator.validate().map_err(|e| config(e.to_string()))?;
        self.flow.validate().map_err(|e| config(e.to_string()))?;

        let shape = &self.probe;
        let (wt, wx) = shape.space_time_width;
        if !(wt > 0.0 && wx > 0.0 && shape.freq_width > 0.0 && shape.theta > 0.0) {
            return Err(config("probe widths and θ must be positive"));
        }
        decreasing_positive("h_list", &self.h_list, 3)?;
        let h_min = resolvable_h_min_for(self.window.dt(), grid.dx(), shape.theta);
        let smallest = *self.h_list.last().expect("checked non-empty");
        if smallest < h_min {
            return Err(config(format!("h = {smallest} is below the resolvable limit {h_min:.4e} of the grid")));
        }
        let t = &self.thresholds;
        if !(t.alpha_low < t.alpha_high) || !(t.floor >= 0.0) || !(t.noise_floor >= 0.0) {
            return Err(config("thresholds need alpha_low < alpha_high and non-negative floors"));
        }

        match &self.phi {
            PhiSpec::Coherent { h, focus, .. } => {
                if !(*h > 0.0) {
                    return Err(config("coherent h must be positive"));
                }
                inside_period("focus", *focus)?;
            }
            PhiSpec::Singular { s0, width, band_limit, focus, .. } => {
                if !(*s0 > 0.5 && *s0 < 1.0) {
                    return Err(config(format!("s0 = {s0} must lie in (0.5, 1)")));
                }
                if !(*width > 0.0) || band_limit.is_some_and(|k| !(k > 0.0)) {
                    return Err(config("singular width and band limit must be positive"));
                }
                inside_period("focus", *focus)?;
            }
        }

        let sw = &self.sweep;
        if sw.s_offsets.is_empty() || sw.y_offsets.is_empty() || sw.eta_signs.is_empty() {
            return Err(config("sweep lattice is empty"));
        }
        if sw.eta_signs.iter().any(|v| *v == 0.0) {
            return Err(config("sweep η signs must be nonzero"));
        }
        for q in sw.points(p) {
            inside_period("sweep s", q.s)?;
            let (lo, hi) = (q.s - SUPPORT_WIDTHS * wt, q.s + SUPPORT_WIDTHS * wt);
            if lo < t0 || hi > t1 {
                return Err(config(format!("probe support [{lo}, {hi}] at s = {} leaves t_window", q.s)));
            }
        }
        if !(0.0..=1.0).contains(&sw.min_agreement) || !(0.0..=1.0).contains(&sw.max_inconclusive) {
            return Err(config("sweep fractions must lie in [0, 1]"));
        }

        let c = &self.classical;
        if !(c.delta > 0.0 && c.delta < 1.0) {
            return Err(config("classical δ must lie in (0, 1)"));
        }
        if c.limit_kappas.is_empty()
            || c.limit_kappas.iter().any(|k| !(*k > 0.0 && *k <= 1.0))
            || c.limit_kappas.windows(2).any(|w| w[1] < w[0])
        {
            return Err(config("limit κ values must be increasing in (0, 1]"));
        }
        if !(c.jacobian_kappa > 0.0 && c.jacobian_kappa <= 1.0) {
            return Err(config("jacobian κ must lie in (0, 1]"));
        }
        let lambdas = c.mourre_lambdas.iter().chain(&c.convergence_lambdas).chain(&c.scaling_lambdas);
        if lambdas.into_iter().any(|l| !(*l > 0.0)) || c.convergence_lambdas.len() < 2 {
            return Err(config("λ values must be positive, with at least two for the convergence fit"));
        }

        let e = &self.egorov;
        if e.kappa_grid.first() != Some(&0.0) || e.kappa_grid.iter().any(|k| !(0.0..=1.0).contains(k)) {
            return Err(config("egorov κ grid must start at 0 and stay in [0, 1]"));
        }
        decreasing_positive("egorov h_list", &e.h_list, 1)?;
        inside_period("egorov window start", p.s - e.half_window)?;
        inside_period("egorov window end", p.s + e.half_window)?;
        if !(e.half_window > 0.0 && e.row_spacing > 0.0 && e.ratio_slack > 0.0 && e.control_drift > 0.0) {
            return Err(config("egorov window, row spacing and bounds must be positive"));
        }
        let ew = &e.window;
        if !(ew.space_time_width.0 > 0.0 && ew.space_time_width.1 > 0.0 && ew.freq_width > 0.0) {
            return Err(config("egorov window widths must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "minimal"
[family]
c_a = 0.3
c_v = 0.0
epsilon = 0.5
[initial_point]
s = 0.5
y = 1.0
sigma = 0.2
eta = 1.0
"#;

    fn with(extra: &str) -> String {
        MINIMAL.replace("[family]", &format!("h_list = [0.125, 0.0625, 0.03125]\n{extra}[family]"))
    }

    #[test]
    fn defaults_fill_in() {
        let sc = Scenario::from_toml(&with("")).unwrap();
        assert_eq!(sc.grid, GridSpec::default());
        assert_eq!(sc.sweep.points(&sc.initial_point).len(), 10);
        assert_eq!(sc.egorov.kappa_grid, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn default_h_list_needs_a_finer_window() {
        // 1/64 is not resolvable with 256 rows on a 0.3 window.
        assert!(matches!(Scenario::from_toml(MINIMAL), Err(HarnessError::Config(_))));
    }

    #[test]
    fn rejects_times_outside_the_period() {
        let text = with("").replace("s = 0.5", "s = 3.2");
        assert!(matches!(Scenario::from_toml(&text), Err(HarnessError::Config(_))));
        let text = with("[window]\nt_window = [-3.2, 0.5]\nn_t = 256\n");
        assert!(matches!(Scenario::from_toml(&text), Err(HarnessError::Config(_))));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_phi() {
        let text = with("[grid]\nhalf_width = 24.0\nn_points = 2048\nbogus = 1\n");
        assert!(Scenario::from_toml(&text).is_err());
        let text = with("[phi]\nkind = \"singular\"\ny0 = 0.0\ns0 = 0.4\nwidth = 1.0\n");
        assert!(matches!(Scenario::from_toml(&text), Err(HarnessError::Config(_))));
    }

    #[test]
    fn round_trip() {
        let text = with("[phi]\nkind = \"singular\"\ny0 = 0.0\ns0 = 0.75\nwidth = 1.0\nband_limit = 60.0\nfocus = 0.5\n");
        let sc = Scenario::from_toml(&text).unwrap();
        let again = Scenario::from_toml(&sc.to_toml()).unwrap();
        assert_eq!(sc, again);
    }

    #[test]
    fn phi_is_reached_at_focus() {
        let grid = SpatialGrid::new(16.0, 1024).unwrap();
        let spec = PhiSpec::Coherent { y: 1.0, eta: 0.5, h: 0.25, focus: 0.4 };
        let phi = spec.build(grid).unwrap();
        let there = MehlerEngine::new(grid).propagate(&phi, 0.4, MehlerQuadrature::QuarterPeriodComposition);
        let target = coherent_state(grid, 1.0, 0.5, 0.25).unwrap();
        assert!(there.distance(&target) < 1e-9);
    }
}
