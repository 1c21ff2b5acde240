use crate::report::{Check, SuiteReport, Table};
use crate::scenario::Scenario;
use crate::HarnessError;
use wfqh_core::classical::scattering_data;
use wfqh_core::microlocal::{characteristic_probe_pair, egorov_invariance, egorov_invariance_with, EgorovConfig, EgorovResult, ProbeShape};
use wfqh_core::model::{make_family, FamilySpec, PerturbationField};
use wfqh_core::quantum::{
    coherent_state, MehlerEngine, MehlerQuadrature, PropagatorConfig, QuantumError, Scheme, SpatialGrid, WaveFunction,
};

fn push_results(rep: &mut SuiteReport, name: &str, res: &[EgorovResult]) {
    let mut t = Table::new(name, &["kappa", "h", "I_value"]);
    for r in res {
        for (k, v) in r.kappa.iter().zip(&r.i_values) {
            t.push(vec![(*k).into(), r.h.into(), (*v).into()]);
        }
    }
    rep.tables.push(t);
}

fn summary(res: &[EgorovResult], control: &[EgorovResult]) -> Table {
    let mut t = Table::new("egorov_summary", &["h", "I0", "drift", "relative_drift", "control_drift", "cutoff_norm_sq"]);
    for (r, c) in res.iter().zip(control) {
        t.push(vec![r.h.into(), r.i_values[0].into(), r.drift.into(), r.relative_drift.into(), c.drift.into(), r.cutoff_norm_sq.into()]);
    }
    t
}

/// `I(κ)` along the κ grid for the scenario family and for the unperturbed control, with the drift ratio
/// test across successive `h`. The initial state is the coherent state at the scattering data `(x₊, ξ₊)`,
/// focused at time `s`.
pub fn run_egorov(sc: &Scenario) -> Result<SuiteReport, HarnessError> {
    sc.validate()?;
    let field = make_family(&sc.family)?;
    let free = make_family(&FamilySpec::unperturbed())?;
    let eg = &sc.egorov;
    let p = sc.initial_point;
    let sd = scattering_data(&field, p.s, &[p.y], p.sigma, &[p.eta], &sc.flow)?;
    let (a0, _) = characteristic_probe_pair(&field, p.s, p.y, p.eta, &eg.window)?;
    let grid = sc.grid.grid()?;
    let engine = MehlerEngine::new(grid);
    let (xp, xip) = (sd.x_plus[0], sd.xi_plus[0]);
    let phi_of_h = |h: f64| -> Result<WaveFunction, QuantumError> {
        let c = coherent_state(grid, xp, xip, h)?;
        Ok(engine.propagate(&c, -p.s, MehlerQuadrature::QuarterPeriodComposition))
    };
    let cfg = EgorovConfig {
        propagator: sc.propagator,
        flow: sc.flow.clone(),
        half_window: eg.half_window,
        row_spacing: eg.row_spacing,
        ..Default::default()
    };
    let res = egorov_invariance_with(&phi_of_h, &field, &a0, &eg.kappa_grid, &eg.h_list, &cfg)?;
    let control = egorov_invariance_with(&phi_of_h, &free, &a0, &eg.kappa_grid, &eg.h_list, &cfg)?;

    let mut rep = SuiteReport::new("egorov");
    push_results(&mut rep, "egorov", &res);
    push_results(&mut rep, "egorov_control", &control);
    rep.tables.push(summary(&res, &control));
    let worst = control.iter().map(|r| r.drift).fold(0.0, f64::max);
    rep.checks.push(Check::at_most("control_drift", worst, eg.control_drift));
    let eps = field.certificate().epsilon;
    for w in res.windows(2) {
        let limit = (w[1].h / w[0].h).powf(eps) * eg.ratio_slack;
        rep.checks.push(
            Check::at_most(&format!("drift_ratio_{}_{}", w[0].h, w[1].h), w[1].drift / w[0].drift, limit)
                .with_detail(format!("drift {:.6e} -> {:.6e}", w[0].drift, w[1].drift)),
        );
    }
    for r in &res {
        if r.cutoff_norm_sq.is_finite() {
            let gap = (r.i_values[0] - r.cutoff_norm_sq).abs() / r.cutoff_norm_sq;
            rep.checks.push(Check::at_most(&format!("i0_vs_cutoff_norm_{}", r.h), gap, r.h.powf(eps)).reference());
        }
    }
    let cross = i0_cross_check(&CROSS_CHECK_LEVELS)?;
    let mut t = Table::new("egorov_i0_cross_check", &["h", "I0", "cutoff_norm_sq", "relative_gap"]);
    for c in &cross {
        t.push(vec![c.h.into(), c.i0.into(), c.cutoff_norm_sq.into(), c.gap.into()]);
        rep.checks.push(Check::at_most(&format!("i0_cross_check_{}", c.h), c.gap, c.h.sqrt()));
    }
    rep.tables.push(t);
    let shrinking = cross.windows(2).all(|w| w[1].gap < w[0].gap);
    rep.checks.push(Check::new("i0_cross_check_decreasing", cross.last().map_or(f64::NAN, |c| c.gap), cross[0].gap, shrinking));
    Ok(rep)
}

/// One row of [`i0_cross_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub h: f64,
    pub i0: f64,
    pub cutoff_norm_sq: f64,
    pub gap: f64,
}

/// `I(0)` against the squared split-cutoff norm for the unperturbed oscillator on a window wide enough for
/// the cutoff to fit. Each `h` uses its own grid, sized so the packet stays resolved.
pub fn i0_cross_check(levels: &[(f64, f64, usize)]) -> Result<Vec<CrossCheck>, HarnessError> {
    let free = make_family(&FamilySpec::unperturbed())?;
    let f: &dyn PerturbationField = &free;
    let shape = ProbeShape { space_time_width: (0.25, 0.5), freq_width: 0.4, theta: 2.0 };
    let (a0, _) = characteristic_probe_pair(f, 0.5, 1.0, 1.0, &shape)?;
    // The oscillator splitting is exact without a perturbation, so no finite-difference dispersion enters.
    let propagator = PropagatorConfig { scheme: Scheme::SplitMehler, dt: 1e-2, ..Default::default() };
    let cfg = EgorovConfig { half_window: 1.5, propagator, ..Default::default() };
    levels
        .iter()
        .map(|&(h, l, n)| {
            let grid = SpatialGrid::new(l, n)?;
            let c = coherent_state(grid, 1.0, 1.0, h)?;
            let phi = MehlerEngine::new(grid).propagate(&c, -0.5, MehlerQuadrature::QuarterPeriodComposition);
            let r = egorov_invariance(&phi, f, &a0, &[0.0], &[h], &cfg)?;
            let (i0, n2) = (r[0].i_values[0], r[0].cutoff_norm_sq);
            Ok(CrossCheck { h, i0, cutoff_norm_sq: n2, gap: (i0 - n2).abs() / n2 })
        })
        .collect()
}

/// Grids for [`i0_cross_check`] at `h = 1/8, 1/16, 1/32`.
pub const CROSS_CHECK_LEVELS: [(f64, f64, usize); 3] = [(0.125, 16.0, 512), (0.0625, 24.0, 1024), (0.03125, 40.0, 4096)];
