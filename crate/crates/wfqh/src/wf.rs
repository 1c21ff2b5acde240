use crate::report::{Check, LabeledIndicator, SuiteReport};
use crate::scenario::Scenario;
use crate::HarnessError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::TAU;
use wfqh_core::classical::DirectionPoint;
use wfqh_core::microlocal::synthetic::{gaussian_field, oscillatory_field};
use wfqh_core::microlocal::{characteristic_probe_pair_os, wf_indicator_with, Classification, ProbeShape};
use wfqh_core::quantum::evolve_spacetime_os;

/// Number of random probes on the Gaussian field.
pub const GAUSSIAN_PROBES: usize = 20;

fn fraction(items: &[&LabeledIndicator], class: Classification) -> f64 {
    if items.is_empty() {
        return f64::NAN;
    }
    items.iter().filter(|i| i.result.classification == class).count() as f64 / items.len() as f64
}

/// Indicator calibration on synthetic fields, then off-characteristic probes on the scenario's `u_os`.
pub fn run_wf_suite(sc: &Scenario) -> Result<SuiteReport, HarnessError> {
    sc.validate()?;
    let th = &sc.thresholds;
    let mut rep = SuiteReport::new("wf");

    // Oscillatory field with a single direction on the unit circle.
    let (tau0, xi0) = (-(2f64.sqrt() - 1.0), (2.0 * 2f64.sqrt() - 2.0).sqrt());
    let u = oscillatory_field(1.0 / 32.0, tau0, xi0);
    let shape = ProbeShape { space_time_width: (0.05, 0.5), freq_width: 0.3, theta: 2.0 };
    let hs = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
    let on = wf_indicator_with(&u, &shape.window(DirectionPoint::normalized(0.0, vec![0.0], tau0, vec![xi0]))?, &hs, th)?;
    let off = wf_indicator_with(&u, &shape.window(DirectionPoint::normalized(0.0, vec![0.0], -tau0, vec![-xi0]))?, &hs, th)?;
    rep.checks.push(Check::new("oscillatory_on_in_wf", on.fitted_alpha, th.alpha_low, on.classification == Classification::InWf));
    rep.checks.push(Check::new(
        "oscillatory_off_not_in_wf",
        off.fitted_alpha,
        th.alpha_high,
        off.classification == Classification::NotInWf,
    ));
    rep.checks.push(Check::at_least("oscillatory_slope_gap", off.fitted_alpha - on.fitted_alpha, 1.0));
    rep.indicators.push(LabeledIndicator { probe_id: "oscillatory_on".into(), result: on });
    rep.indicators.push(LabeledIndicator { probe_id: "oscillatory_off".into(), result: off });

    // Smooth field: every probe decays.
    let g = gaussian_field();
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let centers: Vec<DirectionPoint> = (0..GAUSSIAN_PROBES)
        .map(|_| {
            let ang: f64 = rng.random_range(0.0..TAU);
            let t = rng.random_range(-0.3..0.3);
            let x = rng.random_range(-2.0..2.0);
            DirectionPoint::normalized(t, vec![x], ang.cos(), vec![ang.sin()])
        })
        .collect();
    let shape = ProbeShape { space_time_width: (0.1, 0.5), freq_width: 0.3, theta: 2.0 };
    let hs = [1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0];
    let gauss: Vec<LabeledIndicator> = centers
        .into_par_iter()
        .enumerate()
        .map(|(i, c)| {
            Ok(LabeledIndicator { probe_id: format!("gaussian_{i:02}"), result: wf_indicator_with(&g, &shape.window(c)?, &hs, th)? })
        })
        .collect::<Result<_, HarnessError>>()?;
    let refs: Vec<&LabeledIndicator> = gauss.iter().collect();
    let n_smooth = refs.iter().filter(|i| i.result.classification == Classification::NotInWf).count();
    rep.checks.push(Check::new(
        "gaussian_not_in_wf",
        n_smooth as f64,
        GAUSSIAN_PROBES as f64,
        n_smooth == GAUSSIAN_PROBES,
    ));
    rep.indicators.extend(gauss);

    // Probes off the characteristic set of u_os: τ̂ flipped at every sweep point.
    let grid = sc.grid.grid()?;
    let phi = sc.phi.build(grid)?;
    let u_os = evolve_spacetime_os(&phi, sc.window.t_window, sc.window.n_t, &sc.propagator);
    let off: Vec<LabeledIndicator> = sc
        .sweep
        .points(&sc.initial_point)
        .into_par_iter()
        .map(|p| {
            let (_, w) = characteristic_probe_pair_os(p.s, p.y, p.eta, &sc.probe)?;
            Ok(LabeledIndicator {
                probe_id: format!("os_off_s{}_y{}_eta{}", p.s, p.y, p.eta),
                result: wf_indicator_with(&u_os, &w, &sc.h_list, th)?,
            })
        })
        .collect::<Result<_, HarnessError>>()?;
    let refs: Vec<&LabeledIndicator> = off.iter().collect();
    rep.checks.push(Check::at_least("os_off_set_not_in_wf_fraction", fraction(&refs, Classification::NotInWf), 0.9));
    rep.indicators.extend(off);
    Ok(rep)
}
