use crate::report::{Check, SuiteReport, Table};
use crate::scenario::Scenario;
use crate::HarnessError;
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::path::Path;
use wfqh_core::model::{make_family, FamilySpec};
use wfqh_core::quantum::{
    coherent_state, evolve_perturbed, mehler_propagate, propagate_perturbed, write_field, PropagatorConfig, Scheme,
    SpatialGrid, WaveFunction,
};

/// Quarter period on the self-dual grid `dx² = 2π/N`, where the continuous Fourier transform is a plain DFT.
fn quarter_period_error() -> Result<f64, HarnessError> {
    let n = 1024;
    let g = SpatialGrid::new((PI * n as f64 / 2.0).sqrt(), n)?;
    let phi = coherent_state(g, 1.5, -0.6, 1.0)?;
    let out = mehler_propagate(&phi, FRAC_PI_2, &PropagatorConfig::default());
    let (l, dx) = (g.half_width, g.dx());
    let mut buf: Vec<C64> =
        phi.values.iter().enumerate().map(|(j, v)| v * C64::from_polar(1.0, l * dx * j as f64)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let oracle: Vec<C64> = buf
        .iter()
        .enumerate()
        .map(|(k, v)| C64::from_polar(dx / (2.0 * PI).sqrt(), -FRAC_PI_4 - l * l + l * dx * k as f64) * v)
        .collect();
    Ok(out.distance(&WaveFunction::new(g, oracle)))
}

fn mehler_checks(rep: &mut SuiteReport) -> Result<(), HarnessError> {
    rep.checks.push(Check::at_most("mehler_quarter_period_dft", quarter_period_error()?, 1e-8));
    let g = SpatialGrid::new(16.0, 512)?;
    let cfg = PropagatorConfig::default();
    let phi = coherent_state(g, 1.0, 0.5, 1.0)?;
    let mut neg = phi.clone();
    neg.scale(C64::new(-1.0, 0.0));
    rep.checks.push(Check::at_most("mehler_full_period_sign", mehler_propagate(&phi, 2.0 * PI, &cfg).distance(&neg), 1e-8));
    let phi = coherent_state(g, -0.7, 1.1, 0.5)?;
    let mut group: f64 = 0.0;
    let mut unit: f64 = 0.0;
    for (t1, t2) in [(0.3, 0.45), (1.2, 2.5), (-0.4, 0.1)] {
        let a = mehler_propagate(&mehler_propagate(&phi, t1, &cfg), t2, &cfg);
        let b = mehler_propagate(&phi, t1 + t2, &cfg);
        group = group.max(a.distance(&b));
        unit = unit.max((b.norm() - 1.0).abs());
    }
    rep.checks.push(Check::at_most("mehler_group_property", group, 1e-7));
    rep.checks.push(Check::at_most("mehler_unitarity", unit, 1e-8));
    Ok(())
}

/// Crank–Nicolson against the exact oscillator, norm conservation and the step-halving ratio.
fn stepper_checks(rep: &mut SuiteReport) -> Result<(), HarnessError> {
    let g = SpatialGrid::new(10.0, 2048)?;
    let phi = coherent_state(g, 1.0, 0.5, 1.0)?;
    let cn = |dt| PropagatorConfig { dt, scheme: Scheme::CrankNicolson, ..Default::default() };
    let free = make_family(&FamilySpec::unperturbed())?;
    let u = evolve_perturbed(&phi, &free, 1.0, &cn(1e-4))?;
    let exact = mehler_propagate(&phi, 1.0, &PropagatorConfig::default());
    rep.checks.push(Check::at_most("cn_free_vs_mehler", u.distance(&exact), 1e-4));

    let field = make_family(&FamilySpec::new(0.3, 0.1, 0.5))?;
    let f = propagate_perturbed(&phi, &field, (0.0, 1.0), 11, &cn(1e-3))?;
    let drift = f.row_norms().into_iter().fold(0.0f64, |m, n| m.max((n - 1.0).abs()));
    rep.checks.push(Check::at_most("cn_norm_conservation", drift, 1e-10));

    let run = |dt| evolve_perturbed(&phi, &field, 1.0, &cn(dt));
    let r = run(1.25e-3)?;
    let (e1, e2) = (run(1e-2)?.distance(&r), run(5e-3)?.distance(&r));
    let ratio = e1 / e2;
    let mut t = Table::new("cn_refinement", &["dt", "error_vs_fine"]);
    t.push(vec![1e-2.into(), e1.into()]);
    t.push(vec![5e-3.into(), e2.into()]);
    rep.tables.push(t);
    rep.checks.push(Check::new("cn_second_order_ratio", ratio, 4.0, (3.0..=5.0).contains(&ratio)));
    Ok(())
}

/// Propagator validation plus the scenario field `u` on its time window, written to `out/u.bin` when given.
pub fn run_quantum_suite(sc: &Scenario, out: Option<&Path>) -> Result<SuiteReport, HarnessError> {
    sc.validate()?;
    let mut rep = SuiteReport::new("propagate");
    mehler_checks(&mut rep)?;
    stepper_checks(&mut rep)?;

    let field = make_family(&sc.family)?;
    let grid = sc.grid.grid()?;
    let phi = sc.phi.build(grid)?;
    let u = propagate_perturbed(&phi, &field, sc.window.t_window, sc.window.n_t, &sc.propagator)?;
    let mut t = Table::new("row_norms", &["t", "norm"]);
    for (tk, n) in u.times().into_iter().zip(u.row_norms()) {
        t.push(vec![tk.into(), n.into()]);
    }
    rep.tables.push(t);
    let drift = u.row_norms().into_iter().fold(0.0f64, |m, n| m.max((n - phi.norm()).abs()));
    rep.checks.push(Check::at_most("scenario_norm_drift", drift, 1e-8));
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_field(&dir.join("u.bin"), &u, Some(&sc.family), Some(&sc.propagator))?;
    }
    Ok(rep)
}
