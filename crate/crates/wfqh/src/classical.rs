use crate::report::{Check, SuiteReport, Table};
use crate::scenario::Scenario;
use crate::HarnessError;
use wfqh_core::classical::{
    convergence_rate, escape_samples, frozen_energy, hamilton_trajectory, is_nontrapping, limit_jacobian,
    mourre_diagnostics, normalization_mu, pi_os_map, reduced_flow, scaled_flow, scaled_limit_maps, scattering_data,
    ExtendedPoint,
};
use wfqh_core::model::{make_family, PerturbationField};

fn max_abs(it: impl IntoIterator<Item = f64>) -> f64 {
    it.into_iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Scattering data, Σ, escape evidence, energy conservation, scaling, Mourre diagnostics, limit-map
/// κ-independence and the Jacobian at the scenario's base point.
pub fn run_classical_suite(sc: &Scenario) -> Result<SuiteReport, HarnessError> {
    sc.validate()?;
    let field = make_family(&sc.family)?;
    let f: &dyn PerturbationField = &field;
    let cfg = &sc.flow;
    let cs = &sc.classical;
    let p = sc.initial_point;
    let (s, y, sigma, eta) = (p.s, [p.y], p.sigma, [p.eta]);
    let free = f.is_unperturbed();
    let eps = f.certificate().epsilon;
    let mut rep = SuiteReport::new("classical");

    // Scattering data and Σ.
    let sd = scattering_data(f, s, &y, sigma, &eta, cfg)?;
    let mut t = Table::new("scattering", &["s", "y", "sigma", "eta", "x_plus", "xi_plus", "sigma_limit"]);
    t.push(vec![s.into(), p.y.into(), sigma.into(), p.eta.into(), sd.x_plus[0].into(), sd.xi_plus[0].into(), sd.sigma_limit.into()]);
    rep.tables.push(t);
    let mut t = Table::new("scattering_samples", &["lambda", "x_sample", "xi_sample", "residual", "radius"]);
    for (i, l) in sd.lambda_schedule.iter().enumerate() {
        t.push(vec![
            (*l).into(),
            sd.x_samples[i][0].into(),
            sd.xi_samples[i][0].into(),
            sd.residuals[i].into(),
            sd.witness.radii[i].into(),
        ]);
    }
    rep.tables.push(t);
    if free {
        let dev = max_abs([sd.x_plus[0] - p.y, sd.xi_plus[0] - p.eta, sd.sigma_limit - sigma]);
        rep.checks.push(Check::at_most("scattering_identity", dev, 1e-10));
    } else {
        // Energy conservation of K_s in one dimension pins |ξ₊| = |η| √a(s, y), hence Σ = σ.
        let xi_exact = p.eta * f.metric_1d(s, p.y).sqrt();
        rep.checks.push(Check::at_most("xi_plus_energy_identity", (sd.xi_plus[0] - xi_exact).abs(), 1e-8));
        rep.checks.push(Check::at_most("sigma_limit", (sd.sigma_limit - sigma).abs(), 1e-8));
    }
    let raw = escape_samples(f, s, &y, &eta, &[1e5], &cfg.ode)?;
    rep.checks.push(
        Check::at_most("raw_lambda_1e5_vs_limit", (raw[0].x_plus[0] - sd.x_plus[0]).abs(), 1e-4)
            .reference()
            .with_detail("fixed-λ samples approach the limit like λ^-ε"),
    );

    // Escape radii against the unperturbed flow, |y - λ s η|.
    let w = is_nontrapping(f, s, &y, &eta, cfg)?;
    rep.checks.push(Check::new("nontrapping", w.slope, cfg.nontrap_slope, w.nontrapping));
    if let Some(i) = w.lambdas.iter().position(|l| *l == 1000.0) {
        let free_r = (p.y - 1000.0 * s * p.eta).abs();
        rep.checks.push(
            Check::at_most("radius_vs_free_at_1000", (w.radii[i] - free_r).abs() / free_r, 0.05)
                .reference()
                .with_detail("escape speed is |η|√a(s,y) in one dimension"),
        );
    }

    // Frozen-energy conservation on every reported trajectory.
    let times: Vec<f64> = (0..=40).map(|i| s - s * i as f64 / 40.0).collect();
    let mut worst: f64 = 0.0;
    let mut t = Table::new("frozen_trajectories", &["lambda", "t", "x", "xi", "energy"]);
    for &lam in &cs.mourre_lambdas {
        let eta_l = [lam * p.eta];
        let e0 = frozen_energy(f, s, &wfqh_core::classical::PhasePoint::new(y.to_vec(), eta_l.to_vec()));
        for (tt, q) in times.iter().zip(hamilton_trajectory(f, s, &y, &eta_l, &times, cfg)?) {
            let e = frozen_energy(f, s, &q);
            worst = worst.max(((e - e0) / e0).abs());
            t.push(vec![lam.into(), (*tt).into(), q.x[0].into(), q.xi[0].into(), e.into()]);
        }
    }
    rep.tables.push(t);
    rep.checks.push(Check::at_most("frozen_energy_conservation", worst, 1e-8));

    // μ normalization and the unperturbed direction constants.
    let mu = normalization_mu(f, s, &y, &eta)?;
    let q = p.eta * p.eta * f.metric_1d(s, p.y);
    let res = 0.25 * mu.powi(4) * q * q + mu * mu * p.eta * p.eta - 1.0;
    rep.checks.push(Check::at_most("mu_residual", res.abs(), 1e-12));
    let pos = pi_os_map(s, &y, &[p.eta.signum()])?;
    let dev = max_abs([pos.tau_hat + (2f64.sqrt() - 1.0), pos.xi_hat[0] - p.eta.signum() * (2f64.powf(1.5) - 2.0).sqrt()]);
    rep.checks.push(Check::at_most("pi_os_constants", dev, 1e-12));

    // Scaling identity z_λ(κ) = z(κ/λ; s, y, λη).
    let mut worst: f64 = 0.0;
    for &lam in &cs.scaling_lambdas {
        for k in [0.5, 3.0, 0.9 * lam] {
            let a = scaled_flow(f, lam, s, &y, &eta, k, cfg)?;
            let b = reduced_flow(f, s, &y, &[lam * p.eta], k / lam, cfg)?;
            worst = worst.max((a.x[0] - b.x[0]).abs() / (1.0 + b.x[0].abs())).max((a.xi[0] - b.xi[0] / lam).abs());
        }
    }
    rep.checks.push(Check::at_most("scaling_identity", worst, 1e-8));

    // Mourre diagnostics.
    for &lam in &cs.mourre_lambdas {
        let m = mourre_diagnostics(f, lam, s, &y, &eta, cs.delta, cfg)?;
        let mut t = Table::new(&format!("mourre_{lam}"), &["kappa", "z", "gamma", "energy", "radius", "convexity"]);
        for i in 0..m.kappa.len() {
            t.push(vec![
                m.kappa[i].into(),
                m.z[i][0].into(),
                m.gamma[i][0].into(),
                m.energy[i].into(),
                m.radius[i].into(),
                m.convexity[i].into(),
            ]);
        }
        rep.tables.push(t);
        rep.checks.push(Check::new(&format!("mourre_c1_positive_{lam}"), m.c_bounds.0, 0.0, m.c_bounds.0 > 0.0));
        rep.checks.push(Check::at_least(&format!("mourre_tail_convexity_{lam}"), m.min_tail_convexity(), 0.0));
        rep.checks.push(Check::new(
            &format!("mourre_kappa0_{lam}"),
            m.kappa0,
            cs.delta * lam,
            m.kappa0 < cs.delta * lam,
        ));
        rep.checks.push(
            Check::new(&format!("mourre_radius_slope_{lam}"), m.radius_slope, 0.0, m.radius_slope > 0.0)
                .with_detail(format!("intercept {:.6e}", m.radius_intercept)),
        );
    }

    // Rate of ẑ(θλ) → x₊.
    let conv = convergence_rate(f, s, &y, &eta, cs.convergence_theta, &cs.convergence_lambdas, &sd.x_plus, cfg)?;
    let mut t = Table::new("convergence", &["lambda", "error"]);
    for (l, e) in conv.lambdas.iter().zip(&conv.errors) {
        t.push(vec![(*l).into(), (*e).into()]);
    }
    rep.tables.push(t);
    if free {
        rep.checks.push(Check::at_most("convergence_free_error", max_abs(conv.errors.iter().copied()), 1e-8));
    } else {
        rep.checks.push(Check::at_most("convergence_slope", conv.slope, -0.8 * eps));
    }

    // Limit maps: κ-independence and agreement with the scattering data.
    let maps = scaled_limit_maps(f, &cs.limit_kappas, s, &y, sigma, &eta, cfg)?;
    let target = ExtendedPoint::new(s, sd.x_plus.clone(), sd.sigma_limit, sd.xi_plus.clone());
    let mut t = Table::new("limit_map", &["kappa", "t", "x", "tau", "xi", "distance_to_scattering"]);
    let mut spread: f64 = 0.0;
    let mut to_sd: f64 = 0.0;
    for a in &maps {
        for b in &maps {
            spread = spread.max(a.limit.distance(&b.limit));
        }
        let d = a.limit.distance(&target);
        to_sd = to_sd.max(d);
        t.push(vec![a.kappa.into(), a.limit.t.into(), a.limit.x[0].into(), a.limit.tau.into(), a.limit.xi[0].into(), d.into()]);
    }
    rep.tables.push(t);
    rep.checks.push(Check::at_most("limit_map_kappa_spread", spread, 1e-4));
    rep.checks.push(Check::at_most("limit_map_vs_scattering", to_sd, 1e-6));

    // Jacobian of the limit map.
    let j = limit_jacobian(f, cs.jacobian_kappa, s, &y, sigma, &eta, cfg)?;
    let mut t = Table::new("jacobian", &["row", "col", "value"]);
    for r in 0..j.size {
        for c in 0..j.size {
            t.push(vec![r.into(), c.into(), j.matrix[r * j.size + c].into()]);
        }
    }
    rep.tables.push(t);
    if free {
        rep.checks.push(Check::at_most("jacobian_identity", j.max_deviation_from_identity(), 1e-6));
    } else {
        rep.checks.push(Check::new("jacobian_nonsingular", j.det, 1e-8, !j.singular));
    }
    if let (Some(a), Some(b)) = (j.lambda_matrix(1000.0), j.lambda_matrix(3000.0)) {
        let gap = max_abs(a.iter().zip(b).map(|(u, v)| u - v));
        rep.checks.push(
            Check::at_most("jacobian_gap_1000_3000", gap, 1e-3)
                .reference()
                .with_detail("fixed-λ Jacobians differ from the limit by O(λ^-ε)"),
        );
    }
    if let Some(a) = j.lambda_matrix(1e5) {
        let dev = max_abs(a.iter().zip(&j.matrix).map(|(u, v)| u - v));
        rep.checks.push(Check::at_most("jacobian_lambda_1e5_vs_limit", dev, 1e-3));
    }
    Ok(rep)
}
