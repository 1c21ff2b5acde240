use wfqh_core::classical::*;
use wfqh_core::model::{make_family, FamilySpec, PerturbationField};

fn family() -> impl PerturbationField {
    make_family(&FamilySpec::new(0.3, 0.0, 0.5)).unwrap()
}

#[test]
fn unperturbed_scattering_is_the_identity() {
    let free = make_family(&FamilySpec::unperturbed()).unwrap();
    let cfg = FlowConfig::default();
    let sd = scattering_data(&free, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
    assert!((sd.x_plus[0] - 1.0).abs() <= 1e-10);
    assert!((sd.xi_plus[0] - 1.0).abs() <= 1e-10);
    assert!((sd.sigma_limit - 0.2).abs() <= 1e-10);
    let j = limit_jacobian(&free, 0.5, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
    assert!(j.max_deviation_from_identity() <= 1e-6);
}

#[test]
fn limit_maps_agree_with_scattering_data() {
    let f = family();
    let cfg = FlowConfig::default();
    let sd = scattering_data(&f, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
    let maps = scaled_limit_maps(&f, &[0.25, 0.5, 0.75, 1.0], 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
    let target = ExtendedPoint::new(0.5, sd.x_plus.clone(), sd.sigma_limit, sd.xi_plus.clone());
    for m in &maps {
        assert!(m.limit.distance(&target) <= 1e-6, "κ = {}: {}", m.kappa, m.limit.distance(&target));
    }
}

#[test]
fn one_dimensional_energy_fixes_the_outgoing_momentum() {
    let f = family();
    for (y, eta) in [(1.0, 1.0), (-0.5, -1.0), (1.5, 2.0)] {
        let sd = scattering_data(&f, 0.5, &[y], 0.0, &[eta], &FlowConfig::default()).unwrap();
        let expected = eta * f.metric_1d(0.5, y).sqrt();
        assert!((sd.xi_plus[0] - expected).abs() < 1e-8, "y = {y}: {} vs {expected}", sd.xi_plus[0]);
        assert!(sd.sigma_limit.abs() < 1e-8);
    }
}

#[test]
fn hat_variables_converge_at_rate_epsilon() {
    let f = family();
    let cfg = FlowConfig::default();
    let sd = scattering_data(&f, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
    let r = convergence_rate(&f, 0.5, &[1.0], &[1.0], 1.0, &[100.0, 300.0, 1000.0, 3000.0], &sd.x_plus, &cfg).unwrap();
    assert!(r.slope <= -0.4, "slope {}", r.slope);
    assert!(r.errors.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn mourre_bounds_hold_along_the_scaled_flow() {
    let f = family();
    for lam in [100.0, 1000.0] {
        let m = mourre_diagnostics(&f, lam, 0.5, &[1.0], &[1.0], 0.5, &FlowConfig::default()).unwrap();
        assert!(m.c_bounds.0 > 0.0);
        assert!(m.min_tail_convexity() >= 0.0);
        assert!(m.kappa0 < 0.5 * lam);
        assert!(m.lower_bound_holds(1.0));
    }
}
