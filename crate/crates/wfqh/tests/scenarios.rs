use std::path::Path;
use wfqh::scenario::PhiSpec;
use wfqh::Scenario;

fn load(name: &str) -> Scenario {
    Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)).unwrap()
}

#[test]
fn shipped_scenarios_load_and_round_trip() {
    for name in [
        "classical.toml",
        "unperturbed.toml",
        "egorov.toml",
        "theorem.toml",
        "theorem_unperturbed_coherent.toml",
        "theorem_unperturbed_singular.toml",
    ] {
        let sc = load(name);
        assert_eq!(Scenario::from_toml(&sc.to_toml()).unwrap(), sc, "{name}");
    }
}

#[test]
fn theorem_sweep_has_ten_points_at_the_focus() {
    let sc = load("theorem.toml");
    let pts = sc.sweep.points(&sc.initial_point);
    assert_eq!(pts.len(), 10);
    assert!(pts.iter().all(|p| p.s == sc.phi.focus()));
    assert!(matches!(sc.phi, PhiSpec::Singular { .. }));
}
