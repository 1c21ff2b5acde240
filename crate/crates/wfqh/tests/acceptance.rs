//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};
use wfqh::report::{emit_report, ReportFormat, SuiteReport};
use wfqh::{run_classical_suite, run_egorov, run_quantum_suite, run_theorem_experiment, run_wf_suite, theorem_report, Scenario};
use wfqh_core::classical::{limit_jacobian, scattering_data, FlowConfig};
use wfqh_core::model::{make_family, FamilySpec};

fn scenario(name: &str) -> Scenario {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn checks(rep: &SuiteReport, names: &[&str]) -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for n in names {
        match rep.check(n) {
            Some(c) => {
                passed &= c.passed;
                parts.push(format!("{n}={:.3e}", c.value));
            }
            None => {
                passed = false;
                parts.push(format!("{n}=missing"));
            }
        }
    }
    Outcome { passed, detail: parts.join(" ") }
}

fn prefixed(rep: &SuiteReport, prefix: &str) -> Vec<String> {
    rep.checks.iter().filter(|c| c.name.starts_with(prefix)).map(|c| c.name.clone()).collect()
}

fn within(o: Outcome, elapsed: Duration, limit: Duration) -> Outcome {
    let ok = elapsed <= limit;
    Outcome { passed: o.passed && ok, detail: format!("{} [{:.1}s of {}s]", o.detail, elapsed.as_secs_f64(), limit.as_secs()) }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn csv_bytes(rep: &SuiteReport, dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = emit_report(rep, ReportFormat::Csv, dir).expect("write report");
    files.sort();
    files.into_iter().map(|p| (p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap())).collect()
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();

    // 1. Unperturbed classical identities.
    let (o, dt) = timed(|| {
        let free = make_family(&FamilySpec::unperturbed()).unwrap();
        let cfg = FlowConfig::default();
        let sd = scattering_data(&free, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap();
        let dev = (sd.x_plus[0] - 1.0).abs().max((sd.xi_plus[0] - 1.0).abs()).max((sd.sigma_limit - 0.2).abs());
        let j = limit_jacobian(&free, 0.5, 0.5, &[1.0], 0.2, &[1.0], &cfg).unwrap().max_deviation_from_identity();
        Outcome { passed: dev <= 1e-10 && j <= 1e-6, detail: format!("scattering {dev:.3e} jacobian {j:.3e}") }
    });
    results.push((1, "unperturbed classical identities", within(o, dt, Duration::from_secs(1))));

    // 2-5. Classical suite on the built-in family.
    let classical = scenario("classical.toml");
    let (rep, dt) = timed(|| run_classical_suite(&classical).expect("classical suite"));
    results.push((2, "mu and direction constants", checks(&rep, &["mu_residual", "pi_os_constants"])));
    results.push((3, "energy conservation and scaling", checks(&rep, &["frozen_energy_conservation", "scaling_identity"])));
    let mut names = prefixed(&rep, "mourre_c1_positive_");
    names.extend(prefixed(&rep, "mourre_tail_convexity_"));
    names.extend(prefixed(&rep, "mourre_kappa0_"));
    names.push("convergence_slope".into());
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    results.push((4, "Mourre suite", within(checks(&rep, &refs), dt, Duration::from_secs(60))));
    results.push((
        5,
        "limit-map coherence",
        within(checks(&rep, &["limit_map_kappa_spread", "limit_map_vs_scattering"]), dt, Duration::from_secs(60)),
    ));
    let classical_rep = rep;

    // 6-7. Propagators.
    let theorem = scenario("theorem.toml");
    let (rep, dt) = timed(|| run_quantum_suite(&theorem, None).expect("quantum suite"));
    results.push((
        6,
        "Mehler validation",
        checks(&rep, &["mehler_quarter_period_dft", "mehler_full_period_sign", "mehler_group_property"]),
    ));
    results.push((
        7,
        "perturbed propagator",
        within(checks(&rep, &["cn_free_vs_mehler", "cn_norm_conservation", "cn_second_order_ratio"]), dt, Duration::from_secs(300)),
    ));

    // 8. Indicator calibration.
    let (rep, dt) = timed(|| run_wf_suite(&theorem).expect("wf suite"));
    results.push((
        8,
        "indicator calibration",
        within(
            checks(&rep, &["oscillatory_on_in_wf", "oscillatory_off_not_in_wf", "oscillatory_slope_gap", "gaussian_not_in_wf"]),
            dt,
            Duration::from_secs(120),
        ),
    ));
    let wf_rep = rep;

    // 9. κ-invariance.
    let (rep, dt) = timed(|| run_egorov(&scenario("egorov.toml")).expect("egorov suite"));
    let mut names = vec!["control_drift".to_string()];
    names.extend(prefixed(&rep, "drift_ratio_"));
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut o = checks(&rep, &refs);
    o.passed &= names.len() == 3;
    results.push((9, "Egorov drift", within(o, dt, Duration::from_secs(600))));

    // 10. Correspondence.
    let (o, dt) = timed(|| {
        let mut parts = Vec::new();
        let mut passed = true;
        for name in ["theorem_unperturbed_coherent.toml", "theorem_unperturbed_singular.toml"] {
            let sc = scenario(name);
            let rep = theorem_report(&sc, &run_theorem_experiment(&sc).expect("theorem run"));
            let o = checks(&rep, &["exact_agreement"]);
            passed &= o.passed;
            parts.push(format!("{}: {}", sc.name, o.detail));
        }
        let run = run_theorem_experiment(&theorem).expect("theorem run");
        let rep = theorem_report(&theorem, &run);
        let o = checks(&rep, &["agreement_fraction", "inconclusive_fraction"]);
        passed &= o.passed && run.verdicts.len() == 10;
        parts.push(format!("{}: {}", theorem.name, o.detail));
        (Outcome { passed, detail: parts.join("; ") }, rep)
    });
    let (o, theorem_rep) = o;
    results.push((10, "main correspondence", within(o, dt, Duration::from_secs(1800))));

    // 11. Determinism: a second run of each seeded suite writes the same bytes.
    let root = std::env::temp_dir().join(format!("wfqh-acceptance-{}", std::process::id()));
    let again_classical = run_classical_suite(&classical).expect("classical suite");
    let again_wf = run_wf_suite(&theorem).expect("wf suite");
    let again_theorem = theorem_report(&theorem, &run_theorem_experiment(&theorem).expect("theorem run"));
    let mut same = true;
    for (i, (a, b)) in [(&classical_rep, &again_classical), (&wf_rep, &again_wf), (&theorem_rep, &again_theorem)].into_iter().enumerate() {
        let first = csv_bytes(a, &root.join(format!("{i}a")));
        let second = csv_bytes(b, &root.join(format!("{i}b")));
        same &= !first.is_empty() && first == second;
    }
    let _ = std::fs::remove_dir_all(&root);
    results.push((11, "determinism", Outcome { passed: same, detail: "classical, wf and theorem CSVs".into() }));

    let mut failed = 0;
    for (n, name, o) in &results {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        failed += usize::from(!o.passed);
        println!("{tag} criterion {n:>2} {name}: {}", o.detail);
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
