use crate::report::{Check, LabeledIndicator, SuiteReport, Table};
use crate::scenario::{InitialPoint, Scenario};
use crate::HarnessError;
use rayon::prelude::*;
use wfqh_core::classical::{is_nontrapping, scattering_data, ClassicalError};
use wfqh_core::microlocal::{
    characteristic_probe_pair, characteristic_probe_pair_os, wf_indicator_with, Classification, IndicatorResult,
};
use wfqh_core::model::{make_family, PerturbationField};
use wfqh_core::quantum::{evolve_spacetime_os, propagate_perturbed, SpaceTimeField};

/// Indicator pairs at `Π(s, y, η)` on `u` and at `Π_os(s, x₊, ξ₊)` on `u_os`, on and off the characteristic set.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremVerdict {
    pub point: InitialPoint,
    pub x_plus: f64,
    pub xi_plus: f64,
    pub on_u: IndicatorResult,
    pub on_os: IndicatorResult,
    pub off_u: IndicatorResult,
    pub off_os: IndicatorResult,
    /// `None` when any of the four classifications is inconclusive.
    pub agreement: Option<bool>,
}

impl TheoremVerdict {
    pub fn inconclusive(&self) -> bool {
        self.agreement.is_none()
    }

    fn decide(on_u: &IndicatorResult, on_os: &IndicatorResult, off_u: &IndicatorResult, off_os: &IndicatorResult) -> Option<bool> {
        let all = [on_u, on_os, off_u, off_os];
        if all.iter().any(|r| r.classification == Classification::Inconclusive) {
            return None;
        }
        Some(on_u.classification == on_os.classification && off_u.classification == off_os.classification)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremRun {
    pub verdicts: Vec<TheoremVerdict>,
}

impl TheoremRun {
    pub fn conclusive(&self) -> usize {
        self.verdicts.iter().filter(|v| !v.inconclusive()).count()
    }

    /// Agreeing fraction of the conclusive points; NaN when none is conclusive.
    pub fn agreement_fraction(&self) -> f64 {
        let n = self.conclusive();
        if n == 0 {
            return f64::NAN;
        }
        self.verdicts.iter().filter(|v| v.agreement == Some(true)).count() as f64 / n as f64
    }

    pub fn inconclusive_fraction(&self) -> f64 {
        (self.verdicts.len() - self.conclusive()) as f64 / self.verdicts.len() as f64
    }
}

fn verdict_at(
    field: &dyn PerturbationField,
    sc: &Scenario,
    u: &SpaceTimeField,
    u_os: &SpaceTimeField,
    p: InitialPoint,
) -> Result<TheoremVerdict, HarnessError> {
    let w = is_nontrapping(field, p.s, &[p.y], &[p.eta], &sc.flow)?;
    if !w.nontrapping {
        return Err(ClassicalError::Trapping { radii: w.radii }.into());
    }
    let sd = scattering_data(field, p.s, &[p.y], p.sigma, &[p.eta], &sc.flow)?;
    let (x_plus, xi_plus) = (sd.x_plus[0], sd.xi_plus[0]);
    let (on, off) = characteristic_probe_pair(field, p.s, p.y, p.eta, &sc.probe)?;
    let (on0, off0) = characteristic_probe_pair_os(p.s, x_plus, xi_plus, &sc.probe)?;
    let (hl, th) = (&sc.h_list, &sc.thresholds);
    let on_u = wf_indicator_with(u, &on, hl, th)?;
    let on_os = wf_indicator_with(u_os, &on0, hl, th)?;
    let off_u = wf_indicator_with(u, &off, hl, th)?;
    let off_os = wf_indicator_with(u_os, &off0, hl, th)?;
    let agreement = TheoremVerdict::decide(&on_u, &on_os, &off_u, &off_os);
    Ok(TheoremVerdict { point: p, x_plus, xi_plus, on_u, on_os, off_u, off_os, agreement })
}

/// Builds `u` and `u_os` from the scenario's `φ` once and records a verdict at every sweep point.
pub fn run_theorem_experiment(sc: &Scenario) -> Result<TheoremRun, HarnessError> {
    sc.validate()?;
    let field = make_family(&sc.family)?;
    let grid = sc.grid.grid()?;
    let phi = sc.phi.build(grid)?;
    let (win, n_t) = (sc.window.t_window, sc.window.n_t);
    let u = propagate_perturbed(&phi, &field, win, n_t, &sc.propagator)?;
    let u_os = evolve_spacetime_os(&phi, win, n_t, &sc.propagator);
    let verdicts = sc
        .sweep
        .points(&sc.initial_point)
        .into_par_iter()
        .map(|p| verdict_at(&field, sc, &u, &u_os, p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TheoremRun { verdicts })
}

fn h_list_text(h: &[f64]) -> String {
    h.iter().map(|v| crate::report::format_float(*v)).collect::<Vec<_>>().join(";")
}

/// Verdict rows, indicators and the agreement checks.
pub fn theorem_report(sc: &Scenario, run: &TheoremRun) -> SuiteReport {
    let mut rep = SuiteReport::new("theorem");
    let mut t = Table::new(
        "verdicts",
        &[
            "s", "y", "eta", "x_plus", "xi_plus", "on_u", "on_os", "off_u", "off_os", "alpha_on_u", "alpha_on_os",
            "alpha_off_u", "alpha_off_os", "agreement", "inconclusive", "alpha_high", "alpha_low", "floor", "noise_floor",
            "h_list",
        ],
    );
    let th = sc.thresholds;
    for v in &run.verdicts {
        let p = v.point;
        t.push(vec![
            p.s.into(),
            p.y.into(),
            p.eta.into(),
            v.x_plus.into(),
            v.xi_plus.into(),
            v.on_u.classification.as_str().into(),
            v.on_os.classification.as_str().into(),
            v.off_u.classification.as_str().into(),
            v.off_os.classification.as_str().into(),
            v.on_u.fitted_alpha.into(),
            v.on_os.fitted_alpha.into(),
            v.off_u.fitted_alpha.into(),
            v.off_os.fitted_alpha.into(),
            v.agreement.map_or("", |a| if a { "true" } else { "false" }).into(),
            v.inconclusive().into(),
            th.alpha_high.into(),
            th.alpha_low.into(),
            th.floor.into(),
            th.noise_floor.into(),
            h_list_text(&sc.h_list).into(),
        ]);
        let id = format!("s{}_y{}_eta{}", p.s, p.y, p.eta);
        for (side, r) in [("on_u", &v.on_u), ("on_os", &v.on_os), ("off_u", &v.off_u), ("off_os", &v.off_os)] {
            rep.indicators.push(LabeledIndicator { probe_id: format!("{id}_{side}"), result: r.clone() });
        }
    }
    rep.tables.push(t);
    let free = make_family(&sc.family).is_ok_and(|f| f.is_unperturbed());
    if free {
        let exact = run.verdicts.iter().all(|v| v.agreement == Some(true));
        let n = run.verdicts.iter().filter(|v| v.agreement == Some(true)).count();
        rep.checks.push(Check::new("exact_agreement", n as f64, run.verdicts.len() as f64, exact));
    } else {
        rep.checks.push(
            Check::at_least("agreement_fraction", run.agreement_fraction(), sc.sweep.min_agreement)
                .with_detail(format!("{} of {} points conclusive", run.conclusive(), run.verdicts.len())),
        );
    }
    rep.checks.push(Check::at_most("inconclusive_fraction", run.inconclusive_fraction(), sc.sweep.max_inconclusive));
    rep
}
