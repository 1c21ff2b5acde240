use crate::HarnessError;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use wfqh_core::microlocal::{Classification, IndicatorResult};

/// One value of a CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl Cell {
    /// Floats carry 17 significant digits so that the text round-trips exactly.
    pub fn render(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Rows destined for `<name>.csv`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.to_string(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width in {}", self.name);
        self.rows.push(row);
    }
}

/// A named pass/fail measurement. Non-asserted checks are reported but never fail a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
    pub asserted: bool,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value, limit, value <= limit)
    }

    pub fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self::new(name, value, limit, value >= limit)
    }

    pub fn new(name: &str, value: f64, limit: f64, passed: bool) -> Self {
        Self { name: name.to_string(), value, limit, passed, asserted: true, detail: String::new() }
    }

    /// Recorded for comparison only.
    pub fn reference(mut self) -> Self {
        self.asserted = false;
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Indicator result with the label used for its plot file.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledIndicator {
    pub probe_id: String,
    pub result: IndicatorResult,
}

/// Everything a suite produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    pub indicators: Vec<LabeledIndicator>,
}

impl SuiteReport {
    pub fn new(suite: &str) -> Self {
        Self { suite: suite.to_string(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || !c.asserted)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.asserted && !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new(&format!("{}_checks", self.suite), &["check", "value", "limit", "passed", "asserted", "detail"]);
        for c in &self.checks {
            t.push(vec![
                c.name.as_str().into(),
                c.value.into(),
                c.limit.into(),
                c.passed.into(),
                c.asserted.into(),
                c.detail.as_str().into(),
            ]);
        }
        t
    }

    /// Long-format table `(probe_id, h, norm, fitted_alpha, classification, …)` of the indicators.
    pub fn indicator_table(&self) -> Table {
        indicator_table(&self.indicators)
    }
}

pub const INDICATOR_HEADER: [&str; 10] = [
    "probe_id",
    "h",
    "norm",
    "fitted_alpha",
    "classification",
    "reference_norm",
    "alpha_high",
    "alpha_low",
    "floor",
    "noise_floor",
];

pub fn indicator_table(items: &[LabeledIndicator]) -> Table {
    let mut t = Table::new("indicators", &INDICATOR_HEADER);
    for it in items {
        let r = &it.result;
        for (h, n) in r.h_list.iter().zip(&r.norms) {
            t.push(vec![
                it.probe_id.as_str().into(),
                (*h).into(),
                (*n).into(),
                r.fitted_alpha.into(),
                r.classification.as_str().into(),
                r.reference_norm.into(),
                r.thresholds.alpha_high.into(),
                r.thresholds.alpha_low.into(),
                r.thresholds.floor.into(),
                r.thresholds.noise_floor.into(),
            ]);
        }
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    SvgPlots,
}

pub fn write_csv(table: &Table, dir: &Path) -> Result<PathBuf, HarnessError> {
    let path = dir.join(format!("{}.csv", table.name));
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render))?;
    }
    w.flush()?;
    Ok(path)
}

/// Writes the report into `dir`: CSV tables (checks, data, indicators) or one SVG per indicator.
pub fn emit_report(report: &SuiteReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    match format {
        ReportFormat::Csv => {
            out.push(write_csv(&report.checks_table(), dir)?);
            for t in &report.tables {
                out.push(write_csv(t, dir)?);
            }
            if !report.indicators.is_empty() {
                out.push(write_csv(&report.indicator_table(), dir)?);
            }
        }
        ReportFormat::SvgPlots => {
            for it in &report.indicators {
                let path = dir.join(format!("{}.svg", sanitize(&it.probe_id)));
                std::fs::write(&path, decay_plot_svg(&it.probe_id, &it.result))?;
                out.push(path);
            }
        }
    }
    Ok(out)
}

fn sanitize(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Log-log plot of `N(h)` with the least-squares line and its slope.
pub fn decay_plot_svg(title: &str, r: &IndicatorResult) -> String {
    let (w, h) = (480.0, 360.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 50.0);
    let lx: Vec<f64> = r.h_list.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = r.norms.iter().map(|v| v.max(1e-300).log10()).collect();
    let span = |v: &[f64]| {
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            let pad = 0.08 * (hi - lo);
            (lo - pad, hi + pad)
        }
    };
    let (x0, x1) = span(&lx);
    let (y0, y1) = span(&ly);
    let px = |x: f64| left + (x - x0) / (x1 - x0) * (w - left - right);
    let py = |y: f64| h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">log10 h</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 16 {})">log10 N(h)</text>"#,
        h / 2.0,
        h / 2.0
    );
    for (x, y) in lx.iter().zip(&ly) {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="steelblue"/>"#, px(*x), py(*y));
    }
    if r.fitted_alpha.is_finite() {
        let n = lx.len() as f64;
        let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
        let line = |x: f64| my + r.fitted_alpha * (x - mx);
        let (a, b) = (lx.iter().cloned().fold(f64::INFINITY, f64::min), lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-dasharray="6 4"/>"#,
            px(a),
            py(line(a)),
            px(b),
            py(line(b))
        );
    }
    let label = match r.classification {
        Classification::InWf => "in_wf",
        Classification::NotInWf => "not_in_wf",
        Classification::Inconclusive => "inconclusive",
    };
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12">slope {:.3} ({label})</text>"#,
        left + 8.0,
        top + 18.0,
        r.fitted_alpha
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Rebuilds indicator results from an `indicators.csv` written by [`emit_report`].
pub fn read_indicators(path: &Path) -> Result<Vec<LabeledIndicator>, HarnessError> {
    let mut rd = csv::Reader::from_path(path)?;
    let header = rd.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != INDICATOR_HEADER {
        return Err(HarnessError::Config(format!("{} is not an indicator table", path.display())));
    }
    let mut out: Vec<LabeledIndicator> = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64, HarnessError> {
            rec[i].parse::<f64>().map_err(|e| HarnessError::Config(format!("column {}: {e}", INDICATOR_HEADER[i])))
        };
        let classification = match &rec[4] {
            "in_wf" => Classification::InWf,
            "not_in_wf" => Classification::NotInWf,
            "inconclusive" => Classification::Inconclusive,
            other => return Err(HarnessError::Config(format!("unknown classification {other}"))),
        };
        let id = rec[0].to_string();
        if out.last().map(|l| l.probe_id != id).unwrap_or(true) {
            out.push(LabeledIndicator {
                probe_id: id,
                result: IndicatorResult {
                    h_list: Vec::new(),
                    norms: Vec::new(),
                    fitted_alpha: num(3)?,
                    classification,
                    thresholds: wfqh_core::microlocal::Thresholds {
                        alpha_high: num(6)?,
                        alpha_low: num(7)?,
                        floor: num(8)?,
                        noise_floor: num(9)?,
                    },
                    reference_norm: num(5)?,
                },
            });
        }
        let last = out.last_mut().expect("pushed above");
        last.result.h_list.push(num(1)?);
        last.result.norms.push(num(2)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use wfqh_core::microlocal::{classify, Thresholds};

    fn sample() -> LabeledIndicator {
        let hs = vec![0.125, 0.0625, 0.03125];
        let norms = hs.iter().map(|h: &f64| 0.3 * h.powf(0.5)).collect();
        LabeledIndicator { probe_id: "on_0".into(), result: classify(&hs, norms, 1.0, &Thresholds::default()) }
    }

    #[test]
    fn empty_report_gives_header_only_csv() {
        let dir = tempfile::tempdir().unwrap();
        let report = SuiteReport::new("empty");
        let files = emit_report(&report, ReportFormat::Csv, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let text = std::fs::read_to_string(&files[0]).unwrap();
        assert_eq!(text, "check,value,limit,passed,asserted,detail\n");
        let t = Table::new("nothing", &["a", "b"]);
        let p = write_csv(&t, dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "a,b\n");
    }

    #[test]
    fn floats_round_trip_with_seventeen_digits() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').replace('.', "").len(), 17);
        }
        assert_eq!(format_float(f64::NAN), "NaN");
    }

    #[test]
    fn svg_plot_has_points_and_slope() {
        let it = sample();
        let svg = decay_plot_svg(&it.probe_id, &it.result);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("slope 0.500"));
        let dir = tempfile::tempdir().unwrap();
        let mut report = SuiteReport::new("wf");
        report.indicators.push(it);
        let files = emit_report(&report, ReportFormat::SvgPlots, dir.path()).unwrap();
        assert_eq!(files[0].file_name().unwrap(), "on_0.svg");
    }

    #[test]
    fn indicator_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut report = SuiteReport::new("wf");
        report.indicators.push(sample());
        emit_report(&report, ReportFormat::Csv, dir.path()).unwrap();
        let back = read_indicators(&dir.path().join("indicators.csv")).unwrap();
        assert_eq!(back, report.indicators);
    }

    #[test]
    fn failures_ignore_reference_checks() {
        let mut r = SuiteReport::new("x");
        r.checks.push(Check::at_most("a", 2.0, 1.0).reference());
        assert!(r.passed());
        r.checks.push(Check::at_least("b", 0.0, 1.0));
        assert!(!r.passed());
        assert_eq!(r.failures().len(), 1);
    }
}
