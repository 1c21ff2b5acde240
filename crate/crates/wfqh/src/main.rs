use clap::{Args, Parser, Subcommand};
use log::{error, info};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use wfqh::report::{emit_report, read_indicators, ReportFormat, SuiteReport};
use wfqh::{run_classical_suite, run_egorov, run_quantum_suite, run_theorem_experiment, run_wf_suite, theorem_report};
use wfqh::{HarnessError, Scenario};

#[derive(Parser)]
#[command(name = "wfqh", version, about = "Wave front set propagation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Scattering data, Mourre diagnostics, limit maps and Jacobian.
    Classical(Common),
    /// Propagator validation and the scenario field `u` written to `u.bin`.
    Propagate(Common),
    /// Indicator calibration and off-characteristic probes.
    Wf(Common),
    /// κ-invariance of the transported expectation.
    Egorov(Common),
    /// Quantum/classical correspondence over the probe sweep.
    Theorem(Common),
    /// SVG decay plots from an `indicators.csv` in the output directory.
    Report {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn set_threads(n: Option<usize>) -> Result<(), HarnessError> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn finish(report: SuiteReport, out: &Path) -> Result<bool, HarnessError> {
    emit_report(&report, ReportFormat::Csv, out)?;
    for c in &report.checks {
        let tag = match (c.asserted, c.passed) {
            (false, _) => "REF ",
            (true, true) => "PASS",
            (true, false) => "FAIL",
        };
        println!("{tag} {:<40} value {:.6e} limit {:.6e} {}", c.name, c.value, c.limit, c.detail);
    }
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Report { out, threads, .. } => {
            set_threads(threads)?;
            let items = read_indicators(&out.join("indicators.csv"))?;
            let report = SuiteReport { indicators: items, ..SuiteReport::new("report") };
            let files = emit_report(&report, ReportFormat::SvgPlots, &out)?;
            info!("wrote {} plots", files.len());
            Ok(true)
        }
        cmd => {
            let (kind, c) = match cmd {
                Command::Classical(c) => ("classical", c),
                Command::Propagate(c) => ("propagate", c),
                Command::Wf(c) => ("wf", c),
                Command::Egorov(c) => ("egorov", c),
                Command::Theorem(c) => ("theorem", c),
                Command::Report { .. } => unreachable!(),
            };
            set_threads(c.threads)?;
            let sc = Scenario::load(&c.scenario)?;
            std::fs::create_dir_all(&c.out)?;
            let report = match kind {
                "classical" => run_classical_suite(&sc)?,
                "propagate" => run_quantum_suite(&sc, Some(&c.out))?,
                "wf" => run_wf_suite(&sc)?,
                "egorov" => run_egorov(&sc)?,
                _ => theorem_report(&sc, &run_theorem_experiment(&sc)?),
            };
            finish(report, &c.out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
