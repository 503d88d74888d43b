//! `trapctl`: runs trap-control simulation scenarios.

mod analyze;
mod artifacts;
mod builtin;
mod report;
mod run;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::report::RunReport;
use crate::scenario::{load_scenario_file, parse_scenario, Diagnostic, Scenario, Section};

const EXIT_EXPECTATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "trapctl",
    version,
    about = "Simulate trap-control locks, pipelines and DACs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunOpts {
    /// Scenario file to load instead of the built-in.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for artifacts and report.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Check scenario files or built-in names without running them.
    Validate {
        /// Files or built-in scenario names.
        scenarios: Vec<String>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run scenarios and write artifacts.
    Run {
        /// Files or built-in scenario names.
        scenarios: Vec<String>,
        /// Run every built-in scenario.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        opts: RunOpts,
        /// Scenarios to run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the built-in scenarios.
    ListScenarios,
    /// Comb-laser lock step response.
    CombLock(RunOpts),
    /// Master-slave offset lock with Allan deviation.
    OffsetLock(RunOpts),
    /// Gated intensity lock.
    IntensityLock(RunOpts),
    /// Eight-channel PID pipeline.
    Pid(RunOpts),
    /// DAC sequencer and noise spectra.
    Dac {
        #[command(flatten)]
        opts: RunOpts,
        /// Voltage program text file, one set of 100 voltages per line.
        #[arg(long)]
        program: Option<PathBuf>,
    },
    /// Analyze a CSV file.
    Analyze {
        #[arg(value_enum)]
        kind: analyze::Analysis,
        #[arg(long)]
        input: PathBuf,
        /// Data column; defaults to the second.
        #[arg(long)]
        column: Option<String>,
        #[arg(long, default_value = "trapctl-out/analysis")]
        out: PathBuf,
    },
}

fn report_diagnostics(source: &str, diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{source}: {d}");
    }
}

/// A file path if one exists, else a built-in name.
fn resolve(spec: &str) -> Result<Scenario, ExitCode> {
    let path = Path::new(spec);
    let parsed = if path.exists() {
        load_scenario_file(path)
    } else if let Some(b) = builtin::find(spec) {
        parse_scenario(b.text, None)
    } else {
        eprintln!("{spec}: no such file or built-in scenario (see `trapctl list-scenarios`)");
        return Err(ExitCode::from(EXIT_CONFIG));
    };
    parsed.map_err(|d| {
        report_diagnostics(spec, &d);
        ExitCode::from(EXIT_CONFIG)
    })
}

fn out_dir(scenario: &Scenario, out: Option<&Path>, many: bool) -> PathBuf {
    match (out, &scenario.output_dir) {
        (Some(o), _) if many => o.join(&scenario.name),
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => match &scenario.base_dir {
            Some(b) if d.is_relative() => b.join(d),
            _ => d.clone(),
        },
        (None, None) => Path::new("trapctl-out").join(&scenario.name),
    }
}

fn print_report(r: &RunReport, dir: &Path) {
    let status = if r.fault.is_some() {
        "FAULT"
    } else if r.passed {
        "ok"
    } else {
        "EXPECTATION FAILED"
    };
    println!(
        "{}: {status} ({:.2} s) -> {}",
        r.scenario,
        r.wall_clock_s,
        dir.display()
    );
    for m in &r.metrics {
        match m.stderr {
            Some(e) => println!("  {:<40} {} ± {} [{}]", m.name, m.value, e, m.module),
            None => println!("  {:<40} {} [{}]", m.name, m.value, m.module),
        }
    }
    for e in r.expectations.iter().filter(|e| !e.passed) {
        println!(
            "  expectation failed: {} = {:?}, wanted [{:?}, {:?}]",
            e.metric, e.value, e.min, e.max
        );
    }
    if let Some(f) = &r.fault {
        eprintln!("{}: {f}", r.scenario);
    }
}

fn exit_for(reports: &[RunReport]) -> ExitCode {
    if reports.iter().any(|r| r.fault.is_some()) {
        ExitCode::from(EXIT_RUNTIME)
    } else if reports.iter().any(|r| !r.passed) {
        ExitCode::from(EXIT_EXPECTATION)
    } else {
        ExitCode::SUCCESS
    }
}

fn run_many(mut scenarios: Vec<Scenario>, opts: &RunOpts, jobs: usize) -> ExitCode {
    if let Some(seed) = opts.seed {
        for s in &mut scenarios {
            s.seed = Some(seed);
        }
    }
    let many = scenarios.len() > 1;
    let dirs: Vec<PathBuf> = scenarios
        .iter()
        .map(|s| out_dir(s, opts.out.as_deref(), many))
        .collect();
    let jobs = jobs.max(1);
    let reports: Vec<RunReport> = if jobs == 1 {
        scenarios
            .iter()
            .zip(&dirs)
            .map(|(s, d)| run::run_scenario(s, d))
            .collect()
    } else {
        let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
            Ok(p) => p,
            Err(e) => {
                eprintln!("cannot start {jobs} workers: {e}");
                return ExitCode::from(EXIT_RUNTIME);
            }
        };
        pool.install(|| {
            scenarios
                .par_iter()
                .zip(dirs.par_iter())
                .map(|(s, d)| run::run_scenario(s, d))
                .collect()
        })
    };
    for (r, d) in reports.iter().zip(&dirs) {
        print_report(r, d);
    }
    exit_for(&reports)
}

/// Runs one subsystem: its table from `--config`, or its built-in.
fn run_section(
    opts: &RunOpts,
    section: Section,
    default: &str,
    tweak: impl FnOnce(&mut Scenario) -> Result<(), String>,
) -> ExitCode {
    let scenario = match &opts.config {
        Some(p) => match load_scenario_file(p) {
            Ok(s) => s,
            Err(d) => {
                report_diagnostics(&p.display().to_string(), &d);
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => match resolve(default) {
            Ok(s) => s,
            Err(code) => return code,
        },
    };
    if !scenario.has(section) {
        eprintln!(
            "scenario `{}` has no [{}] table",
            scenario.name,
            section.key()
        );
        return ExitCode::from(EXIT_CONFIG);
    }
    let tables = Section::ALL.iter().filter(|&&s| scenario.has(s)).count();
    let mut scenario = scenario.only(section);
    if tables > 1 {
        // Expectations may name metrics of the tables just dropped.
        scenario.expect.clear();
    }
    if let Err(e) = tweak(&mut scenario) {
        eprintln!("{e}");
        return ExitCode::from(EXIT_CONFIG);
    }
    run_many(vec![scenario], opts, 1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for b in builtin::BUILTINS {
                let desc = parse_scenario(b.text, None)
                    .map(|s| s.description)
                    .unwrap_or_default();
                println!("{:<18} {desc}", b.name);
            }
            ExitCode::SUCCESS
        }
        Command::Validate {
            mut scenarios,
            config,
        } => {
            scenarios.extend(config.map(|p| p.display().to_string()));
            if scenarios.is_empty() {
                eprintln!("nothing to validate");
                return ExitCode::from(EXIT_CONFIG);
            }
            let mut ok = true;
            for spec in &scenarios {
                match resolve(spec) {
                    Ok(s) => println!("{spec}: ok ({})", s.name),
                    Err(_) => ok = false,
                }
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_CONFIG)
            }
        }
        Command::Run {
            mut scenarios,
            all,
            opts,
            jobs,
        } => {
            if all {
                scenarios.extend(builtin::BUILTINS.iter().map(|b| b.name.to_string()));
            }
            scenarios.extend(opts.config.as_ref().map(|p| p.display().to_string()));
            if scenarios.is_empty() {
                eprintln!("nothing to run; name a scenario, pass --config, or use --all");
                return ExitCode::from(EXIT_CONFIG);
            }
            let mut loaded = Vec::new();
            for spec in &scenarios {
                match resolve(spec) {
                    Ok(s) => loaded.push(s),
                    Err(code) => return code,
                }
            }
            run_many(loaded, &opts, jobs)
        }
        Command::CombLock(opts) => {
            run_section(&opts, Section::CombLock, "step-response", |_| Ok(()))
        }
        Command::OffsetLock(opts) => {
            run_section(&opts, Section::OffsetLock, "offset-allan", |_| Ok(()))
        }
        Command::IntensityLock(opts) => {
            run_section(&opts, Section::IntensityLock, "intensity-gate", |_| Ok(()))
        }
        Command::Pid(opts) => run_section(&opts, Section::Pipeline, "pid-pipeline", |_| Ok(())),
        Command::Dac { opts, program } => run_section(&opts, Section::Dac, "dac-spectra", |s| {
            if let (Some(p), Some(d)) = (program, s.dac.as_mut()) {
                // The scenario's expectations describe its own program.
                s.expect.clear();
                d.program_file = Some(std::path::absolute(&p).unwrap_or(p));
                d.steps_between.clear();
                let mode = d
                    .modes
                    .first()
                    .copied()
                    .unwrap_or(trapctl_core::dacsim::UpdateMode::Synchronous);
                scenario::dac_program(d, None, mode).map_err(|(k, e)| format!("{k}: {e}"))?;
            }
            Ok(())
        }),
        Command::Analyze {
            kind,
            input,
            column,
            out,
        } => match analyze::analyze(kind, &input, column.as_deref(), &out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("analyze: {e}");
                ExitCode::from(EXIT_RUNTIME)
            }
        },
    }
}
