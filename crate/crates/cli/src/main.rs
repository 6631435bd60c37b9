use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod load;
mod report;

use report::Report;

/// Selection derivatives of nonsmooth programs: evaluation, AD in both
/// modes, set-valued fields, verification suites and SGD experiments.
#[derive(Debug, Parser)]
#[command(name = "seldiff", version)]
struct Cli {
    /// Emit a machine-readable JSON report instead of a table.
    #[arg(long, global = true)]
    json: bool,
    /// Write CSV traces into this directory.
    #[arg(long, global = true, value_name = "DIR")]
    csv: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct FnArgs {
    /// `.sel` source file.
    file: PathBuf,
    /// Function to compile.
    #[arg(long = "fn", value_name = "NAME")]
    name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Forward,
    Backward,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Suite {
    Ae,
    Chain,
    Closedgraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScheduleArg {
    Power,
    Log,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a function and print every node value.
    Eval {
        #[command(flatten)]
        f: FnArgs,
        #[arg(long, num_args = 1.., allow_negative_numbers = true, required = true)]
        at: Vec<f64>,
    },
    /// Selection gradient by forward and/or backward mode.
    Grad {
        #[command(flatten)]
        f: FnArgs,
        #[arg(long, num_args = 1.., allow_negative_numbers = true, required = true)]
        at: Vec<f64>,
        #[arg(long, value_enum, default_value = "both")]
        mode: ModeArg,
        /// Largest accepted relative mode discrepancy.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Check the backpropagation product identity on random instances.
    #[command(name = "check-lemma1")]
    CheckLemma1 {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Generators of the set-valued field and its minimum-norm element.
    Dfield {
        #[command(flatten)]
        f: FnArgs,
        #[arg(long, num_args = 1.., allow_negative_numbers = true, required = true)]
        at: Vec<f64>,
        #[arg(long, default_value_t = seldiff::setfield::DEFAULT_TOL_ACTIVE)]
        tol_active: f64,
    },
    /// Non-critical, Clarke-critical or artificial-critical.
    Classify {
        #[command(flatten)]
        f: FnArgs,
        #[arg(long, num_args = 1.., allow_negative_numbers = true, required = true)]
        at: Vec<f64>,
        #[arg(long, default_value_t = seldiff::setfield::DEFAULT_TOL_D)]
        tol_d: f64,
        #[arg(long, default_value_t = seldiff::setfield::DEFAULT_TOL_C)]
        tol_c: f64,
        #[arg(long, default_value_t = 1e-3)]
        radius: f64,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fail unless the classification is this one.
        #[arg(long, value_name = "CLASS")]
        expect: Option<String>,
    },
    /// Integrate the field along a polyline and compare with the value change.
    Integrate {
        #[command(flatten)]
        f: FnArgs,
        /// JSON path file: a vertex array, or an object with `vertices` and optional `breakpoints`.
        #[arg(long)]
        path: PathBuf,
        /// A selection rule name, or `all`.
        #[arg(long, default_value = "selection-gradient")]
        rule: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2e-8)]
        tol: f64,
    },
    /// Verification suites.
    Verify {
        #[command(flatten)]
        f: FnArgs,
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Lower corner of the sampling box (one value is broadcast).
        #[arg(long, num_args = 1.., allow_negative_numbers = true, default_values_t = [-2.0])]
        lo: Vec<f64>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true, default_values_t = [2.0])]
        hi: Vec<f64>,
        /// Random segments scanned for boundary points (ae and closedgraph).
        #[arg(long, default_value_t = 32)]
        probes: usize,
    },
    /// Minibatch SGD on the mean of several functions.
    Sgd {
        file: PathBuf,
        /// Comma-separated component functions.
        #[arg(long, value_delimiter = ',', required = true)]
        sum: Vec<String>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true, required = true)]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        c: f64,
        #[arg(long, default_value_t = 0.6)]
        beta: f64,
        #[arg(long, value_enum, default_value = "power")]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 100_000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        run_id: u64,
        #[arg(long, default_value_t = 1e6)]
        radius: f64,
        #[arg(long, default_value_t = 100)]
        stride: usize,
        /// Use every component at every step.
        #[arg(long)]
        full_batch: bool,
    },
    /// Many-run experiments.
    Experiment {
        #[command(subcommand)]
        kind: ExperimentKind,
    },
    /// Built-in demonstrations.
    Demo {
        #[command(subcommand)]
        which: DemoKind,
    },
    /// Add `r * zero(x_k - s)` so that the AD derivative at `s` shifts by `r`.
    Prescribe {
        #[command(flatten)]
        f: FnArgs,
        /// The point `s`.
        #[arg(long, allow_negative_numbers = true)]
        at: f64,
        /// The shift `r`.
        #[arg(long, allow_negative_numbers = true)]
        shift: f64,
        #[arg(long, default_value_t = 0)]
        coord: usize,
        /// Other coordinates of the point (defaults to zeros).
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        base: Option<Vec<f64>>,
        /// Random points at which values must be unchanged.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the new program as JSON.
        #[arg(long)]
        emit: bool,
    },
}

#[derive(Debug, Subcommand)]
enum ExperimentKind {
    /// SGD from random (x0, c) draws; counts artificial-critical endpoints.
    Traps {
        file: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sum: Vec<String>,
        #[arg(long, default_value_t = 1000)]
        inits: usize,
        #[arg(long, num_args = 1.., allow_negative_numbers = true, default_values_t = [-2.0])]
        x0_lo: Vec<f64>,
        #[arg(long, num_args = 1.., allow_negative_numbers = true, default_values_t = [2.0])]
        x0_hi: Vec<f64>,
        #[arg(long, default_value_t = 0.1)]
        c_lo: f64,
        #[arg(long, default_value_t = 1.0)]
        c_hi: f64,
        #[arg(long, default_value_t = 0.6)]
        beta: f64,
        #[arg(long, value_enum, default_value = "power")]
        schedule: ScheduleArg,
        #[arg(long, default_value_t = 20_000)]
        iters: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e6)]
        radius: f64,
        /// Point whose neighbourhood is counted.
        #[arg(long, num_args = 1.., allow_negative_numbers = true)]
        target: Option<Vec<f64>>,
        #[arg(long, default_value_t = 1e-2)]
        target_tol: f64,
        /// Fail unless at least this fraction of runs ends near the target.
        #[arg(long)]
        min_near_target: Option<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum DemoKind {
    /// AD derivatives at 0 of relu, relu2, relu3, zero and id - zero.
    Figure1,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match commands::run(&cli) {
        Ok(report) => emit(&cli, report),
        Err(e) => {
            let record = report::error_record(name, &format!("{e:#}"));
            if cli.json {
                println!("{record}");
            } else {
                eprintln!("error: {e:#}");
                eprintln!("{record}");
            }
            ExitCode::from(2)
        }
    }
}

fn emit(cli: &Cli, report: Report) -> ExitCode {
    let text = if cli.json {
        serde_json::to_string_pretty(&report.to_json()).expect("serializable report") + "\n"
    } else {
        report.human.clone()
    };
    // a closed pipe (`| head`) is not an error worth a panic
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    if !cli.json && !report.failures.is_empty() {
        eprintln!("{}", report.failure_record());
    }
    if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Eval { .. } => "eval",
            Command::Grad { .. } => "grad",
            Command::CheckLemma1 { .. } => "check-lemma1",
            Command::Dfield { .. } => "dfield",
            Command::Classify { .. } => "classify",
            Command::Integrate { .. } => "integrate",
            Command::Verify { .. } => "verify",
            Command::Sgd { .. } => "sgd",
            Command::Experiment { .. } => "experiment traps",
            Command::Demo { .. } => "demo figure1",
            Command::Prescribe { .. } => "prescribe",
        }
    }
}
