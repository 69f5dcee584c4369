//! Command-line front end: `rkhs-logrank test` and `rkhs-logrank simulate`.
//!
//! Errors are reported as one line `error[E_CODE]: message` on stderr with
//! exit status 1. The statistical decision never changes the exit status.
//! Set `RKHS_LOGRANK_THREADS` to fix the worker-thread count (`1` runs serially).

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bootstrap::{run_test_prepared, BootstrapConfig, Multiplier};
use crate::engine::{optimal_weight, OPTIMAL_WEIGHT_GRID};
use crate::kernels::{self, Bandwidth, KernelSpec, TabulatedWeight, WeightFunction};
use crate::simulation::{run_scenario, FamilyKind, ScenarioConfig};
use crate::survival::{DataError, RawObservation, RiskTable, SurvivalDataset};
use crate::Error;

/// Environment variable that sets the number of worker threads.
pub const THREADS_ENV: &str = "RKHS_LOGRANK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "rkhs-logrank", version, about = "Kernel log-rank two-sample tests for right-censored data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test a two-group dataset read from CSV (columns time, event, group).
    Test(TestArgs),
    /// Estimate rejection rates on simulated data over a θ grid.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// lrp, lrc, p2w, p4w, per4, per5, sek, custom, or a long form such as `pearson(3,x)`
    #[arg(long, default_value = "sek")]
    pub kernel: String,
    /// Long-form spec used with `--kernel custom`.
    #[arg(long)]
    pub spec: Option<String>,
    /// CSV with columns u, weight; used with `--kernel custom` as a weighted log-rank kernel.
    #[arg(long)]
    pub weight_table: Option<PathBuf>,
    /// Bandwidth of the sek kernel: a positive number or `median`.
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// rademacher or normal
    #[arg(long, default_value = "rademacher")]
    pub multiplier: String,
    /// Write the optimal weight function as CSV (columns u, weight).
    #[arg(long)]
    pub optimal_weight: Option<PathBuf>,
    #[arg(long, default_value_t = OPTIMAL_WEIGHT_GRID)]
    pub grid_size: usize,
    /// Omit the timestamp so repeated runs are byte-identical.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// proportional, weibull or periodic
    #[arg(long)]
    pub family: String,
    /// Comma-separated θ values; defaults to nine points over the family's range.
    #[arg(long)]
    pub theta_grid: Option<String>,
    #[arg(long, default_value_t = 30)]
    pub n0: usize,
    #[arg(long, default_value_t = 30)]
    pub n1: usize,
    #[arg(long, default_value_t = 0.1)]
    pub cens0: f64,
    #[arg(long, default_value_t = 0.1)]
    pub cens1: f64,
    /// Comma-separated kernel specs.
    #[arg(long, default_value = "sek")]
    pub kernels: String,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving report.json and report.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDocument {
    pub replicates: usize,
    pub multiplier: Multiplier,
    pub seed: u64,
}

/// JSON document printed by `test`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub statistic: f64,
    pub scaled_statistic: f64,
    pub p_value: f64,
    pub quantile: f64,
    pub reject: bool,
    pub alpha: f64,
    pub kernel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bandwidth: Option<f64>,
    pub n: usize,
    pub n0: usize,
    pub n1: usize,
    pub bootstrap: BootstrapDocument,
    pub version: String,
    /// seconds since the Unix epoch
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // keep the report on one line
        write!(f, "error[{}]: {}", self.code, self.message.replace('\n', " "))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Data(_) => "E_DATA",
            Error::Kernel(_) => "E_KERNEL",
            Error::Engine(_) => "E_ENGINE",
            Error::Bootstrap(_) => "E_BOOTSTRAP",
            Error::Simulation(_) => "E_SIMULATION",
            Error::Numerics(_) => "E_NUMERICS",
        };
        CliError::new(code, e.to_string())
    }
}

fn lib_err(e: impl Into<Error>) -> CliError {
    e.into().into()
}

/// Runs the command line `args` (including the program name) and returns the exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let _ = writeln!(stderr, "{}", CliError::new("E_USAGE", first));
            return 1;
        }
    };
    // stdout is not Send, so the output is buffered and printed after the pool returns
    let result = with_thread_pool(|| dispatch(&cli)).and_then(|text| {
        stdout
            .write_all(text.as_bytes())
            .and_then(|_| stdout.flush())
            .map_err(|e| CliError::new("E_OUTPUT", e.to_string()))
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "{e}");
            1
        }
    }
}

fn with_thread_pool<R: Send>(f: impl FnOnce() -> Result<R, CliError> + Send) -> Result<R, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(value) => {
            let threads: usize = value
                .trim()
                .parse()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| CliError::new("E_ENV", format!("{THREADS_ENV} must be a positive integer, got `{value}`")))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::new("E_ENV", e.to_string()))?;
            pool.install(f)
        }
        Err(_) => f(),
    }
}

fn dispatch(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Test(args) => {
            let doc = cmd_test(args)?;
            let json = serde_json::to_string_pretty(&doc).map_err(|e| CliError::new("E_OUTPUT", e.to_string()))?;
            Ok(json + "\n")
        }
        Command::Simulate(args) => cmd_simulate(args),
    }
}

/// Reads `time,event,group` rows. Returns the rows and their line numbers.
pub fn read_dataset_csv(path: &Path) -> Result<(Vec<RawObservation>, Vec<u64>), CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::new("E_IO", format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::new("E_PARSE", format!("{}: {e}", path.display())))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    let column = |name: &str| names.iter().position(|h| *h == name);
    let (it, ie, ig) = match (column("time"), column("event"), column("group")) {
        (Some(t), Some(e), Some(g)) if names.len() == 3 => (t, e, g),
        _ => {
            return Err(CliError::new(
                "E_PARSE",
                format!(
                    "{}: header must be exactly time,event,group (got {})",
                    path.display(),
                    names.join(",")
                ),
            ))
        }
    };

    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::new("E_PARSE", format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let bad = |what: &str, value: &str| CliError::new("E_PARSE", format!("{}: row {line}: invalid {what} `{value}`", path.display()));
        let time: f64 = record[it].parse().map_err(|_| bad("time", &record[it]))?;
        let event = match &record[ie] {
            "0" => false,
            "1" => true,
            other => return Err(bad("event (expected 0 or 1)", other)),
        };
        let group: i64 = match &record[ig] {
            "0" => 0,
            "1" => 1,
            other => return Err(bad("group (expected 0 or 1)", other)),
        };
        rows.push(RawObservation { time, event, group });
        lines.push(line);
    }
    Ok((rows, lines))
}

fn read_weight_table(path: &Path) -> Result<TabulatedWeight, CliError> {
    let file = fs::File::open(path).map_err(|e| CliError::new("E_IO", format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let (mut grid, mut values) = (Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| CliError::new("E_PARSE", format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let parse = |k: usize| -> Result<f64, CliError> {
            record
                .get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::new("E_PARSE", format!("{}: row {line}: expected two numbers u,weight", path.display())))
        };
        grid.push(parse(0)?);
        values.push(parse(1)?);
    }
    TabulatedWeight::new(grid, values).map_err(|e| CliError::new("E_KERNEL", format!("{}: {e}", path.display())))
}

fn resolve_kernel(args: &TestArgs) -> Result<KernelSpec, CliError> {
    let mut spec = if args.kernel.trim().eq_ignore_ascii_case("custom") {
        match (&args.spec, &args.weight_table) {
            (Some(text), None) => text.parse().map_err(lib_err)?,
            (None, Some(path)) => KernelSpec::WeightedLogRank(WeightFunction::Tabulated(read_weight_table(path)?)),
            _ => {
                return Err(CliError::new(
                    "E_ARGS",
                    "--kernel custom needs exactly one of --spec or --weight-table",
                ))
            }
        }
    } else {
        if args.spec.is_some() || args.weight_table.is_some() {
            return Err(CliError::new("E_ARGS", "--spec and --weight-table require --kernel custom"));
        }
        args.kernel.parse().map_err(lib_err)?
    };
    if let Some(sigma) = &args.sigma {
        let KernelSpec::SquaredExponential(bw) = &mut spec else {
            return Err(CliError::new("E_ARGS", "--sigma applies only to the sek kernel"));
        };
        *bw = if sigma.trim().eq_ignore_ascii_case("median") {
            Bandwidth::MedianHeuristic
        } else {
            Bandwidth::Fixed(
                sigma
                    .trim()
                    .parse()
                    .map_err(|_| CliError::new("E_ARGS", format!("--sigma expects a number or `median`, got `{sigma}`")))?,
            )
        };
        spec.validate().map_err(lib_err)?;
    }
    Ok(spec)
}

/// The `test` subcommand without printing.
pub fn cmd_test(args: &TestArgs) -> Result<ResultDocument, CliError> {
    let multiplier: Multiplier = args.multiplier.parse().map_err(|e: String| CliError::new("E_ARGS", e))?;
    let cfg = BootstrapConfig {
        replicates: args.bootstrap,
        multiplier,
        seed: args.seed,
        alpha: args.alpha,
    };
    cfg.validate().map_err(|e| CliError::new("E_ARGS", e.to_string()))?;
    let spec = resolve_kernel(args)?;

    let (rows, lines) = read_dataset_csv(&args.input)?;
    let ds = SurvivalDataset::validate_and_sort(&rows).map_err(|e| {
        let row = |i: usize| lines.get(i).copied().unwrap_or(0);
        let msg = match e {
            DataError::NonPositiveTime(i) => format!("row {}: time must be finite and > 0", row(i)),
            DataError::BadGroupLabel(i) => format!("row {}: group label must be 0 or 1", row(i)),
            other => other.to_string(),
        };
        CliError::new("E_DATA", format!("{}: {msg}", args.input.display()))
    })?;
    let rt = RiskTable::build(&ds);
    let pk = kernels::prepare(&spec, &ds, &rt).map_err(lib_err)?;
    let res = run_test_prepared(&ds, &rt, &pk, &cfg).map_err(lib_err)?;

    if let Some(path) = &args.optimal_weight {
        if args.grid_size == 0 {
            return Err(CliError::new("E_ARGS", "--grid-size must be positive"));
        }
        let w = optimal_weight(&ds, &rt, &pk).map_err(lib_err)?;
        write_weight_csv(path, &w.tabulate(args.grid_size))?;
    }

    Ok(ResultDocument {
        statistic: res.z.z,
        scaled_statistic: res.z.scaled,
        p_value: res.p_value,
        quantile: res.quantile,
        reject: res.reject,
        alpha: cfg.alpha,
        kernel: spec.to_string(),
        bandwidth: pk.bandwidth(),
        n: res.z.n,
        n0: res.z.n0,
        n1: res.z.n1,
        bootstrap: BootstrapDocument {
            replicates: cfg.replicates,
            multiplier: cfg.multiplier,
            seed: cfg.seed,
        },
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: (!args.deterministic).then(unix_time),
    })
}

fn write_weight_csv(path: &Path, table: &[(f64, f64)]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::new("E_OUTPUT", format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["u", "weight"]).map_err(io)?;
    for (u, v) in table {
        w.write_record([u.to_string(), v.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::new("E_OUTPUT", format!("{}: {e}", path.display())))
}

fn unix_time() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// The `simulate` subcommand: writes the report files and returns the summary table.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let family: FamilyKind = args.family.parse().map_err(|e: String| CliError::new("E_ARGS", e))?;
    let thetas = match &args.theta_grid {
        Some(text) => text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::new("E_ARGS", format!("--theta-grid: invalid number `{}`", s.trim())))
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => family.default_grid(),
    };
    if thetas.is_empty() {
        return Err(CliError::new("E_ARGS", "--theta-grid is empty"));
    }
    let kernels = kernels::parse_kernel_list(&args.kernels).map_err(lib_err)?;
    let cfg = ScenarioConfig {
        n0: args.n0,
        n1: args.n1,
        family,
        thetas,
        censoring0: args.cens0,
        censoring1: args.cens1,
        repetitions: args.reps,
        bootstrap: BootstrapConfig {
            replicates: args.bootstrap,
            multiplier: Multiplier::Rademacher,
            seed: args.seed,
            alpha: args.alpha,
        },
        kernels,
    };
    let mut report = run_scenario(&cfg, args.seed).map_err(lib_err)?;
    if args.deterministic {
        report.runtime_seconds = None;
    }

    let out_err = |e: std::io::Error| CliError::new("E_OUTPUT", format!("{}: {e}", args.out.display()));
    fs::create_dir_all(&args.out).map_err(out_err)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::new("E_OUTPUT", e.to_string()))?;
    fs::write(args.out.join("report.json"), json + "\n").map_err(out_err)?;
    let csv_file = fs::File::create(args.out.join("report.csv")).map_err(out_err)?;
    report
        .write_csv(csv_file)
        .map_err(|e| CliError::new("E_OUTPUT", format!("{}: {e}", args.out.display())))?;

    let mut table = format!("{:<28} {:>8} {:>8} {:>8}\n", "kernel", "theta", "rate", "se");
    for c in &report.cells {
        table.push_str(&format!("{:<28} {:>8.3} {:>8.3} {:>8.4}\n", c.kernel, c.theta, c.rate, c.se));
    }
    Ok(table)
}
