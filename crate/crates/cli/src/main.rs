//! `dirlab`: batch front end to the weighted Dirichlet space laboratory.
//!
//! Exit codes: 0 success, 1 self-test failure, 2 configuration error,
//! 3 numerical flag (a divergent or unconverged quantity, an inconclusive
//! verdict).

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

use dirlab_core::acceptance::{run_all, AcceptanceOptions, CriterionResult, Fault};
use dirlab_core::boundary::BoundaryFunction;
use dirlab_core::carleson::{mu_profile, theorem_decomposition, CarlesonDecomposition, DeltaGrid, LambdaChoice, MuProfile};
use dirlab_core::energy::{energy_report, EnergyReport};
use dirlab_core::report::{fmt_f64, to_json_string, Quantity, Status};
use dirlab_core::thresholds::{table_to_csv, threshold_table, Functional, ThresholdRow, Verdict, DEFAULT_DEPTH};

const MIN_N: usize = 1 << 6;
const MAX_N: usize = 1 << 14;

#[derive(Debug, Error)]
enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Parser)]
#[command(name = "dirlab", version, about = "Weighted Dirichlet spaces: energies, Carleson-type functionals, thresholds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
struct Common {
    /// Weight exponent α in [0, 1).
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    alpha: f64,
    /// Angular grid size, a power of two in [64, 16384].
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Seed for randomized corpora.
    #[arg(long, default_value_t = AcceptanceOptions::default().seed)]
    seed: u64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Dirichlet-type energy of the outer function along every route.
    Energy {
        /// Boundary spec, e.g. `poly:1+z/2`, `expcos`, `step:1,4`, `csv:path`.
        #[arg(long)]
        h: String,
        #[command(flatten)]
        common: Common,
    },
    /// Both sides of the boundary-functional estimate.
    Carleson {
        #[arg(long)]
        h: String,
        /// Include the μ_h profile (as CSV output when --format csv).
        #[arg(long)]
        emit_mu: bool,
        /// `mu` (default) or a constant in (0, 2].
        #[arg(long, default_value = "mu")]
        lambda: String,
        #[command(flatten)]
        common: Common,
    },
    /// Convergence verdicts for the `h_β` family.
    Thresholds {
        /// Comma-separated β values.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        betas: Vec<f64>,
        /// N, D, C or all.
        #[arg(long, default_value = "all")]
        quantity: String,
        /// Number of depth doublings.
        #[arg(long, default_value_t = DEFAULT_DEPTH)]
        depth: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run the acceptance suite.
    Selftest {
        #[arg(long)]
        quick: bool,
        /// Deliberately break a formula (`douglas-prefactor`).
        #[arg(long)]
        inject_fault: Option<Fault>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Serialize)]
struct RunConfig {
    alpha: f64,
    h: Option<String>,
    n: usize,
    format: Format,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    config: RunConfig,
    /// Everything that makes the exit code 3.
    flags: Vec<String>,
    report: T,
}

#[derive(Debug, Serialize)]
struct CarlesonOutput {
    decomposition: CarlesonDecomposition,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu_profile: Option<MuProfile>,
}

#[derive(Debug, Serialize)]
struct SelftestOutput {
    quick: bool,
    fault: Option<Fault>,
    passed: bool,
    criteria: Vec<CriterionResult>,
}

fn validate(common: &Common) -> Result<(), CliError> {
    if !(0.0..1.0).contains(&common.alpha) {
        return Err(CliError::Config(format!("--alpha must lie in [0, 1), got {}", common.alpha)));
    }
    if !common.n.is_power_of_two() || !(MIN_N..=MAX_N).contains(&common.n) {
        return Err(CliError::Config(format!(
            "--n must be a power of two in [{MIN_N}, {MAX_N}], got {}",
            common.n
        )));
    }
    Ok(())
}

fn boundary(spec: &str) -> Result<BoundaryFunction, CliError> {
    BoundaryFunction::from_spec(spec).map_err(|e| CliError::Config(e.to_string()))
}

fn config(common: &Common, h: Option<&str>) -> RunConfig {
    RunConfig {
        alpha: common.alpha,
        h: h.map(str::to_string),
        n: common.n,
        format: common.format,
        seed: common.seed,
    }
}

fn flag_quantity(flags: &mut Vec<String>, name: &str, q: &Quantity) {
    match q.status {
        Status::Finite => {}
        Status::Infinite => flags.push(format!("{name} diverges")),
        Status::Unconverged => flags.push(format!("{name} unconverged")),
    }
}

fn csv_text(rows: Vec<[String; 3]>, header: [&str; 3]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(numerical)?;
    for r in rows {
        w.write_record(&r).map_err(numerical)?;
    }
    let bytes = w.into_inner().map_err(numerical)?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

fn quantity_row(name: &str, q: &Quantity) -> [String; 3] {
    let value = if q.value.is_finite() { fmt_f64(q.value) } else { String::new() };
    let status = match q.status {
        Status::Finite => "finite",
        Status::Infinite => "infinite",
        Status::Unconverged => "unconverged",
    };
    [name.to_string(), value, status.to_string()]
}

fn energy_csv(r: &EnergyReport) -> Result<String, CliError> {
    csv_text(
        r.routes.iter().map(|(k, q)| quantity_row(k, q)).collect(),
        ["route", "value", "status"],
    )
}

fn carleson_csv(d: &CarlesonDecomposition) -> Result<String, CliError> {
    let mut rows = vec![
        quantity_row("norm_sq", &d.norm_sq),
        quantity_row("big_n", &d.big_n),
        quantity_row("n_alpha", &d.n_alpha),
        quantity_row("n_tilde", &d.n_tilde),
        quantity_row("rhs", &d.rhs),
        quantity_row("origin_sq", &Quantity::finite(d.origin_sq)),
        quantity_row("d_alpha", &d.d_alpha),
        quantity_row("lhs", &d.lhs),
    ];
    rows.push(match d.ratio {
        Some(r) => quantity_row("ratio", &Quantity::finite(r)),
        None => ["ratio".into(), String::new(), "undefined".into()],
    });
    csv_text(rows, ["quantity", "value", "status"])
}

fn json<T: Serialize>(command: &str, config: RunConfig, flags: &[String], report: &T) -> Result<String, CliError> {
    to_json_string(&Envelope {
        command,
        config,
        flags: flags.to_vec(),
        report,
    })
    .map_err(numerical)
}

fn emit(common: &Common, text: &str) -> Result<(), CliError> {
    match &common.output {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_functionals(s: &str) -> Result<Vec<Functional>, CliError> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(Functional::ALL.to_vec());
    }
    s.split(',')
        .map(|p| p.trim().parse::<Functional>().map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

fn parse_lambda(s: &str) -> Result<LambdaChoice, CliError> {
    if s == "mu" {
        return Ok(LambdaChoice::default());
    }
    let c: f64 = s
        .parse()
        .map_err(|_| CliError::Config(format!("--lambda must be `mu` or a number, got `{s}`")))?;
    if !(c > 0.0 && c <= 2.0) {
        return Err(CliError::Config(format!("--lambda constant must lie in (0, 2], got {c}")));
    }
    Ok(LambdaChoice::Constant(c))
}

/// Returns the exit code of a run that produced output.
fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Energy { h, common } => {
            validate(&common)?;
            let f = boundary(&h)?;
            let report = energy_report(&f, common.alpha, common.n).map_err(numerical)?;
            let mut flags = Vec::new();
            for (name, q) in &report.routes {
                flag_quantity(&mut flags, name, q);
            }
            let text = match common.format {
                Format::Json => json("energy", config(&common, Some(&h)), &flags, &report)?,
                Format::Csv => energy_csv(&report)?,
            };
            emit(&common, &text)?;
            Ok(if flags.is_empty() { 0 } else { 3 })
        }
        Command::Carleson {
            h,
            emit_mu,
            lambda,
            common,
        } => {
            validate(&common)?;
            let f = boundary(&h)?;
            let choice = parse_lambda(&lambda)?;
            let decomposition = theorem_decomposition(&f, common.alpha, common.n, &choice).map_err(numerical)?;
            let mut flags = Vec::new();
            flag_quantity(&mut flags, "lhs", &decomposition.lhs);
            flag_quantity(&mut flags, "rhs", &decomposition.rhs);
            if !decomposition.finiteness_agree {
                flags.push("lhs and rhs disagree on finiteness".into());
            }
            let profile = if emit_mu {
                Some(mu_profile(&f, common.n, &DeltaGrid::default()).map_err(numerical)?)
            } else {
                None
            };
            let text = match (common.format, &profile) {
                (Format::Json, _) => json(
                    "carleson",
                    config(&common, Some(&h)),
                    &flags,
                    &CarlesonOutput {
                        decomposition,
                        mu_profile: profile.clone(),
                    },
                )?,
                (Format::Csv, Some(p)) => p.to_csv().map_err(numerical)?,
                (Format::Csv, None) => carleson_csv(&decomposition)?,
            };
            emit(&common, &text)?;
            Ok(if flags.is_empty() { 0 } else { 3 })
        }
        Command::Thresholds {
            betas,
            quantity,
            depth,
            common,
        } => {
            validate(&common)?;
            let functionals = parse_functionals(&quantity)?;
            let rows: Vec<ThresholdRow> = threshold_table(common.alpha, &betas, &functionals, depth)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let mut flags = Vec::new();
            for r in &rows {
                if r.verdict == Verdict::Inconclusive {
                    flags.push(format!("{} at beta = {}: inconclusive", r.quantity, r.beta));
                } else if !r.agree && r.within_margin {
                    flags.push(format!("{} at beta = {}: verdict contradicts the threshold", r.quantity, r.beta));
                }
            }
            let text = match common.format {
                Format::Json => json("thresholds", config(&common, None), &flags, &rows)?,
                Format::Csv => table_to_csv(&rows).map_err(numerical)?,
            };
            emit(&common, &text)?;
            Ok(if flags.is_empty() { 0 } else { 3 })
        }
        Command::Selftest {
            quick,
            inject_fault,
            common,
        } => {
            let opts = AcceptanceOptions {
                quick,
                fault: inject_fault,
                seed: common.seed,
            };
            let criteria = run_all(&opts);
            for c in &criteria {
                eprintln!("{c}");
            }
            let passed = criteria.iter().all(|c| c.passed);
            let out = SelftestOutput {
                quick,
                fault: inject_fault,
                passed,
                criteria,
            };
            let text = match common.format {
                Format::Json => json("selftest", config(&common, None), &[], &out)?,
                Format::Csv => csv_text(
                    out.criteria
                        .iter()
                        .map(|c| [c.id.to_string(), c.name.to_string(), if c.passed { "PASS" } else { "FAIL" }.into()])
                        .collect(),
                    ["id", "criterion", "result"],
                )?,
            };
            emit(&common, &text)?;
            Ok(if passed { 0 } else { 1 })
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("DIRLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("DIRLAB_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // --help and --version are not errors
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match init_threads().and_then(|_| run(cli)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("dirlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
