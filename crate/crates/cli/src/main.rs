use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ftclust::instance::{
    gap_family_ftfl, gap_family_ftmed, generate_instance, instance_to_string, load_instance, GenParams, Geometry,
    Instance, ProblemKind,
};
use ftclust::verify::{failed_load, verify_instance, VerifyOptions, VerifyReport};
use ftclust::{Arith, Error, Rational};

mod bench;
mod solve;

use solve::Method;

/// Fault-tolerant k-median and facility location solvers.
#[derive(Parser, Debug)]
#[command(name = "ftclust", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random instance (or the gap family) as JSON.
    Gen(GenArgs),
    /// Solve an instance and print a JSON report.
    Solve(SolveArgs),
    /// Run every invariant check on an instance.
    Verify(VerifyArgs),
    /// Solve every instance in a directory and emit CSV.
    Bench(BenchArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Ftmed,
    Ftfl,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum GeometryArg {
    Line,
    Plane,
    Hst,
    Explicit,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ArithArg {
    Rational,
    Float,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "line")]
    geometry: GeometryArg,
    /// Emit the integrality-gap family of size `n` (line geometry only).
    #[arg(long)]
    gap_family: bool,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    /// Facility budget (ftmed); defaults to min(n, 3).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1)]
    rmin: usize,
    #[arg(long, default_value_t = 1)]
    rmax: usize,
    #[arg(long, default_value_t = 0)]
    cost_min: u32,
    #[arg(long, default_value_t = 10)]
    cost_max: u32,
    #[arg(long, default_value_t = 3)]
    max_weight: u32,
    #[arg(long, default_value_t = 20)]
    coord_max: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub(crate) struct SolveOpts {
    /// Defaults to lp-round for ftmed and ftfl-fixed for ftfl.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Threshold for ftfl-fixed, as a decimal or `p/q`.
    #[arg(long, default_value = "1/4")]
    alpha: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides FTCLUST_ARITH; default is rational when the metric allows it.
    #[arg(long, value_enum)]
    arith: Option<ArithArg>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    instance: PathBuf,
    #[command(flatten)]
    opts: SolveOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    instance: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50_000)]
    samples: usize,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, value_enum)]
    arith: Option<ArithArg>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    dir: PathBuf,
    /// Comma-separated; methods that do not fit an instance are skipped.
    #[arg(long, value_delimiter = ',', default_value = "lp-round,brute,ftfl-fixed")]
    methods: Vec<Method>,
    #[arg(long, default_value = "1/4")]
    alpha: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum)]
    arith: Option<ArithArg>,
    /// Skip brute-force ratios above this many facilities.
    #[arg(long, default_value_t = 16)]
    brute_limit: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes with fixed exit codes.
#[derive(Debug)]
pub(crate) enum CliError {
    Usage(String),
    Failed(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(Error::Infeasible(_)) => 3,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Failed(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

/// Flag first, then FTCLUST_ARITH, then rational unless the metric needs floats.
pub(crate) fn choose_arith(flag: Option<ArithArg>, inst: &Instance) -> Result<Arith, CliError> {
    let picked = match flag {
        Some(ArithArg::Rational) => Some(Arith::Rational),
        Some(ArithArg::Float) => Some(Arith::Float),
        None => match std::env::var("FTCLUST_ARITH") {
            Ok(v) if !v.trim().is_empty() => Some(
                v.parse::<Arith>()
                    .map_err(|e| CliError::Usage(format!("FTCLUST_ARITH: {e}")))?,
            ),
            _ => None,
        },
    };
    Ok(picked.unwrap_or(if inst.metric().is_exact() {
        Arith::Rational
    } else {
        Arith::Float
    }))
}

pub(crate) fn parse_alpha(text: &str) -> Result<Rational, CliError> {
    let a = ftclust::scalar::parse_rational(text).map_err(|e| CliError::Usage(format!("--alpha: {e}")))?;
    if a <= 0 || a >= 1 {
        return Err(CliError::Usage(format!("--alpha {text} must lie strictly between 0 and 1")));
    }
    Ok(a)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_gen(a: &GenArgs) -> Result<(), CliError> {
    let kind = match a.kind {
        KindArg::Ftmed => ProblemKind::Ftmed,
        KindArg::Ftfl => ProblemKind::Ftfl,
    };
    let inst = if a.gap_family {
        if a.geometry != GeometryArg::Line {
            return Err(CliError::Usage("--gap-family uses the line geometry".into()));
        }
        match kind {
            ProblemKind::Ftfl => Instance::Ftfl(gap_family_ftfl(a.n)?),
            ProblemKind::Ftmed => Instance::Ftmed(gap_family_ftmed(a.n)?),
        }
    } else {
        let geometry = match a.geometry {
            GeometryArg::Line => Geometry::Line,
            GeometryArg::Plane => Geometry::Plane,
            GeometryArg::Hst => Geometry::Hst,
            GeometryArg::Explicit => Geometry::Explicit,
        };
        let mut p = GenParams::new(kind, geometry, a.n, a.m, a.seed)
            .requirements(a.rmin, a.rmax)
            .costs(a.cost_min, a.cost_max);
        if let Some(k) = a.k {
            p = p.k(k);
        }
        p.max_weight = a.max_weight;
        p.coord_max = a.coord_max;
        generate_instance(&p).map_err(|e| match e {
            Error::InvalidInput(m) => CliError::Usage(m),
            other => CliError::Core(other),
        })?
    };
    write_output(a.out.as_deref(), &instance_to_string(&inst))?;
    eprintln!(
        "generated {} instance: {} facilities, {} clients",
        inst.kind(),
        inst.metric().facility_count(),
        inst.metric().client_count()
    );
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Result<(), CliError> {
    let inst = load_instance(&a.instance)?;
    let report = solve::solve(&inst, &a.opts)?;
    let mut text = serde_json::to_string_pretty(&report.json).expect("reports serialize");
    text.push('\n');
    write_output(a.out.as_deref(), &text)?;
    eprintln!("{}", report.summary);
    Ok(())
}

fn print_verify(report: &VerifyReport) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
    text.push('\n');
    print!("{text}");
    for c in &report.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        match &c.detail {
            Some(d) => eprintln!("{mark} {}: {d}", c.name),
            None => eprintln!("{mark} {}", c.name),
        }
    }
    if report.passed {
        Ok(())
    } else {
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        Err(CliError::Failed(format!("{failed} check(s) failed")))
    }
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), CliError> {
    let inst = match load_instance(&a.instance) {
        Ok(i) => i,
        Err(e @ (Error::Schema { .. } | Error::Parse(_) | Error::Json(_))) => return print_verify(&failed_load(&e)),
        Err(e) => return Err(e.into()),
    };
    let opts = VerifyOptions {
        seed: a.seed,
        samples: a.samples,
        trials: a.trials,
        ..VerifyOptions::default()
    };
    let report = match choose_arith(a.arith, &inst)? {
        Arith::Rational => verify_instance::<Rational>(&inst, &opts),
        Arith::Float => verify_instance::<f64>(&inst, &opts),
    };
    print_verify(&report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Bench(a) => bench::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
