use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use pcpmkit::diagnostics::{
    default_curve_grid, emit_stepsize_curves, logspace, parse_grid, reference_bound, sweep_lambda,
    SweepSettings,
};
use pcpmkit::generate::{generate_problem, GeneratorKind, GeneratorSpec, LassoCoupling};
use pcpmkit::io::{read_problem, write_problem, MatrixStorage};
use pcpmkit::oracle::trace_pcpm_equivalence;
use pcpmkit::solvers::run;
use pcpmkit::stepsize::{
    general_lambda_limit, spectral_norm_default, BoundKind, BoundReport, DEFAULT_SAFETY,
};
use pcpmkit::{Algorithm, Error, IterateState, SolverConfig};

const THREADS_ENV: &str = "PCPMKIT_THREADS";

/// Exit status for a failed check (as opposed to a usage or I/O error).
const EXIT_BREACH: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "pcpmkit",
    version,
    about = "PCPM solvers, step-size bounds and proximal ALM checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file with one of the PCPM schemes.
    Solve(SolveArgs),
    /// Print the four step-size bounds for a given ‖A‖ as JSON lines.
    Bounds(BoundsArgs),
    /// Write the bound curves over a grid of ‖A‖ as CSV.
    Curves(CurvesArgs),
    /// Run a scheme over a grid of λ and record a verdict per point.
    Sweep(SweepArgs),
    /// Step PCPM and the proximal ALM side by side and report the largest gap.
    VerifyEquivalence(EquivalenceArgs),
    /// Write a seeded random problem file.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, value_parser = parse_algorithm)]
    algo: Algorithm,
    /// `auto` picks 0.99 times the scheme's bound.
    #[arg(long, default_value = "auto")]
    lambda: String,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// gpcpm3 only; defaults to λ.
    #[arg(long)]
    tau: Option<f64>,
    /// gpcpm3 only; defaults to λ.
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
    /// Record objective and primal residual traces.
    #[arg(long)]
    history: bool,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long)]
    norm_a: f64,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Log-spaced grid `lo:hi:count` over ‖A‖; 200 points on [0.1, 100] by default.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    problem: PathBuf,
    #[arg(long, value_parser = parse_algorithm)]
    algo: Algorithm,
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// `lo:hi:count`, as multiples of the scheme's bound unless `--absolute`.
    #[arg(long, default_value = "0.5:1.3:41")]
    grid: String,
    /// Read the grid as raw λ values.
    #[arg(long)]
    absolute: bool,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 20_000)]
    max_iter: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EquivalenceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 200)]
    iters: usize,
    /// Largest tolerated per-iterate deviation.
    #[arg(long, default_value_t = 1e-10)]
    threshold: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Lasso,
    RandomQuadSplit,
    GeneralTwoBlock,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CouplingArg {
    Identity,
    Gaussian,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    l: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// ℓ1 weight for the lasso family.
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, value_enum, default_value = "identity")]
    coupling: CouplingArg,
    #[arg(long)]
    out: PathBuf,
    /// Store matrices in sibling Matrix Market files.
    #[arg(long)]
    mtx: bool,
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Breach(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map_err(|e| Failure::Usage(e.to_string()))
}

fn solve(args: SolveArgs) -> Outcome {
    let problem = read_problem(&args.problem)?;
    let lambda = if args.lambda == "auto" {
        let bound = match (args.algo, args.tau, args.sigma) {
            (Algorithm::Gpcpm3, Some(tau), Some(sigma)) => {
                let b = problem.b_matrix().ok_or_else(|| {
                    Failure::Usage("gpcpm3 needs a general-form problem".to_string())
                })?;
                let na = spectral_norm_default(problem.a().view())?.value;
                let nb = spectral_norm_default(b.view())?.value;
                general_lambda_limit(args.gamma, na * na, nb * nb, Some((tau, sigma)))?
            }
            (Algorithm::Gpcpm3, Some(_), None) | (Algorithm::Gpcpm3, None, Some(_)) => {
                return Err(Failure::Usage(
                    "--lambda auto with gpcpm3 needs both --tau and --sigma, or neither"
                        .to_string(),
                ));
            }
            (algo, _, _) => reference_bound(&problem, algo, args.gamma)?.1,
        };
        DEFAULT_SAFETY * bound
    } else {
        args.lambda.parse::<f64>().map_err(|_| {
            Failure::Usage(format!(
                "--lambda expects `auto` or a number, got `{}`",
                args.lambda
            ))
        })?
    };
    let cfg = match args.algo {
        Algorithm::Gpcpm3 => SolverConfig::gpcpm3(
            lambda,
            args.gamma,
            args.tau.unwrap_or(lambda),
            args.sigma.unwrap_or(lambda),
        )?,
        algo => {
            if args.tau.is_some() || args.sigma.is_some() {
                return Err(Failure::Usage(
                    "--tau and --sigma apply to gpcpm3 only".to_string(),
                ));
            }
            SolverConfig::new(algo, lambda, args.gamma, None, None)?
        }
    };
    let cfg = cfg
        .with_tol(args.tol)?
        .with_max_iter(args.max_iter)?
        .with_history(args.history);
    let report = run(&problem, &cfg, IterateState::zeros(&problem))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut text = to_json(&report)?;
    text.push('\n');
    emit(args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct BoundLine {
    bound: &'static str,
    value: f64,
    strictness: &'static str,
    ratio_to_original: f64,
    norm_a: f64,
    gamma: f64,
}

fn bounds(args: BoundsArgs) -> Outcome {
    let report = BoundReport::new(args.norm_a, args.gamma)?;
    let original = report.get(BoundKind::Original);
    let mut text = String::new();
    for kind in BoundKind::ALL {
        let line = BoundLine {
            bound: kind.as_str(),
            value: report.get(kind),
            strictness: match kind.strictness() {
                pcpmkit::stepsize::Strictness::Strict => "strict",
                pcpmkit::stepsize::Strictness::Nonstrict => "nonstrict",
            },
            ratio_to_original: report.get(kind) / original,
            norm_a: args.norm_a,
            gamma: args.gamma,
        };
        text.push_str(&serde_json::to_string(&line).map_err(|e| Failure::Usage(e.to_string()))?);
        text.push('\n');
    }
    emit(None, &text)
}

fn curves(args: CurvesArgs) -> Outcome {
    let grid = match &args.grid {
        None => default_curve_grid(),
        Some(spec) => {
            // validate the shape, then space logarithmically
            let lin = parse_grid(spec)?;
            logspace(lin[0], lin[lin.len() - 1], lin.len())
        }
    };
    let table = emit_stepsize_curves(&grid, args.gamma)?;
    emit(args.out.as_deref(), &table.to_csv())
}

fn threads_from_env() -> Result<Option<usize>, Failure> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(Failure::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))),
        },
    }
}

fn sweep(args: SweepArgs) -> Outcome {
    let problem = read_problem(&args.problem)?;
    let mut grid = parse_grid(&args.grid)?;
    if !args.absolute {
        let (_, reference) = reference_bound(&problem, args.algo, args.gamma)?;
        grid.iter_mut().for_each(|v| *v *= reference);
    }
    let settings = SweepSettings {
        tol: args.tol,
        max_iter: args.max_iter,
        threads: threads_from_env()?,
    };
    let result = sweep_lambda(&problem, args.algo, args.gamma, &grid, &settings)?;
    let text = result.to_csv();
    emit(args.out.as_deref(), &text)
}

#[derive(Serialize)]
struct EquivalenceLine {
    n: usize,
    m: usize,
    seed: u64,
    lambda: f64,
    iterations: usize,
    max_deviation: f64,
    max_magnitude: f64,
    threshold: f64,
    pass: bool,
}

fn verify_equivalence(args: EquivalenceArgs) -> Outcome {
    let problem = generate_problem(&GeneratorSpec::random_quad_split(args.n, args.m, args.seed))?;
    let trace = trace_pcpm_equivalence(
        &problem,
        args.lambda,
        args.iters,
        IterateState::zeros(&problem),
    )?;
    let pass = trace.max_deviation <= args.threshold;
    let line = EquivalenceLine {
        n: args.n,
        m: args.m,
        seed: args.seed,
        lambda: args.lambda,
        iterations: trace.iterations,
        max_deviation: trace.max_deviation,
        max_magnitude: trace.max_magnitude,
        threshold: args.threshold,
        pass,
    };
    println!(
        "{}",
        serde_json::to_string(&line).map_err(|e| Failure::Usage(e.to_string()))?
    );
    if pass {
        Ok(())
    } else {
        Err(Failure::Breach(format!(
            "max deviation {:e} exceeds threshold {:e}",
            trace.max_deviation, args.threshold
        )))
    }
}

fn generate(args: GenerateArgs) -> Outcome {
    let kind = match args.kind {
        KindArg::Lasso => GeneratorKind::Lasso,
        KindArg::RandomQuadSplit => GeneratorKind::RandomQuadSplit,
        KindArg::GeneralTwoBlock => GeneratorKind::GeneralTwoBlock,
    };
    let spec = GeneratorSpec {
        kind,
        n: args.n,
        m: args.m,
        l: args.l,
        seed: args.seed,
        mu_l1: if kind == GeneratorKind::Lasso {
            args.mu
        } else {
            0.0
        },
        density: args.density,
        scale: args.scale,
        coupling: match args.coupling {
            CouplingArg::Identity => LassoCoupling::Identity,
            CouplingArg::Gaussian => LassoCoupling::Gaussian,
        },
    };
    let problem = generate_problem(&spec)?;
    let storage = if args.mtx {
        MatrixStorage::MatrixMarket
    } else {
        MatrixStorage::Inline
    };
    write_problem(&args.out, &problem, storage)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bounds(a) => bounds(a),
        Command::Curves(a) => curves(a),
        Command::Sweep(a) => sweep(a),
        Command::VerifyEquivalence(a) => verify_equivalence(a),
        Command::Generate(a) => generate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Breach(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(EXIT_BREACH)
        }
    }
}
