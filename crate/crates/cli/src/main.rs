use clap::{Parser, Subcommand, ValueEnum};
use freetrans_cli::commands::{self, Confluent, FbdiagOp, PdeCase};
use freetrans_cli::config::DEFAULT_OUTPUT_DIR;
use freetrans_cli::{configure_threads, parse_config, run_experiment, CliError, CliResult};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Numerical experiments for two-phase free transmission problems.
///
/// Exit codes: 0 pass, 1 assertion failure, 2 configuration error, 3 numeric
/// error. FREETRANS_THREADS overrides the worker thread count.
#[derive(Debug, Parser)]
#[command(name = "freetrans", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Confluent hypergeometric functions.
    Specfun {
        #[command(subcommand)]
        op: SpecfunOp,
    },
    /// The self-similar two-phase solution.
    Selfsim {
        #[command(subcommand)]
        op: SelfsimOp,
    },
    /// Finite-difference solvers.
    Pde {
        #[command(subcommand)]
        op: PdeOp,
    },
    /// Free-boundary diagnostics on a field CSV.
    Fbdiag {
        #[command(subcommand)]
        op: FbdiagCmd,
    },
    /// Barrier subsolution certificate.
    Barrier {
        #[command(subcommand)]
        op: BarrierOp,
    },
    /// Hodograph transform and residual checks.
    Hodograph {
        #[command(subcommand)]
        op: HodographOp,
    },
    /// Run an experiment recipe from a `key = value` file.
    Run { config: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FnArg {
    M,
    U,
}

impl From<FnArg> for Confluent {
    fn from(f: FnArg) -> Self {
        match f {
            FnArg::M => Confluent::M,
            FnArg::U => Confluent::U,
        }
    }
}

#[derive(Debug, Subcommand)]
enum SpecfunOp {
    /// Evaluate M(a, b, z) or U(a, b, z).
    Eval {
        #[arg(long = "fn", value_enum, ignore_case = true)]
        function: FnArg,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: f64,
        #[arg(long, allow_hyphen_values = true)]
        z: f64,
    },
    /// Positive zero in s of M(-alpha/2, n/2, s²/4) or U(-alpha/2, n/2, eps s²/4).
    Zero {
        #[arg(long = "fn", value_enum, ignore_case = true)]
        function: FnArg,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        eps: f64,
    },
}

#[derive(Debug, Subcommand)]
enum SelfsimOp {
    /// Solve for the exponent alpha and the matching point s_eps.
    Match {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
    },
    /// Profile table as CSV `s,f,fprime,branch`.
    Profile {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        smax: f64,
        #[arg(long)]
        ds: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Both branches over [0, 1.5 s_eps] as CSV plus a gnuplot script.
    Figure2 {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 601)]
        samples: usize,
        #[arg(long, default_value = DEFAULT_OUTPUT_DIR)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CaseArg {
    Linear,
    Nonlinear,
}

#[derive(Debug, Subcommand)]
enum PdeOp {
    /// Solve from a flat `key = value` file; writes solution.csv and runlog.jsonl.
    Solve {
        #[arg(long, value_enum)]
        case: CaseArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = DEFAULT_OUTPUT_DIR)]
        out_dir: PathBuf,
    },
}

#[derive(Debug, clap::Args)]
struct FieldArgs {
    /// Field CSV with header x1,...,xn,t,value.
    #[arg(long)]
    field: PathBuf,
    /// Window as `x1,...,xn,t,radius`.
    #[arg(long, allow_hyphen_values = true)]
    window: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum FbdiagCmd {
    /// Zero set as a graph x_n = g(x', t).
    Extract(FieldArgs),
    /// Deviation from the plane through the window center with normal --nu.
    Flatness {
        #[command(flatten)]
        args: FieldArgs,
        #[arg(long, allow_hyphen_values = true)]
        nu: String,
    },
    /// Best-plane deviations on shrinking radii.
    Improve {
        #[command(flatten)]
        args: FieldArgs,
        #[arg(long, default_value_t = 0.5)]
        ratio: f64,
        #[arg(long, default_value_t = 5)]
        count: usize,
    },
    /// Oscillation of u - x_n on cylinders shrinking by 3.
    Harnack {
        #[command(flatten)]
        args: FieldArgs,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
    },
    /// Hölder fit of the free-boundary normal.
    Normals(FieldArgs),
}

#[derive(Debug, Subcommand)]
enum BarrierOp {
    /// Certify the barrier as a strict subsolution.
    Check {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        a_plus: f64,
        #[arg(long)]
        a_minus: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        c0: f64,
        #[arg(long, default_value_t = 24)]
        grid: usize,
    },
}

#[derive(Debug, Subcommand)]
enum HodographOp {
    /// Transform a monotone field to the hodograph variables; prints the h-field CSV.
    Transform {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        lambda: f64,
        /// Window as `x1,...,xn,t,radius`; defaults to the largest centered one.
        #[arg(long, allow_hyphen_values = true)]
        window: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Residuals of the transformed equations on an h-field CSV.
    Verify {
        #[arg(long)]
        patch: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        a_plus: f64,
        #[arg(long, default_value_t = 1.0)]
        a_minus: f64,
    },
}

fn emit(text: String, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) => freetrans_cli::output::write_atomic(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_fbdiag(args: &FieldArgs, op: FbdiagOp) -> CliResult<()> {
    let field = commands::read_field(&args.field)?;
    let window = commands::parse_window(&args.window, field.dim())?;
    emit(commands::fbdiag(&op, &field, &window)?, args.out.as_deref())
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Specfun { op } => match op {
            SpecfunOp::Eval { function, a, b, z } => emit(commands::specfun_eval(function.into(), a, b, z)?, None),
            SpecfunOp::Zero { function, alpha, n, eps } => {
                emit(commands::specfun_zero(function.into(), alpha, n, eps)?, None)
            }
        },
        Command::Selfsim { op } => match op {
            SelfsimOp::Match { n, eps, tol } => emit(commands::selfsim_match(n, eps, tol)?, None),
            SelfsimOp::Profile { n, eps, smax, ds, out } => emit(commands::selfsim_profile(n, eps, smax, ds)?, out.as_deref()),
            SelfsimOp::Figure2 { n, eps, samples, out_dir } => emit(commands::selfsim_figure2(n, eps, samples, &out_dir)?, None),
        },
        Command::Pde { op: PdeOp::Solve { case, config, out_dir } } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", config.display())))?;
            let case = match case {
                CaseArg::Linear => PdeCase::Linear,
                CaseArg::Nonlinear => PdeCase::Nonlinear,
            };
            emit(commands::pde_solve(case, &text, &out_dir)?, None)
        }
        Command::Fbdiag { op } => match op {
            FbdiagCmd::Extract(args) => run_fbdiag(&args, FbdiagOp::Extract),
            FbdiagCmd::Flatness { args, nu } => {
                let nu = commands::parse_list(&nu, "--nu")?;
                run_fbdiag(&args, FbdiagOp::Flatness { nu })
            }
            FbdiagCmd::Improve { args, ratio, count } => run_fbdiag(&args, FbdiagOp::Improve { ratio, count }),
            FbdiagCmd::Harnack { args, levels, delta } => run_fbdiag(&args, FbdiagOp::Harnack { levels, delta }),
            FbdiagCmd::Normals(args) => run_fbdiag(&args, FbdiagOp::Normals),
        },
        Command::Barrier { op: BarrierOp::Check { n, a_plus, a_minus, delta, c0, grid } } => {
            let (text, check) = commands::barrier_check(n, a_plus, a_minus, delta, c0, grid)?;
            emit(text, None)?;
            if check.passed {
                Ok(())
            } else {
                Err(CliError::Assertion(check.detail))
            }
        }
        Command::Hodograph { op } => match op {
            HodographOp::Transform { field, lambda, window, out } => {
                let field = commands::read_field(&field)?;
                let window = match window {
                    Some(w) => commands::parse_window(&w, field.dim())?,
                    None => commands::default_window(&field)?,
                };
                emit(commands::hodograph_transform(&field, &window, lambda)?, out.as_deref())
            }
            HodographOp::Verify { patch, a_plus, a_minus } => {
                let h = commands::read_field(&patch)?;
                emit(commands::hodograph_verify(&h, a_plus, a_minus)?, None)
            }
        },
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", config.display())))?;
            let record = run_experiment(&parse_config(&text)?)?;
            print!("{}", record.summary());
            let failed: Vec<&str> = record.assertions.iter().filter(|a| !a.passed).map(|a| a.name.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Assertion(failed.join(", ")))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|()| dispatch(cli));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
