//! Command-line front end for `hqe-core`.
//!
//! Every subcommand is a plain function writing to caller-supplied streams,
//! so the binary and the tests share one code path through [`run`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod format;
pub mod generate;
pub mod verify;

pub const EXIT_OK: i32 = 0;
/// I/O or numerical failure.
pub const EXIT_FAILURE: i32 = 1;
/// Invalid input, including matrices outside the admissible class.
pub const EXIT_INVALID: i32 = 2;
/// `c` below the computed threshold `c̃`.
pub const EXIT_C_TOO_SMALL: i32 = 3;
/// A verification check failed.
pub const EXIT_VIOLATION: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hqe", version, about = "Subsolutions for exterior problems of Hessian quotient equations")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Table of ξ̄_j, ξ_j and m_{k,l} for a spectrum.
    Xi(XiArgs),
    /// The profile ψ(r, β) by the implicit equation and by the ODE, as CSV.
    Psi(ProfileArgs),
    /// μ_R(β) = ∫_R^∞ τ(ψ(τ, β) − 1) dτ, as CSV.
    Mu(ProfileArgs),
    /// Sampled check that Φ is a subsolution; JSON report.
    Subsolution(SubsolutionArgs),
    /// Envelope constants η, c̄, r̄, r̂, β̂, c̃ for a problem file; JSON.
    Boundary(ProblemArgs),
    /// Full pipeline for a problem file; JSON report, optional CSV/.dat files.
    Solve(SolveArgs),
    /// Randomized invariant batteries; pass/fail matrix.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct XiArgs {
    /// Spectrum, comma separated; entries may be fractions like 3/2 with --exact.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub a: Vec<String>,
    #[arg(long, requires = "l")]
    pub k: Option<usize>,
    #[arg(long, requires = "k")]
    pub l: Option<usize>,
    /// Exact rational arithmetic; values printed as fractions.
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub l: usize,
    /// Spectrum of A; ξ̄_k and ξ_l are computed from it.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["xi_upper", "xi_lower"])]
    pub a: Option<Vec<f64>>,
    /// ξ̄_k given directly.
    #[arg(long, requires = "xi_lower")]
    pub xi_upper: Option<f64>,
    /// ξ_l given directly.
    #[arg(long, requires = "xi_upper")]
    pub xi_lower: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub r_min: f64,
    #[arg(long, default_value_t = 1e3)]
    pub r_max: f64,
    /// Log-spaced grid points.
    #[arg(long, default_value_t = 61)]
    pub points: usize,
    /// Exit 2 unless m_{k,l} > 2.
    #[arg(long)]
    pub require_admissible: bool,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SubsolutionArgs {
    /// Eigenvalues of A.
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<f64>,
    /// Rescale the spectrum so that σ_k = σ_l.
    #[arg(long)]
    pub normalize: bool,
    /// Conjugate diag(a) by a random rotation drawn from the seed.
    #[arg(long)]
    pub rotate: bool,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub l: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1e3)]
    pub r_max: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Problem file (JSON).
    #[arg(long)]
    pub problem: PathBuf,
    /// Override the number of boundary mesh points.
    #[arg(long)]
    pub boundary_points: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Directory for report.json, decay.csv and decay.dat.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples for the ordering and identity checks.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    /// Directions per decay shell.
    #[arg(long, default_value_t = 2000)]
    pub shell_samples: usize,
    #[arg(long, default_value_t = 10_000)]
    pub subsolution_samples: usize,
    /// Largest r_A sampled by the ordering check.
    #[arg(long, default_value_t = 1e3)]
    pub r_max: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Run one battery only (see the list printed by a default run).
    #[arg(long, alias = "lemma")]
    pub battery: Option<String>,
    /// Fix the dimension instead of drawing it per trial.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturb every checked quantity so that the batteries must fail.
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        builder = builder.num_threads(t);
    }
    let pool = match builder.build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start thread pool: {e}");
            return EXIT_FAILURE;
        }
    };
    let (code, o, e) = pool.install(|| {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = dispatch(&cli.command, &mut o, &mut e);
        (code, o, e)
    });
    let _ = out.write_all(&o);
    let _ = err.write_all(&e);
    code
}

fn dispatch(command: &Command, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match command {
        Command::Xi(a) => commands::xi(a, out),
        Command::Psi(a) => commands::psi(a, out, err),
        Command::Mu(a) => commands::mu(a, out),
        Command::Subsolution(a) => commands::subsolution(a, out),
        Command::Boundary(a) => commands::boundary(a, out),
        Command::Solve(a) => commands::solve(a, out, err),
        Command::Verify(a) => verify::run(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }

    pub fn io(e: impl std::fmt::Display) -> Self {
        Self {
            code: EXIT_FAILURE,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self::io(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Self::io(e)
    }
}

pub type CmdResult = Result<i32, Failure>;
