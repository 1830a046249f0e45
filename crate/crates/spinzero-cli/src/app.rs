//! Command-line front end.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use spinzero::io::write_atomic;
use spinzero::report::Report;
use spinzero::Error;

use crate::config::{Stencil, SuiteConfig};
use crate::converge::refine_and_extrapolate;
use crate::suites::{self, SuiteError};

/// Environment variable with the worker thread count.
pub const THREADS_VAR: &str = "SPINZERO_THREADS";

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const RUNTIME: i32 = 3;
    pub const UNKNOWN_SUITE: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Parser, Debug)]
#[command(name = "spinzero", version, about = "Verification suites for Dirac zero modes and Sasakian structures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a suite and print one line per check.
    Verify(RunArgs),
    /// Run a suite and emit the JSONL report.
    Report(RunArgs),
    /// Refinement study: error series and observed orders.
    Converge(RunArgs),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// One of: clifford-algebra, sphere-zero-mode, spectral-mu-a,
    /// inequality-chain, sasaki-structure, kform-bounds, surface-case.
    pub suite: String,
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Dimension; repeat for several.
    #[arg(long = "dim", value_name = "N")]
    pub dims: Vec<usize>,
    /// Resolution per axis; repeat for several.
    #[arg(long = "resolution", value_name = "R")]
    pub resolutions: Vec<usize>,
    #[arg(long, value_name = "S")]
    pub seed: Option<u64>,
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Finite-difference stencil (second is a debug control).
    #[arg(long, value_enum)]
    pub stencil: Option<StencilArg>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum StencilArg {
    Second,
    Fourth,
}

fn code_of(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidDimension(_) => exit::CONFIG,
        Error::Io(_) => exit::IO,
        _ => exit::RUNTIME,
    }
}

/// Merge the config file and flags; flags win.
pub fn resolve(args: &RunArgs) -> Result<SuiteConfig, Error> {
    let mut cfg = match &args.config {
        Some(p) => SuiteConfig::load(p)?,
        None => SuiteConfig::default(),
    };
    if let Some(s) = &cfg.suite {
        if s != &args.suite {
            return Err(Error::Config(format!("config is for suite {s}, command names {}", args.suite)));
        }
    }
    if !args.dims.is_empty() {
        cfg.dims = Some(args.dims.clone());
    }
    if !args.resolutions.is_empty() {
        cfg.resolutions = Some(args.resolutions.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    match args.stencil {
        Some(StencilArg::Second) => cfg.stencil = Stencil::Second,
        Some(StencilArg::Fourth) => cfg.stencil = Stencil::Fourth,
        None => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var(THREADS_VAR) else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_VAR}={v} is not a thread count")))?;
    // a second initialization in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn human(report: &Report) -> String {
    let mut out = String::new();
    for c in &report.checks {
        let status = match (&c.unavailable, c.pass) {
            (Some(_), _) => "N/A ",
            (None, true) => "PASS",
            (None, false) => "FAIL",
        };
        let num = |v: Option<f64>| v.map_or("null".to_string(), |x| format!("{x:.6e}"));
        out.push_str(&format!("{status} {} measured={} expected={} [{:?}] ({})", c.name, num(c.measured), num(c.expected), c.provenance, c.basis));
        if let Some(r) = &c.unavailable {
            out.push_str(&format!(" unavailable: {r}"));
        }
        out.push('\n');
    }
    let s = report.summary();
    out.push_str(&format!("{}: {} checks, {} passed, {} failed, {} unavailable\n", report.header.suite, s.total, s.passed, s.failed, s.unavailable));
    out
}

/// Run the parsed command; returns the exit code.
pub fn run(cli: Cli) -> i32 {
    let (args, mode) = match cli.command {
        Command::Verify(a) => (a, 0),
        Command::Report(a) => (a, 1),
        Command::Converge(a) => (a, 2),
    };
    let fail = |code: i32, msg: String| {
        eprintln!("spinzero: {msg}");
        code
    };
    if !suites::exists(&args.suite) {
        return fail(exit::UNKNOWN_SUITE, format!("unknown suite {} (known: {})", args.suite, suites::CATALOG.join(", ")));
    }
    let cfg = match resolve(&args).and_then(|c| init_threads().map(|_| c)) {
        Ok(c) => c,
        Err(e) => return fail(code_of(&e), e.to_string()),
    };

    if mode == 2 {
        let table = match refine_and_extrapolate(&args.suite, &cfg) {
            Ok(t) => t,
            Err(e) => return fail(code_of(&e), e.to_string()),
        };
        let text = table.render();
        if let Some(p) = &cfg.out {
            if let Err(e) = write_atomic(p, text.as_bytes()) {
                return fail(exit::IO, e.to_string());
            }
        }
        print!("{text}");
        return if table.any_flagged() { exit::CHECK_FAILED } else { exit::PASS };
    }

    let report = match suites::run_suite(&args.suite, &cfg) {
        Ok(r) => r,
        Err(SuiteError::Unknown(s)) => return fail(exit::UNKNOWN_SUITE, format!("unknown suite {s}")),
        Err(SuiteError::Run(e)) => return fail(code_of(&e), e.to_string()),
    };
    let jsonl = report.to_jsonl();
    if let Some(p) = &cfg.out {
        if let Err(e) = write_atomic(p, jsonl.as_bytes()) {
            return fail(exit::IO, e.to_string());
        }
    }
    let text = if mode == 1 { if cfg.out.is_some() { String::new() } else { jsonl } } else { human(&report) };
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
        return exit::IO;
    }
    if report.all_pass() {
        exit::PASS
    } else {
        exit::CHECK_FAILED
    }
}
