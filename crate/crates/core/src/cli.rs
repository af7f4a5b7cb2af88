//! Command-line front end.
//!
//! Exit status: 0 when the solver reaches a definitive answer (optimal or an
//! infeasibility certificate), `10 + code` for the iteration limit, time
//! limit and numerical error, 64 for bad flags, 65 for unreadable problem
//! files and 74 when the result cannot be written.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{CommandFactory, Parser, ValueEnum};

use crate::engine::{solve, Method, SolverOptions};
use crate::format::{parse_problem, ResultFile};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_IO: i32 = 74;
pub const THREADS_ENV: &str = "CONIC_PDHG_THREADS";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Average,
    Halpern,
}

#[derive(Debug, Parser)]
#[command(name = "conic-pdhg", version, about = "Restarted PDHG solver for conic programs")]
struct Args {
    /// Problem file (JSON).
    #[arg(long)]
    input: PathBuf,
    /// Result file (JSON). Printed to standard output when omitted and verbose is 0.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-6)]
    rel_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    abs_tol: f64,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 1000.0)]
    time_limit: f64,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum, default_value = "halpern")]
    method: MethodArg,
    #[arg(long)]
    no_preconditioner: bool,
    #[arg(long)]
    no_adaptive_restart: bool,
    /// Use the weighted KKT error instead of the normalized gap for restarts.
    #[arg(long)]
    kkt_restart: bool,
    #[arg(long, default_value_t = 2000)]
    kkt_restart_freq: usize,
    #[arg(long, default_value_t = 2000)]
    gap_restart_freq: usize,
    #[arg(long, default_value_t = 2000)]
    print_freq: usize,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(0..=2))]
    verbose: u8,
    #[arg(long)]
    logfile: Option<PathBuf>,
    /// Reserved; the solver is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Leave the wall-clock time out of the result file.
    #[arg(long)]
    reproducible: bool,
}

impl Args {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            time_limit: self.time_limit,
            max_iter: self.max_iter,
            print_freq: self.print_freq,
            method: match self.method {
                MethodArg::Average => Method::Average,
                MethodArg::Halpern => Method::Halpern,
            },
            use_adaptive_restart: !self.no_adaptive_restart,
            use_kkt_restart: self.kkt_restart,
            kkt_restart_freq: self.kkt_restart_freq,
            use_duality_gap_restart: !self.kkt_restart,
            duality_gap_restart_freq: self.gap_restart_freq,
            verbose: self.verbose,
            logfile: self.logfile.clone(),
            use_preconditioner: !self.no_preconditioner,
            ..SolverOptions::default()
        }
    }
}

/// Caps the global worker pool at `CONIC_PDHG_THREADS` when it is set.
pub fn configure_threads() {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return;
    };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size worker pool: {e}");
            }
        }
        _ => log::warn!("ignoring {THREADS_ENV}={value:?}"),
    }
}

pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return 0;
            }
            let text = e.render().to_string();
            if !text.contains("Usage:") {
                eprintln!("\n{}", Args::command().render_usage());
            }
            return EXIT_USAGE;
        }
    };
    if let Some(seed) = args.seed {
        log::debug!("seed {seed} accepted but unused");
    }
    let options = args.options();
    if let Err(e) = options.validate() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let problem = match parse_problem(&args.input) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {}: {e}", args.input.display());
            return EXIT_DATA;
        }
    };
    let result = match solve(&problem, &options) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_DATA;
        }
    };
    let text = ResultFile::new(&result, &options, !args.reproducible).to_json();
    match &args.output {
        Some(path) => {
            if let Err(e) = std::fs::write(path, text) {
                eprintln!("error: {}: {e}", path.display());
                return EXIT_IO;
            }
        }
        None if args.verbose == 0 => print!("{text}"),
        None => {}
    }
    if result.exit.is_definitive() {
        0
    } else {
        10 + result.exit.code()
    }
}
