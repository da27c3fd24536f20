use std::path::PathBuf;
use std::process::ExitCode;

use bianchi_core::commands::{exit_code, run_command};
use bianchi_core::report::{RunConfig, COMMANDS};
use bianchi_core::Error;
use clap::Parser;

/// Verification suites for sets of algebraic curvature operators.
///
/// Exit status: 0 PASS, 2 FAIL, 64 usage error, 70 numeric failure, 74 I/O error.
#[derive(Parser, Debug)]
#[command(name = "bianchi", version, after_help = commands_help())]
struct Cli {
    /// Command to run; overrides the command in --config.
    command: Option<String>,
    /// JSON or TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report.json and data files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    /// Tolerance override, KEY=VALUE; repeatable.
    #[arg(long = "tol", value_name = "KEY=VALUE")]
    tol: Vec<String>,
    /// Set name: ball, halfspace-scal, omega-ac, omega-tilde-ac, omega-f:<function>, psd-cone.
    #[arg(long)]
    set: Option<String>,
    /// Eigenvalue function for --set omega-f: sum, sphere, f-ac, neg-sphere.
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Star-shape center is lambda_star·I.
    #[arg(long = "lambda-star")]
    lambda_star: Option<f64>,
    /// Grid size G for simulate-rd.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// End time for simulate-rd, horizon for the ODE commands.
    #[arg(long = "T", value_name = "T")]
    t_end: Option<f64>,
    /// Print the report to stdout even when --out is given.
    #[arg(long)]
    print: bool,
}

fn commands_help() -> String {
    format!("Commands: {}", COMMANDS.join(", "))
}

fn build_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(c) = &cli.command {
        cfg.command = c.clone();
    }
    if cfg.command.is_empty() {
        return Err(Error::Config(format!("no command given; {}", commands_help())));
    }
    macro_rules! set {
        ($($flag:ident => $field:expr),* $(,)?) => {
            $(if let Some(v) = cli.$flag.clone() { $field = v.into(); })*
        };
    }
    set!(seed => cfg.seed, samples => cfg.samples, set => cfg.set, a => cfg.a, c => cfg.c, grid => cfg.rd.grid);
    set!(function => cfg.function, b => cfg.b, lambda_star => cfg.lambda_star, dt => cfg.rd.dt, out => cfg.out);
    if let Some(t) = cli.t_end {
        cfg.rd.t_end = t;
        cfg.horizon = t;
    }
    for t in &cli.tol {
        cfg.tolerances.set(t)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    let result = build_config(&cli).and_then(|cfg| run_command(&cfg));
    match result {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if report.config.out.is_none() || cli.print {
                print!("{}", report.to_json());
            }
            let code = report.status.exit_code();
            eprintln!("{}: {:?} (exit {code})", report.command, report.status);
            ExitCode::from(code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
