//! Command line experiment runner for the `gradalign` solvers.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure or a run that
//! did not converge.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod runner;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{
    cmd_solve, cmd_sweep, cmd_table1, cmd_verify, verify_config, SweepAxis, TABLE_METHODS,
};
use crate::config::{ExperimentConfig, Family};
use crate::error::{Result, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "gradalign",
    version,
    about = "Gradient methods with alignment: experiments and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run methods on a problem and write one trace per run.
    Solve(RunArgs),
    /// Mean iteration counts over a (kappa, n) grid of random problems.
    Table1(Table1Args),
    /// Mean iteration counts across theta or (d1, d2).
    Sweep(SweepArgs),
    /// Check the asymptotic theorems on a diagonal problem.
    Verify(VerifyArgs),
}

/// Flags shared by the experiment subcommands. Each overrides the value from
/// `--config` when given.
#[derive(Debug, Default, Args)]
pub struct RunArgs {
    /// JSON file with experiment settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub problem: Option<Family>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Perturbation size for `--problem perturbed`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Matrix Market file for `--problem mm`.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Rotate random matrices away from diagonal form.
    #[arg(long)]
    pub rotate: bool,
    /// Comma separated method names, e.g. `SDC,MGC,CG`.
    #[arg(long, value_delimiter = ',')]
    pub method: Option<Vec<String>>,
    #[arg(long)]
    pub d1: Option<usize>,
    #[arg(long)]
    pub d2: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Fixed steplength for CONST.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Relative residual tolerance [default: 1e-6].
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Base seed; repetition r uses seed + r.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// GMRES restart length.
    #[arg(long)]
    pub restart_l: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also run the theorem checks.
    #[arg(long)]
    pub verify_theorems: bool,
    /// Worker threads [default: all cores].
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Table1Args {
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma separated condition numbers [default: 1e2,1e3,1e4,1e5].
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
    /// Comma separated sizes [default: 200,400,600,800,1000].
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, value_enum, default_value = "theta")]
    pub axis: SweepAxis,
    /// Largest d1 and d2 of the grid sweep.
    #[arg(long, default_value_t = 12)]
    pub max_d: usize,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Number of eigenvalues, log-spaced over [1, kappa].
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    #[arg(long, default_value_t = 10.0)]
    pub kappa: f64,
    /// Minimal gradient iterations.
    #[arg(long, default_value_t = 300)]
    pub mg_iters: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Directory for verdict.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the verdict as JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

impl RunArgs {
    /// Layers the config file and then the flags over `defaults`.
    pub fn resolve(&self, defaults: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(path) => defaults.merged_with_file(path)?,
            None => defaults,
        };
        let p = &mut c.problem;
        if let Some(v) = self.problem {
            p.family = v;
        }
        if let Some(v) = self.n {
            p.n = v;
        }
        if let Some(v) = self.kappa {
            p.kappa = v;
        }
        if let Some(v) = self.delta {
            p.delta = v;
        }
        if let Some(v) = &self.path {
            p.path = Some(v.clone());
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        p.rotate |= self.rotate;
        if let Some(v) = &self.method {
            c.methods = v.clone();
        }
        let r = &mut c.params;
        r.d1 = self.d1.or(r.d1);
        r.d2 = self.d2.or(r.d2);
        r.theta = self.theta.or(r.theta);
        r.alpha = self.alpha.or(r.alpha);
        if let Some(v) = self.tol {
            c.tol = v;
        }
        c.max_iters = self.max_iters.or(c.max_iters);
        if let Some(v) = self.reps {
            c.repetitions = v;
        }
        if let Some(v) = self.restart_l {
            c.restart_l = v;
        }
        if let Some(v) = &self.out {
            c.output_dir = Some(v.clone());
        }
        c.verify_theorems |= self.verify_theorems;
        c.jobs = self.jobs.or(c.jobs);
        Ok(c)
    }
}

fn table_defaults() -> ExperimentConfig {
    ExperimentConfig {
        methods: TABLE_METHODS.iter().map(|m| m.to_string()).collect(),
        repetitions: 10,
        ..Default::default()
    }
}

fn sweep_defaults(axis: SweepAxis) -> ExperimentConfig {
    ExperimentConfig {
        methods: match axis {
            SweepAxis::Theta => vec!["AOA".into()],
            SweepAxis::Grid => vec!["SDC".into(), "AOA".into(), "MGC".into()],
        },
        repetitions: 10,
        ..Default::default()
    }
}

fn status_code(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}

/// Runs the default theorem checks when `--verify-theorems` was given.
fn maybe_verify(cfg: &ExperimentConfig) -> Result<bool> {
    if !cfg.verify_theorems {
        return Ok(true);
    }
    let report = cmd_verify(&Default::default(), cfg.output_dir.as_deref())?;
    print!("{}", report.table());
    Ok(report.all_pass())
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.resolve(ExperimentConfig::default())?;
            let report = cmd_solve(&cfg)?;
            print!("{}", report.to_csv());
            let verified = maybe_verify(&cfg)?;
            Ok(status_code(report.all_converged() && verified))
        }
        Command::Table1(args) => {
            let mut cfg = args.run.resolve(table_defaults())?;
            if let Some(k) = args.kappas {
                cfg.kappas = k;
            }
            if let Some(s) = args.sizes {
                cfg.sizes = s;
            }
            let report = cmd_table1(&cfg)?;
            print!("{}", report.to_csv());
            let verified = maybe_verify(&cfg)?;
            Ok(status_code(report.all_converged() && verified))
        }
        Command::Sweep(args) => {
            let cfg = args.run.resolve(sweep_defaults(args.axis))?;
            let report = cmd_sweep(&cfg, args.axis, args.max_d)?;
            print!("{}", report.to_csv());
            let verified = maybe_verify(&cfg)?;
            Ok(status_code(report.all_converged() && verified))
        }
        Command::Verify(args) => {
            let vcfg = verify_config(args.n, args.kappa, args.mg_iters, args.seed)?;
            let report = cmd_verify(&vcfg, args.out.as_deref())?;
            if args.json {
                println!("{}", report.to_json()?);
            } else {
                print!("{}", report.table());
            }
            Ok(status_code(report.all_pass()))
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"problem": {"n": 50, "kappa": 1000.0}, "repetitions": 4}"#,
        )
        .unwrap();
        let args = RunArgs {
            config: Some(path),
            kappa: Some(1e4),
            d1: Some(3),
            ..Default::default()
        };
        let c = args.resolve(ExperimentConfig::default()).unwrap();
        assert_eq!((c.problem.n, c.problem.kappa, c.repetitions), (50, 1e4, 4));
        assert_eq!(c.params.d1, Some(3));
    }

    #[test]
    fn parse_errors_exit_with_usage_code() {
        assert_eq!(run(["gradalign", "solve", "--n", "ten"]), EXIT_USAGE);
        assert_eq!(run(["gradalign", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["gradalign", "--help"]), EXIT_OK);
    }
}
