//! The subcommands. Each returns a report; printing and file output happen
//! in the caller so tests can inspect results directly.

use std::fs;
use std::path::Path;

use gradalign::analysis::{verify_theorems, VerdictReport, VerifyConfig};
use gradalign::io::write_trace;
use gradalign::steps::{Method, RuleParams};
use gradalign::{Status, StepRule};
use log::info;

use crate::config::{ExperimentConfig, Family, MethodSpec, ProblemSource, ProblemSpec};
use crate::error::{CliError, Result};
use crate::runner::{run_indexed, run_method, Stats};

/// Methods a Table 1 run may use.
pub const TABLE_METHODS: [Method; 5] = [
    Method::Sda,
    Method::Sdc,
    Method::Aoa,
    Method::Mga,
    Method::Mgc,
];

/// Schedule methods a (d1, d2) sweep may use.
pub const GRID_METHODS: [Method; 5] = TABLE_METHODS;

/// Renders rows as CSV, quoting fields that need it.
fn csv_text<R: AsRef<[String]>>(header: &[&str], rows: impl IntoIterator<Item = R>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r.as_ref()).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::usage(format!("cannot write {}: {e}", path.display()))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// File name fragment for a method label: `MGC(4,4)` becomes `MGC_4_4`.
pub fn slug(label: &str) -> String {
    let mut s = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
            s.push(c);
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_string()
}

/// Outcome of one (method, repetition) run of `solve`.
#[derive(Debug, Clone)]
pub struct SolveRow {
    pub method: String,
    pub rep: usize,
    pub seed: u64,
    pub status: Status,
    pub iterations: usize,
    pub final_relres: f64,
    pub matvecs: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub rows: Vec<SolveRow>,
}

impl SolveReport {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.status == Status::Converged)
    }

    pub fn to_csv(&self) -> String {
        let header = [
            "method",
            "rep",
            "seed",
            "status",
            "iterations",
            "final_relres",
            "matvecs",
        ];
        csv_text(
            &header,
            self.rows.iter().map(|r| {
                let status = serde_json::to_value(r.status).expect("status serialises");
                vec![
                    r.method.clone(),
                    r.rep.to_string(),
                    r.seed.to_string(),
                    status.as_str().unwrap_or("?").to_string(),
                    r.iterations.to_string(),
                    format!("{:.6e}", r.final_relres),
                    r.matvecs.to_string(),
                ]
            }),
        )
    }
}

/// Runs every method on every repetition. With an output directory each run
/// leaves `<method>_r<rep>.csv` and `.json`, and `summary.csv` lists them all.
pub fn cmd_solve(cfg: &ExperimentConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let methods = cfg.method_specs()?;
    let source = ProblemSource::prepare(&cfg.problem)?;
    let problems = run_indexed(cfg.repetitions, cfg.jobs, |rep| {
        source.instance(cfg.seed(rep))
    })?;
    if let Some(dir) = &cfg.output_dir {
        ensure_dir(dir)?;
    }
    let m = methods.len();
    let rows = run_indexed(cfg.repetitions * m, cfg.jobs, |k| {
        let (rep, method) = (k / m, &methods[k % m]);
        let p = &problems[rep];
        let trace = run_method(p, method, cfg)?;
        info!(
            "{} rep {rep}: {:?} after {} iterations",
            method.label(),
            trace.status,
            trace.iterations_used
        );
        if let Some(dir) = &cfg.output_dir {
            write_trace(&trace, dir, &format!("{}_r{rep}", slug(&method.label())))?;
        }
        Ok(SolveRow {
            method: method.label(),
            rep,
            seed: cfg.seed(rep).0,
            status: trace.status,
            iterations: trace.iterations_used,
            final_relres: trace.final_relres(),
            matvecs: trace.matvecs,
        })
    })?;
    let report = SolveReport { rows };
    if let Some(dir) = &cfg.output_dir {
        write_file(&dir.join("summary.csv"), &report.to_csv())?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct TableCell {
    pub kappa: f64,
    pub n: usize,
    pub method: String,
    pub stats: Stats,
}

#[derive(Debug, Clone)]
pub struct TableReport {
    pub cells: Vec<TableCell>,
}

impl TableReport {
    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(|c| c.stats.all_converged())
    }

    /// Cells hold the rounded mean and, next to it, the unrounded one.
    pub fn to_csv(&self) -> String {
        let header = [
            "kappa",
            "n",
            "method",
            "mean_iters",
            "mean_iters_exact",
            "std",
            "converged",
            "runs",
            "flag",
        ];
        csv_text(
            &header,
            self.cells.iter().map(|c| {
                vec![
                    format!("{:e}", c.kappa),
                    c.n.to_string(),
                    c.method.clone(),
                    c.stats.mean.round().to_string(),
                    format!("{:.3}", c.stats.mean),
                    format!("{:.3}", c.stats.std),
                    c.stats.converged.to_string(),
                    c.stats.runs.to_string(),
                    if c.stats.all_converged() {
                        "ok"
                    } else {
                        "not_converged"
                    }
                    .to_string(),
                ]
            }),
        )
    }
}

fn table_params(cfg: &ExperimentConfig) -> RuleParams {
    RuleParams {
        theta: cfg.params.theta.or(Some(0.5)),
        ..cfg.params.clone()
    }
}

/// Mean iteration counts over the (κ, n) grid on random SPD problems.
/// Cells with non-converged runs are flagged but still reported.
pub fn cmd_table1(cfg: &ExperimentConfig) -> Result<TableReport> {
    cfg.validate()?;
    if cfg.problem.family != Family::Random {
        return Err(CliError::usage("table1 runs on random problems only"));
    }
    if cfg.kappas.is_empty() || cfg.sizes.is_empty() {
        return Err(CliError::usage(
            "table1 needs at least one kappa and one size",
        ));
    }
    let params = table_params(cfg);
    let rules: Vec<StepRule> = cfg
        .methods
        .iter()
        .map(|name| {
            let m: Method = name
                .parse()
                .map_err(|e: gradalign::Error| CliError::usage(e.to_string()))?;
            if !TABLE_METHODS.contains(&m) {
                return Err(CliError::usage(format!(
                    "table1 method must be one of SDA, SDC, AOA, MGA, MGC, got {name}"
                )));
            }
            StepRule::build(m, &params).map_err(|e| CliError::usage(e.to_string()))
        })
        .collect::<Result<_>>()?;

    let grid: Vec<(f64, usize)> = cfg
        .kappas
        .iter()
        .flat_map(|&k| cfg.sizes.iter().map(move |&n| (k, n)))
        .collect();
    let reps = cfg.repetitions;
    // one job per (κ, n, rep) problem, running every method on it
    let runs = run_indexed(grid.len() * reps, cfg.jobs, |k| {
        let (kappa, n) = grid[k / reps];
        let rep = k % reps;
        let spec = ProblemSpec {
            n,
            kappa,
            ..cfg.problem.clone()
        };
        let p = ProblemSource::Generated(spec).instance(cfg.seed(rep))?;
        rules
            .iter()
            .map(|r| {
                let t = run_method(&p, &MethodSpec::Gradient(r.clone()), cfg)?;
                Ok((t.iterations_used, t.converged()))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut cells = Vec::with_capacity(grid.len() * rules.len());
    for (g, &(kappa, n)) in grid.iter().enumerate() {
        for (j, r) in rules.iter().enumerate() {
            let samples: Vec<(usize, bool)> =
                (0..reps).map(|rep| runs[g * reps + rep][j]).collect();
            cells.push(TableCell {
                kappa,
                n,
                method: r.method().to_string(),
                stats: Stats::of(&samples),
            });
        }
    }
    let report = TableReport { cells };
    if let Some(dir) = &cfg.output_dir {
        ensure_dir(dir)?;
        write_file(&dir.join("table1.csv"), &report.to_csv())?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepAxis {
    /// AOA shortening factor θ over 0.05, 0.10, …, 0.95.
    Theta,
    /// Schedule lengths (d1, d2) over 1..=max_d each.
    Grid,
}

#[derive(Debug, Clone)]
pub struct SweepCell {
    pub method: String,
    pub theta: Option<f64>,
    pub d1: usize,
    pub d2: usize,
    pub stats: Stats,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn all_converged(&self) -> bool {
        self.cells.iter().all(|c| c.stats.all_converged())
    }

    pub fn to_csv(&self) -> String {
        let header = [
            "method",
            "theta",
            "d1",
            "d2",
            "mean_iters",
            "std",
            "converged",
            "runs",
        ];
        csv_text(
            &header,
            self.cells.iter().map(|c| {
                vec![
                    c.method.clone(),
                    c.theta.map(|t| t.to_string()).unwrap_or_default(),
                    c.d1.to_string(),
                    c.d2.to_string(),
                    format!("{:.3}", c.stats.mean),
                    format!("{:.3}", c.stats.std),
                    c.stats.converged.to_string(),
                    c.stats.runs.to_string(),
                ]
            }),
        )
    }
}

/// θ values of the theta sweep.
pub fn theta_values() -> Vec<f64> {
    (1..20).map(|k| k as f64 / 20.0).collect()
}

/// Mean iteration counts across θ or (d1, d2), for heatmap plotting.
pub fn cmd_sweep(cfg: &ExperimentConfig, axis: SweepAxis, max_d: usize) -> Result<SweepReport> {
    cfg.validate()?;
    let methods: Vec<Method> = cfg
        .methods
        .iter()
        .map(|name| {
            name.parse()
                .map_err(|e: gradalign::Error| CliError::usage(e.to_string()))
        })
        .collect::<Result<_>>()?;
    let mut points: Vec<(Method, RuleParams)> = Vec::new();
    match axis {
        SweepAxis::Theta => {
            if methods != [Method::Aoa] {
                return Err(CliError::usage("the theta sweep applies to AOA only"));
            }
            for theta in theta_values() {
                points.push((
                    Method::Aoa,
                    RuleParams {
                        theta: Some(theta),
                        ..cfg.params.clone()
                    },
                ));
            }
        }
        SweepAxis::Grid => {
            if max_d < 1 {
                return Err(CliError::usage("max-d must be >= 1"));
            }
            for &m in &methods {
                if !GRID_METHODS.contains(&m) {
                    return Err(CliError::usage(format!("{m} has no (d1, d2) schedule")));
                }
                for d1 in 1..=max_d {
                    for d2 in 1..=max_d {
                        points.push((
                            m,
                            RuleParams {
                                d1: Some(d1),
                                d2: Some(d2),
                                ..table_params(cfg)
                            },
                        ));
                    }
                }
            }
        }
    }
    let rules: Vec<StepRule> = points
        .iter()
        .map(|(m, p)| StepRule::build(*m, p).map_err(|e| CliError::usage(e.to_string())))
        .collect::<Result<_>>()?;

    let source = ProblemSource::prepare(&cfg.problem)?;
    let reps = cfg.repetitions;
    let problems = run_indexed(reps, cfg.jobs, |rep| source.instance(cfg.seed(rep)))?;
    let runs = run_indexed(rules.len() * reps, cfg.jobs, |k| {
        let t = run_method(
            &problems[k % reps],
            &MethodSpec::Gradient(rules[k / reps].clone()),
            cfg,
        )?;
        Ok((t.iterations_used, t.converged()))
    })?;

    let cells = rules
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (theta, d1, d2) = match r {
                StepRule::Aoa { schedule, theta } => (Some(*theta), schedule.d1, schedule.d2),
                StepRule::Sda(s) | StepRule::Sdc(s) | StepRule::Mga(s) | StepRule::Mgc(s) => {
                    (None, s.d1, s.d2)
                }
                _ => unreachable!("sweeps only build schedule methods"),
            };
            SweepCell {
                method: r.method().to_string(),
                theta,
                d1,
                d2,
                stats: Stats::of(&runs[i * reps..(i + 1) * reps]),
            }
        })
        .collect();
    let report = SweepReport { cells };
    if let Some(dir) = &cfg.output_dir {
        ensure_dir(dir)?;
        let name = match axis {
            SweepAxis::Theta => "sweep_theta.csv",
            SweepAxis::Grid => "sweep_grid.csv",
        };
        write_file(&dir.join(name), &report.to_csv())?;
    }
    Ok(report)
}

/// Verification setup on `n` eigenvalues log-spaced over [1, κ].
pub fn verify_config(n: usize, kappa: f64, mg_iters: usize, seed: u64) -> Result<VerifyConfig> {
    if n < 2 {
        return Err(CliError::usage("verification needs n >= 2"));
    }
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(CliError::usage(format!("kappa must be >= 1, got {kappa}")));
    }
    if mg_iters < 1 {
        return Err(CliError::usage("mg-iters must be >= 1"));
    }
    let eigenvalues = (0..n)
        .map(|i| {
            if i + 1 == n {
                kappa
            } else {
                kappa.powf(i as f64 / (n - 1) as f64)
            }
        })
        .collect();
    Ok(VerifyConfig {
        eigenvalues,
        mg_iters,
        seed,
        ..Default::default()
    })
}

/// Runs the theorem checks, writing `verdict.json` into `out` if given.
pub fn cmd_verify(vcfg: &VerifyConfig, out: Option<&Path>) -> Result<VerdictReport> {
    let report = verify_theorems(vcfg)?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(&dir.join("verdict.json"), &(report.to_json()? + "\n"))?;
    }
    Ok(report)
}
