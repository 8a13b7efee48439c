//! Trace export and problem persistence.
//!
//! Traces are written as CSV with one row per recorded iterate plus a JSON
//! sidecar carrying the terminal status. Problems are saved as a directory
//! holding the matrix in Matrix Market form, the vectors as plain text and a
//! small metadata file.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{read_matrix_market, write_matrix_market};
use crate::problems::{Problem, RngSeed};
use crate::solver::{IterationTrace, Status};

pub const TRACE_HEADER: &str = "iter,alpha,res_norm,gAg,f_gap";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.16e}")).unwrap_or_default()
}

/// Writes the trace CSV. Missing values are left blank.
pub fn write_trace_csv_to<W: Write>(trace: &IterationTrace, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in &trace.records {
        writeln!(
            out,
            "{},{},{:.16e},{},{}",
            r.n,
            fmt_opt(r.alpha),
            r.res_norm,
            fmt_opt(r.g_a_g),
            fmt_opt(r.f_gap)
        )?;
    }
    out.flush()
}

pub fn write_trace_csv(trace: &IterationTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_trace_csv_to(trace, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Terminal state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub status: Status,
    pub iterations_used: usize,
    pub final_relres: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl From<&IterationTrace> for TraceSummary {
    fn from(t: &IterationTrace) -> Self {
        TraceSummary {
            status: t.status,
            iterations_used: t.iterations_used,
            final_relres: t.final_relres(),
            error: t.error.clone(),
        }
    }
}

pub fn write_trace_sidecar(trace: &IterationTrace, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(&TraceSummary::from(trace))?;
    fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Writes `<stem>.csv` and `<stem>.json` into `dir`.
pub fn write_trace(trace: &IterationTrace, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
    let dir = dir.as_ref();
    write_trace_csv(trace, dir.join(format!("{stem}.csv")))?;
    write_trace_sidecar(trace, dir.join(format!("{stem}.json")))
}

/// One parsed CSV row: (iter, alpha, res_norm, gAg, f_gap).
pub type TraceRow = (usize, Option<f64>, f64, Option<f64>, Option<f64>);

/// Reads back a trace CSV written by [`write_trace_csv`].
pub fn read_trace_csv(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        msg: format!("line {line}: {msg}"),
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == TRACE_HEADER => {}
        _ => return Err(perr(1, "missing trace header".into())),
    }
    let opt = |s: &str, line: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| perr(line, format!("bad number {s:?}")))
        }
    };
    lines
        .map(|(k, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(perr(k + 1, "expected 5 fields".into()));
            }
            let iter = f[0]
                .parse()
                .map_err(|_| perr(k + 1, format!("bad index {:?}", f[0])))?;
            let res = opt(f[2], k + 1)?.ok_or_else(|| perr(k + 1, "missing res_norm".into()))?;
            Ok((
                iter,
                opt(f[1], k + 1)?,
                res,
                opt(f[3], k + 1)?,
                opt(f[4], k + 1)?,
            ))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProblemMeta {
    label: String,
    kappa: Option<f64>,
    seed: Option<u64>,
    generator: String,
}

fn write_vector(v: &[f64], path: &Path) -> Result<()> {
    let mut s = String::with_capacity(v.len() * 24);
    for x in v {
        s.push_str(&format!("{x:.16e}\n"));
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            l.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                msg: format!("line {}: bad number {l:?}", k + 1),
            })
        })
        .collect()
}

/// Saves `p` as `matrix.mtx`, `b.txt`, `x_star.txt` (when known) and
/// `meta.json` under `dir`, creating it if needed. Spectra are not stored.
pub fn save_problem(p: &Problem, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix_market(&p.a, dir.join("matrix.mtx"))?;
    write_vector(&p.b, &dir.join("b.txt"))?;
    if let Some(x) = &p.x_star {
        write_vector(x, &dir.join("x_star.txt"))?;
    }
    let meta = ProblemMeta {
        label: p.label.clone(),
        kappa: p.kappa,
        seed: p.seed.map(|s| s.0),
        generator: p.generator.clone(),
    };
    let path = dir.join("meta.json");
    fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n").map_err(|e| Error::io(&path, e))
}

/// Loads a problem saved by [`save_problem`].
pub fn load_problem(dir: impl AsRef<Path>) -> Result<Problem> {
    let dir = dir.as_ref();
    let a = read_matrix_market(dir.join("matrix.mtx"))?;
    let b = read_vector(&dir.join("b.txt"))?;
    if b.len() != a.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: b.len(),
        });
    }
    let xs_path = dir.join("x_star.txt");
    let x_star = if xs_path.exists() {
        let x = read_vector(&xs_path)?;
        if x.len() != a.n() {
            return Err(Error::DimensionMismatch {
                expected: a.n(),
                got: x.len(),
            });
        }
        Some(x)
    } else {
        None
    };
    let meta_path = dir.join("meta.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: ProblemMeta = serde_json::from_str(&text)?;
    Ok(Problem {
        a,
        b,
        x_star,
        spectrum: None,
        kappa: meta.kappa,
        label: meta.label,
        generator: meta.generator,
        seed: meta.seed.map(RngSeed),
    })
}
