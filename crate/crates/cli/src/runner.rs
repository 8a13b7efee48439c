//! Parallel execution with deterministic result order.

use gradalign::krylov::{run_cg, run_gmres};
use gradalign::{run_gradient, IterationTrace, Problem};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, MethodSpec};
use crate::error::{CliError, Result};

/// Runs `f(0..count)` on up to `jobs` threads and returns results in index
/// order, whatever order they finished in.
pub fn run_indexed<T, F>(count: usize, jobs: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(&f).collect())
}

pub fn run_method(
    p: &Problem,
    method: &MethodSpec,
    cfg: &ExperimentConfig,
) -> Result<IterationTrace> {
    let trace = match method {
        MethodSpec::Gradient(rule) => run_gradient(p, rule, &cfg.solve_config(p))?,
        MethodSpec::Cg => run_cg(p, &cfg.krylov_config(p))?,
        MethodSpec::Gmres => run_gmres(p, &cfg.krylov_config(p))?,
    };
    Ok(trace)
}

/// Sample statistics of iteration counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
    pub runs: usize,
    pub converged: usize,
}

impl Stats {
    /// `runs` holds `(iterations, converged)` pairs.
    pub fn of(runs: &[(usize, bool)]) -> Stats {
        let n = runs.len();
        let mean = runs.iter().map(|r| r.0 as f64).sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            runs.iter()
                .map(|r| (r.0 as f64 - mean).powi(2))
                .sum::<f64>()
                / (n - 1) as f64
        } else {
            0.0
        };
        Stats {
            mean,
            std: var.sqrt(),
            runs: n,
            converged: runs.iter().filter(|r| r.1).count(),
        }
    }

    pub fn all_converged(&self) -> bool {
        self.converged == self.runs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_keep_index_order() {
        let out = run_indexed(200, Some(4), |i| {
            // uneven work so completion order differs from index order
            let spin = (200 - i) * 500;
            let mut acc = 0u64;
            for k in 0..spin {
                acc = acc.wrapping_add(k as u64);
            }
            Ok((i, acc))
        })
        .unwrap();
        assert!(out.iter().enumerate().all(|(k, r)| r.0 == k));
    }

    #[test]
    fn errors_propagate() {
        let r: Result<Vec<usize>> = run_indexed(10, Some(2), |i| {
            if i == 7 {
                Err(CliError::usage("boom"))
            } else {
                Ok(i)
            }
        });
        assert!(r.is_err());
    }

    #[test]
    fn stats_match_hand_values() {
        let s = Stats::of(&[(10, true), (12, true), (14, false)]);
        assert_eq!(s.mean, 12.0);
        assert_eq!(s.std, 2.0);
        assert_eq!((s.runs, s.converged), (3, 2));
        assert!(!s.all_converged());
        assert_eq!(Stats::of(&[(5, true)]).std, 0.0);
    }
}
