//! The gradient iteration `x_{n+1} = x_n − α_n g_n`.
//!
//! One matvec `w = A g_n` per iteration feeds both the steplength quotients
//! and the gradient recurrence `g_{n+1} = g_n − α_n w`. Every
//! `recompute_period` iterations the gradient is refreshed from `A x − b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm2};
use crate::linalg::{EigenBasis, QuadForms};
use crate::problems::Problem;
use crate::steps::{schedule_next, StepRule, StepState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Stop once ‖g_n‖ < tol_rel·‖g_0‖.
    pub tol_rel: f64,
    pub max_iters: usize,
    /// Refresh the recurrence gradient from `Ax − b` this often.
    pub recompute_period: usize,
    /// Starting point; zero when absent.
    pub x0: Option<Vec<f64>>,
    /// Record eigen-components of every gradient (needs a known eigenbasis).
    pub capture_components: bool,
    /// Record every gradient vector.
    pub capture_gradients: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol_rel: 1e-6,
            max_iters: 10_000,
            recompute_period: 50,
            x0: None,
            capture_components: false,
            capture_gradients: false,
        }
    }
}

impl SolveConfig {
    /// Default iteration budget for a problem of condition number `kappa`.
    pub fn default_max_iters(kappa: Option<f64>) -> usize {
        match kappa {
            Some(k) if k <= 1e4 => 10_000,
            _ => 100_000,
        }
    }

    pub fn for_kappa(kappa: Option<f64>) -> Self {
        SolveConfig {
            max_iters: Self::default_max_iters(kappa),
            ..Default::default()
        }
    }

    /// Fixed-length run on the pure recurrence, for asymptotic analysis:
    /// no refresh and no early stop unless the gradient vanishes exactly.
    pub fn asymptotic(iters: usize) -> Self {
        SolveConfig {
            tol_rel: f64::MIN_POSITIVE,
            max_iters: iters,
            recompute_period: usize::MAX,
            x0: None,
            capture_components: true,
            capture_gradients: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0) {
            return Err(Error::config(format!(
                "tol_rel must be > 0, got {}",
                self.tol_rel
            )));
        }
        if self.max_iters < 1 {
            return Err(Error::config("max_iters must be >= 1"));
        }
        if self.recompute_period < 1 {
            return Err(Error::config("recompute_period must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIters,
    NumericalError,
}

/// State of one iterate. The final record of a run has no steplength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub n: usize,
    pub alpha: Option<f64>,
    pub res_norm: f64,
    pub g_a_g: Option<f64>,
    /// f(x_n) − f(x*)
    pub f_gap: Option<f64>,
    pub components: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub method: String,
    pub records: Vec<IterRecord>,
    pub status: Status,
    /// Number of steps taken.
    pub iterations_used: usize,
    pub error: Option<String>,
    /// Final iterate.
    pub x: Vec<f64>,
    pub matvecs: usize,
    /// Largest ‖g_recurrence − (Ax − b)‖ seen at a refresh.
    pub max_refresh_drift: f64,
    pub gradients: Option<Vec<Vec<f64>>>,
}

impl IterationTrace {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn initial_res(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.res_norm)
    }

    pub fn final_res(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.res_norm)
    }

    pub fn final_relres(&self) -> f64 {
        let r0 = self.initial_res();
        if r0 > 0.0 {
            self.final_res() / r0
        } else {
            0.0
        }
    }

    /// Applied steplengths in order.
    pub fn alphas(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.alpha).collect()
    }

    pub fn res_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.res_norm).collect()
    }
}

/// Runs the gradient method on `p` with steplengths from `rule`.
pub fn run_gradient(p: &Problem, rule: &StepRule, cfg: &SolveConfig) -> Result<IterationTrace> {
    run_gradient_observed(p, rule, cfg, |_, _| {})
}

/// As [`run_gradient`], calling `observer(state, alpha)` after each steplength
/// is chosen and before it is applied.
pub fn run_gradient_observed<F>(
    p: &Problem,
    rule: &StepRule,
    cfg: &SolveConfig,
    mut observer: F,
) -> Result<IterationTrace>
where
    F: FnMut(&StepState, f64),
{
    cfg.validate()?;
    rule.validate()?;
    let a = &p.a;
    let n = a.n();
    if p.b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: p.b.len(),
        });
    }
    let mut x = match &cfg.x0 {
        Some(x0) if x0.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x0.len(),
            })
        }
        Some(x0) => x0.clone(),
        None => vec![0.0; n],
    };
    let x_star = p.x_star.as_deref().filter(|xs| xs.len() == n);
    let spectrum = p
        .spectrum
        .as_ref()
        .filter(|sm| cfg.capture_components && *sm.basis() != EigenBasis::Unknown);
    if cfg.capture_components && spectrum.is_none() {
        log::warn!(
            "{}: no eigenbasis available, components not captured",
            p.label
        );
    }

    let mut matvecs = 0;
    let mut g = a.spmv(&x)?;
    matvecs += 1;
    for (gi, bi) in g.iter_mut().zip(&p.b) {
        *gi -= bi;
    }
    let mut w = vec![0.0; n];
    let mut w2 = if rule.max_moment() > 2 {
        vec![0.0; n]
    } else {
        Vec::new()
    };

    let res0 = norm2(&g);
    let mut records = Vec::new();
    let mut gradients = cfg.capture_gradients.then(Vec::new);
    let mut state: Option<StepState> = None;
    let mut max_drift = 0.0f64;
    let mut status = Status::MaxIters;
    let mut error = None;

    let f_gap = |x: &[f64], g: &[f64]| {
        // g = −A e with e = x* − x, so ½eᵀAe = −½eᵀg
        x_star.map(|xs| {
            -0.5 * xs
                .iter()
                .zip(x)
                .zip(g)
                .map(|((s, x), g)| (s - x) * g)
                .sum::<f64>()
        })
    };
    let components = |g: &[f64]| spectrum.and_then(|sm| sm.project(g).ok());

    let mut it = 0;
    loop {
        let res = norm2(&g);
        let mut record = IterRecord {
            n: it,
            alpha: None,
            res_norm: res,
            g_a_g: None,
            f_gap: f_gap(&x, &g),
            components: components(&g),
        };
        if let Some(gs) = gradients.as_mut() {
            gs.push(g.clone());
        }
        if !res.is_finite() {
            records.push(record);
            status = Status::NumericalError;
            error = Some("residual is not finite".to_string());
            break;
        }
        if res < cfg.tol_rel * res0 || res == 0.0 {
            records.push(record);
            status = Status::Converged;
            break;
        }
        if it == cfg.max_iters {
            records.push(record);
            break;
        }

        a.spmv_into(&g, &mut w)?;
        matvecs += 1;
        let qf = QuadForms::from_pair(&g, &w);
        match state.as_mut() {
            None => state = Some(StepState::initial(qf, rule.history_depth())),
            Some(s) => {
                let last = records
                    .last()
                    .and_then(|r: &IterRecord| r.alpha)
                    .unwrap_or(0.0);
                s.advance(qf, last)
            }
        }
        let s = state.as_mut().expect("state initialised above");
        if rule.max_moment() > 2 {
            a.spmv_into(&w, &mut w2)?;
            matvecs += 1;
            s.set_higher_moments(dot(&w, &w2), dot(&w2, &w2));
        }
        record.g_a_g = Some(qf.g_a_g);

        let alpha = match schedule_next(rule, s) {
            Ok(alpha) if alpha.is_finite() => alpha,
            Ok(alpha) => {
                records.push(record);
                status = Status::NumericalError;
                error = Some(format!("steplength {alpha} is not finite"));
                break;
            }
            Err(e) => {
                records.push(record);
                status = Status::NumericalError;
                error = Some(e.to_string());
                break;
            }
        };
        observer(s, alpha);
        record.alpha = Some(alpha);
        records.push(record);

        axpy(-alpha, &g, &mut x);
        axpy(-alpha, &w, &mut g);
        it += 1;

        if it % cfg.recompute_period == 0 {
            a.spmv_into(&x, &mut w)?;
            matvecs += 1;
            let mut drift = 0.0;
            for ((gi, wi), bi) in g.iter_mut().zip(&w).zip(&p.b) {
                let fresh = wi - bi;
                drift += (*gi - fresh) * (*gi - fresh);
                *gi = fresh;
            }
            max_drift = max_drift.max(drift.sqrt());
        }
    }

    Ok(IterationTrace {
        method: rule.to_string(),
        iterations_used: it,
        records,
        status,
        error,
        x,
        matvecs,
        max_refresh_drift: max_drift,
        gradients,
    })
}

/// f(x) − f(x*) = ½(x* − x)ᵀA(x* − x).
pub fn eval_f_gap(p: &Problem, x: &[f64]) -> Result<f64> {
    let xs = p
        .x_star
        .as_ref()
        .ok_or_else(|| Error::Precondition("problem has no known solution".into()))?;
    if x.len() != xs.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            got: x.len(),
        });
    }
    let e: Vec<f64> = xs.iter().zip(x).map(|(s, x)| s - x).collect();
    let ae = p.a.spmv(&e)?;
    Ok(0.5 * dot(&e, &ae))
}
