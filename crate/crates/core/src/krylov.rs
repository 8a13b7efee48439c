//! Krylov baselines: unpreconditioned conjugate gradient and restarted GMRES.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::vector::{axpy, dot, norm2};
use crate::problems::Problem;
use crate::solver::{IterRecord, IterationTrace, Status};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrylovConfig {
    pub tol_rel: f64,
    pub max_iters: usize,
    /// GMRES restart length.
    pub restart_l: usize,
    /// Run CG even when the operator is not flagged symmetric.
    pub allow_nonsymmetric: bool,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig {
            tol_rel: 1e-6,
            max_iters: 10_000,
            restart_l: 20,
            allow_nonsymmetric: false,
        }
    }
}

impl KrylovConfig {
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
        if self.restart_l < 1 {
            return Err(Error::config("restart_l must be >= 1"));
        }
        Ok(())
    }
}

fn check_dims(p: &Problem) -> Result<()> {
    if p.b.len() != p.a.n() {
        return Err(Error::DimensionMismatch {
            expected: p.a.n(),
            got: p.b.len(),
        });
    }
    Ok(())
}

fn record(n: usize, alpha: Option<f64>, res_norm: f64, f_gap: Option<f64>) -> IterRecord {
    IterRecord {
        n,
        alpha,
        res_norm,
        g_a_g: None,
        f_gap,
        components: None,
    }
}

/// Conjugate gradient from x₀ = 0. Records the CG steplength and ‖b − Ax_n‖.
pub fn run_cg(p: &Problem, cfg: &KrylovConfig) -> Result<IterationTrace> {
    cfg.validate()?;
    check_dims(p)?;
    if !p.a.is_symmetric() {
        if !cfg.allow_nonsymmetric {
            return Err(Error::NotSymmetric(
                "CG requires a symmetric operator; set allow_nonsymmetric to run anyway".into(),
            ));
        }
        log::warn!("{}: running CG on a nonsymmetric operator", p.label);
    }
    let n = p.a.n();
    let x_star = p.x_star.as_deref().filter(|xs| xs.len() == n);
    // with r = b − Ax = A e, f(x) − f(x*) = ½eᵀr
    let f_gap = |x: &[f64], r: &[f64]| {
        x_star.map(|xs| {
            0.5 * xs
                .iter()
                .zip(x)
                .zip(r)
                .map(|((s, x), r)| (s - x) * r)
                .sum::<f64>()
        })
    };

    let mut x = vec![0.0; n];
    let mut r = p.b.clone();
    let mut d = r.clone();
    let mut ad = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let res0 = rr.sqrt();
    let mut records = Vec::new();
    let mut matvecs = 0;
    let mut status = Status::MaxIters;
    let mut error = None;
    let mut it = 0;

    loop {
        let res = rr.sqrt();
        let mut rec = record(it, None, res, f_gap(&x, &r));
        if !res.is_finite() {
            records.push(rec);
            status = Status::NumericalError;
            error = Some("residual is not finite".to_string());
            break;
        }
        if res < cfg.tol_rel * res0 || res == 0.0 {
            records.push(rec);
            status = Status::Converged;
            break;
        }
        if it == cfg.max_iters {
            records.push(rec);
            break;
        }
        p.a.spmv_into(&d, &mut ad)?;
        matvecs += 1;
        let dad = dot(&d, &ad);
        if !(dad > 0.0) {
            records.push(rec);
            status = Status::NumericalError;
            error = Some(format!("CG breakdown: dᵀAd = {dad:e}"));
            break;
        }
        let alpha = rr / dad;
        rec.alpha = Some(alpha);
        records.push(rec);
        axpy(alpha, &d, &mut x);
        axpy(-alpha, &ad, &mut r);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        rr = rr_next;
        for (di, ri) in d.iter_mut().zip(&r) {
            *di = ri + beta * *di;
        }
        it += 1;
    }

    Ok(IterationTrace {
        method: "CG".into(),
        records,
        status,
        iterations_used: it,
        error,
        x,
        matvecs,
        max_refresh_drift: 0.0,
        gradients: None,
    })
}

/// Storage accounting for a GMRES run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GmresStats {
    /// Largest number of Krylov basis vectors held at once.
    pub peak_basis_vectors: usize,
    pub cycles: usize,
}

/// Restarted GMRES(l) from x₀ = 0.
pub fn run_gmres(p: &Problem, cfg: &KrylovConfig) -> Result<IterationTrace> {
    run_gmres_with_stats(p, cfg).map(|(t, _)| t)
}

/// As [`run_gmres`], also reporting basis storage. Residual norms inside a
/// cycle are the least-squares estimates; each cycle starts from the true
/// residual.
pub fn run_gmres_with_stats(
    p: &Problem,
    cfg: &KrylovConfig,
) -> Result<(IterationTrace, GmresStats)> {
    cfg.validate()?;
    check_dims(p)?;
    let n = p.a.n();
    if cfg.restart_l > n {
        return Err(Error::config(format!(
            "restart_l = {} exceeds the dimension {n}",
            cfg.restart_l
        )));
    }
    let l = cfg.restart_l;
    let mut x = vec![0.0; n];
    let mut r = p.b.clone();
    let res0 = norm2(&r);
    let mut records = vec![record(0, None, res0, None)];
    let mut stats = GmresStats {
        peak_basis_vectors: 0,
        cycles: 0,
    };
    let mut matvecs = 0;
    let mut it = 0;
    let mut error = None;

    let status = 'outer: loop {
        let beta = norm2(&r);
        if !beta.is_finite() {
            error = Some("residual is not finite".to_string());
            break Status::NumericalError;
        }
        if beta < cfg.tol_rel * res0 || beta == 0.0 {
            break Status::Converged;
        }
        if it == cfg.max_iters {
            break Status::MaxIters;
        }
        stats.cycles += 1;

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(l + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        // Hessenberg columns, rotated in place into R
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(l);
        let mut cs: Vec<(f64, f64)> = Vec::with_capacity(l);
        let mut rhs = vec![0.0; l + 1];
        rhs[0] = beta;
        let mut converged = false;

        let mut k = 0;
        while k < l && it < cfg.max_iters {
            let mut w = p.a.spmv(&basis[k])?;
            matvecs += 1;
            let mut col = vec![0.0; k + 2];
            for (j, v) in basis.iter().enumerate() {
                col[j] = dot(&w, v);
                axpy(-col[j], v, &mut w);
            }
            let hnext = norm2(&w);
            col[k + 1] = hnext;
            let happy = hnext <= 1e-14 * col.iter().map(|c| c * c).sum::<f64>().sqrt();

            for (j, &(c, s)) in cs.iter().enumerate() {
                let (a, b) = (col[j], col[j + 1]);
                col[j] = c * a + s * b;
                col[j + 1] = -s * a + c * b;
            }
            let (a, b) = (col[k], col[k + 1]);
            let rho = a.hypot(b);
            if rho == 0.0 {
                error = Some("singular least-squares problem".to_string());
                break 'outer Status::NumericalError;
            }
            let (c, s) = (a / rho, b / rho);
            col[k] = rho;
            col[k + 1] = 0.0;
            cs.push((c, s));
            rhs[k + 1] = -s * rhs[k];
            rhs[k] *= c;
            h.push(col);
            k += 1;
            it += 1;

            let est = rhs[k].abs();
            records.push(record(it, None, est, None));
            if happy || est < cfg.tol_rel * res0 {
                converged = true;
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
            stats.peak_basis_vectors = stats.peak_basis_vectors.max(basis.len());
        }
        stats.peak_basis_vectors = stats.peak_basis_vectors.max(basis.len());

        // back substitution R y = rhs
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = rhs[i];
            for j in (i + 1)..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (yi, v) in y.iter().zip(&basis) {
            axpy(*yi, v, &mut x);
        }
        let ax = p.a.spmv(&x)?;
        matvecs += 1;
        for ((ri, bi), ai) in r.iter_mut().zip(&p.b).zip(&ax) {
            *ri = bi - ai;
        }
        if converged {
            // the estimate triggered the stop; the true residual decides
            let true_res = norm2(&r);
            if let Some(last) = records.last_mut() {
                last.res_norm = true_res;
            }
            if true_res < cfg.tol_rel * res0 || true_res == 0.0 {
                break Status::Converged;
            }
        }
    };

    let iterations_used = it;
    Ok((
        IterationTrace {
            method: format!("GMRES({l})"),
            records,
            status,
            iterations_used,
            error,
            x,
            matvecs,
            max_refresh_drift: 0.0,
            gradients: None,
        },
        stats,
    ))
}
