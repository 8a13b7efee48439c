//! Dense brute-force re-implementation of every steplength rule, shared by
//! the acceptance and oracle test targets.

#![allow(dead_code)]

pub mod oracle {
    use gradalign::{run_gradient, Problem, SolveConfig, Status, StepRule};

    pub type Dense = Vec<Vec<f64>>;

    pub fn mv(a: &Dense, x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|r| r.iter().zip(x).map(|(a, x)| a * x).sum())
            .collect()
    }

    fn dot(x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| a * b).sum()
    }

    /// gᵀA^k g evaluated in the split form uᵀu or uᵀAu with u = A^(k/2) g.
    fn moment(a: &Dense, g: &[f64], k: usize) -> f64 {
        let mut u = g.to_vec();
        for _ in 0..k / 2 {
            u = mv(a, &u);
        }
        if k.is_multiple_of(2) {
            dot(&u, &u)
        } else {
            dot(&u, &mv(a, &u))
        }
    }

    fn sd(a: &Dense, g: &[f64]) -> f64 {
        moment(a, g, 0) / moment(a, g, 1)
    }

    fn mg(a: &Dense, g: &[f64]) -> f64 {
        moment(a, g, 1) / moment(a, g, 2)
    }

    fn ao(a: &Dense, g: &[f64]) -> f64 {
        (moment(a, g, 0) / moment(a, g, 2)).sqrt()
    }

    fn yuan_shape(p: f64, c: f64, ratio: f64) -> f64 {
        let rad = ((1.0 / p - 1.0 / c).powi(2) + 4.0 * ratio / (p * p)).max(0.0);
        2.0 / (rad.sqrt() + 1.0 / p + 1.0 / c)
    }

    pub enum Rule {
        Sd,
        Mg,
        Ao,
        Bb,
        Bb2,
        Dy,
        Cyclic {
            base: &'static str,
            aux: &'static str,
            d1: usize,
            d2: usize,
            theta: f64,
        },
        Dgmr {
            rho: Vec<usize>,
            lag: usize,
            upsilon: usize,
        },
        Const(f64),
    }

    fn aux_step(a: &Dense, kind: &str, gp: &[f64], gc: &[f64], theta: f64) -> f64 {
        match kind {
            "A" => 1.0 / (1.0 / sd(a, gp) + 1.0 / sd(a, gc)),
            "Y" => yuan_shape(sd(a, gp), sd(a, gc), moment(a, gc, 0) / moment(a, gp, 0)),
            "A2" => 1.0 / (1.0 / mg(a, gp) + 1.0 / mg(a, gc)),
            "Y2" => yuan_shape(mg(a, gp), mg(a, gc), moment(a, gc, 1) / moment(a, gp, 1)),
            "AO" => theta * ao(a, gc),
            _ => unreachable!(),
        }
    }

    fn base_step(a: &Dense, kind: &str, g: &[f64]) -> f64 {
        match kind {
            "SD" => sd(a, g),
            "MG" => mg(a, g),
            "AO" => ao(a, g),
            _ => unreachable!(),
        }
    }

    /// Returns (x_1..x_iters, α_0..α_{iters−1}).
    /// How the oracle obtains the gradient at each step.
    #[derive(Clone, Copy, PartialEq)]
    pub enum Gradient {
        /// g = Ax − b from scratch.
        Recomputed,
        /// g ← g − αAg, the update the solver uses.
        Recurrence,
    }

    pub fn run(
        a: &Dense,
        b: &[f64],
        rule: &Rule,
        iters: usize,
        mode: Gradient,
    ) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = b.len();
        let mut x = vec![0.0; n];
        let mut gs: Vec<Vec<f64>> = Vec::new();
        let mut xs = Vec::new();
        let mut alphas: Vec<f64> = Vec::new();
        for k in 0..iters {
            let g: Vec<f64> = match (mode, gs.last()) {
                (Gradient::Recurrence, Some(gp)) => {
                    let w = mv(a, gp);
                    gp.iter()
                        .zip(&w)
                        .map(|(g, w)| g - alphas[k - 1] * w)
                        .collect()
                }
                _ => mv(a, &x).iter().zip(b).map(|(ax, b)| ax - b).collect(),
            };
            gs.push(g.clone());
            let prev = if k > 0 { &gs[k - 1] } else { &g };
            let alpha = match rule {
                Rule::Sd => sd(a, &g),
                Rule::Mg => mg(a, &g),
                Rule::Ao => ao(a, &g),
                Rule::Bb => sd(a, prev),
                Rule::Bb2 => mg(a, prev),
                Rule::Dy => {
                    if k % 4 < 2 {
                        sd(a, &g)
                    } else {
                        aux_step(a, "Y", prev, &g, 0.0)
                    }
                }
                Rule::Cyclic {
                    base,
                    aux,
                    d1,
                    d2,
                    theta,
                } => {
                    let r = k % (d1 + d2);
                    if r < *d1 {
                        base_step(a, base, &g)
                    } else if r == *d1 {
                        aux_step(a, aux, prev, &g, *theta)
                    } else {
                        alphas[k - 1]
                    }
                }
                Rule::Dgmr { rho, lag, upsilon } => {
                    let gt = &gs[k.saturating_sub(*lag)];
                    let r = rho[k % rho.len()];
                    (moment(a, gt, r) / moment(a, gt, r + upsilon)).powf(1.0 / *upsilon as f64)
                }
                Rule::Const(alpha) => *alpha,
            };
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= alpha * gi;
            }
            alphas.push(alpha);
            xs.push(x.clone());
        }
        (xs, alphas)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn rel_vec(x: &[f64], y: &[f64]) -> f64 {
        let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
        let n: f64 = y.iter().map(|v| v * v).sum();
        (d / n.max(f64::MIN_POSITIVE)).sqrt()
    }

    /// Worst relative mismatch found by [`compare`].
    #[derive(Debug, Default, Clone, Copy)]
    pub struct Mismatch {
        pub x: f64,
        pub alpha: f64,
        /// Iteration of the worst mismatch in either quantity.
        pub at: usize,
        pub compared: usize,
    }

    impl Mismatch {
        pub fn worst(&self) -> f64 {
            self.x.max(self.alpha)
        }
    }

    /// Compares `iters` library iterations against the oracle. Comparison
    /// stops once ‖g‖ < 1e-12‖g₀‖, where the steplength is rounding noise.
    /// The library exposes x only at the end of a run, so prefixes of
    /// increasing length are replayed.
    pub fn compare(
        p: &Problem,
        lib: &StepRule,
        rule: &Rule,
        iters: usize,
        recompute_period: usize,
    ) -> Mismatch {
        let (xs, alphas) = run(&p.a.to_dense(), &p.b, rule, iters, Gradient::Recomputed);
        let cfg = SolveConfig {
            tol_rel: f64::MIN_POSITIVE,
            max_iters: iters,
            recompute_period,
            ..Default::default()
        };
        let t = run_gradient(p, lib, &cfg).unwrap();
        assert_eq!(t.status, Status::MaxIters, "{lib}");
        let g0 = t.initial_res();
        let mut m = Mismatch::default();
        for (k, a) in t.alphas().iter().enumerate() {
            if t.records[k].res_norm < 1e-12 * g0 {
                break;
            }
            let prefix = SolveConfig {
                max_iters: k + 1,
                ..cfg.clone()
            };
            let x = run_gradient(p, lib, &prefix).unwrap().x;
            let (ex, ea) = (rel_vec(&x, &xs[k]), rel(*a, alphas[k]));
            if ex.max(ea) > m.worst() {
                m.at = k;
            }
            m.x = m.x.max(ex);
            m.alpha = m.alpha.max(ea);
            m.compared += 1;
        }
        m
    }

    /// Mismatch between the oracle with recomputed gradients and the oracle
    /// with the gradient recurrence: the spread rounding alone produces.
    pub fn self_spread(p: &Problem, rule: &Rule, iters: usize) -> f64 {
        let a = p.a.to_dense();
        let (xr, ar) = run(&a, &p.b, rule, iters, Gradient::Recomputed);
        let (xu, au) = run(&a, &p.b, rule, iters, Gradient::Recurrence);
        xr.iter()
            .zip(&xu)
            .zip(ar.iter().zip(&au))
            .map(|((x, y), (a, b))| rel_vec(y, x).max(rel(*b, *a)))
            .fold(0.0, f64::max)
    }
}
