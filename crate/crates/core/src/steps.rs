//! Steplength rules.
//!
//! Every rule is a pure function of the solver's running [`StepState`]: the
//! quadratic forms at the current gradient, those at the previous gradient,
//! and the last applied steplength. Quotients are formed from the current
//! gradient at every iteration, including hold phases of the cyclic
//! schedules, so the two-point formulas always see fresh values.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::QuadForms;

/// `gᵀA^k g` for k = 0..=4 at one iterate. Entries above `order` are unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    values: [f64; 5],
    order: usize,
}

impl Moments {
    pub fn from_quad(q: &QuadForms) -> Self {
        Moments {
            values: [q.gg, q.g_a_g, q.ag_ag, f64::NAN, f64::NAN],
            order: 2,
        }
    }

    /// Adds `gᵀA³g` and `gᵀA⁴g`.
    pub fn with_higher(mut self, m3: f64, m4: f64) -> Self {
        self.values[3] = m3;
        self.values[4] = m4;
        self.order = 4;
        self
    }

    pub fn get(&self, k: usize) -> Option<f64> {
        (k <= self.order).then(|| self.values[k])
    }
}

/// Running state consumed by the step rules.
#[derive(Debug, Clone)]
pub struct StepState {
    /// Iteration index of `cur`.
    pub n: usize,
    pub cur: QuadForms,
    pub prev: Option<QuadForms>,
    /// Last applied steplength.
    pub alpha_prev: Option<f64>,
    history: VecDeque<Moments>,
    history_cap: usize,
}

impl StepState {
    /// State at iteration 0, keeping moments of the last `history_cap` iterates.
    pub fn initial(qf: QuadForms, history_cap: usize) -> Self {
        let history_cap = history_cap.max(1);
        let mut history = VecDeque::with_capacity(history_cap);
        history.push_back(Moments::from_quad(&qf));
        StepState {
            n: 0,
            cur: qf,
            prev: None,
            alpha_prev: None,
            history,
            history_cap,
        }
    }

    /// Moves to the next iterate after `alpha` was applied.
    pub fn advance(&mut self, qf: QuadForms, alpha: f64) {
        self.n += 1;
        self.prev = Some(self.cur);
        self.cur = qf;
        self.alpha_prev = Some(alpha);
        if self.history.len() == self.history_cap {
            self.history.pop_front();
        }
        self.history.push_back(Moments::from_quad(&qf));
    }

    /// Attaches `gᵀA³g` and `gᵀA⁴g` for the current iterate.
    pub fn set_higher_moments(&mut self, m3: f64, m4: f64) {
        if let Some(last) = self.history.back_mut() {
            *last = last.with_higher(m3, m4);
        }
    }

    /// Moments of the iterate `lag` steps back, if still held.
    pub fn moments_back(&self, lag: usize) -> Option<&Moments> {
        let len = self.history.len();
        (lag < len).then(|| &self.history[len - 1 - lag])
    }

    pub fn sd_cur(&self) -> Result<f64> {
        sd_quotient(&self.cur)
    }

    pub fn sd_prev(&self) -> Result<f64> {
        sd_quotient(self.prev_forms("previous Cauchy quotient")?)
    }

    pub fn mg_cur(&self) -> Result<f64> {
        mg_quotient(&self.cur)
    }

    pub fn mg_prev(&self) -> Result<f64> {
        mg_quotient(self.prev_forms("previous minimal gradient quotient")?)
    }

    pub fn ao_cur(&self) -> Result<f64> {
        ao_quotient(&self.cur)
    }

    fn prev_forms(&self, what: &'static str) -> Result<&QuadForms> {
        self.prev.as_ref().ok_or(Error::Sequencing(what))
    }
}

/// gᵀg / gᵀAg
pub fn sd_quotient(q: &QuadForms) -> Result<f64> {
    if !(q.g_a_g > 0.0) {
        return Err(Error::Indefinite { g_a_g: q.g_a_g });
    }
    Ok(q.gg / q.g_a_g)
}

/// gᵀ(Ag) / (Ag)ᵀ(Ag), the minimizer of ‖g − αAg‖.
pub fn mg_quotient(q: &QuadForms) -> Result<f64> {
    if !(q.ag_ag > 0.0) {
        return Err(Error::Singular);
    }
    Ok(q.g_a_g / q.ag_ag)
}

/// ‖g‖ / ‖Ag‖
pub fn ao_quotient(q: &QuadForms) -> Result<f64> {
    if !(q.norm_ag > 0.0) {
        return Err(Error::Singular);
    }
    Ok(q.norm_g / q.norm_ag)
}

pub fn step_sd(s: &StepState) -> Result<f64> {
    s.sd_cur()
}

pub fn step_mg(s: &StepState) -> Result<f64> {
    s.mg_cur()
}

pub fn step_ao(s: &StepState) -> Result<f64> {
    s.ao_cur()
}

/// Barzilai-Borwein: the Cauchy quotient of the previous gradient. Falls back
/// to the current one at n = 0.
pub fn step_bb(s: &StepState) -> Result<f64> {
    match &s.prev {
        Some(p) => sd_quotient(p),
        None => s.sd_cur(),
    }
}

/// Second Barzilai-Borwein step: the previous minimal gradient quotient, with
/// the same n = 0 fallback as [`step_bb`].
pub fn step_bb2(s: &StepState) -> Result<f64> {
    match &s.prev {
        Some(p) => mg_quotient(p),
        None => s.mg_cur(),
    }
}

/// Harmonic combination `(1/prev + 1/cur)⁻¹`.
fn harmonic(prev: f64, cur: f64) -> f64 {
    1.0 / (1.0 / prev + 1.0 / cur)
}

/// `2 / (sqrt((1/prev − 1/cur)² + 4·ratio/prev²) + 1/prev + 1/cur)`, the shared
/// shape of the Yuan and Y2 steps. A negative radicand is clamped to zero.
fn yuan_form(prev: f64, cur: f64, ratio: f64, name: &str) -> f64 {
    let (ip, ic) = (1.0 / prev, 1.0 / cur);
    let mut radicand = (ip - ic).powi(2) + 4.0 * ratio / (prev * prev);
    if radicand < 0.0 {
        log::warn!("{name} radicand {radicand:e} clamped to zero");
        radicand = 0.0;
    }
    2.0 / (radicand.sqrt() + ip + ic)
}

/// Yuan steplength from the Cauchy quotients at g_{n−1}, g_n and the ratio
/// ‖g_n‖²/‖g_{n−1}‖².
pub fn step_yuan(s: &StepState) -> Result<f64> {
    let prev = s.prev_forms("Yuan step")?;
    Ok(yuan_form(
        sd_quotient(prev)?,
        s.sd_cur()?,
        s.cur.gg / prev.gg,
        "Yuan",
    ))
}

/// Harmonic mean of consecutive Cauchy quotients (halved).
pub fn step_a(s: &StepState) -> Result<f64> {
    let prev = s.prev_forms("A step")?;
    Ok(harmonic(sd_quotient(prev)?, s.sd_cur()?))
}

/// Harmonic mean of consecutive minimal gradient quotients (halved).
pub fn step_a2(s: &StepState) -> Result<f64> {
    let prev = s.prev_forms("A2 step")?;
    Ok(harmonic(mg_quotient(prev)?, s.mg_cur()?))
}

/// Yuan-type step built from minimal gradient quotients and the ratio
/// g_nᵀAg_n / g_{n−1}ᵀAg_{n−1}.
pub fn step_y2(s: &StepState) -> Result<f64> {
    let prev = s.prev_forms("Y2 step")?;
    Ok(yuan_form(
        mg_quotient(prev)?,
        s.mg_cur()?,
        s.cur.g_a_g / prev.g_a_g,
        "Y2",
    ))
}

/// `1/(mg_prev·mg_cur) − g_nᵀAg_n / (mg_prev²·g_{n−1}ᵀAg_{n−1})`. Along a
/// minimal gradient run this tends to λ₁λ_N.
pub fn y2_product_term(s: &StepState) -> Result<f64> {
    let prev = s.prev_forms("Y2 product term")?;
    let (mp, mc) = (mg_quotient(prev)?, s.mg_cur()?);
    Ok(1.0 / (mp * mc) - s.cur.g_a_g / (mp * mp * prev.g_a_g))
}

/// Parameters of the retarded family `((g_τᵀA^ρg_τ)/(g_τᵀA^{ρ+υ}g_τ))^{1/υ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgmrParams {
    /// ρ values, used cyclically: ρ(n) = rho_schedule[n mod len].
    pub rho_schedule: Vec<f64>,
    /// τ(n) = max(0, n − tau_lag).
    pub tau_lag: usize,
    pub upsilon: f64,
}

impl DgmrParams {
    fn validate(&self) -> Result<()> {
        if self.rho_schedule.is_empty() {
            return Err(Error::config("DGMR needs at least one rho value"));
        }
        for &rho in &self.rho_schedule {
            if !(rho >= 0.0) {
                return Err(Error::config(format!("DGMR rho must be >= 0, got {rho}")));
            }
            if ![0.0, 1.0, 2.0].contains(&rho) {
                return Err(Error::config(format!(
                    "unsupported DGMR exponent rho = {rho} (supported: 0, 1, 2)"
                )));
            }
        }
        if !(self.upsilon > 0.0) {
            return Err(Error::config(format!(
                "DGMR upsilon must be > 0, got {}",
                self.upsilon
            )));
        }
        if ![1.0, 2.0].contains(&self.upsilon) {
            return Err(Error::config(format!(
                "unsupported DGMR exponent upsilon = {} (supported: 1, 2)",
                self.upsilon
            )));
        }
        Ok(())
    }

    /// Highest power k for which gᵀA^k g is needed.
    pub fn max_moment(&self) -> usize {
        let rho = self.rho_schedule.iter().fold(0.0f64, |m, &r| m.max(r));
        (rho + self.upsilon) as usize
    }
}

/// DGMR steplength for iteration `s.n`.
pub fn step_dgmr(params: &DgmrParams, s: &StepState) -> Result<f64> {
    params.validate()?;
    let rho = params.rho_schedule[s.n % params.rho_schedule.len()] as usize;
    let upsilon = params.upsilon as usize;
    let lag = params.tau_lag.min(s.n);
    let m = s
        .moments_back(lag)
        .ok_or(Error::Sequencing("DGMR retarded gradient"))?;
    let (num, den) = match (m.get(rho), m.get(rho + upsilon)) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::config(format!(
                "DGMR needs gᵀA^{}g, which the solver did not compute",
                rho + upsilon
            )))
        }
    };
    if !(den > 0.0) || !(num > 0.0) {
        return Err(Error::Indefinite {
            g_a_g: den.min(num),
        });
    }
    let ratio = num / den;
    Ok(if upsilon == 1 { ratio } else { ratio.sqrt() })
}

/// Cycle lengths of an alignment schedule: `d1` base steps, one auxiliary
/// step, then `d2 − 1` repeats of the auxiliary value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub d1: usize,
    pub d2: usize,
}

impl Schedule {
    pub fn new(d1: usize, d2: usize) -> Result<Self> {
        if d1 < 1 || d2 < 1 {
            return Err(Error::config(format!(
                "schedule needs d1 >= 1 and d2 >= 1, got ({d1}, {d2})"
            )));
        }
        Ok(Schedule { d1, d2 })
    }

    pub fn phase(&self, n: usize) -> Phase {
        let r = n % (self.d1 + self.d2);
        match r.cmp(&self.d1) {
            std::cmp::Ordering::Less => Phase::Base,
            std::cmp::Ordering::Equal => Phase::Auxiliary,
            std::cmp::Ordering::Greater => Phase::Hold,
        }
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule { d1: 4, d2: 4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Base,
    Auxiliary,
    Hold,
}

/// Method names accepted on the command line and in JSON configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Method {
    Sd,
    Mg,
    Ao,
    Bb,
    Bb2,
    Dy,
    Sda,
    Sdc,
    Aoa,
    Mga,
    Mgc,
    Dgmr,
    Const,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::Sd,
        Method::Mg,
        Method::Ao,
        Method::Bb,
        Method::Bb2,
        Method::Dy,
        Method::Sda,
        Method::Sdc,
        Method::Aoa,
        Method::Mga,
        Method::Mgc,
        Method::Dgmr,
        Method::Const,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sd => "SD",
            Method::Mg => "MG",
            Method::Ao => "AO",
            Method::Bb => "BB",
            Method::Bb2 => "BB2",
            Method::Dy => "DY",
            Method::Sda => "SDA",
            Method::Sdc => "SDC",
            Method::Aoa => "AOA",
            Method::Mga => "MGA",
            Method::Mgc => "MGC",
            Method::Dgmr => "DGMR",
            Method::Const => "CONST",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == upper)
            .ok_or_else(|| Error::config(format!("unknown step method {s:?}")))
    }
}

/// Optional keys accompanying a method name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleParams {
    pub d1: Option<usize>,
    pub d2: Option<usize>,
    pub theta: Option<f64>,
    pub rho: Option<Vec<f64>>,
    pub tau: Option<usize>,
    pub upsilon: Option<f64>,
    pub alpha: Option<f64>,
}

/// A fully specified steplength rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "UPPERCASE")]
pub enum StepRule {
    Sd,
    Mg,
    Ao,
    Bb,
    Bb2,
    Dy,
    Sda(Schedule),
    Sdc(Schedule),
    Aoa {
        #[serde(flatten)]
        schedule: Schedule,
        theta: f64,
    },
    Mga(Schedule),
    Mgc(Schedule),
    Dgmr(DgmrParams),
    Const {
        alpha: f64,
    },
}

/// Default shortening factor for AOA.
pub const DEFAULT_THETA: f64 = 0.5;

impl StepRule {
    pub fn build(method: Method, params: &RuleParams) -> Result<Self> {
        let schedule = || {
            Schedule::new(
                params.d1.unwrap_or(Schedule::default().d1),
                params.d2.unwrap_or(Schedule::default().d2),
            )
        };
        let rule = match method {
            Method::Sd => StepRule::Sd,
            Method::Mg => StepRule::Mg,
            Method::Ao => StepRule::Ao,
            Method::Bb => StepRule::Bb,
            Method::Bb2 => StepRule::Bb2,
            Method::Dy => StepRule::Dy,
            Method::Sda => StepRule::Sda(schedule()?),
            Method::Sdc => StepRule::Sdc(schedule()?),
            Method::Aoa => StepRule::Aoa {
                schedule: schedule()?,
                theta: params.theta.unwrap_or(DEFAULT_THETA),
            },
            Method::Mga => StepRule::Mga(schedule()?),
            Method::Mgc => StepRule::Mgc(schedule()?),
            Method::Dgmr => StepRule::Dgmr(DgmrParams {
                rho_schedule: params.rho.clone().unwrap_or_else(|| vec![0.0]),
                tau_lag: params.tau.unwrap_or(0),
                upsilon: params.upsilon.unwrap_or(1.0),
            }),
            Method::Const => StepRule::Const {
                alpha: params
                    .alpha
                    .ok_or_else(|| Error::config("CONST needs an alpha value"))?,
            },
        };
        rule.validate()?;
        Ok(rule)
    }

    /// Parses a bare method name with default parameters.
    pub fn parse(name: &str) -> Result<Self> {
        Self::build(name.parse()?, &RuleParams::default())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StepRule::Sda(s) | StepRule::Sdc(s) | StepRule::Mga(s) | StepRule::Mgc(s) => {
                Schedule::new(s.d1, s.d2).map(|_| ())
            }
            StepRule::Aoa { schedule, theta } => {
                Schedule::new(schedule.d1, schedule.d2)?;
                if !(*theta > 0.0 && *theta < 1.0) {
                    return Err(Error::config(format!(
                        "AOA needs 0 < theta < 1, got {theta}"
                    )));
                }
                Ok(())
            }
            StepRule::Dgmr(p) => p.validate(),
            StepRule::Const { alpha } => {
                if !(*alpha > 0.0) || !alpha.is_finite() {
                    return Err(Error::config(format!(
                        "constant step must be > 0, got {alpha}"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            StepRule::Sd => Method::Sd,
            StepRule::Mg => Method::Mg,
            StepRule::Ao => Method::Ao,
            StepRule::Bb => Method::Bb,
            StepRule::Bb2 => Method::Bb2,
            StepRule::Dy => Method::Dy,
            StepRule::Sda(_) => Method::Sda,
            StepRule::Sdc(_) => Method::Sdc,
            StepRule::Aoa { .. } => Method::Aoa,
            StepRule::Mga(_) => Method::Mga,
            StepRule::Mgc(_) => Method::Mgc,
            StepRule::Dgmr(_) => Method::Dgmr,
            StepRule::Const { .. } => Method::Const,
        }
    }

    /// Highest power of A whose moment the solver must supply.
    pub fn max_moment(&self) -> usize {
        match self {
            StepRule::Dgmr(p) => p.max_moment(),
            _ => 2,
        }
    }

    /// Number of past iterates whose moments must be retained.
    pub fn history_depth(&self) -> usize {
        match self {
            StepRule::Dgmr(p) => p.tau_lag + 1,
            _ => 1,
        }
    }
}

impl fmt::Display for StepRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepRule::Sda(s) | StepRule::Sdc(s) | StepRule::Mga(s) | StepRule::Mgc(s) => {
                write!(f, "{}({},{})", self.method(), s.d1, s.d2)
            }
            StepRule::Aoa { schedule, theta } => {
                write!(f, "AOA({},{},{theta})", schedule.d1, schedule.d2)
            }
            StepRule::Dgmr(p) => write!(
                f,
                "DGMR(rho={:?},tau={},upsilon={})",
                p.rho_schedule, p.tau_lag, p.upsilon
            ),
            StepRule::Const { alpha } => write!(f, "CONST({alpha})"),
            _ => write!(f, "{}", self.method()),
        }
    }
}

/// Steplength to apply at iteration `s.n` under `rule`.
pub fn schedule_next(rule: &StepRule, s: &StepState) -> Result<f64> {
    let hold = |s: &StepState| s.alpha_prev.ok_or(Error::Sequencing("schedule hold phase"));
    match rule {
        StepRule::Sd => step_sd(s),
        StepRule::Mg => step_mg(s),
        StepRule::Ao => step_ao(s),
        StepRule::Bb => step_bb(s),
        StepRule::Bb2 => step_bb2(s),
        StepRule::Dy => match s.n % 4 {
            0 | 1 => step_sd(s),
            _ => step_yuan(s),
        },
        StepRule::Sda(sch) => match sch.phase(s.n) {
            Phase::Base => step_sd(s),
            Phase::Auxiliary => step_a(s),
            Phase::Hold => hold(s),
        },
        StepRule::Sdc(sch) => match sch.phase(s.n) {
            Phase::Base => step_sd(s),
            Phase::Auxiliary => step_yuan(s),
            Phase::Hold => hold(s),
        },
        StepRule::Aoa { schedule, theta } => match schedule.phase(s.n) {
            Phase::Base => step_ao(s),
            Phase::Auxiliary => Ok(theta * step_ao(s)?),
            Phase::Hold => hold(s),
        },
        StepRule::Mga(sch) => match sch.phase(s.n) {
            Phase::Base => step_mg(s),
            Phase::Auxiliary => step_a2(s),
            Phase::Hold => hold(s),
        },
        StepRule::Mgc(sch) => match sch.phase(s.n) {
            Phase::Base => step_mg(s),
            Phase::Auxiliary => step_y2(s),
            Phase::Hold => hold(s),
        },
        StepRule::Dgmr(p) => step_dgmr(p, s),
        StepRule::Const { alpha } => Ok(*alpha),
    }
}
