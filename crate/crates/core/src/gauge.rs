//! Gauge functions `h(t) = t / p(1/t)`, width profiles `ψ`, and the two
//! growth conditions on `p` that decide whether the `h`-measure of the
//! escaping set `𝒳(x0, ψ)` is infinite or zero.
//!
//! The predicates are evaluated in log-domain over grids in `u = ln t`, so
//! thresholds far beyond hardware range (`t = e^{e^{100}}`) remain reachable.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::dynamics::Params;
use crate::error::{Error, Result};
use crate::schroeder::SchroederFn;
use crate::tower::{fmt_g17, ln_f64, mul_exp, tower_exp, TowerReal};

/// Grid density: points per decade.
pub const POINTS_PER_DECADE: f64 = 64.0;

#[derive(Debug, Clone)]
pub enum GaugeKind {
    /// `h(t) = t^s`, i.e. `p(x) = x^{s-1}`.
    Power(f64),
    /// `h(t) = t / (ln(1/t))^s`.
    LogPower(f64),
    /// `h(t) = t / L^s(1/t)`.
    FracIter(f64, Arc<SchroederFn>),
    /// `h(t) = t / L^s(1/t)^γ`.
    FracIterPow(f64, f64, Arc<SchroederFn>),
}

#[derive(Debug, Clone)]
pub struct GaugeSpec {
    pub kind: GaugeKind,
    /// `h` is used on `(0, t0)`.
    pub t0: f64,
}

impl GaugeSpec {
    pub fn power(s: f64) -> Self {
        GaugeSpec {
            kind: GaugeKind::Power(s),
            t0: 1.0,
        }
    }

    pub fn log_power(s: f64) -> Self {
        GaugeSpec {
            kind: GaugeKind::LogPower(s),
            t0: 1.0,
        }
    }

    pub fn frac_iter(s: f64, f: Arc<SchroederFn>) -> Self {
        let t0 = 1.0 / f.params.x0;
        GaugeSpec {
            kind: GaugeKind::FracIter(s, f),
            t0,
        }
    }

    pub fn frac_iter_pow(s: f64, gamma: f64, f: Arc<SchroederFn>) -> Self {
        let t0 = 1.0 / f.params.x0;
        GaugeSpec {
            kind: GaugeKind::FracIterPow(s, gamma, f),
            t0,
        }
    }

    /// `ln p(x)` given `ln x`.
    pub fn ln_p(&self, ln_x: f64) -> f64 {
        match &self.kind {
            GaugeKind::Power(s) => (s - 1.0) * ln_x,
            GaugeKind::LogPower(s) => s * ln_x.ln(),
            GaugeKind::FracIter(s, f) => ln_frac(f, *s, ln_x),
            GaugeKind::FracIterPow(s, g, f) => g * ln_frac(f, *s, ln_x),
        }
    }

    /// `p(x)` for a hardware real `x > 0`.
    pub fn p(&self, x: f64) -> f64 {
        self.ln_p(x.ln()).exp()
    }

    /// `h(t)` on `(0, t0)`.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < self.t0) {
            return Err(Error::Domain(format!(
                "gauge argument {t} outside (0, {})",
                self.t0
            )));
        }
        Ok(match self.kind {
            GaugeKind::Power(s) => t.powf(s),
            _ => t / self.p(1.0 / t),
        })
    }

    /// Upper end of the range where `t ↦ t·p(1/t)` is increasing.
    pub fn monotone_upper(&self) -> f64 {
        match self.kind {
            GaugeKind::LogPower(s) if s > 0.0 => self.t0.min((-s).exp()),
            _ => self.t0,
        }
    }

    /// Checks on a grid in `(t_lo, monotone_upper)` that `h` is increasing
    /// and that `t ↦ t·p(1/t)` is increasing. Returns the first offending `t`.
    pub fn check_monotone(&self, t_lo: f64) -> std::result::Result<(), f64> {
        let grid = geometric(t_lo, self.monotone_upper() * (1.0 - 1e-9), POINTS_PER_DECADE);
        let mut prev_h = 0.0;
        let mut prev_q = 0.0;
        for &t in &grid {
            let h = self.eval(t).map_err(|_| t)?;
            let q = t * self.p(1.0 / t);
            if h < prev_h || q < prev_q {
                return Err(t);
            }
            prev_h = h;
            prev_q = q;
        }
        Ok(())
    }
}

/// `ln L^s(x)` given `ln x`.
fn ln_frac(f: &SchroederFn, s: f64, ln_x: f64) -> f64 {
    let p = &f.params;
    let x = tower_from_ln(p, ln_x);
    match f.frac_iter(-s, &x) {
        Ok(v) => ln_f64(p, &v),
        Err(_) => f64::NAN,
    }
}

/// Tower for `e^{ln_x}`.
pub fn tower_from_ln(p: &Params, ln_x: f64) -> TowerReal {
    if ln_x < 700.0 {
        TowerReal::from_f64(p, ln_x.exp())
    } else {
        tower_exp(p, &TowerReal::from_f64(p, ln_x - p.ln_lambda()))
    }
}

#[derive(Debug, Clone)]
pub enum ProfileKind {
    /// `ψ = L^ε`.
    FracIterWidth(f64, Arc<SchroederFn>),
    /// `ψ(t) = t / (ln t)^ε`.
    LogQuotientWidth(f64),
}

/// Width profile `ψ` of the region `Ω_ψ = { Re z > x0, |Im z| < ψ(Re z) }`.
#[derive(Debug, Clone)]
pub struct GaugeProfile {
    pub kind: ProfileKind,
    pub x_min: f64,
    params: Params,
}

impl GaugeProfile {
    pub fn frac_iter(eps: f64, f: Arc<SchroederFn>) -> Self {
        let params = f.params;
        GaugeProfile {
            kind: ProfileKind::FracIterWidth(eps, f),
            x_min: params.x0,
            params,
        }
    }

    pub fn log_quotient(p: &Params, eps: f64) -> Self {
        GaugeProfile {
            kind: ProfileKind::LogQuotientWidth(eps),
            x_min: p.x0.max(eps.max(1.0).exp()),
            params: *p,
        }
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// `ψ(x)` for a hardware real.
    pub fn psi(&self, x: f64) -> Result<f64> {
        match &self.kind {
            ProfileKind::FracIterWidth(e, f) => f.l_frac(*e, x),
            ProfileKind::LogQuotientWidth(e) => {
                let l = x.ln();
                if !(l > 0.0) {
                    return Err(Error::Domain(format!("psi undefined at {x}")));
                }
                Ok(x / l.powf(*e))
            }
        }
    }

    /// `ψ(x)` for a tower argument.
    pub fn psi_tower(&self, x: &TowerReal) -> Result<TowerReal> {
        let p = &self.params;
        match &self.kind {
            ProfileKind::FracIterWidth(e, f) => f.frac_iter(-e, x),
            ProfileKind::LogQuotientWidth(e) => {
                if let Some(v) = x.to_f64_below(p, 1e300) {
                    return Ok(TowerReal::from_f64(p, self.psi(v)?));
                }
                let ln_ln = ln_f64(p, &crate::tower::ln_tower(p, x)?);
                Ok(mul_exp(p, x, -e * ln_ln))
            }
        }
    }

    /// `ln t - ln ψ(t)` for `t = e^u`, computed without cancellation.
    pub fn ln_t_over_psi(&self, u: f64) -> f64 {
        match &self.kind {
            ProfileKind::LogQuotientWidth(e) => e * u.ln(),
            ProfileKind::FracIterWidth(e, f) => {
                let t = tower_from_ln(&self.params, u);
                match f.frac_iter(-e, &t) {
                    Ok(v) => u - ln_f64(&self.params, &v),
                    Err(_) => f64::NAN,
                }
            }
        }
    }
}

/// Scale range for the predicate grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleRange {
    /// `t ∈ [lo, hi]`, 64 points per decade of `t`.
    T(f64, f64),
    /// `ln t ∈ [lo, hi]`, 64 points per decade of `ln t`.
    LnT(f64, f64),
}

impl ScaleRange {
    /// Grid in `u = ln t`.
    pub fn ln_grid(&self) -> Vec<f64> {
        match *self {
            ScaleRange::T(lo, hi) => {
                let (a, b) = (lo.ln(), hi.ln());
                let n = (((b - a) / std::f64::consts::LN_10) * POINTS_PER_DECADE).ceil() as usize;
                (0..=n.max(1))
                    .map(|i| a + (b - a) * i as f64 / n.max(1) as f64)
                    .collect()
            }
            ScaleRange::LnT(lo, hi) => geometric(lo, hi, POINTS_PER_DECADE),
        }
    }
}

fn geometric(lo: f64, hi: f64, per_decade: f64) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade).ceil().max(1.0) as usize;
    (0..=n)
        .map(|i| lo * (hi / lo).powf(i as f64 / n as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredicateRow {
    pub ln_t: f64,
    pub ln_lhs: f64,
    pub ln_rhs: f64,
    /// Positive when the inequality holds (in log-domain).
    pub margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct PredicateReport {
    pub rows: Vec<PredicateRow>,
    pub holds_everywhere: bool,
    /// `ln t` of the first grid point where the inequality fails.
    pub first_failure: Option<f64>,
    /// `ln t*`: smallest grid point beyond which the inequality holds at
    /// every grid point; `None` if it fails at the top of the range.
    pub threshold: Option<f64>,
}

impl PredicateReport {
    fn from_rows(rows: Vec<PredicateRow>) -> Self {
        let first_failure = rows.iter().find(|r| !r.holds).map(|r| r.ln_t);
        let threshold = match rows.iter().rposition(|r| !r.holds) {
            None => rows.first().map(|r| r.ln_t),
            Some(i) if i + 1 < rows.len() => Some(rows[i + 1].ln_t),
            Some(_) => None,
        };
        PredicateReport {
            holds_everywhere: first_failure.is_none(),
            first_failure,
            threshold,
            rows,
        }
    }

    /// Threshold `t*` as a hardware real (`inf` if beyond range).
    pub fn threshold_t(&self) -> Option<f64> {
        self.threshold.map(f64::exp)
    }

    /// CSV with columns `t, ln_lhs, ln_rhs, margin`.
    pub fn to_csv(&self, p: &Params) -> String {
        let mut s = String::from("t,ln_lhs,ln_rhs,margin\n");
        for r in &self.rows {
            let t = if r.ln_t < 700.0 {
                fmt_g17(r.ln_t.exp())
            } else {
                tower_from_ln(p, r.ln_t).to_string()
            };
            let _ = writeln!(
                s,
                "{t},{},{},{}",
                fmt_g17(r.ln_lhs),
                fmt_g17(r.ln_rhs),
                fmt_g17(r.margin)
            );
        }
        s
    }
}

/// Relative slack for equality-style satisfaction.
const EQ_TOL: f64 = 1e-12;

fn row(ln_t: f64, ln_lhs: f64, ln_rhs: f64, margin: f64) -> PredicateRow {
    let tol = EQ_TOL * ln_lhs.abs().max(ln_rhs.abs()).max(1.0);
    PredicateRow {
        ln_t,
        ln_lhs,
        ln_rhs,
        margin,
        holds: margin >= -tol,
    }
}

/// Condition (i): `p(t (ln t)^{1+δ} / ψ(t)) ≤ ψ(ln t)`.
pub fn check_condp(g: &GaugeSpec, psi: &GaugeProfile, delta: f64, range: ScaleRange) -> PredicateReport {
    let rows = range
        .ln_grid()
        .into_iter()
        .map(|u| {
            let ln_x = (1.0 + delta) * u.ln() + psi.ln_t_over_psi(u);
            let lhs = g.ln_p(ln_x);
            let rhs = psi.psi(u).map(f64::ln).unwrap_or(f64::NAN);
            row(u, lhs, rhs, rhs - lhs)
        })
        .collect();
    PredicateReport::from_rows(rows)
}

/// Condition (ii): `p(t ln t / ψ(t)) ≥ (ln t)^{1+δ}`.
pub fn check_condp2(g: &GaugeSpec, psi: &GaugeProfile, delta: f64, range: ScaleRange) -> PredicateReport {
    let rows = range
        .ln_grid()
        .into_iter()
        .map(|u| {
            let ln_x = u.ln() + psi.ln_t_over_psi(u);
            let lhs = g.ln_p(ln_x);
            let rhs = (1.0 + delta) * u.ln();
            row(u, lhs, rhs, lhs - rhs)
        })
        .collect();
    PredicateReport::from_rows(rows)
}
