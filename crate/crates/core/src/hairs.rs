//! Itineraries, finite-depth hair points `h_{s,n}(u)`, hair traces, endpoint
//! estimates and horizon-certified membership in `𝒳(x0, ψ)`.
//!
//! Hair points are computed relative to the real orbit `x_k = E^k(u)`: the
//! descent tracks `w_k = x_k + a_k + i b_k`, so
//!
//! ```text
//! a_k = ½ ln((1 + a/x)² + (b/x)²),   b_k = atan2(b, x + a) + 2π s_k
//! ```
//!
//! with `x = x_{k+1}`. Once `x_{k+1}` exceeds hardware range every ratio
//! underflows and the step reduces to `a_k = 0, b_k = 2π s_k`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{itinerary_of, Params};
use crate::error::{Error, Result};
use crate::gauge::GaugeProfile;
use crate::par::{map_slice, Exec};
use crate::tower::{fmt_g17, step_orbit, tower_exp, RealDominantComplex, TowerReal};

/// Rule extending an itinerary past its prefix.
#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    Periodic(Vec<i64>),
    /// Uniform symbols in `[-bound, bound]` from a seeded stream.
    Bounded {
        bound: i64,
        seed: u64,
    },
    /// `s_k = round(E^k(t))`.
    Growth(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Itinerary {
    pub prefix: Vec<i64>,
    pub tail: Tail,
    start: usize,
}

impl Itinerary {
    pub fn new(prefix: Vec<i64>, tail: Tail) -> Result<Self> {
        match &tail {
            Tail::Periodic(b) if b.is_empty() => return Err(Error::Domain("empty periodic block".into())),
            Tail::Bounded { bound, .. } if *bound < 0 => {
                return Err(Error::Domain("negative symbol bound".into()))
            }
            Tail::Growth(t) if !t.is_finite() => {
                return Err(Error::Domain("growth parameter must be finite".into()))
            }
            _ => {}
        }
        Ok(Itinerary {
            prefix,
            tail,
            start: 0,
        })
    }

    pub fn zeros() -> Self {
        Itinerary {
            prefix: vec![],
            tail: Tail::Periodic(vec![0]),
            start: 0,
        }
    }

    pub fn periodic(block: Vec<i64>) -> Result<Self> {
        Self::new(vec![], Tail::Periodic(block))
    }

    /// Finite prefix followed by zeros.
    pub fn with_prefix(prefix: Vec<i64>) -> Self {
        Itinerary {
            prefix,
            tail: Tail::Periodic(vec![0]),
            start: 0,
        }
    }

    /// Symbol `s_k`.
    pub fn symbol(&self, p: &Params, k: usize) -> Result<i64> {
        let i = k + self.start;
        if i < self.prefix.len() {
            return Ok(self.prefix[i]);
        }
        let j = i - self.prefix.len();
        match &self.tail {
            Tail::Periodic(b) => Ok(b[j % b.len()]),
            Tail::Bounded { bound, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(j as u64);
                Ok(rng.gen_range(-bound..=*bound))
            }
            Tail::Growth(t) => {
                let mut x = TowerReal::from_f64(p, *t);
                for _ in 0..i {
                    x = tower_exp(p, &x);
                }
                match x.to_f64_below(p, 2f64.powi(62)) {
                    Some(v) => Ok(v.round() as i64),
                    None => Err(Error::Range(format!("growth symbol s_{k} not representable"))),
                }
            }
        }
    }

    pub fn symbols(&self, p: &Params, n: usize) -> Result<Vec<i64>> {
        (0..n).map(|k| self.symbol(p, k)).collect()
    }

    /// The shifted sequence `(s_1, s_2, …)`.
    pub fn shift(&self) -> Self {
        Itinerary {
            start: self.start + 1,
            ..self.clone()
        }
    }

    /// A real `t` with `limsup |s_k| / E^k(t) < ∞`.
    pub fn certificate(&self, p: &Params) -> f64 {
        critical_parameter(p, self) + 1.0
    }
}

/// `u_s`, the infimum of parameters for which the hair is defined.
pub fn critical_parameter(p: &Params, s: &Itinerary) -> f64 {
    match s.tail {
        Tail::Growth(t) => {
            let mut x = t;
            for _ in 0..s.start {
                x = p.e(x);
            }
            x.max(p.beta)
        }
        _ => p.beta,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HairPoint {
    pub itinerary: Itinerary,
    pub u: f64,
    pub depth: usize,
    /// `h_{s,n}(u)`; always a hardware value since `u` is.
    pub value: Complex64,
}

impl HairPoint {
    pub fn rdc(&self, p: &Params) -> RealDominantComplex {
        RealDominantComplex::from_complex(p, self.value)
    }

    /// `E^k(h_{s,n}(u)) = h_{σ^k s, n-k}(E^k(u))`, exact for `k ≤ n`, in
    /// tower form.
    pub fn image(&self, p: &Params, k: usize) -> Result<RealDominantComplex> {
        if k > self.depth {
            return Err(Error::Domain(format!(
                "image index {k} beyond depth {}",
                self.depth
            )));
        }
        let mut s = self.itinerary.clone();
        let mut start = TowerReal::from_f64(p, self.u);
        for _ in 0..k {
            s = s.shift();
            start = tower_exp(p, &start);
        }
        let (x, off) = descend(p, &s, &start, self.depth - k)?;
        let re = if x.is_finite() {
            TowerReal::from_f64(p, x + off.re)
        } else {
            start
        };
        Ok(RealDominantComplex::from_re_im(p, &re, off.im))
    }

    /// The images `E^k(h)` for `k = 0..len` (at most `depth + 1`).
    pub fn orbit(&self, p: &Params, len: usize) -> Vec<RealDominantComplex> {
        (0..len.min(self.depth + 1))
            .map_while(|k| self.image(p, k).ok())
            .collect()
    }
}

/// `h_{s,n}(u) = (L_{s_0} ∘ … ∘ L_{s_n} ∘ E^{n+1})(u)`.
pub fn trace_hair_point(p: &Params, s: &Itinerary, u: f64, n: usize) -> Result<HairPoint> {
    let us = critical_parameter(p, s);
    if !(u > us) || !u.is_finite() {
        return Err(Error::Domain(format!(
            "u = {u} must exceed the critical parameter {us}"
        )));
    }
    let (_, off) = descend(p, s, &TowerReal::from_f64(p, u), n)?;
    Ok(HairPoint {
        itinerary: s.clone(),
        u,
        depth: n,
        value: Complex64::new(u + off.re, off.im),
    })
}

/// Offsets `(a_0, b_0)` of `h_{s,n}` from the real orbit started at `u`,
/// together with `u` as a hardware value (`inf` if beyond range).
fn descend(p: &Params, s: &Itinerary, u: &TowerReal, n: usize) -> Result<(f64, Complex64)> {
    let syms = s.symbols(p, n + 1)?;
    let mut orbit = Vec::with_capacity(n + 2);
    let mut x = *u;
    for _ in 0..=n + 1 {
        orbit.push(x.to_f64(p));
        x = tower_exp(p, &x);
    }
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for k in (0..=n).rev() {
        let x = orbit[k + 1];
        let (na, arg) = if x.is_finite() {
            let inv = 1.0 / x;
            let (ra, rb) = (a * inv, b * inv);
            (0.5 * (2.0 * ra + ra * ra + rb * rb).ln_1p(), b.atan2(x + a))
        } else {
            (0.0, 0.0)
        };
        a = na;
        b = arg + 2.0 * PI * syms[k] as f64;
        if orbit[k] + a < p.beta {
            return Err(Error::Escaped { step: k });
        }
    }
    Ok((orbit[0], Complex64::new(a, b)))
}

/// Lower and upper bounds on `Re h_{s,n}(u)` for a traced point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub re: f64,
    pub lower: f64,
    pub upper: f64,
    /// `min(Re - lower, upper - Re)` plus a rounding allowance of
    /// `ROUNDING_REL · u`; non-negative when the sandwich holds.
    pub slack: f64,
}

/// Relative rounding allowance in the sandwich check.
pub const ROUNDING_REL: f64 = 1e-14;

/// `u ≤ Re h_{s,n}(u) ≤ u + π Σ_{k=1}^n (2|s_k|+1) / (β^{k-1} E^k(u))`,
/// with the sum accumulated in log-domain.
pub fn sandwich(p: &Params, h: &HairPoint) -> Result<Sandwich> {
    let syms = h.itinerary.symbols(p, h.depth + 1)?;
    let mut x = TowerReal::from_f64(p, h.u);
    let mut sum = 0.0;
    for (k, &sk) in syms.iter().enumerate().skip(1) {
        x = tower_exp(p, &x);
        let ln_ek = crate::tower::ln_f64(p, &x);
        let ln_term = (PI * (2 * sk.unsigned_abs() + 1) as f64).ln() - (k as f64 - 1.0) * p.beta.ln() - ln_ek;
        sum += ln_term.exp();
    }
    let re = h.value.re;
    let upper = h.u + sum;
    let slack = (re - h.u).min(upper - re) + ROUNDING_REL * h.u;
    Ok(Sandwich {
        re,
        lower: h.u,
        upper,
        slack,
    })
}

/// Relative distance between `E(h_{s,n}(u))` and `h_{σs,n-1}(E(u))`.
pub fn conjugacy_error(p: &Params, h: &HairPoint) -> Result<f64> {
    if h.depth == 0 {
        return Err(Error::Domain("conjugacy needs depth ≥ 1".into()));
    }
    let lhs = p.lambda * h.value.exp();
    let rhs = trace_hair_point(p, &h.itinerary.shift(), p.e(h.u), h.depth - 1)?.value;
    if !lhs.is_finite() {
        return Err(Error::Range("conjugacy check beyond level 0".into()));
    }
    Ok((lhs - rhs).norm() / rhs.norm())
}

#[derive(Debug, Clone)]
pub struct HairTrace {
    pub points: Vec<HairPoint>,
    /// Euclidean distance between consecutive samples.
    pub gaps: Vec<f64>,
}

impl HairTrace {
    /// CSV rows `u, depth, re, im, level, strips` (strips `;`-separated).
    pub fn to_csv(&self, p: &Params) -> String {
        let mut s = String::from("u,depth,re,im,level,strips\n");
        for h in &self.points {
            let z = h.value;
            let n = trusted_symbols(p, h.u, h.depth + 1);
            let strips = (1..=n)
                .rev()
                .find_map(|m| itinerary_of(p, z, m).ok())
                .map(|v| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";"))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                fmt_g17(h.u),
                h.depth,
                fmt_g17(z.re),
                fmt_g17(z.im),
                h.rdc(p).r.level,
                strips
            );
        }
        s
    }
}

const TRUSTED_MAGNITUDE: f64 = 1e6;

/// Symbols of a point near `E^k(u)` readable by forward iteration: the
/// strip of `E^k` is only resolved while `E^k(u)` stays small.
fn trusted_symbols(p: &Params, u: f64, n: usize) -> usize {
    let mut x = u;
    let mut k = 0;
    while k < n && x < TRUSTED_MAGNITUDE {
        x = p.e(x);
        k += 1;
    }
    k
}

/// `m` samples of `h_{s,n}` with `u - u_s` geometrically spaced in
/// `[u_lo - u_s, u_hi - u_s]`.
pub fn trace_hair(
    p: &Params,
    s: &Itinerary,
    u_lo: f64,
    u_hi: f64,
    n: usize,
    m: usize,
    exec: Exec,
) -> Result<HairTrace> {
    let us = critical_parameter(p, s);
    if !(us < u_lo && u_lo < u_hi) || m < 2 {
        return Err(Error::Domain(format!(
            "need u_s = {us} < u_lo = {u_lo} < u_hi = {u_hi} and m ≥ 2"
        )));
    }
    let (d0, d1) = (u_lo - us, u_hi - us);
    let us_grid: Vec<f64> = (0..m)
        .map(|i| {
            if i == m - 1 {
                u_hi
            } else {
                us + d0 * (d1 / d0).powf(i as f64 / (m - 1) as f64)
            }
        })
        .collect();
    let points = map_slice(exec, &us_grid, |&u| trace_hair_point(p, s, u, n))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let gaps = points
        .windows(2)
        .map(|w| (w[1].value - w[0].value).norm())
        .collect();
    Ok(HairTrace { points, gaps })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndpointEstimate {
    pub value: Complex64,
    /// Difference of the last two extrapolants; an empirical figure only.
    pub error_bound: f64,
}

/// Extrapolates `h_{s,n}(u_s + δ_j)`, `δ_j = 2^{-j}`, `j = 3..12`, with
/// Aitken's Δ² on the last four samples (handles any geometric rate,
/// including the complex power laws seen at periodic endpoints).
pub fn estimate_endpoint(p: &Params, s: &Itinerary, n: usize, tol: f64) -> Result<EndpointEstimate> {
    if !(tol > 0.0) {
        return Err(Error::Domain("tol must be positive".into()));
    }
    let us = critical_parameter(p, s);
    let vals = (3..=12)
        .map(|j| trace_hair_point(p, s, us + 2f64.powi(-j), n).map(|h| h.value))
        .collect::<Result<Vec<_>>>()?;
    let aitken = |h: &[Complex64]| {
        let (d0, d1) = (h[1] - h[0], h[2] - h[1]);
        let den = d1 - d0;
        if den.norm() <= 1e-300 || d1.norm() == 0.0 {
            h[2]
        } else {
            h[2] - d1 * d1 / den
        }
    };
    let m = vals.len();
    let e1 = aitken(&vals[m - 4..m - 1]);
    let e2 = aitken(&vals[m - 3..]);
    let error_bound = (e2 - e1).norm();
    if !error_bound.is_finite() || error_bound > tol {
        return Err(Error::Resolution(format!(
            "endpoint not resolved at depth {n} (spread {error_bound:.3e} > {tol:.3e})"
        )));
    }
    Ok(EndpointEstimate {
        value: e2,
        error_bound,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    /// Inside `Ω_ψ` and dominating `E^k(x0)` for every `k ≤ horizon`.
    In {
        horizon: usize,
    },
    Out {
        k: usize,
        reason: String,
    },
}

impl Verdict {
    pub fn is_in(&self) -> bool {
        matches!(self, Verdict::In { .. })
    }
}

/// Horizon-`k_max` membership test for `𝒳(x0, ψ)`, stepping `z` forward
/// with tower arithmetic.
pub fn in_x(p: &Params, psi: &GaugeProfile, z: &RealDominantComplex, k_max: usize) -> Verdict {
    in_x_orbit(p, psi, &forward_orbit(p, z, k_max + 1), k_max)
}

/// `z, E(z), …` up to `len` points, truncated at the first step that leaves
/// the representable regime.
pub fn forward_orbit(p: &Params, z: &RealDominantComplex, len: usize) -> Vec<RealDominantComplex> {
    let mut out = Vec::with_capacity(len);
    let mut w = *z;
    while out.len() < len {
        out.push(w);
        match step_orbit(p, &w) {
            Ok(v) => w = v,
            Err(_) => break,
        }
    }
    out
}

/// Membership test on a precomputed orbit `orbit[k] = E^k(z)`.
pub fn in_x_orbit(p: &Params, psi: &GaugeProfile, orbit: &[RealDominantComplex], k_max: usize) -> Verdict {
    let mut anchor = TowerReal::from_f64(p, p.x0);
    for k in 0..=k_max {
        let Some(w) = orbit.get(k) else {
            return Verdict::Out {
                k,
                reason: "orbit not representable".into(),
            };
        };
        let re = w.re(p);
        if re <= anchor {
            return Verdict::Out {
                k,
                reason: format!("Re below E^{k}(x0) = {anchor}"),
            };
        }
        let width = match psi.psi_tower(&re) {
            Ok(v) => v,
            Err(e) => {
                return Verdict::Out {
                    k,
                    reason: e.to_string(),
                }
            }
        };
        if w.abs_im(p) >= width {
            return Verdict::Out {
                k,
                reason: format!("|Im| not below psi(Re) = {width}"),
            };
        }
        anchor = tower_exp(p, &anchor);
    }
    Verdict::In { horizon: k_max }
}

/// A certificate `E^shift(z) ∈ 𝒳(x0, L^ε)` found by search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub eps: f64,
    pub shift: usize,
}

/// Searches shifts (outer) and the given `ε` values (inner) for a
/// horizon-`k_max` certificate on `orbit[shift..]`. `None` does not imply
/// non-membership.
pub fn find_certificate(
    p: &Params,
    schroeder: &std::sync::Arc<crate::schroeder::SchroederFn>,
    orbit: &[RealDominantComplex],
    eps_grid: &[f64],
    max_shift: usize,
    k_max: usize,
) -> Option<Certificate> {
    for shift in 0..=max_shift.min(orbit.len().saturating_sub(1)) {
        for &eps in eps_grid {
            let psi = GaugeProfile::frac_iter(eps, schroeder.clone());
            if in_x_orbit(p, &psi, &orbit[shift..], k_max).is_in() {
                return Some(Certificate { eps, shift });
            }
        }
    }
    None
}
