//! Schröder conjugacy `S(βz) = E(S(z))` at the repelling fixed point and the
//! real fractional iterates `E^r(x) = S(β^r S^{-1}(x))` on `[α, ∞)`.
//!
//! `S` is built twice: from the Taylor recursion obtained by matching
//! coefficients of `S(βz) = λ e^{S(z)}`, and from the limit
//! `S(z) = lim E^n(β + z/β^n)`. The series is used only on the disk where the
//! two agree; outside it `S(z) = E^k(S(z/β^k))` takes over.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::dynamics::Params;
use crate::error::{Error, Result};
use crate::tower::{rel_diff, tower_exp, tower_log, TowerReal};

/// Agreement required between the series and the limit formula.
pub const AGREEMENT_TOL: f64 = 1e-9;

const RADIUS_CANDIDATES: [f64; 8] = [2.0, 1.5, 1.0, 0.75, 0.5, 0.25, 0.125, 0.0625];

/// The normalized Schröder function (`S(0) = β`, `S'(0) = 1`).
#[derive(Debug, Clone)]
pub struct SchroederFn {
    pub params: Params,
    /// Taylor coefficients at 0.
    pub coeffs: Vec<f64>,
    /// Series radius: the series is validated on `|z| ≤ β·radius`.
    pub radius: f64,
    /// Deepest `n` used by the limit formula during validation.
    pub limit_depth: usize,
    /// Largest series/limit discrepancy seen during validation.
    pub residual: f64,
    s_lo: f64,
    s_hi: f64,
}

/// Taylor coefficients of `S` from `β^k a_k = β g_k`, where `g` are the
/// coefficients of `exp(S(z) - β)`. Every term of the recursion is
/// non-negative, so no cancellation occurs.
pub fn taylor_coefficients(p: &Params, n: usize) -> Vec<f64> {
    let beta = p.beta;
    let mut a = vec![0.0; n.max(2)];
    let mut g = vec![0.0; n.max(2)];
    a[0] = beta;
    a[1] = 1.0;
    g[0] = 1.0;
    g[1] = 1.0;
    let mut beta_k = beta;
    for k in 2..n {
        beta_k *= beta;
        let rest: f64 = (1..k).map(|j| j as f64 * a[j] * g[k - j]).sum::<f64>() / k as f64;
        a[k] = beta * rest / (beta_k - beta);
        g[k] = a[k] + rest;
    }
    a.truncate(n.max(2));
    a
}

fn horner_c(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

fn horner(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut v = 0.0;
    let mut d = 0.0;
    for &c in coeffs.iter().rev() {
        d = d * x + v;
        v = v * x + c;
    }
    (v, d)
}

/// `lim E^n(β + z/β^n)` with two levels of Richardson extrapolation in the
/// ratio `β` (the error expands in powers of `β^{-n}`). The depth grows
/// until successive extrapolants differ by less than `1e-12` relative or
/// roundoff starts to dominate. Returns the value and the depth reached.
pub fn limit_formula(p: &Params, z: Complex64) -> (Complex64, usize) {
    let beta = p.beta;
    let e = |w: Complex64| p.lambda * w.exp();
    let iterate = |n: usize| {
        let mut w = Complex64::new(beta, 0.0) + z / beta.powi(n as i32);
        for _ in 0..n {
            w = e(w);
        }
        w
    };
    let b2 = beta * beta;
    let mut n = ((z.norm().max(1e-3) / 1e-2).ln() / beta.ln()).ceil().max(1.0) as usize;
    let mut f = [iterate(n), iterate(n + 1), iterate(n + 2)];
    let extrapolate = |f: &[Complex64; 3]| {
        let r1a = (f[1] * beta - f[0]) / (beta - 1.0);
        let r1b = (f[2] * beta - f[1]) / (beta - 1.0);
        (r1b * b2 - r1a) / (b2 - 1.0)
    };
    let mut best = extrapolate(&f);
    let mut best_gap = f64::INFINITY;
    for _ in 0..60 {
        n += 1;
        f = [f[1], f[2], iterate(n + 2)];
        let next = extrapolate(&f);
        let gap = (next - best).norm() / next.norm().max(1.0);
        if gap > best_gap && best_gap < 1e-9 {
            break;
        }
        best = next;
        best_gap = gap;
        if gap < 1e-12 {
            break;
        }
    }
    (best, n + 2)
}

/// Builds `S` with `n_coeffs` Taylor coefficients and validates the series
/// disk against the limit formula at 20 probes.
pub fn build_schroeder(p: &Params, n_coeffs: usize) -> Result<SchroederFn> {
    if n_coeffs < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 coefficients, got {n_coeffs}"
        )));
    }
    let coeffs = taylor_coefficients(p, n_coeffs);
    let mut achieved = f64::INFINITY;
    for &rho in &RADIUS_CANDIDATES {
        let disk = p.beta * rho;
        let mut worst: f64 = 0.0;
        let mut depth = 0;
        for z in probe_points(disk) {
            let (lim, n) = limit_formula(p, z);
            let ser = horner_c(&coeffs, z);
            worst = worst.max((lim - ser).norm() / lim.norm().max(1.0));
            depth = depth.max(n);
        }
        if worst <= AGREEMENT_TOL {
            let s_lo = horner(&coeffs, -rho).0;
            let s_hi = horner(&coeffs, rho).0;
            return Ok(SchroederFn {
                params: *p,
                coeffs,
                radius: rho,
                limit_depth: depth,
                residual: worst,
                s_lo,
                s_hi,
            });
        }
        achieved = achieved.min(worst);
    }
    Err(Error::Resolution(format!(
        "series and limit formula disagree; best residual {achieved:e}"
    )))
}

/// 20 probes: 12 on the boundary circle, 4 at half radius, 4 on the real axis.
fn probe_points(disk: f64) -> Vec<Complex64> {
    let mut v = Vec::with_capacity(20);
    for j in 0..12 {
        v.push(Complex64::from_polar(
            disk,
            std::f64::consts::TAU * (j as f64 + 0.5) / 12.0,
        ));
    }
    for j in 0..4 {
        v.push(Complex64::from_polar(
            0.5 * disk,
            std::f64::consts::TAU * j as f64 / 4.0 + 0.3,
        ));
    }
    for &t in &[-1.0, -0.37, 0.61, 1.0] {
        v.push(Complex64::new(t * disk, 0.0));
    }
    v
}

impl SchroederFn {
    /// Series value at a complex point inside the validated disk.
    pub fn series(&self, z: Complex64) -> Complex64 {
        horner_c(&self.coeffs, z)
    }

    /// Series value and derivative at a real point.
    pub fn series_real(&self, x: f64) -> (f64, f64) {
        horner(&self.coeffs, x)
    }

    /// `S(x)` for any real `x`, as a tower.
    pub fn eval(&self, x: f64) -> TowerReal {
        let p = &self.params;
        let mut k = 0i32;
        let mut y = x;
        while y.abs() > self.radius {
            k += 1;
            y = x / p.beta.powi(k);
        }
        let mut t = TowerReal::from_f64(p, self.series_real(y).0);
        for _ in 0..k {
            t = tower_exp(p, &t);
        }
        t
    }

    /// `S^{-1}(y)` for `y > α`.
    pub fn inverse(&self, y: &TowerReal) -> Result<f64> {
        let p = &self.params;
        if y.level == 0 && !(y.mantissa > p.alpha) {
            return Err(Error::Domain(format!(
                "S^-1 undefined at {} <= alpha",
                y.mantissa
            )));
        }
        let hi = TowerReal::from_f64(p, self.s_hi);
        let lo = TowerReal::from_f64(p, self.s_lo);
        let mut t = *y;
        let mut k = 0i32;
        while t > hi || t < lo {
            t = tower_log(p, &t)?;
            k += 1;
            if k > 4000 {
                return Err(Error::Resolution(format!("S^-1({y}) failed to descend")));
            }
        }
        let target = t.to_f64(p);
        Ok(self.solve_series(target) * p.beta.powi(k))
    }

    /// Safeguarded Newton for `series(x) = target` on `[-radius, radius]`.
    fn solve_series(&self, target: f64) -> f64 {
        let (mut lo, mut hi) = (-self.radius, self.radius);
        let mut x = (target - self.params.beta).clamp(lo, hi);
        for _ in 0..200 {
            let (v, d) = self.series_real(x);
            let f = v - target;
            if f == 0.0 {
                return x;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let newton = x - f / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-17 * (1.0 + x.abs()) || hi - lo <= f64::EPSILON * 4.0 {
                return next;
            }
            x = next;
        }
        x
    }

    /// Fractional iterate `E^r(x)` on `[α, ∞)`; negative `r` gives `L^{|r|}`.
    pub fn frac_iter(&self, r: f64, x: &TowerReal) -> Result<TowerReal> {
        let p = &self.params;
        if x.level == 0 && x.mantissa < p.alpha {
            return Err(Error::Domain(format!(
                "E^r undefined below alpha: {}",
                x.mantissa
            )));
        }
        if x.level == 0 && x.mantissa == p.alpha {
            return Ok(*x);
        }
        let s = self.inverse(x)?;
        Ok(self.eval(p.beta.powf(r) * s))
    }

    /// `L^r(x)` for a hardware real, returned as a hardware real.
    pub fn l_frac(&self, r: f64, x: f64) -> Result<f64> {
        let p = &self.params;
        Ok(self.frac_iter(-r, &TowerReal::from_f64(p, x))?.to_f64(p))
    }

    /// Coefficient dump as `index,coefficient` CSV.
    pub fn coeffs_csv(&self) -> String {
        let mut s = String::from("index,coefficient\n");
        for (i, c) in self.coeffs.iter().enumerate() {
            let _ = writeln!(s, "{i},{}", crate::tower::fmt_g17(*c));
        }
        s
    }

    /// Relative error of two towers (convenience re-export for callers).
    pub fn rel_diff(&self, a: &TowerReal, b: &TowerReal) -> f64 {
        rel_diff(&self.params, a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Params, SchroederFn) {
        let p = Params::new(0.25).unwrap();
        let f = build_schroeder(&p, 40).unwrap();
        (p, f)
    }

    #[test]
    fn normalization_and_second_coefficient() {
        let (p, f) = setup();
        assert_eq!(f.coeffs[0], p.beta);
        assert_eq!(f.coeffs[1], 1.0);
        // Matching z² terms: a2 β² = β (a2 + 1/2).
        let a2 = 1.0 / (2.0 * (p.beta - 1.0));
        assert!((f.coeffs[2] - a2).abs() < 1e-15);
        // Second difference of the limit formula.
        let h = 0.01;
        let sp = limit_formula(&p, Complex64::new(h, 0.0)).0.re;
        let sm = limit_formula(&p, Complex64::new(-h, 0.0)).0.re;
        let second = (sp + sm - 2.0 * p.beta) / (2.0 * h * h);
        assert!((second - a2).abs() < 1e-5, "{second} vs {a2}");
        assert!(f.coeffs.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn rejects_too_few_coefficients() {
        let p = Params::new(0.25).unwrap();
        assert!(build_schroeder(&p, 1).is_err());
    }

    #[test]
    fn functional_equation_on_disk() {
        let (p, f) = setup();
        let mut worst: f64 = 0.0;
        for i in 0..20 {
            for j in 0..20 {
                let r = f.radius * (i as f64 + 0.5) / 20.0;
                let z = Complex64::from_polar(r, std::f64::consts::TAU * j as f64 / 20.0);
                let lhs = f.series(z * p.beta);
                let rhs = p.lambda * f.series(z).exp();
                worst = worst.max((lhs - rhs).norm());
            }
        }
        assert!(worst <= 1e-9, "residual {worst:e}");
    }

    #[test]
    fn eval_examples() {
        let (p, f) = setup();
        assert!((f.eval(0.0).to_f64(&p) - p.beta).abs() < 1e-15);
        for i in 0..=20 {
            let t = -5.0 + 0.5 * i as f64;
            let lhs = f.eval(p.beta * t);
            let rhs = tower_exp(&p, &f.eval(t));
            assert!(rel_diff(&p, &lhs, &rhs) < 1e-9, "t = {t}");
        }
        // S(x) - α decays like |x|^{ln α / ln β}: about 0.02 at x = -50.
        let s50 = f.eval(-50.0).to_f64(&p);
        let lim = limit_formula(&p, Complex64::new(-50.0, 0.0)).0.re;
        assert!((s50 - lim).abs() < 1e-9, "{s50} vs {lim}");
        assert!(s50 > p.alpha && s50 - p.alpha < 0.03);
        assert!((f.eval(-1e6).to_f64(&p) - p.alpha).abs() < 1e-6);
        let mut prev = f.eval(-30.0);
        for i in 1..200 {
            let cur = f.eval(-30.0 + 0.25 * i as f64);
            assert!(cur > prev);
            prev = cur;
        }
    }

    #[test]
    fn inverse_examples() {
        let (p, f) = setup();
        assert!(f.inverse(&TowerReal::from_f64(&p, p.beta)).unwrap().abs() < 1e-15);
        let y = tower_exp(&p, &f.eval(1.0));
        assert!((f.inverse(&y).unwrap() - p.beta).abs() < 1e-12);
        // Independent bisection on eval.
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f.eval(mid).to_f64(&p) < 10.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let x = f.inverse(&TowerReal::from_f64(&p, 10.0)).unwrap();
        assert!((x - lo).abs() < 1e-10, "{x} vs {lo}");
        assert!(f.inverse(&TowerReal::from_f64(&p, 0.2)).is_err());
    }

    #[test]
    fn frac_iter_examples() {
        let (p, f) = setup();
        for &x in &[2.5, 4.0, 10.0, 1e3, 1e8] {
            let t = TowerReal::from_f64(&p, x);
            let e = tower_exp(&p, &t);
            assert!(rel_diff(&p, &f.frac_iter(1.0, &t).unwrap(), &e) < 1e-9);
            let half = f.frac_iter(0.5, &f.frac_iter(0.5, &t).unwrap()).unwrap();
            assert!(rel_diff(&p, &half, &e) < 1e-8);
        }
        let x = 1e6;
        let lhalf = f.l_frac(0.5, x).unwrap();
        assert!(p.l(x) < lhalf && lhalf < x);
        let a = TowerReal::from_f64(&p, p.alpha);
        assert_eq!(f.frac_iter(0.7, &a).unwrap(), a);
        assert!(f.frac_iter(0.5, &TowerReal::from_f64(&p, 0.1)).is_err());
    }

    #[test]
    fn coefficient_csv() {
        let (_, f) = setup();
        let csv = f.coeffs_csv();
        assert!(csv.starts_with("index,coefficient\n0,"));
        assert_eq!(csv.lines().count(), f.coeffs.len() + 1);
    }
}
