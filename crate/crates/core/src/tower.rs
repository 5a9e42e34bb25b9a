//! Overflow-proof representation of iterated-exponential magnitudes.
//!
//! A [`TowerReal`] stores `E^level(mantissa)` in canonical form: either
//! `level = 0` with `mantissa < E(x0)`, or `level ≥ 1` with the mantissa in
//! the fundamental interval `[x0, E(x0))`. Since `E` maps `[x0, E(x0))`
//! bijectively onto `[E(x0), E²(x0))`, canonical forms are unique and order
//! is lexicographic on `(level, mantissa)`.
//!
//! Precision contract: the mantissa carries relative error at most
//! `level · 1e-14`; the absolute error of the represented value is not
//! meaningful at high levels.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::dynamics::{principal_arg, Params};
use crate::error::{Error, Result};

/// The value `E^level(mantissa)` for the ambient [`Params`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerReal {
    pub level: u32,
    pub mantissa: f64,
}

impl TowerReal {
    /// Canonical tower for a hardware real.
    pub fn from_f64(p: &Params, x: f64) -> Self {
        Self::canonical(p, 0, x)
    }

    /// Canonical form of `E^level(x)`.
    pub fn canonical(p: &Params, mut level: u32, mut x: f64) -> Self {
        let hi = p.e_x0();
        let below_hi = hi.next_down();
        if x.is_nan() {
            return TowerReal { level, mantissa: x };
        }
        if x == f64::INFINITY {
            // Not representable; callers never construct this deliberately.
            return TowerReal { level, mantissa: x };
        }
        while x >= hi {
            x = p.l(x);
            level += 1;
            if x < p.x0 {
                x = p.x0;
            }
        }
        while level > 0 && x < p.x0 {
            x = p.e(x);
            level -= 1;
            if x >= hi {
                x = below_hi;
            }
        }
        TowerReal { level, mantissa: x }
    }

    pub fn zero() -> Self {
        TowerReal {
            level: 0,
            mantissa: 0.0,
        }
    }

    /// Value as a hardware float; `+inf` once it overflows.
    pub fn to_f64(&self, p: &Params) -> f64 {
        let mut x = self.mantissa;
        for _ in 0..self.level {
            x = p.e(x);
            if !x.is_finite() {
                return f64::INFINITY;
            }
        }
        x
    }

    /// Hardware value if finite and at most `limit`.
    pub fn to_f64_below(&self, p: &Params, limit: f64) -> Option<f64> {
        let v = self.to_f64(p);
        (v.is_finite() && v.abs() <= limit).then_some(v)
    }

    pub fn is_finite_f64(&self, p: &Params) -> bool {
        self.to_f64(p).is_finite()
    }
}

impl PartialOrd for TowerReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.level.cmp(&other.level) {
            Ordering::Equal => self.mantissa.partial_cmp(&other.mantissa),
            o => Some(o),
        }
    }
}

impl fmt::Display for TowerReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E^{}({})", self.level, fmt_g17(self.mantissa))
    }
}

impl FromStr for TowerReal {
    type Err = Error;

    /// Parses the `E^{m}({mantissa})` serialization (assumed canonical).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Domain(format!("malformed tower literal {s:?}"));
        let rest = s.trim().strip_prefix("E^").ok_or_else(bad)?;
        let open = rest.find('(').ok_or_else(bad)?;
        let level = rest[..open].parse::<u32>().map_err(|_| bad())?;
        let inner = rest[open + 1..].strip_suffix(')').ok_or_else(bad)?;
        let mantissa = inner.parse::<f64>().map_err(|_| bad())?;
        Ok(TowerReal { level, mantissa })
    }
}

/// `printf("%.17g")`-style formatting: 17 significant digits, trailing
/// zeros trimmed, scientific notation outside `[1e-5, 1e17)`.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.16e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-5..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mant), sign, exp.abs())
    } else {
        let decimals = (16 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    }
}

/// Applies `E` once at the representation level.
pub fn tower_exp(p: &Params, t: &TowerReal) -> TowerReal {
    if t.level >= 1 {
        return TowerReal {
            level: t.level + 1,
            mantissa: t.mantissa,
        };
    }
    if t.mantissa >= p.x0 {
        TowerReal {
            level: 1,
            mantissa: t.mantissa,
        }
    } else {
        TowerReal::from_f64(p, p.e(t.mantissa))
    }
}

/// Applies `L = E^{-1}`; rejects values `≤ α`.
pub fn tower_log(p: &Params, t: &TowerReal) -> Result<TowerReal> {
    if t.level >= 1 {
        return Ok(TowerReal {
            level: t.level - 1,
            mantissa: t.mantissa,
        });
    }
    if !(t.mantissa > p.alpha) {
        return Err(Error::Domain(format!(
            "L undefined on the real ray below alpha: {} <= {}",
            t.mantissa, p.alpha
        )));
    }
    Ok(TowerReal {
        level: 0,
        mantissa: p.l(t.mantissa),
    })
}

/// Canonical tower for `value + d`, `|d| ≤ 1e15`.
///
/// At level ≥ 1 the sum is formed as `E(L(value) + ln(1 + d/value))`,
/// recursively. Once `d/value` falls below the resolution of doubles the
/// correction is dropped; for `|d| ≤ 1e15` this happens at every level
/// whose value exceeds `1e308`.
pub fn add_small(p: &Params, t: &TowerReal, d: f64) -> TowerReal {
    if d == 0.0 {
        return *t;
    }
    if t.level == 0 {
        return TowerReal::from_f64(p, t.mantissa + d);
    }
    let v = t.to_f64(p);
    let ratio = if v.is_finite() { d / v } else { 0.0 };
    if ratio == 0.0 {
        return *t;
    }
    if ratio <= -1.0 || v + d < p.e_x0() {
        return TowerReal::from_f64(p, v + d);
    }
    let inner = TowerReal {
        level: t.level - 1,
        mantissa: t.mantissa,
    };
    tower_exp(p, &add_small(p, &inner, ratio.ln_1p()))
}

/// Canonical tower for `value · e^{ln_c}`, via `E^m(x)·c = E(E^{m-1}(x) + ln c)`.
pub fn mul_exp(p: &Params, t: &TowerReal, ln_c: f64) -> TowerReal {
    if ln_c == 0.0 {
        return *t;
    }
    if t.level == 0 {
        return TowerReal::from_f64(p, t.mantissa * ln_c.exp());
    }
    let inner = TowerReal {
        level: t.level - 1,
        mantissa: t.mantissa,
    };
    tower_exp(p, &add_small(p, &inner, ln_c))
}

/// Natural logarithm of a positive tower, as a tower.
pub fn ln_tower(p: &Params, t: &TowerReal) -> Result<TowerReal> {
    if t.level == 0 {
        if !(t.mantissa > 0.0) {
            return Err(Error::Domain(format!("ln of non-positive value {}", t.mantissa)));
        }
        return Ok(TowerReal::from_f64(p, t.mantissa.ln()));
    }
    let inner = TowerReal {
        level: t.level - 1,
        mantissa: t.mantissa,
    };
    Ok(add_small(p, &inner, p.ln_lambda()))
}

/// Natural logarithm as a hardware float (`+inf` if not representable).
pub fn ln_f64(p: &Params, t: &TowerReal) -> f64 {
    match ln_tower(p, t) {
        Ok(l) => l.to_f64(p),
        Err(_) => f64::NAN,
    }
}

/// Relative difference of two towers, compared in hardware floats after
/// applying `L` to both until they are representable.
pub fn rel_diff(p: &Params, a: &TowerReal, b: &TowerReal) -> f64 {
    let (mut a, mut b) = (*a, *b);
    for _ in 0..64 {
        let (fa, fb) = (a.to_f64(p), b.to_f64(p));
        if fa.is_finite() && fb.is_finite() {
            let scale = fa.abs().max(fb.abs()).max(f64::MIN_POSITIVE);
            return (fa - fb).abs() / scale;
        }
        match (tower_log(p, &a), tower_log(p, &b)) {
            (Ok(x), Ok(y)) => {
                a = x;
                b = y;
            }
            _ => return f64::INFINITY,
        }
    }
    f64::INFINITY
}

/// Reduces an angle into `(-π, π]`.
pub fn reduce_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut t = theta - two_pi * (theta / two_pi).round();
    if t <= -PI {
        t += two_pi;
    }
    if t > PI {
        t -= two_pi;
    }
    t
}

/// The point `r·e^{iθ}` with tower magnitude `r`, `θ ∈ (-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RealDominantComplex {
    pub r: TowerReal,
    pub theta: f64,
}

impl RealDominantComplex {
    pub fn new(r: TowerReal, theta: f64) -> Self {
        RealDominantComplex {
            r,
            theta: reduce_angle(theta),
        }
    }

    pub fn real(p: &Params, x: TowerReal) -> Self {
        let _ = p;
        RealDominantComplex { r: x, theta: 0.0 }
    }

    pub fn from_complex(p: &Params, z: Complex64) -> Self {
        RealDominantComplex {
            r: TowerReal::from_f64(p, z.norm()),
            theta: principal_arg(z),
        }
    }

    /// Polar form of `re + i·im` where the real part is a positive tower.
    pub fn from_re_im(p: &Params, re: &TowerReal, im: f64) -> Self {
        if im == 0.0 {
            return RealDominantComplex { r: *re, theta: 0.0 };
        }
        let x = re.to_f64(p);
        if x.is_finite() && x.abs() <= 1e300 {
            return Self::from_complex(p, Complex64::new(x, im));
        }
        // |im| / re underflows relative to 1: angle ~ im/re.
        let ratio = if x.is_finite() { im / x } else { 0.0 };
        let ln_c = 0.5 * (ratio * ratio).ln_1p();
        RealDominantComplex {
            r: mul_exp(p, re, ln_c),
            theta: ratio.atan(),
        }
    }

    /// Hardware complex value, if the magnitude is finite.
    pub fn to_complex(&self, p: &Params) -> Option<Complex64> {
        let r = self.r.to_f64(p);
        r.is_finite().then(|| Complex64::from_polar(r, self.theta))
    }

    /// Real part `r cos θ` as a tower; non-positive real parts of huge points
    /// map to `-inf` at level 0.
    pub fn re(&self, p: &Params) -> TowerReal {
        if self.theta == 0.0 {
            return self.r;
        }
        let c = self.theta.cos();
        let r = self.r.to_f64(p);
        if r.is_finite() {
            return TowerReal::from_f64(p, r * c);
        }
        if c > 0.0 {
            mul_exp(p, &self.r, c.ln())
        } else {
            TowerReal {
                level: 0,
                mantissa: f64::NEG_INFINITY,
            }
        }
    }

    /// `|Im|` as a tower.
    pub fn abs_im(&self, p: &Params) -> TowerReal {
        let s = self.theta.sin().abs();
        if s == 0.0 {
            return TowerReal::zero();
        }
        let r = self.r.to_f64(p);
        if r.is_finite() {
            TowerReal::from_f64(p, r * s)
        } else {
            mul_exp(p, &self.r, s.ln())
        }
    }

    /// Imaginary part as a hardware float, if representable.
    pub fn im_f64(&self, p: &Params) -> Option<f64> {
        if self.theta == 0.0 {
            return Some(0.0);
        }
        let r = self.r.to_f64(p);
        let v = r * self.theta.sin();
        v.is_finite().then_some(v)
    }

    pub fn conj(&self) -> Self {
        RealDominantComplex::new(self.r, -self.theta)
    }
}

/// One step `z ↦ E(z)` for real-dominant orbit points.
///
/// `E(r e^{iθ}) = E(r cos θ)·e^{i r sin θ}`. Points whose real part is
/// hardware-representable use complex exponentiation directly.
pub fn step_orbit(p: &Params, z: &RealDominantComplex) -> Result<RealDominantComplex> {
    if let Some(w) = z.to_complex(p) {
        if w.re < 700.0 {
            let e = p.lambda * w.exp();
            return Ok(RealDominantComplex::from_complex(p, e));
        }
    }
    if z.theta.abs() > PI / 4.0 {
        return Err(Error::AngleRegime {
            level: z.r.level,
            theta: z.theta,
        });
    }
    let re = z.re(p);
    let im = match z.im_f64(p) {
        Some(v) if v.abs() < 2f64.powi(52) => v,
        _ => {
            return Err(Error::AngleRegime {
                level: z.r.level,
                theta: z.theta,
            })
        }
    };
    Ok(RealDominantComplex::new(tower_exp(p, &re), im))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Params {
        Params::new(0.25).unwrap()
    }

    #[test]
    fn canonical_forms() {
        let p = p();
        let t = TowerReal::from_f64(&p, 3.0);
        assert_eq!(
            t,
            TowerReal {
                level: 0,
                mantissa: 3.0
            }
        );
        // E(3) = 5.02 lies in [x0, E(x0)) and stays at level 0.
        let e3 = tower_exp(&p, &t);
        assert_eq!(e3.level, 0);
        assert!((e3.mantissa - 0.25 * 3f64.exp()).abs() < 1e-14);
        let big = TowerReal::from_f64(&p, 1e12);
        assert!(big.mantissa >= p.x0 && big.mantissa < p.e_x0());
        assert!((big.to_f64(&p) / 1e12 - 1.0).abs() < 1e-13);
        assert_eq!(TowerReal::canonical(&p, big.level, big.mantissa), big);
    }

    #[test]
    fn exp_log_level_bookkeeping() {
        let p = p();
        let t = TowerReal {
            level: 2,
            mantissa: 4.0,
        };
        assert_eq!(
            tower_exp(&p, &t),
            TowerReal {
                level: 3,
                mantissa: 4.0
            }
        );
        assert_eq!(tower_log(&p, &tower_exp(&p, &t)).unwrap(), t);
        let t4 = TowerReal {
            level: 4,
            mantissa: 3.0,
        };
        assert_eq!(
            tower_log(&p, &t4).unwrap(),
            TowerReal {
                level: 3,
                mantissa: 3.0
            }
        );
        let t = TowerReal::from_f64(&p, 0.25 * 3f64.exp());
        assert!((tower_log(&p, &t).unwrap().mantissa - 3.0).abs() < 1e-14);
        assert!(matches!(
            tower_log(&p, &TowerReal::from_f64(&p, 0.3)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn add_small_examples() {
        let p = p();
        let t = add_small(&p, &TowerReal::from_f64(&p, 10.0), 2.5);
        assert!((t.to_f64(&p) - 12.5).abs() < 1e-13);
        // Level-1 mantissa 30: correction ln(1 + 5/E(30)) ~ 2e-12.
        let t = TowerReal {
            level: 1,
            mantissa: 30.0,
        };
        let t = TowerReal::canonical(&p, t.level, t.mantissa);
        let s = add_small(&p, &t, 5.0);
        let expect = (0.25 * 30f64.exp() + 5.0).ln() - p.ln_lambda();
        let got = tower_log(&p, &s).unwrap().to_f64(&p);
        assert!((got - expect).abs() < 1e-13 * expect);
        assert!(got - 30.0 < 1e-11 && got > 30.0);
        let t3 = TowerReal {
            level: 3,
            mantissa: 4.0,
        };
        assert_eq!(add_small(&p, &t3, 1e6), t3);
    }

    #[test]
    fn hardware_boundary_cross_check() {
        let p = p();
        for &x in &[1e10, 3.7e11, 5e12, 1e14, 9.9e14] {
            let t = TowerReal::from_f64(&p, x);
            assert!((t.to_f64(&p) / x - 1.0).abs() < 1e-10);
            let s = add_small(&p, &t, 12345.0);
            assert!((s.to_f64(&p) / (x + 12345.0) - 1.0).abs() < 1e-10);
            let m = mul_exp(&p, &t, 0.3);
            assert!((m.to_f64(&p) / (x * 0.3f64.exp()) - 1.0).abs() < 1e-10);
            let e = tower_exp(&p, &TowerReal::from_f64(&p, x.ln()));
            assert!((e.to_f64(&p) / (0.25 * x) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn display_and_parse() {
        let p = p();
        let t = TowerReal::from_f64(&p, 1e40);
        let s = t.to_string();
        assert!(s.starts_with("E^"));
        assert_eq!(s.parse::<TowerReal>().unwrap(), t);
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(1.5), "1.5");
        assert_eq!(fmt_g17(1e20), "1e+20");
        assert_eq!(fmt_g17(1.25e-7), "1.2499999999999999e-07");
        assert!("E^x(1)".parse::<TowerReal>().is_err());
    }

    #[test]
    fn step_orbit_examples() {
        let p = p();
        let z = RealDominantComplex::from_complex(&p, Complex64::new(3.0, 0.1));
        let w = step_orbit(&p, &z).unwrap().to_complex(&p).unwrap();
        let oracle = 0.25 * Complex64::new(3.0, 0.1).exp();
        assert!((w - oracle).norm() < 1e-12);
        assert!((w.re - 4.9963).abs() < 1e-4 && (w.im - 0.5013).abs() < 1e-4);
        // Real points reduce to tower_exp.
        let x = TowerReal {
            level: 3,
            mantissa: 4.0,
        };
        let r = step_orbit(&p, &RealDominantComplex::real(&p, x)).unwrap();
        assert_eq!(r.r, tower_exp(&p, &x));
        assert_eq!(r.theta, 0.0);
        // Conjugation symmetry.
        let z = RealDominantComplex::from_complex(&p, Complex64::new(40.0, 0.7));
        let a = step_orbit(&p, &z).unwrap();
        let b = step_orbit(&p, &z.conj()).unwrap();
        assert_eq!(a.r, b.r);
        assert_eq!(a.theta, -b.theta);
        // Wide angle at a high level is rejected.
        let bad = RealDominantComplex::new(
            TowerReal {
                level: 3,
                mantissa: 4.0,
            },
            1.0,
        );
        assert!(matches!(step_orbit(&p, &bad), Err(Error::AngleRegime { .. })));
    }
}
