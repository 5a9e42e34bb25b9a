//! The map `E(z) = λ e^z` for `0 < λ < 1/e`, its inverse branches, real
//! fixed points and strip itineraries.

use std::f64::consts::{E as EULER, PI};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tower::{RealDominantComplex, TowerReal};

/// Magnitudes above this are handed over to tower arithmetic.
pub const HW_LIMIT: f64 = 1e15;

/// Parameter `λ` together with the real fixed points and the anchor `x0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub lambda: f64,
    /// Attracting fixed point, `alpha < 1`.
    pub alpha: f64,
    /// Repelling fixed point, `beta > 1`; also the multiplier at `beta`.
    pub beta: f64,
    /// Anchor `x0 > beta`.
    pub x0: f64,
    ln_lambda: f64,
}

impl Params {
    /// Shorthand for [`find_fixed_points`].
    pub fn new(lambda: f64) -> Result<Self> {
        find_fixed_points(lambda)
    }

    /// Replaces the anchor `x0`; it must exceed `beta`.
    pub fn with_x0(mut self, x0: f64) -> Result<Self> {
        if !(x0 > self.beta) || !x0.is_finite() {
            return Err(Error::Domain(format!(
                "x0 = {x0} must exceed beta = {}",
                self.beta
            )));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn ln_lambda(&self) -> f64 {
        self.ln_lambda
    }

    /// Real `E(x) = λ e^x`.
    #[inline]
    pub fn e(&self, x: f64) -> f64 {
        self.lambda * x.exp()
    }

    /// Real inverse `L(x) = ln x - ln λ`.
    #[inline]
    pub fn l(&self, x: f64) -> f64 {
        x.ln() - self.ln_lambda
    }

    /// Upper end of the fundamental interval `[x0, E(x0))`.
    pub fn e_x0(&self) -> f64 {
        self.e(self.x0)
    }
}

/// Solves `λ e^x = x` on `[0, 1]` and `[1, ∞)` by bisection, then polishes
/// with Newton steps that are only accepted when they reduce the residual.
pub fn find_fixed_points(lambda: f64) -> Result<Params> {
    if !(lambda > 0.0 && lambda < 1.0 / EULER) {
        return Err(Error::Domain(format!("lambda = {lambda} outside (0, 1/e)")));
    }
    let f = |x: f64| lambda * x.exp() - x;
    let alpha = polish(lambda, bisect(f, 0.0, 1.0));
    let hi = -2.0 * lambda.ln() + 10.0;
    let beta = polish(lambda, bisect(f, 1.0, hi));
    Ok(Params {
        lambda,
        alpha,
        beta,
        x0: beta + 1.0,
        ln_lambda: lambda.ln(),
    })
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

fn polish(lambda: f64, mut x: f64) -> f64 {
    for _ in 0..4 {
        let ex = lambda * x.exp();
        let d = ex - 1.0;
        if d.abs() < 1e-8 {
            break;
        }
        let next = x - (ex - x) / d;
        if (lambda * next.exp() - next).abs() < (ex - x).abs() {
            x = next;
        } else {
            break;
        }
    }
    x
}

/// Residual `|λ e^x - x|` scaled by `max(1, |x|)`.
pub fn fixed_point_residual(p: &Params, x: f64) -> f64 {
    (p.e(x) - x).abs() / x.abs().max(1.0)
}

/// Complex `E(z) = λ e^z`; fails with a range error if the result overflows.
pub fn eval_e(p: &Params, z: Complex64) -> Result<Complex64> {
    let w = p.lambda * z.exp();
    if !(w.re.is_finite() && w.im.is_finite()) {
        return Err(Error::Range(format!(
            "E({z}) overflows hardware floats; use tower arithmetic"
        )));
    }
    Ok(w)
}

/// Principal argument in `(-π, π]`.
#[inline]
pub fn principal_arg(w: Complex64) -> f64 {
    let a = w.im.atan2(w.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Inverse branch `L_s(w) = ln|w| - ln λ + i (Arg w + 2πs)`.
pub fn inverse_branch(p: &Params, s: i64, w: Complex64) -> Result<Complex64> {
    if w.re == 0.0 && w.im == 0.0 {
        return Err(Error::Domain("inverse branch undefined at w = 0".into()));
    }
    let re = p.l(w.norm());
    Ok(Complex64::new(re, principal_arg(w) + 2.0 * PI * s as f64))
}

/// Horizontal strip `P(k) = { Re z ≥ β, (2k-1)π ≤ Im z < (2k+1)π }`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Strip {
    pub k: i64,
}

impl Strip {
    /// Strip index of an imaginary part (ignores the half-plane condition).
    pub fn of_im(im: f64) -> Strip {
        Strip {
            k: ((im + PI) / (2.0 * PI)).floor() as i64,
        }
    }

    pub fn contains(&self, p: &Params, z: Complex64) -> bool {
        let k = self.k as f64;
        z.re >= p.beta && z.im >= (2.0 * k - 1.0) * PI && z.im < (2.0 * k + 1.0) * PI
    }
}

/// Itinerary `(s_0, …, s_{n-1})` of `z`: `E^j(z) ∈ P(s_j)`.
///
/// Iterates in hardware floats while `|E^j(z)| ≤ HW_LIMIT`, then continues
/// with real-dominant tower points. Symbols are read only while the
/// imaginary part is representable; a real orbit has symbol 0 at any level.
pub fn itinerary_of(p: &Params, z: Complex64, n: usize) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(n);
    let mut cur = z;
    let mut j = 0;
    while j < n {
        if cur.re < p.beta {
            return Err(Error::Escaped { step: j });
        }
        out.push(Strip::of_im(cur.im).k);
        j += 1;
        if j == n {
            return Ok(out);
        }
        if cur.re > HW_LIMIT.ln() {
            break;
        }
        cur = eval_e(p, cur)?;
    }
    // Tower regime: `cur` is the last symbol-read point; step it forward.
    let mut w = RealDominantComplex::from_complex(p, cur);
    while j < n {
        w = crate::tower::step_orbit(p, &w)?;
        let re = w.re(p);
        if re < TowerReal::from_f64(p, p.beta) {
            return Err(Error::Escaped { step: j });
        }
        let im = w
            .im_f64(p)
            .ok_or_else(|| Error::Range(format!("imaginary part not representable at step {j}")))?;
        out.push(Strip::of_im(im).k);
        j += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bisect_oracle(lambda: f64, mut lo: f64, mut hi: f64) -> f64 {
        // Plain bisection to 1e-13 without any polishing.
        let f = |x: f64| lambda * x.exp() - x;
        let pos_lo = f(lo) > 0.0;
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == pos_lo {
                lo = mid
            } else {
                hi = mid
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn fixed_points_quarter() {
        let p = find_fixed_points(0.25).unwrap();
        assert!((p.alpha - bisect_oracle(0.25, 0.0, 1.0)).abs() < 1e-12);
        assert!((p.beta - bisect_oracle(0.25, 1.0, 10.0)).abs() < 1e-12);
        assert!((p.alpha - 0.3574).abs() < 1e-4);
        assert!((p.beta - 2.1533).abs() < 1e-4);
        assert!(fixed_point_residual(&p, p.alpha) <= 1e-13);
        assert!(fixed_point_residual(&p, p.beta) <= 1e-13);
        assert_eq!(p.x0, p.beta + 1.0);
    }

    #[test]
    fn fixed_points_near_tangency() {
        let p = find_fixed_points(1.0 / EULER - 1e-9).unwrap();
        assert!((p.alpha - 1.0).abs() < 1e-3);
        assert!((p.beta - 1.0).abs() < 1e-3);
        assert!(p.alpha < 1.0 && p.beta > 1.0);
        assert!(fixed_point_residual(&p, p.alpha) <= 1e-13);
        assert!(fixed_point_residual(&p, p.beta) <= 1e-13);
    }

    #[test]
    fn lambda_out_of_range() {
        assert!(matches!(find_fixed_points(0.5), Err(Error::Domain(_))));
        assert!(find_fixed_points(1.0 / EULER).is_err());
        assert!(find_fixed_points(0.0).is_err());
        assert!(find_fixed_points(-0.1).is_err());
    }

    #[test]
    fn eval_e_examples() {
        let p = Params::new(0.25).unwrap();
        let w = eval_e(&p, Complex64::new(3.0, 0.0)).unwrap();
        assert!((w.re - 0.25 * 3f64.exp()).abs() < 1e-14);
        assert!((w.re - 5.0214).abs() < 1e-4);
        let b = eval_e(&p, Complex64::new(p.beta, 0.0)).unwrap();
        assert!((b.re - p.beta).abs() < 1e-13);
        let m = eval_e(&p, Complex64::new(0.0, PI)).unwrap();
        assert!((m.re + 0.25).abs() < 1e-15 && m.im.abs() < 1e-15);
        assert!(matches!(
            eval_e(&p, Complex64::new(800.0, 0.0)),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn inverse_branch_examples() {
        let p = Params::new(0.25).unwrap();
        let w = Complex64::new(0.25 * 3f64.exp(), 0.0);
        let v0 = inverse_branch(&p, 0, w).unwrap();
        assert!((v0.re - 3.0).abs() < 1e-14 && v0.im == 0.0);
        let v1 = inverse_branch(&p, 1, w).unwrap();
        assert!((v1.re - 3.0).abs() < 1e-14 && (v1.im - 2.0 * PI).abs() < 1e-14);
        let w = Complex64::new(1.0, 1.0);
        let v = inverse_branch(&p, -2, w).unwrap();
        assert!((eval_e(&p, v).unwrap() - w).norm() < 1e-14);
        assert!(v.im >= -5.0 * PI && v.im < -3.0 * PI);
        assert!(inverse_branch(&p, 0, Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn arg_convention_on_negative_axis() {
        assert_eq!(principal_arg(Complex64::new(-1.0, -0.0)), PI);
        assert_eq!(principal_arg(Complex64::new(-1.0, 0.0)), PI);
    }

    #[test]
    fn itinerary_examples() {
        let p = Params::new(0.25).unwrap();
        assert_eq!(itinerary_of(&p, Complex64::new(3.0, 0.0), 5).unwrap(), vec![0; 5]);
        assert_eq!(
            itinerary_of(&p, Complex64::new(1.0, 0.0), 1),
            Err(Error::Escaped { step: 0 })
        );
        // Deep real orbits pass through tower arithmetic.
        assert_eq!(itinerary_of(&p, Complex64::new(3.0, 0.0), 9).unwrap(), vec![0; 9]);
    }
}
