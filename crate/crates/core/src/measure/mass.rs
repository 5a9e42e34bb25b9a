use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gauge::GaugeSpec;

use super::cells::CellTree;

/// Koebe constants: `D(z, c/|(E^{n-1})'(z)|) ⊂ K_{n-1}(z)` with `c` from the
/// quarter theorem on the disk inscribed in a square of side π, and image
/// disks of radius `C |(E^n)'(z)| t`.
const KOEBE_SMALL: f64 = PI / 8.0;
const KOEBE_LARGE: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassVerdict {
    SupportsInfinite,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassRow {
    pub sample: usize,
    pub scale: usize,
    pub ln_t: f64,
    /// Estimate of `ln μ(D(z, t))`.
    pub ln_mu: f64,
    pub ln_h: f64,
    /// `ln(μ(D(z,t)) / h(t))`.
    pub ln_ratio: f64,
    /// `ln(N h(d)) - 2 ln ρ` for the covering scheme at this scale.
    pub cover_margin: f64,
}

#[derive(Debug, Clone)]
pub struct MassReport {
    pub rows: Vec<MassRow>,
    /// Mean of `ln_ratio` per scale, coarsest first.
    pub trend: Vec<f64>,
    pub verdict: MassVerdict,
    pub increasing: bool,
}

impl MassReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("sample,scale,ln_t,ln_mu,ln_h,ln_ratio,cover_margin\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.sample, r.scale, r.ln_t, r.ln_mu, r.ln_h, r.ln_ratio, r.cover_margin
            ));
        }
        s
    }
}

/// Estimates `μ(D(z,t))/h(t)` at the scales `t_j = c/|(E^{j-1})'(z)|` for
/// rep points of the deepest level. `μ(D(z,t_j))` is bounded by the mass of
/// `K_{j-1}(z)` times the share of its children met by the image disk.
pub fn mass_distribution_check(t: &CellTree, g: &GaugeSpec, sample: usize) -> Result<MassReport> {
    let n = t.depth();
    if n < 3 {
        return Err(Error::Domain(format!("tree depth {n} is below 3")));
    }
    let p = &t.params;
    let psi = &t.profile;
    let cells = &t.levels[n];
    let stride = (cells.len() / sample.max(1)).max(1);
    let xi_max = 2.0 * PI.exp() / 3.0;
    let mut rows = Vec::new();
    for (si, ci) in (0..cells.len()).step_by(stride).take(sample.max(1)).enumerate() {
        let chain = t.chain(n, ci);
        let mut ln_deriv = 0.0; // ln |(E^{j-1})'(z)|
        for j in 1..=n {
            let ln_r = crate::tower::ln_f64(p, &chain[j - 1].inner);
            let (xi, eta) = chain[j].square.rel.expect("non-root square");
            let ln_ej = ln_r + (xi * xi + eta * eta).sqrt().ln();
            let ln_t = KOEBE_SMALL.ln() - ln_deriv;
            ln_deriv += ln_ej;
            if !ln_t.is_finite() || !(ln_t < g.t0.ln()) {
                continue;
            }
            let a = if ln_r < 700.0 {
                let r = ln_r.exp();
                psi.psi(r).map(|w| w / r).unwrap_or(0.0)
            } else {
                (-psi.ln_t_over_psi(ln_r)).exp()
            };
            let rho = KOEBE_SMALL * KOEBE_LARGE * (xi * xi + eta * eta).sqrt();
            let overlap = |c: f64, lo: f64, hi: f64| ((c + rho).min(hi) - (c - rho).max(lo)).max(0.0);
            let wx = overlap(xi, 2.0, xi_max) / (xi_max - 2.0);
            let hy = if a > 0.0 {
                overlap(eta, -a, a) / (2.0 * a)
            } else {
                1.0
            };
            let ln_mu = (chain[j - 1].ln_mu + (wx * hy).ln()).min(0.0);
            let ln_h = ln_t - g.ln_p(-ln_t);
            let ln_big_r = ln_r + PI;
            let q = psi.ln_t_over_psi(ln_big_r);
            let ln_psi_r = ln_big_r - q;
            let ln_d = KOEBE_LARGE.ln() + ln_psi_r - ln_deriv;
            let ln_hd = ln_d - g.ln_p(-ln_d);
            let cover_margin = q + ln_hd - 2.0 * ln_t;
            rows.push(MassRow {
                sample: si,
                scale: j,
                ln_t,
                ln_mu,
                ln_h,
                ln_ratio: ln_mu - ln_h,
                cover_margin,
            });
        }
    }
    let mut trend = Vec::new();
    for j in 1..=n {
        let v: Vec<f64> = rows.iter().filter(|r| r.scale == j).map(|r| r.ln_ratio).collect();
        if !v.is_empty() {
            trend.push(v.iter().sum::<f64>() / v.len() as f64);
        }
    }
    let last3 = &trend[trend.len().saturating_sub(3)..];
    let decreasing = last3.len() == 3 && last3.windows(2).all(|w| w[1] < w[0]);
    let increasing = last3.len() == 3 && last3.windows(2).all(|w| w[1] > w[0]);
    let verdict = if decreasing {
        MassVerdict::SupportsInfinite
    } else {
        MassVerdict::Inconclusive
    };
    Ok(MassReport {
        rows,
        trend,
        verdict,
        increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Params;
    use crate::gauge::GaugeProfile;
    use crate::measure::build_cell_tree;
    use crate::par::Exec;
    use crate::schroeder::build_schroeder;
    use num_complex::Complex64;
    use std::sync::Arc;

    #[test]
    fn trends_by_gauge() {
        let p = Params::new(0.25).unwrap();
        let f = Arc::new(build_schroeder(&p, 40).unwrap());
        let psi = GaugeProfile::frac_iter(0.5, f);
        let z0 = Complex64::new(6.5, 0.0);
        let t = build_cell_tree(&p, &psi, z0, 3, 5000, Exec::default()).unwrap();
        // Length gauge: ratio falls, supporting infinite measure.
        let m = mass_distribution_check(&t, &GaugeSpec::power(1.0), 100).unwrap();
        assert_eq!(m.verdict, MassVerdict::SupportsInfinite);
        assert!(m.rows.iter().all(|r| r.ln_mu <= 0.0));
        // Area gauge (p(t) = t): the set is porous, so the ratio grows.
        let m = mass_distribution_check(&t, &GaugeSpec::power(2.0), 100).unwrap();
        assert!(m.increasing);
        assert_eq!(m.verdict, MassVerdict::Inconclusive);
        assert!(m.to_csv().lines().count() > 100);
        let shallow = build_cell_tree(&p, &psi, z0, 2, 500, Exec::default()).unwrap();
        assert!(mass_distribution_check(&shallow, &GaugeSpec::power(1.0), 10).is_err());
    }
}
