use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::dynamics::Params;
use crate::error::{Error, Result};
use crate::gauge::GaugeProfile;
use crate::par::{map_slice, Exec};
use crate::tower::{fmt_g17, ln_f64, mul_exp, tower_exp, tower_log, RealDominantComplex, TowerReal};

/// Right edge of the children band in units of the inner radius: `⅔ e^π`.
fn xi_max() -> f64 {
    2.0 * PI.exp() / 3.0
}
const XI_MIN: f64 = 2.0;
/// Largest inner radius for which the square lattice is enumerated in f64.
const LATTICE_LIMIT: f64 = 1e12;
const SIMPSON_PANELS: usize = 16;
/// Children kept per parent regardless of the level budget.
pub const MIN_CHILDREN: usize = 4;

/// A square of `𝓑` in the plane of `E^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Square {
    /// `Re` of the left edge, `β + (l-1)π`.
    pub left: TowerReal,
    /// `Im` of the center, `2kπ`; infinite beyond hardware range.
    pub im: f64,
    /// `Im / Re` of the center.
    pub slope: f64,
    /// Center relative to the inner radius of the half-annulus holding the
    /// square (`None` for the root).
    pub rel: Option<(f64, f64)>,
}

impl Square {
    pub fn center(&self, p: &Params) -> RealDominantComplex {
        match self.left.to_f64_below(p, 1e300) {
            Some(x) if self.im.is_finite() => {
                RealDominantComplex::from_complex(p, Complex64::new(x + PI / 2.0, self.im))
            }
            _ => polar_from_slope(p, &self.left, self.slope),
        }
    }
}

fn polar_from_slope(p: &Params, re: &TowerReal, slope: f64) -> RealDominantComplex {
    RealDominantComplex::new(mul_exp(p, re, 0.5 * (slope * slope).ln_1p()), slope.atan())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub depth: usize,
    pub parent: Option<usize>,
    /// `B_n = E^n(K_n)`.
    pub square: Square,
    /// Inner radius of the half-annulus `E(B_n)`, i.e. `r_{n+1}`.
    pub inner: TowerReal,
    /// Outer radius `R_{n+1}`.
    pub outer: TowerReal,
    /// `ln R - ln r`, stored (always π).
    pub ln_ratio: f64,
    /// A point `z` with `E^n(z)` the center of `B_n`.
    pub rep: RealDominantComplex,
    /// Mass carried by this cell: its own measure times the number of
    /// sibling cells it represents.
    pub mass: f64,
    /// `ln mass`.
    pub weight: f64,
    /// `ln μ(K_n)` of the represented individual cell; `-inf` beyond range.
    pub ln_mu: f64,
    /// Number of cells of `𝒦_n` this entry stands for.
    pub multiplicity: f64,
    /// `Σ_{j≤n} (ln|E^j(z)| - ln r_j)`.
    pub ku1_sum: f64,
    /// `ln μ(K_n) + Σ_{j≤n} ln(r_j ψ(r_j))`.
    pub ku2_sum: f64,
    /// `ln (ln r_{n+1} / r_n)` for `n ≥ 1`.
    pub ln_eta: f64,
    /// Qualifying child squares (filled on expansion; may be `inf`).
    pub child_count: f64,
}

#[derive(Debug, Clone)]
pub struct CellTree {
    pub params: Params,
    pub profile: GaugeProfile,
    /// `levels[n]` holds the retained cells of depth `n`.
    pub levels: Vec<Vec<Cell>>,
    pub max_cells: usize,
}

impl CellTree {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn root(&self) -> &Cell {
        &self.levels[0][0]
    }

    pub fn level_mass(&self, n: usize) -> f64 {
        self.levels[n].iter().map(|c| c.mass).sum()
    }

    /// Ancestors of `levels[n][i]`, root first, ending with the cell.
    pub fn chain(&self, n: usize, i: usize) -> Vec<&Cell> {
        let mut out = Vec::with_capacity(n + 1);
        let (mut d, mut j) = (n, i);
        loop {
            let c = &self.levels[d][j];
            out.push(c);
            match c.parent {
                Some(pj) => {
                    d -= 1;
                    j = pj;
                }
                None => break,
            }
        }
        out.reverse();
        out
    }

    /// Level-0 rep points that are hardware values.
    pub fn rep_points(&self, n: usize) -> Vec<Complex64> {
        let p = &self.params;
        self.levels[n]
            .iter()
            .filter_map(|c| c.rep.to_complex(p))
            .collect()
    }

    /// CSV `depth, center_re, center_im, r, R, ln_weight` (towers serialized).
    pub fn to_csv(&self) -> String {
        let p = &self.params;
        let mut s = String::from("depth,center_re,center_im,r,R,ln_weight\n");
        for level in &self.levels {
            for c in level {
                let re = match c.square.left.to_f64_below(p, 1e300) {
                    Some(x) => fmt_g17(x + PI / 2.0),
                    None => c.square.left.to_string(),
                };
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{}",
                    c.depth,
                    re,
                    fmt_g17(c.square.im),
                    c.inner,
                    c.outer,
                    fmt_g17(c.weight)
                );
            }
        }
        s
    }
}

/// Pulls a point of the `E^{j+1}`-plane back into the square `sq` of the
/// `E^j`-plane.
fn pull_back(p: &Params, w: &RealDominantComplex, sq: &Square) -> Result<RealDominantComplex> {
    let re = tower_log(p, &w.r)?;
    if sq.im.is_finite() && sq.im.abs() < 1e300 {
        Ok(RealDominantComplex::from_re_im(p, &re, w.theta + sq.im))
    } else {
        Ok(polar_from_slope(p, &re, sq.slope))
    }
}

fn rep_point(p: &Params, squares: &[Square]) -> Result<RealDominantComplex> {
    let mut w = squares.last().expect("non-empty chain").center(p);
    for sq in squares.iter().rev().skip(1) {
        w = pull_back(p, &w, sq)?;
    }
    Ok(w)
}

fn annulus_of(p: &Params, sq: &Square) -> (TowerReal, TowerReal) {
    let r = tower_exp(p, &sq.left);
    (r, mul_exp(p, &r, PI))
}

/// `ψ(r)/r` as a hardware real (0 when it underflows).
fn width_ratio(p: &Params, psi: &GaugeProfile, r: &TowerReal) -> Result<f64> {
    if let Some(x) = r.to_f64_below(p, 1e300) {
        return Ok(psi.psi(x)? / x);
    }
    let u = ln_f64(p, r);
    if u.is_finite() {
        Ok((-psi.ln_t_over_psi(u)).exp())
    } else {
        Ok(0.0)
    }
}

/// Builds the cell tree from the square containing `z0`. Each level keeps
/// about `max_cells` cells (at least `MIN_CHILDREN` per parent); a parent whose children exceed its share is
/// split into blocks of columns (geometric in `Re`) and rows (even in
/// `Im`), each block kept as one representative carrying the block's mass.
pub fn build_cell_tree(
    p: &Params,
    psi: &GaugeProfile,
    z0: Complex64,
    max_depth: usize,
    max_cells: usize,
    exec: Exec,
) -> Result<CellTree> {
    if max_depth < 1 || max_cells < 1 {
        return Err(Error::Domain("max_depth and max_cells must be at least 1".into()));
    }
    let root_sq = root_square(p, psi, z0)?;
    let (inner, outer) = annulus_of(p, &root_sq);
    let root = Cell {
        depth: 0,
        parent: None,
        square: root_sq,
        inner,
        outer,
        ln_ratio: PI,
        rep: root_sq.center(p),
        mass: 1.0,
        weight: 0.0,
        ln_mu: 0.0,
        multiplicity: 1.0,
        ku1_sum: 0.0,
        ku2_sum: 0.0,
        ln_eta: f64::NAN,
        child_count: f64::NAN,
    };
    let mut levels = vec![vec![root]];
    for n in 0..max_depth {
        let parents = &levels[n];
        let budget = (max_cells / parents.len()).max(MIN_CHILDREN);
        let idx: Vec<usize> = (0..parents.len()).collect();
        let results = map_slice(exec, &idx, |&i| expand(p, psi, &levels, n, i, budget));
        let mut next = Vec::new();
        let mut counts = Vec::with_capacity(parents.len());
        for r in results {
            let (count, kids) = r?;
            counts.push(count);
            next.extend(kids);
        }
        for (c, k) in levels[n].iter_mut().zip(counts) {
            c.child_count = k;
        }
        if next.is_empty() {
            return Err(Error::Resolution(format!(
                "no children qualify at depth {}",
                n + 1
            )));
        }
        levels.push(next);
    }
    Ok(CellTree {
        params: *p,
        profile: psi.clone(),
        levels,
        max_cells,
    })
}

fn root_square(p: &Params, psi: &GaugeProfile, z0: Complex64) -> Result<Square> {
    if !(z0.re > p.x0) {
        return Err(Error::Domain(format!(
            "Re z0 = {} must exceed x0 = {}",
            z0.re, p.x0
        )));
    }
    let l = ((z0.re - p.beta) / PI).floor() + 1.0;
    let left = p.beta + (l - 1.0) * PI;
    let k = (z0.im / (2.0 * PI)).round();
    let im = 2.0 * PI * k;
    if (z0.im - im).abs() > PI / 2.0 {
        return Err(Error::Domain(format!(
            "z0 = {z0} lies between squares of the family"
        )));
    }
    if !(left > p.x0) || !(im.abs() + PI / 2.0 < psi.psi(left)?) {
        return Err(Error::Domain(format!(
            "root square at {left}+{im}i is not inside the region"
        )));
    }
    Ok(Square {
        left: TowerReal::from_f64(p, left),
        im,
        slope: im / (left + PI / 2.0),
        rel: None,
    })
}

struct Child {
    sq: Square,
    frac: f64,
    ln_mu_step: f64,
    ku2_step: f64,
    multiplicity: f64,
}

/// Children of `levels[n][i]`: the qualifying-square count and the
/// retained cells.
fn expand(
    p: &Params,
    psi: &GaugeProfile,
    levels: &[Vec<Cell>],
    n: usize,
    i: usize,
    budget: usize,
) -> Result<(f64, Vec<Cell>)> {
    let parent = &levels[n][i];
    let r = parent.inner;
    let width = psi.psi_tower(&r)?;
    if width <= TowerReal::from_f64(p, PI / 2.0) {
        return Ok((0.0, vec![]));
    }
    let a = width_ratio(p, psi, &r)?;
    let ln_r = ln_f64(p, &r);
    let ln_psi = ln_f64(p, &width);
    let (count, kids) = match r.to_f64_below(p, LATTICE_LIMIT) {
        Some(rf) => {
            let w = width.to_f64(p);
            let (l_lo, l_hi, k_max) = lattice(p, rf, w);
            if l_hi < l_lo || k_max < 0 {
                return Ok((0.0, vec![]));
            }
            let count = (l_hi - l_lo + 1) as f64 * (2 * k_max + 1) as f64;
            if count <= budget as f64 {
                (count, enumerate(p, rf, w, l_lo, l_hi, k_max))
            } else {
                (
                    count,
                    strata(p, &r, a, ln_r, ln_psi, budget, Some((rf, l_lo, l_hi, k_max))),
                )
            }
        }
        None => {
            let ln_count = ln_r + ((xi_max() - XI_MIN) / PI).ln() + ln_psi - PI.ln();
            (ln_count.exp(), strata(p, &r, a, ln_r, ln_psi, budget, None))
        }
    };
    let mut ancestors: Vec<Square> = Vec::with_capacity(n + 2);
    let (mut d, mut j) = (n, i);
    loop {
        let c = &levels[d][j];
        ancestors.push(c.square);
        match c.parent {
            Some(pj) => {
                d -= 1;
                j = pj;
            }
            None => break,
        }
    }
    ancestors.reverse();
    let mut out = Vec::with_capacity(kids.len());
    for ch in kids {
        let mut chain = ancestors.clone();
        chain.push(ch.sq);
        let rep = rep_point(p, &chain)?;
        let (inner, outer) = annulus_of(p, &ch.sq);
        let (xi, eta) = ch.sq.rel.expect("child squares carry relative coordinates");
        let ku1_step = (xi * xi + eta * eta).sqrt().ln();
        let ln_eta = match (ch.sq.left.to_f64_below(p, 1e300), r.to_f64_below(p, 1e300)) {
            (Some(x), Some(rf)) => ((x + p.ln_lambda()) / rf).ln(),
            _ => (xi - PI / 2.0 * (-ln_r).exp()).ln(),
        };
        let mass = parent.mass * ch.frac;
        out.push(Cell {
            depth: n + 1,
            parent: Some(i),
            square: ch.sq,
            inner,
            outer,
            ln_ratio: PI,
            rep,
            mass,
            weight: mass.ln(),
            ln_mu: parent.ln_mu + ch.ln_mu_step,
            multiplicity: ch.multiplicity,
            ku1_sum: parent.ku1_sum + ku1_step,
            ku2_sum: parent.ku2_sum + ch.ku2_step,
            ln_eta,
            child_count: f64::NAN,
        });
    }
    Ok((count, out))
}

/// Column range `[l_lo, l_hi]` and row bound `k_max` of the squares inside
/// `{2r < Re < ⅔R, |Im| < w}`.
fn lattice(p: &Params, r: f64, w: f64) -> (i64, i64, i64) {
    let big_r = r * PI.exp();
    let l_lo = ((2.0 * r - p.beta) / PI).floor() as i64 + 2;
    let l_hi = ((2.0 * big_r / 3.0 - p.beta) / PI).ceil() as i64 - 1;
    let k_max = ((w - PI / 2.0) / (2.0 * PI)).ceil() as i64 - 1;
    (l_lo, l_hi, k_max)
}

fn lattice_square(p: &Params, r: f64, l: i64, k: i64) -> Square {
    let left = p.beta + (l - 1) as f64 * PI;
    let (x, y) = (left + PI / 2.0, 2.0 * PI * k as f64);
    Square {
        left: TowerReal::from_f64(p, left),
        im: y,
        slope: y / x,
        rel: Some((x / r, y / r)),
    }
}

fn enumerate(p: &Params, r: f64, w: f64, l_lo: i64, l_hi: i64, k_max: i64) -> Vec<Child> {
    let mut sq = Vec::new();
    for l in l_lo..=l_hi {
        for k in -k_max..=k_max {
            sq.push(lattice_square(p, r, l, k));
        }
    }
    let inv2 = |s: &Square| {
        let (xi, eta) = s.rel.unwrap();
        1.0 / ((xi * xi + eta * eta) * r * r)
    };
    let z: f64 = sq.iter().map(inv2).sum();
    let base = r.ln() + w.ln();
    sq.into_iter()
        .map(|s| {
            let f = inv2(&s) / z;
            Child {
                sq: s,
                frac: f,
                ln_mu_step: f.ln(),
                ku2_step: f.ln() + base,
                multiplicity: 1.0,
            }
        })
        .collect()
}

/// `∫∫ dξ dη / (ξ² + η²)` over `[ξ1, ξ2] × [a f1, a f2]`, divided by `a`.
fn block_integral(a: f64, xi1: f64, xi2: f64, f1: f64, f2: f64) -> f64 {
    let h = |f: f64, xi: f64| if a < 1e-8 { f / xi } else { (a * f / xi).atan() / a };
    let (u1, u2) = (xi1.ln(), xi2.ln());
    let du = (u2 - u1) / SIMPSON_PANELS as f64;
    let mut acc = 0.0;
    for j in 0..=SIMPSON_PANELS {
        let xi = (u1 + j as f64 * du).exp();
        // dξ/ξ = du
        let g = h(f2, xi) - h(f1, xi);
        let wgt = if j == 0 || j == SIMPSON_PANELS {
            1.0
        } else if j % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += wgt * g;
    }
    acc * du / 3.0
}

#[allow(clippy::too_many_arguments)]
fn strata(
    p: &Params,
    r: &TowerReal,
    a: f64,
    ln_r: f64,
    ln_psi: f64,
    budget: usize,
    lattice_info: Option<(f64, i64, i64, i64)>,
) -> Vec<Child> {
    let (max_cols, max_rows) = match lattice_info {
        Some((_, l_lo, l_hi, k_max)) => ((l_hi - l_lo + 1) as usize, (2 * k_max + 1) as usize),
        None => (usize::MAX, usize::MAX),
    };
    // Blocks roughly square in the plane: rows span 2a, columns ξmax - 2.
    let aspect = 2.0 * a / (xi_max() - XI_MIN);
    let n_r = ((budget as f64 * aspect).sqrt().round() as usize).clamp(1, max_rows.min(budget));
    let n_c = (budget / n_r).clamp(1, max_cols);
    let xm = xi_max();
    let col_edge = |i: usize| XI_MIN * (xm / XI_MIN).powf(i as f64 / n_c as f64);
    let row_edge = |j: usize| -1.0 + 2.0 * j as f64 / n_r as f64;
    let mut blocks = Vec::with_capacity(n_c * n_r);
    for ci in 0..n_c {
        for rj in 0..n_r {
            let (x1, x2) = (col_edge(ci), col_edge(ci + 1));
            let (f1, f2) = (row_edge(rj), row_edge(rj + 1));
            blocks.push((x1, x2, f1, f2, block_integral(a, x1, x2, f1, f2)));
        }
    }
    let total: f64 = blocks.iter().map(|b| b.4).sum();
    // Per-square share of `Σ|c|^{-2}` uses a density of one square per π×2π.
    let ln_square_density = (2.0 * PI * PI).ln();
    let ln_count = ln_r + ((xm - XI_MIN) / PI).ln() + ln_psi - PI.ln();
    blocks
        .into_iter()
        .map(|(x1, x2, f1, f2, m)| {
            let xi_mid = (x1 * x2).sqrt();
            let f_mid = 0.5 * (f1 + f2);
            let sq = match lattice_info {
                Some((rf, l_lo, l_hi, k_max)) => {
                    let l = (((xi_mid * rf - PI / 2.0 - p.beta) / PI).round() as i64 + 1).clamp(l_lo, l_hi);
                    let k = ((f_mid * a * rf) / (2.0 * PI)).round() as i64;
                    lattice_square(p, rf, l, k.clamp(-k_max, k_max))
                }
                None => {
                    let eta = f_mid * a;
                    let left = mul_exp(p, r, xi_mid.ln());
                    let im = match r.to_f64_below(p, 1e300) {
                        Some(rf) => eta * rf,
                        None => f64::INFINITY,
                    };
                    Square {
                        left,
                        im,
                        slope: eta / xi_mid,
                        rel: Some((xi_mid, eta)),
                    }
                }
            };
            let (xi, eta) = sq.rel.unwrap();
            let ln_c2 = (xi * xi + eta * eta).ln();
            let ku2_step = -ln_c2 - total.ln() + ln_square_density;
            let ln_mu_step = ku2_step - ln_r - ln_psi;
            let frac = m / total;
            let multiplicity = (frac * ln_count.exp()).max(1.0);
            Child {
                sq,
                frac,
                ln_mu_step,
                ku2_step,
                multiplicity,
            }
        })
        .collect()
}

/// Empirical constants of the three growth/distortion estimates at one depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KuLevel {
    pub depth: usize,
    /// `min ln r_{n+1} / r_n` over cells of this depth.
    pub eta: f64,
    /// Smallest `M` with `M^{-n} Π r_j ≤ |(E^n)'(z)| ≤ M^n Π r_j`.
    pub m: f64,
    /// Range of `c_1` in `μ(K_n) = c_1^n Π 1/(r_i ψ(r_i))`.
    pub c1_min: f64,
    pub c1_max: f64,
    /// `max(c1_max, 1/c1_min)`.
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KuReport {
    pub levels: Vec<KuLevel>,
    /// All constants finite and positive.
    pub finite: bool,
}

pub fn check_ku_inequalities(t: &CellTree) -> Result<KuReport> {
    if t.depth() < 2 {
        return Err(Error::Domain("tree depth must be at least 2".into()));
    }
    let mut levels = Vec::new();
    for n in 1..=t.depth() {
        let cells = &t.levels[n];
        let nf = n as f64;
        let eta = cells.iter().map(|c| c.ln_eta.exp()).fold(f64::INFINITY, f64::min);
        let m = cells
            .iter()
            .map(|c| (c.ku1_sum.abs() / nf).exp())
            .fold(1.0, f64::max);
        let c1_min = cells
            .iter()
            .map(|c| (c.ku2_sum / nf).exp())
            .fold(f64::INFINITY, f64::min);
        let c1_max = cells.iter().map(|c| (c.ku2_sum / nf).exp()).fold(0.0, f64::max);
        let l = c1_max.max(1.0 / c1_min);
        levels.push(KuLevel {
            depth: n,
            eta,
            m,
            c1_min,
            c1_max,
            l,
        });
    }
    let finite = levels
        .iter()
        .all(|k| k.eta.is_finite() && k.eta > 0.0 && k.m.is_finite() && k.l.is_finite() && k.c1_min > 0.0);
    Ok(KuReport { levels, finite })
}
