use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub center: Complex64,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Complex64, radius: f64) -> Self {
        Ball { center, radius }
    }

    pub fn disjoint(&self, o: &Ball) -> bool {
        let s = self.radius + o.radius;
        (self.center - o.center).norm_sqr() >= s * s
    }

    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm_sqr() < self.radius * self.radius
    }
}

/// Greedy selection by decreasing radius: a ball is kept when it is
/// disjoint from all kept ones. Returns indices into `balls`.
pub fn vitali_select(balls: &[Ball]) -> Result<Vec<usize>> {
    if let Some(b) = balls.iter().find(|b| !(b.radius > 0.0) || !b.radius.is_finite()) {
        return Err(Error::Domain(format!("radius {} is not positive", b.radius)));
    }
    let mut order: Vec<usize> = (0..balls.len()).collect();
    order.sort_by(|&i, &j| balls[j].radius.total_cmp(&balls[i].radius).then(i.cmp(&j)));
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        if kept.iter().all(|&k| balls[k].disjoint(&balls[i])) {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Brute-force check on an `n × n` grid over the bounding box: every grid
/// point inside an input ball lies inside a selected ball enlarged 4×.
/// Also checks that every input ball meets a selected ball at least as big.
pub fn verify_four_r_cover(balls: &[Ball], selected: &[usize], n: usize) -> bool {
    let meets = balls.iter().all(|b| {
        selected
            .iter()
            .any(|&k| balls[k].radius >= b.radius && !balls[k].disjoint(b))
    });
    if !meets || balls.is_empty() {
        return meets;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for b in balls {
        x0 = x0.min(b.center.re - b.radius);
        x1 = x1.max(b.center.re + b.radius);
        y0 = y0.min(b.center.im - b.radius);
        y1 = y1.max(b.center.im + b.radius);
    }
    let big: Vec<Ball> = selected
        .iter()
        .map(|&k| Ball::new(balls[k].center, 4.0 * balls[k].radius))
        .collect();
    for i in 0..n {
        for j in 0..n {
            let z = Complex64::new(
                x0 + (x1 - x0) * (i as f64 + 0.5) / n as f64,
                y0 + (y1 - y0) * (j as f64 + 0.5) / n as f64,
            );
            if balls.iter().any(|b| b.contains(z)) && !big.iter().any(|b| b.contains(z)) {
                return false;
            }
        }
    }
    true
}
