use std::collections::HashSet;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gauge::GaugeSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct BoxCount {
    pub scales: Vec<f64>,
    /// Occupied grid boxes per scale.
    pub counts: Vec<usize>,
    /// `N(δ) h(δ)`.
    pub curve: Vec<f64>,
    /// Least-squares slope of `ln N` against `ln(1/δ)`.
    pub dimension: f64,
    pub std_err: f64,
    /// 95% band `dimension ± 1.96 std_err`.
    pub band: (f64, f64),
}

/// Covers `points` by grid squares of side `δ` for each scale.
pub fn gauge_box_count(points: &[Complex64], g: &GaugeSpec, scales: &[f64]) -> Result<BoxCount> {
    if scales.len() < 3 {
        return Err(Error::Domain("at least 3 scales are required".into()));
    }
    if scales.windows(2).any(|w| !(w[1] < w[0])) || scales.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::Domain("scales must be positive and decreasing".into()));
    }
    if points.is_empty() {
        return Err(Error::Domain("empty point set".into()));
    }
    let mut counts = Vec::with_capacity(scales.len());
    let mut curve = Vec::with_capacity(scales.len());
    for &d in scales {
        let boxes: HashSet<(i64, i64)> = points
            .iter()
            .map(|z| ((z.re / d).floor() as i64, (z.im / d).floor() as i64))
            .collect();
        counts.push(boxes.len());
        curve.push(boxes.len() as f64 * g.eval(d)?);
    }
    let xs: Vec<f64> = scales.iter().map(|d| -d.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ssr: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    let std_err = (ssr / (k - 2.0) / sxx).sqrt();
    Ok(BoxCount {
        scales: scales.to_vec(),
        counts,
        curve,
        dimension: slope,
        std_err,
        band: (slope - 1.96 * std_err, slope + 1.96 * std_err),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| Complex64::new(0.1 + i as f64 / n as f64, 0.3))
            .collect()
    }

    #[test]
    fn segment_length_and_dimension() {
        let pts = segment(200_000);
        let scales: Vec<f64> = (4..=12).map(|j| 2f64.powi(-j)).collect();
        let b = gauge_box_count(&pts, &GaugeSpec::power(1.0), &scales).unwrap();
        for c in &b.curve {
            assert!((c - 1.0).abs() < 0.07, "{c}");
        }
        assert!((b.dimension - 1.0).abs() < 0.05);
        assert!(b.band.0 <= b.dimension && b.dimension <= b.band.1);
    }

    #[test]
    fn monotone_in_gauge_and_errors() {
        let pts = segment(10_000);
        let scales = [0.1, 0.01, 0.001];
        let lo = gauge_box_count(&pts, &GaugeSpec::power(1.5), &scales).unwrap();
        let hi = gauge_box_count(&pts, &GaugeSpec::power(1.0), &scales).unwrap();
        assert!(lo.curve.iter().zip(&hi.curve).all(|(a, b)| a <= b));
        assert!(gauge_box_count(&pts, &GaugeSpec::power(1.0), &scales[..2]).is_err());
        assert!(gauge_box_count(&pts, &GaugeSpec::power(1.0), &[0.01, 0.1, 0.001]).is_err());
    }
}
