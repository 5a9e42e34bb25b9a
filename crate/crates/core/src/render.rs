//! Escape-time rendering of the plane to binary PPM, with an optional
//! overlay of traced hair points.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;

use crate::dynamics::Params;
use crate::error::{Error, Result};
use crate::par::{map_range, Exec};

/// Distance to `α` counted as attracted.
pub const ATTRACT_EPS: f64 = 1e-6;
const UNDECIDED_GRAY: u8 = 128;
const OVERLAY: [u8; 3] = [255, 0, 0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl FromStr for Window {
    type Err = Error;

    /// `xmin,xmax,ymin,ymax`.
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Domain(format!("window '{s}': {e}")))?;
        match v[..] {
            [xmin, xmax, ymin, ymax] if xmin < xmax && ymin < ymax => Ok(Window {
                xmin,
                xmax,
                ymin,
                ymax,
            }),
            _ => Err(Error::Domain(format!(
                "window '{s}' must be xmin,xmax,ymin,ymax with min < max"
            ))),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.xmin, self.xmax, self.ymin, self.ymax)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    pub window: Window,
    pub width: usize,
    pub height: usize,
    pub iter_cap: usize,
}

impl RenderConfig {
    fn check(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.iter_cap == 0 {
            return Err(Error::Domain(
                "width, height and iter_cap must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn pixel_center(&self, i: usize, j: usize) -> Complex64 {
        let w = &self.window;
        let dx = (w.xmax - w.xmin) / self.width as f64;
        let dy = (w.ymax - w.ymin) / self.height as f64;
        Complex64::new(w.xmin + (i as f64 + 0.5) * dx, w.ymax - (j as f64 + 0.5) * dy)
    }

    /// Pixel containing `z`, if inside the window.
    pub fn pixel_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let w = &self.window;
        let fi = (z.re - w.xmin) / (w.xmax - w.xmin) * self.width as f64;
        let fj = (w.ymax - z.im) / (w.ymax - w.ymin) * self.height as f64;
        if fi >= 0.0 && fj >= 0.0 && fi < self.width as f64 && fj < self.height as f64 {
            Some((fi as usize, fj as usize))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelClass {
    /// In the basin of `α`, decided at the given step.
    Attracted(usize),
    /// Real part reached `E²(x0)`.
    Escaped(usize),
    Undecided,
}

pub fn classify(p: &Params, z: Complex64, iter_cap: usize) -> PixelClass {
    let escape = p.e(p.e_x0());
    let mut w = z;
    for k in 0..=iter_cap {
        if (w - p.alpha).norm() < ATTRACT_EPS || w.re < p.beta {
            return PixelClass::Attracted(k);
        }
        if w.re >= escape {
            return PixelClass::Escaped(k);
        }
        if k < iter_cap {
            w = p.lambda * w.exp();
        }
    }
    PixelClass::Undecided
}

fn shade(c: PixelClass) -> u8 {
    match c {
        PixelClass::Attracted(k) => (8 * k.min(12)) as u8,
        PixelClass::Escaped(k) => 255 - (8 * k.min(12)) as u8,
        PixelClass::Undecided => UNDECIDED_GRAY,
    }
}

/// RGB image, rows top to bottom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<u8>,
}

impl Image {
    pub fn pixel(&self, i: usize, j: usize) -> [u8; 3] {
        let o = 3 * (j * self.width + i);
        [self.rgb[o], self.rgb[o + 1], self.rgb[o + 2]]
    }

    pub fn set(&mut self, i: usize, j: usize, c: [u8; 3]) {
        let o = 3 * (j * self.width + i);
        self.rgb[o..o + 3].copy_from_slice(&c);
    }

    pub fn write_ppm<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.rgb)?;
        Ok(())
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        let mut v = Vec::with_capacity(self.rgb.len() + 32);
        self.write_ppm(&mut v).expect("writing to a Vec");
        v
    }
}

/// Rows are computed independently and assembled in order, so the bytes
/// do not depend on the worker count.
pub fn render_escape(p: &Params, cfg: &RenderConfig, exec: Exec) -> Result<Image> {
    cfg.check()?;
    let rows = map_range(exec, cfg.height, |j| {
        let mut row = Vec::with_capacity(3 * cfg.width);
        for i in 0..cfg.width {
            let g = shade(classify(p, cfg.pixel_center(i, j), cfg.iter_cap));
            row.extend_from_slice(&[g, g, g]);
        }
        row
    });
    Ok(Image {
        width: cfg.width,
        height: cfg.height,
        rgb: rows.concat(),
    })
}

/// Marks the pixels containing `points`; returns how many were drawn.
pub fn overlay_points(img: &mut Image, cfg: &RenderConfig, points: &[Complex64]) -> usize {
    let mut n = 0;
    for &z in points {
        if let Some((i, j)) = cfg.pixel_of(z) {
            img.set(i, j, OVERLAY);
            n += 1;
        }
    }
    n
}
