use super::Grid;
use crate::error::{Error, Result};

/// First derivatives of a gray image.
///
/// `iu` differentiates along rows (downwards positive), `iv` along columns
/// (rightwards positive).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub iu: Grid,
    pub iv: Grid,
    pub magnitude: Grid,
}

impl GradientField {
    pub fn width(&self) -> usize {
        self.magnitude.width()
    }

    pub fn height(&self) -> usize {
        self.magnitude.height()
    }
}

/// 3x3 Sobel with replicate padding.
///
/// `iu` is the correlation with `[-1 -2 -1; 0 0 0; 1 2 1]`, `iv` with its
/// transpose.
pub fn sobel_gradients(img: &Grid) -> Result<GradientField> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::TooSmall {
            width: w,
            height: h,
            kernel: 3,
        });
    }
    let mut iu = Grid::new(w, h);
    let mut iv = Grid::new(w, h);
    let mut mag = Grid::new(w, h);
    for r in 0..h {
        let up = r.saturating_sub(1);
        let down = (r + 1).min(h - 1);
        for c in 0..w {
            let left = c.saturating_sub(1);
            let right = (c + 1).min(w - 1);
            let p = |rr: usize, cc: usize| img.get(rr, cc);
            let du = (p(down, left) + 2.0 * p(down, c) + p(down, right))
                - (p(up, left) + 2.0 * p(up, c) + p(up, right));
            let dv = (p(up, right) + 2.0 * p(r, right) + p(down, right))
                - (p(up, left) + 2.0 * p(r, left) + p(down, left));
            iu.set(r, c, du);
            iv.set(r, c, dv);
            mag.set(r, c, (du * du + dv * dv).sqrt());
        }
    }
    Ok(GradientField {
        iu,
        iv,
        magnitude: mag,
    })
}

/// Local standard deviation map.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeMap {
    pub values: Grid,
    pub window: usize,
}

/// Variances below this are reported as exactly zero; the running sums carry
/// round-off of roughly this order.
const VARIANCE_FLOOR: f64 = 1e-14;

/// Sample standard deviation over a `window`x`window` neighbourhood with
/// replicate padding. Cost is independent of the window size.
pub fn stddev_ridge(img: &Grid, window: usize) -> Result<RidgeMap> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "ridge window must be odd and >= 3, got {window}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let half = (window / 2) as isize;
    let n = (window * window) as f64;

    // Centre on the global mean to keep the running sums small.
    let mean = img.as_slice().iter().sum::<f64>() / img.as_slice().len().max(1) as f64;

    // Horizontal pass: per-row box sums of x and x^2 with replicate padding.
    let mut s1 = Grid::new(w, h);
    let mut s2 = Grid::new(w, h);
    for r in 0..h {
        let x = |c: isize| img.get_clamped(r as isize, c) - mean;
        let (mut a, mut b) = (0.0, 0.0);
        for c in -half..=half {
            let v = x(c);
            a += v;
            b += v * v;
        }
        for c in 0..w {
            s1.set(r, c, a);
            s2.set(r, c, b);
            let out = x(c as isize - half);
            let inn = x(c as isize + half + 1);
            a += inn - out;
            b += inn * inn - out * out;
        }
    }
    // Vertical pass over the row sums.
    let mut values = Grid::new(w, h);
    for c in 0..w {
        let (mut a, mut b) = (0.0, 0.0);
        for r in -half..=half {
            a += s1.get_clamped(r, c as isize);
            b += s2.get_clamped(r, c as isize);
        }
        for r in 0..h {
            let var = (b - a * a / n) / (n - 1.0);
            values.set(r, c, if var > VARIANCE_FLOOR { var.sqrt() } else { 0.0 });
            let out_r = r as isize - half;
            let in_r = r as isize + half + 1;
            a += s1.get_clamped(in_r, c as isize) - s1.get_clamped(out_r, c as isize);
            b += s2.get_clamped(in_r, c as isize) - s2.get_clamped(out_r, c as isize);
        }
    }
    Ok(RidgeMap { values, window })
}

/// Separable Gaussian blur (kernel truncated at 3 sigma, replicate padding).
/// `sigma <= 0` returns a copy.
pub fn gaussian_smooth(img: &Grid, sigma: f64) -> Grid {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let (w, h) = (img.width(), img.height());
    let mut tmp = Grid::new(w, h);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * img.get_clamped(r as isize, c as isize + k as isize - radius);
            }
            tmp.set(r, c, acc);
        }
    }
    let mut out = Grid::new(w, h);
    for r in 0..h {
        for c in 0..w {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp.get_clamped(r as isize + k as isize - radius, c as isize);
            }
            out.set(r, c, acc);
        }
    }
    out
}
