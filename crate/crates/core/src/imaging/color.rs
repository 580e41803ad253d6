use std::sync::LazyLock;

use super::{Grid, RasterImage};
use crate::error::Result;

/// NTSC RGB -> YIQ.
pub(crate) const YIQ_FROM_RGB: [[f64; 3]; 3] = [
    [0.299, 0.587, 0.114],
    [0.595716, -0.274453, -0.321263],
    [0.211456, -0.522591, 0.311135],
];

static RGB_FROM_YIQ: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&YIQ_FROM_RGB));

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let c00 = cof(1, 2, 1, 2);
    let c01 = -cof(1, 2, 0, 2);
    let c02 = cof(1, 2, 0, 1);
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    let adj = [
        [c00, -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [c01, cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [c02, -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            inv[r][c] = adj[r][c] / det;
        }
    }
    inv
}

#[inline]
fn mul3(m: &[[f64; 3]; 3], x: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * x[0] + m[0][1] * x[1] + m[0][2] * x[2],
        m[1][0] * x[0] + m[1][1] * x[1] + m[1][2] * x[2],
        m[2][0] * x[0] + m[2][1] * x[1] + m[2][2] * x[2],
    ]
}

/// Image in YIQ space. `y` is luminance in `[0, 1]` for valid RGB; `i` and
/// `q` are signed chrominance.
#[derive(Debug, Clone, PartialEq)]
pub struct YiqImage {
    pub y: Grid,
    pub i: Grid,
    pub q: Grid,
}

pub fn rgb_to_yiq(img: &RasterImage) -> Result<YiqImage> {
    img.require_channels(3)?;
    let (w, h) = (img.width(), img.height());
    let mut y = Vec::with_capacity(w * h);
    let mut i = Vec::with_capacity(w * h);
    let mut q = Vec::with_capacity(w * h);
    for px in img.pixels().chunks_exact(3) {
        let [py, pi, pq] = mul3(&YIQ_FROM_RGB, [px[0], px[1], px[2]]);
        y.push(py);
        i.push(pi);
        q.push(pq);
    }
    Ok(YiqImage {
        y: Grid::from_vec(w, h, y)?,
        i: Grid::from_vec(w, h, i)?,
        q: Grid::from_vec(w, h, q)?,
    })
}

/// Inverse transform; each output channel is clipped to `[0, 1]`.
pub fn yiq_to_rgb(yiq: &YiqImage) -> RasterImage {
    let (w, h) = (yiq.y.width(), yiq.y.height());
    let inv = &*RGB_FROM_YIQ;
    let mut pixels = Vec::with_capacity(w * h * 3);
    for ((&y, &i), &q) in yiq
        .y
        .as_slice()
        .iter()
        .zip(yiq.i.as_slice())
        .zip(yiq.q.as_slice())
    {
        let rgb = mul3(inv, [y, i, q]);
        pixels.extend(rgb.iter().map(|c| c.clamp(0.0, 1.0)));
    }
    RasterImage::from_raw_unchecked(w, h, 3, pixels)
}

/// Lower and upper percentile used for the luminance stretch.
const STRETCH_PERCENTILES: (f64, f64) = (0.01, 0.99);
const FLAT_RANGE: f64 = 1e-6;

/// Automatic brightness/contrast adjustment.
///
/// The luminance channel is stretched linearly so that its 1st and 99th
/// percentiles land on 0 and 1 (values outside are clipped); chrominance is
/// kept. Pixels pushed out of the RGB gamut by the stretch are pulled back
/// toward gray at constant luminance, so the output's Y equals the stretched Y
/// and a second application is a no-op. Flat images are returned unchanged.
pub fn enhance(img: &RasterImage) -> Result<RasterImage> {
    img.require_channels(3)?;
    let yiq = rgb_to_yiq(img)?;
    let Some((lo, hi)) = percentile_pair(yiq.y.as_slice(), STRETCH_PERCENTILES) else {
        return Ok(img.clone());
    };
    if hi - lo < FLAT_RANGE {
        return Ok(img.clone());
    }
    let scale = hi - lo;
    let inv = &*RGB_FROM_YIQ;
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for ((&y, &i), &q) in yiq
        .y
        .as_slice()
        .iter()
        .zip(yiq.i.as_slice())
        .zip(yiq.q.as_slice())
    {
        let ys = ((y - lo) / scale).clamp(0.0, 1.0);
        pixels.extend(gamut_map(inv, ys, i, q));
    }
    Ok(RasterImage::from_raw_unchecked(
        img.width(),
        img.height(),
        3,
        pixels,
    ))
}

/// RGB for `(y, i, q)` with chroma scaled down just enough to stay inside the
/// unit cube. `y` must already be in `[0, 1]`.
fn gamut_map(inv: &[[f64; 3]; 3], y: f64, i: f64, q: f64) -> [f64; 3] {
    let gray = mul3(inv, [y, 0.0, 0.0]);
    let chroma = mul3(inv, [0.0, i, q]);
    let mut k: f64 = 1.0;
    for c in 0..3 {
        let g = gray[c];
        let d = chroma[c];
        if g + d > 1.0 && d > 0.0 {
            k = k.min(((1.0 - g) / d).max(0.0));
        } else if g + d < 0.0 && d < 0.0 {
            k = k.min((-g / d).max(0.0));
        }
    }
    [
        (gray[0] + k * chroma[0]).clamp(0.0, 1.0),
        (gray[1] + k * chroma[1]).clamp(0.0, 1.0),
        (gray[2] + k * chroma[2]).clamp(0.0, 1.0),
    ]
}

/// Nearest-rank percentiles of `values`.
fn percentile_pair(values: &[f64], (p_lo, p_hi): (f64, f64)) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mut buf = values.to_vec();
    let n = buf.len();
    let rank = |p: f64| ((p * (n - 1) as f64).round() as usize).min(n - 1);
    let (k_lo, k_hi) = (rank(p_lo), rank(p_hi));
    let hi = *buf.select_nth_unstable_by(k_hi, f64::total_cmp).1;
    let lo = *buf[..=k_hi].select_nth_unstable_by(k_lo, f64::total_cmp).1;
    Some((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rgb(w: usize, h: usize, f: impl Fn(usize, usize) -> [f64; 3]) -> RasterImage {
        let mut px = Vec::new();
        for r in 0..h {
            for c in 0..w {
                px.extend(f(r, c));
            }
        }
        RasterImage::new(w, h, 3, px).unwrap()
    }

    #[test]
    fn white_has_no_chroma() {
        let yiq = rgb_to_yiq(&RasterImage::filled(1, 1, 3, 1.0)).unwrap();
        assert!((yiq.y.get(0, 0) - 1.0).abs() < 1e-9);
        assert!(yiq.i.get(0, 0).abs() < 1e-9);
        assert!(yiq.q.get(0, 0).abs() < 1e-9);
    }

    #[test]
    fn black_maps_to_origin() {
        let yiq = rgb_to_yiq(&RasterImage::filled(1, 1, 3, 0.0)).unwrap();
        assert_eq!(
            (yiq.y.get(0, 0), yiq.i.get(0, 0), yiq.q.get(0, 0)),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn gray_input_rejected() {
        assert!(rgb_to_yiq(&RasterImage::filled(2, 2, 1, 0.5)).is_err());
        assert!(enhance(&RasterImage::filled(2, 2, 1, 0.5)).is_err());
    }

    #[test]
    fn flat_image_unchanged() {
        let img = RasterImage::filled(8, 8, 3, 0.5);
        assert_eq!(enhance(&img).unwrap(), img);
    }

    #[test]
    fn full_range_gray_is_identity() {
        // Y already spans [0, 1] with the extremes well beyond the 1% tails.
        let img = rgb(20, 20, |r, _| {
            let v = if r < 3 { 0.0 } else if r > 16 { 1.0 } else { r as f64 / 19.0 };
            [v, v, v]
        });
        let out = enhance(&img).unwrap();
        for (a, b) in img.pixels().iter().zip(out.pixels()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn low_contrast_ramp_is_stretched() {
        let img = rgb(100, 10, |_, c| {
            let v = 0.4 + 0.2 * c as f64 / 99.0;
            [v, v, v]
        });
        let out = enhance(&img).unwrap();
        let mut y = out.luminance().into_vec();
        y.sort_by(f64::total_cmp);
        let n = y.len();
        let p1 = y[((n - 1) as f64 * 0.01).round() as usize];
        let p99 = y[((n - 1) as f64 * 0.99).round() as usize];
        // one bin of a 256-bin histogram
        assert!(p1.abs() < 1.0 / 256.0, "p1 = {p1}");
        assert!((p99 - 1.0).abs() < 1.0 / 256.0, "p99 = {p99}");
    }

    #[test]
    fn chroma_survives_stretch() {
        let img = rgb(16, 16, |r, c| {
            let v = 0.3 + 0.3 * ((r * 16 + c) as f64 / 255.0);
            [v + 0.05, v, v - 0.05]
        });
        let before = rgb_to_yiq(&img).unwrap();
        let after = rgb_to_yiq(&enhance(&img).unwrap()).unwrap();
        // mid-range pixel stays in gamut, so its chrominance is untouched
        assert!((before.i.get(8, 8) - after.i.get(8, 8)).abs() < 1e-9);
        assert!((before.q.get(8, 8) - after.q.get(8, 8)).abs() < 1e-9);
    }
}
