use super::RasterImage;
use crate::error::{Error, Result};

/// Bilinear resampling with corner-aligned sample positions: output pixel
/// `k` of `n` samples source coordinate `k * (src - 1) / (n - 1)`.
pub fn resize_bilinear(img: &RasterImage, new_width: usize, new_height: usize) -> Result<RasterImage> {
    if new_width == 0 || new_height == 0 {
        return Err(Error::InvalidArgument(format!(
            "target size {new_width}x{new_height} has zero area"
        )));
    }
    if new_width == img.width() && new_height == img.height() {
        return Ok(img.clone());
    }
    let ch = img.channels();
    let cols = axis_samples(img.width(), new_width);
    let rows = axis_samples(img.height(), new_height);
    let mut pixels = Vec::with_capacity(new_width * new_height * ch);
    for &(r0, r1, fr) in &rows {
        for &(c0, c1, fc) in &cols {
            for k in 0..ch {
                let top = lerp(img.get(r0, c0, k), img.get(r0, c1, k), fc);
                let bottom = lerp(img.get(r1, c0, k), img.get(r1, c1, k), fc);
                pixels.push(lerp(top, bottom, fr).clamp(0.0, 1.0));
            }
        }
    }
    Ok(RasterImage::from_raw_unchecked(
        new_width, new_height, ch, pixels,
    ))
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

/// `(lower index, upper index, fraction)` for each output position.
fn axis_samples(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|k| {
            let x = if dst == 1 {
                (src - 1) as f64 / 2.0
            } else {
                k as f64 * (src - 1) as f64 / (dst - 1) as f64
            };
            let i0 = (x.floor() as usize).min(src - 1);
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, x - i0 as f64)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_bit_exact() {
        let px: Vec<f64> = (0..12).map(|i| i as f64 / 11.0).collect();
        let img = RasterImage::new(4, 3, 1, px).unwrap();
        assert_eq!(resize_bilinear(&img, 4, 3).unwrap(), img);
    }

    #[test]
    fn zero_target_rejected() {
        let img = RasterImage::filled(4, 4, 3, 0.2);
        assert!(resize_bilinear(&img, 0, 4).is_err());
        assert!(resize_bilinear(&img, 4, 0).is_err());
    }

    #[test]
    fn constant_stays_constant() {
        let img = RasterImage::filled(5, 7, 3, 0.25);
        let out = resize_bilinear(&img, 13, 2).unwrap();
        assert!(out.pixels().iter().all(|&v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn two_pixel_row_upsampled_is_monotone() {
        let img = RasterImage::new(2, 1, 1, vec![0.0, 1.0]).unwrap();
        let out = resize_bilinear(&img, 5, 1).unwrap();
        assert_eq!(out.pixels(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
