use std::fs;
use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use super::{Grid, RasterImage};
use crate::error::{Error, Result};

/// Reads a PNG or binary PPM/PGM file into `[0, 1]` floats. Colour input
/// yields 3 channels, grayscale 1; alpha is dropped.
pub fn load_image(path: &Path) -> Result<RasterImage> {
    let bytes = fs::read(path).map_err(|source| Error::Unreadable {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<RasterImage> {
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| Error::Malformed(e.to_string()))?;
    match reader.format() {
        Some(ImageFormat::Png) | Some(ImageFormat::Pnm) => {}
        Some(other) => return Err(Error::UnsupportedFormat(format!("{other:?}"))),
        None => return Err(Error::UnsupportedFormat("unrecognised signature".into())),
    }
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat(u.to_string()),
        other => Error::Malformed(other.to_string()),
    })?;
    if decoded.width() == 0 || decoded.height() == 0 {
        return Err(Error::ZeroArea);
    }
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let is_gray = matches!(
        decoded,
        DynamicImage::ImageLuma8(_)
            | DynamicImage::ImageLumaA8(_)
            | DynamicImage::ImageLuma16(_)
            | DynamicImage::ImageLumaA16(_)
    );
    let img = if is_gray {
        let px = decoded.to_luma8().into_raw();
        RasterImage::from_raw_unchecked(w, h, 1, px.iter().map(|&v| v as f64 / 255.0).collect())
    } else {
        let px = decoded.to_rgb8().into_raw();
        RasterImage::from_raw_unchecked(w, h, 3, px.iter().map(|&v| v as f64 / 255.0).collect())
    };
    Ok(img)
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an 8-bit PNG (RGB for colour images, L for gray).
pub fn save_png(img: &RasterImage, path: &Path) -> Result<()> {
    let raw: Vec<u8> = img.pixels().iter().map(|&v| to_u8(v)).collect();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let result = if img.channels() == 3 {
        image::RgbImage::from_raw(w, h, raw)
            .expect("buffer size matches image shape")
            .save_with_format(path, ImageFormat::Png)
    } else {
        image::GrayImage::from_raw(w, h, raw)
            .expect("buffer size matches image shape")
            .save_with_format(path, ImageFormat::Png)
    };
    result.map_err(|e| Error::Unwritable {
        path: path.to_path_buf(),
        source: std::io::Error::other(e.to_string()),
    })
}

/// Writes a grid as a binary PGM (P5), linearly mapping `[0, max]` to `[0, 255]`.
pub fn save_pgm(grid: &Grid, path: &Path) -> Result<()> {
    let max = grid.max();
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let mut out = format!("P5\n{} {}\n255\n", grid.width(), grid.height()).into_bytes();
    out.extend(grid.as_slice().iter().map(|&v| to_u8(v.max(0.0) * scale)));
    fs::write(path, out).map_err(|source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}
