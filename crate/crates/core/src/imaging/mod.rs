//! Raster primitives: pixel grids, colour conversion, enhancement,
//! gradient and ridge filtering, resampling and file I/O.
//!
//! Coordinates follow the matrix convention used throughout the crate:
//! `u` is the row (vertical) axis, `v` the column (horizontal) axis.

mod color;
mod filter;
mod io;
mod resize;

pub use color::{enhance, rgb_to_yiq, yiq_to_rgb, YiqImage};
pub use filter::{gaussian_smooth, sobel_gradients, stddev_ridge, GradientField, RidgeMap};
pub use io::{load_image, save_pgm, save_png};
pub use resize::resize_bilinear;

use crate::error::{Error, Result};

/// Dense row-major grid of `f64` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                left: data.len(),
                right: width * height,
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    /// Sample with replicate padding.
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.data[r * self.width + c]
    }

    /// Sample, or `None` outside the grid.
    #[inline]
    pub fn get_checked(&self, row: isize, col: isize) -> Option<f64> {
        if row < 0 || col < 0 || row >= self.height as isize || col >= self.width as isize {
            None
        } else {
            Some(self.data[row as usize * self.width + col as usize])
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

/// An image with 1 (gray) or 3 (RGB) interleaved channels, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    pixels: Vec<f64>,
}

impl RasterImage {
    /// Builds an image, rejecting bad shapes and values outside `[0, 1]`.
    pub fn new(width: usize, height: usize, channels: usize, pixels: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::ZeroArea);
        }
        if pixels.len() != width * height * channels {
            return Err(Error::DimensionMismatch {
                left: pixels.len(),
                right: width * height * channels,
            });
        }
        if let Some(bad) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidArgument(format!(
                "pixel value {bad} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// Constant image; `value` is clamped into `[0, 1]`.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3);
        Self {
            width,
            height,
            channels,
            pixels: vec![value.clamp(0.0, 1.0); width * height * channels],
        }
    }

    pub fn from_gray(grid: &Grid) -> Self {
        Self {
            width: grid.width(),
            height: grid.height(),
            channels: 1,
            pixels: grid.as_slice().iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        }
    }

    pub(crate) fn from_raw_unchecked(
        width: usize,
        height: usize,
        channels: usize,
        pixels: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(pixels.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            pixels,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, channel: usize) -> f64 {
        self.pixels[(row * self.width + col) * self.channels + channel]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, channel: usize, value: f64) {
        let idx = (row * self.width + col) * self.channels + channel;
        self.pixels[idx] = value.clamp(0.0, 1.0);
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.channels;
        &self.pixels[start..start + self.channels]
    }

    pub fn require_channels(&self, expected: usize) -> Result<()> {
        if self.channels != expected {
            return Err(Error::ChannelMismatch {
                expected,
                actual: self.channels,
            });
        }
        Ok(())
    }

    /// Replicates a gray image into three channels; RGB input is cloned.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let pixels = self.pixels.iter().flat_map(|&v| [v, v, v]).collect();
        Self::from_raw_unchecked(self.width, self.height, 3, pixels)
    }

    /// Luminance grid: the Y channel of YIQ for colour input, the channel itself for gray.
    pub fn luminance(&self) -> Grid {
        match self.channels {
            1 => Grid {
                width: self.width,
                height: self.height,
                data: self.pixels.clone(),
            },
            _ => {
                let [wr, wg, wb] = color::YIQ_FROM_RGB[0];
                let data = self
                    .pixels
                    .chunks_exact(3)
                    .map(|p| wr * p[0] + wg * p[1] + wb * p[2])
                    .collect();
                Grid {
                    width: self.width,
                    height: self.height,
                    data,
                }
            }
        }
    }

    /// Extracts one channel as a grid.
    pub fn channel(&self, channel: usize) -> Grid {
        let data = self
            .pixels
            .iter()
            .skip(channel)
            .step_by(self.channels)
            .copied()
            .collect();
        Grid {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Rotates by 180 degrees.
    pub fn rotate180(&self) -> RasterImage {
        let mut pixels = Vec::with_capacity(self.pixels.len());
        for px in self.pixels.chunks_exact(self.channels).rev() {
            pixels.extend_from_slice(px);
        }
        Self::from_raw_unchecked(self.width, self.height, self.channels, pixels)
    }
}
