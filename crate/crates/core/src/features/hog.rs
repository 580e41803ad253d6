use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{l2_normalize, Patch};
use crate::imaging::sobel_gradients;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HogParams {
    /// Cells along each side; the patch holds `cells_per_side^2` cells.
    pub cells_per_side: usize,
    /// Orientation bins over `[0, pi)`.
    pub bins: usize,
}

impl Default for HogParams {
    fn default() -> Self {
        Self {
            cells_per_side: 2,
            bins: 8,
        }
    }
}

impl HogParams {
    pub fn dim(&self) -> usize {
        self.cells_per_side * self.cells_per_side * self.bins
    }
}

/// Cell-wise histograms of unsigned gradient orientation, magnitude weighted
/// with linear interpolation between neighbouring bins, concatenated
/// row-major over cells and L2-normalised (all zeros for a flat patch).
///
/// Orientation is measured from the row axis, so a gradient pointing straight
/// down the rows lands in the centre of bin 0.
pub fn hog_descriptor(patch: &Patch, params: HogParams) -> Vec<f64> {
    let gray = patch.image.luminance();
    let n = patch.side();
    let mut hist = vec![0.0; params.dim()];
    let Ok(grad) = sobel_gradients(&gray) else {
        return hist;
    };
    let cells = params.cells_per_side;
    let bin_width = PI / params.bins as f64;
    for r in 0..n {
        let cell_r = r * cells / n;
        for c in 0..n {
            let m = grad.magnitude.get(r, c);
            if m == 0.0 {
                continue;
            }
            let cell_c = c * cells / n;
            let theta = grad.iv.get(r, c).atan2(grad.iu.get(r, c)).rem_euclid(PI);
            let pos = theta / bin_width;
            let lower = pos.floor();
            let frac = pos - lower;
            let b0 = (lower as usize) % params.bins;
            let b1 = (b0 + 1) % params.bins;
            let base = (cell_r * cells + cell_c) * params.bins;
            hist[base + b0] += m * (1.0 - frac);
            hist[base + b1] += m * frac;
        }
    }
    l2_normalize(&mut hist);
    hist
}
