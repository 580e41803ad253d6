use crate::error::{Error, Result};
use crate::imaging::{GradientField, RidgeMap};

/// Binary pixel mask with the same shape as the image it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                bits.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Pixels whose gradient magnitude is at least `threshold`.
    pub fn from_threshold(grad: &GradientField, threshold: f64) -> Self {
        Self {
            width: grad.width(),
            height: grad.height(),
            bits: grad
                .magnitude
                .as_slice()
                .iter()
                .map(|&m| m > 0.0 && m >= threshold)
                .collect(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn iter_set(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i / self.width, i % self.width))
    }
}

/// Outcome of the adaptive gradient threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdChoice {
    pub threshold: f64,
    /// Correlation of the winning mask with the ridge map; `None` when every
    /// candidate mask was degenerate.
    pub correlation: Option<f64>,
}

/// Chooses the gradient threshold whose binary mask correlates best with the
/// ridge map.
///
/// Candidates are `grid_size` evenly spaced quantiles (50% to 99%) of the
/// nonzero magnitudes. Correlation ties, including the all-degenerate case,
/// go to the larger threshold.
pub fn select_gradient_threshold(
    grad: &GradientField,
    ridge: &RidgeMap,
    grid_size: usize,
) -> Result<ThresholdChoice> {
    if grid_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "threshold grid needs at least 2 values, got {grid_size}"
        )));
    }
    if !grad.magnitude.same_shape(&ridge.values) {
        return Err(Error::DimensionMismatch {
            left: grad.magnitude.as_slice().len(),
            right: ridge.values.as_slice().len(),
        });
    }
    let mags = grad.magnitude.as_slice();
    let ridge_vals = ridge.values.as_slice();
    let total = mags.len() as f64;

    // Nonzero-magnitude pixels sorted by descending magnitude; a mask for
    // threshold t is then a prefix of this order.
    let mut order: Vec<(f64, f64)> = mags
        .iter()
        .zip(ridge_vals)
        .filter(|(&m, _)| m > 0.0)
        .map(|(&m, &s)| (m, s))
        .collect();
    if order.is_empty() {
        return Err(Error::EmptyDetection);
    }
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut prefix = Vec::with_capacity(order.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &(_, s) in &order {
        acc += s;
        prefix.push(acc);
    }

    let mean_s = ridge_vals.iter().sum::<f64>() / total;
    let var_s = ridge_vals.iter().map(|s| (s - mean_s).powi(2)).sum::<f64>() / total;

    let n = order.len();
    let mut best = ThresholdChoice {
        threshold: f64::NAN,
        correlation: None,
    };
    for k in 0..grid_size {
        let level = 0.5 + 0.49 * k as f64 / (grid_size - 1) as f64;
        let asc_idx = ((level * (n - 1) as f64).round() as usize).min(n - 1);
        let threshold = order[n - 1 - asc_idx].0;
        let selected = order.partition_point(|&(m, _)| m >= threshold);
        let corr = mask_correlation(selected as f64, prefix[selected], total, mean_s, var_s);
        match (corr, best.correlation) {
            (Some(c), Some(b)) if c < b => {}
            (None, Some(_)) => {}
            _ => {
                best = ThresholdChoice {
                    threshold,
                    correlation: corr,
                }
            }
        }
    }
    Ok(best)
}

/// Pearson correlation of a 0/1 mask with `selected` ones against a field
/// with the given mean/variance, where `sum_selected` is the field summed
/// over the mask.
fn mask_correlation(selected: f64, sum_selected: f64, total: f64, mean_s: f64, var_s: f64) -> Option<f64> {
    let p = selected / total;
    let var_m = p * (1.0 - p);
    if var_m <= 0.0 || var_s <= 0.0 {
        return None;
    }
    let cov = sum_selected / total - p * mean_s;
    Some((cov / (var_m * var_s).sqrt()).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{sobel_gradients, stddev_ridge, Grid};

    #[test]
    fn all_zero_gradient_is_empty_detection() {
        let g = sobel_gradients(&Grid::filled(10, 10, 0.5)).unwrap();
        let r = stddev_ridge(&Grid::filled(10, 10, 0.5), 3).unwrap();
        assert!(matches!(
            select_gradient_threshold(&g, &r, 20),
            Err(Error::EmptyDetection)
        ));
    }

    #[test]
    fn constant_magnitude_picks_top_quantile() {
        let mag = Grid::filled(8, 8, 2.0);
        let grad = GradientField {
            iu: mag.clone(),
            iv: Grid::new(8, 8),
            magnitude: mag,
        };
        let ridge = RidgeMap {
            values: Grid::from_fn(8, 8, |r, c| (r + c) as f64),
            window: 3,
        };
        let choice = select_gradient_threshold(&grad, &ridge, 20).unwrap();
        assert_eq!(choice.threshold, 2.0);
        assert_eq!(choice.correlation, None);
    }

    #[test]
    fn correlation_matches_direct_pearson() {
        let mags: Vec<f64> = (0..64).map(|i| ((i * 37) % 19) as f64).collect();
        let s: Vec<f64> = (0..64).map(|i| ((i * 11) % 7) as f64 * 0.3).collect();
        let mag = Grid::from_vec(8, 8, mags.clone()).unwrap();
        let grad = GradientField {
            iu: mag.clone(),
            iv: Grid::new(8, 8),
            magnitude: mag,
        };
        let ridge = RidgeMap {
            values: Grid::from_vec(8, 8, s.clone()).unwrap(),
            window: 3,
        };
        let choice = select_gradient_threshold(&grad, &ridge, 5).unwrap();
        let m: Vec<f64> = mags
            .iter()
            .map(|&x| if x > 0.0 && x >= choice.threshold { 1.0 } else { 0.0 })
            .collect();
        let direct = crate::features::pearson_correlation(&m, &s).unwrap();
        assert!((direct - choice.correlation.unwrap()).abs() < 1e-12);
    }
}
