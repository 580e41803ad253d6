use super::stencil::StencilCache;
use super::RadiusRange;
use crate::imaging::GradientField;

/// Signature curve value: mean over the rasterised circle of the gradient
/// component along the radial direction (sign-free). `None` if no stencil
/// pixel falls inside the image.
pub fn signature(
    center: (usize, usize),
    radius: usize,
    grad: &GradientField,
    stencils: &mut StencilCache,
) -> Option<f64> {
    let (cr, cc) = (center.0 as isize, center.1 as isize);
    let mut sum = 0.0;
    let mut count = 0usize;
    for &(dr, dc) in stencils.get(radius) {
        let (r, c) = (cr + dr, cc + dc);
        let Some(gu) = grad.iu.get_checked(r, c) else {
            continue;
        };
        let gv = grad.iv.get(r as usize, c as usize);
        let norm = ((dr * dr + dc * dc) as f64).sqrt();
        // |g| * |cos(angle between g and the radial unit vector)|
        sum += ((gu * dr as f64 + gv * dc as f64) / norm).abs();
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Radius maximising the signature curve; ties go to the smaller radius.
/// Returns `None` when the circle is outside the image for every radius or
/// the curve is identically zero.
pub fn estimate_radius(
    center: (usize, usize),
    grad: &GradientField,
    range: RadiusRange,
    stencils: &mut StencilCache,
) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for d in range.min..=range.max {
        let Some(s) = signature(center, d, grad, stencils) else {
            continue;
        };
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((d, s));
        }
    }
    best.filter(|&(_, s)| s > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{sobel_gradients, Grid};

    fn rings(radii: &[f64]) -> Grid {
        Grid::from_fn(120, 120, |r, c| {
            let d = ((r as f64 - 60.0).powi(2) + (c as f64 - 60.0).powi(2)).sqrt();
            // alternating annuli so every radius is a step edge
            let mut v = 0.0;
            for (k, &rad) in radii.iter().enumerate() {
                let cover = (rad + 0.5 - d).clamp(0.0, 1.0);
                v += if k % 2 == 0 { cover } else { -cover };
            }
            v.abs()
        })
    }

    #[test]
    fn finds_rendered_radius() {
        let grad = sobel_gradients(&rings(&[20.0])).unwrap();
        let mut st = StencilCache::new();
        let (d, _) = estimate_radius((60, 60), &grad, RadiusRange::new(15, 25), &mut st).unwrap();
        assert!((d as isize - 20).abs() <= 1, "got {d}");
    }

    #[test]
    fn constant_image_discarded() {
        let grad = sobel_gradients(&Grid::filled(50, 50, 0.4)).unwrap();
        let mut st = StencilCache::new();
        assert!(estimate_radius((25, 25), &grad, RadiusRange::new(5, 10), &mut st).is_none());
    }

    #[test]
    fn concentric_circles_have_two_local_maxima() {
        let grad = sobel_gradients(&rings(&[22.0, 18.0])).unwrap();
        let mut st = StencilCache::new();
        let curve: Vec<f64> = (12..=28)
            .map(|d| signature((60, 60), d, &grad, &mut st).unwrap())
            .collect();
        let local_max: Vec<usize> = (1..curve.len() - 1)
            .filter(|&i| curve[i] > curve[i - 1] && curve[i] >= curve[i + 1])
            .map(|i| i + 12)
            .collect();
        assert!(local_max.iter().any(|&d| (d as isize - 18).abs() <= 1), "{local_max:?}");
        assert!(local_max.iter().any(|&d| (d as isize - 22).abs() <= 1), "{local_max:?}");
        let (best, _) = estimate_radius((60, 60), &grad, RadiusRange::new(12, 28), &mut st).unwrap();
        let global = curve
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i + 12, v) } else { acc });
        assert_eq!(best, global.0);
    }

    #[test]
    fn far_outside_center_has_no_signature() {
        let grad = sobel_gradients(&Grid::filled(10, 10, 0.0)).unwrap();
        let mut st = StencilCache::new();
        assert!(signature((500, 500), 3, &grad, &mut st).is_none());
    }
}
