use super::threshold::Mask;
use super::RadiusRange;
use crate::error::{Error, Result};
use crate::imaging::{GradientField, Grid, RidgeMap};

/// Hough vote array for circle centres, same shape as the image.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulator {
    pub votes: Grid,
}

/// Every mask pixel votes along its gradient line, in both directions, for
/// all centre positions at distances `radius.min..=radius.max`. Each vote
/// carries the ridge value at the voting pixel.
///
/// The line direction is canonicalised before voting so that flipping the
/// gradient sign produces the same votes in the same order.
pub fn build_accumulator(
    grad: &GradientField,
    mask: &Mask,
    ridge: &RidgeMap,
    radius: RadiusRange,
) -> Result<Accumulator> {
    radius.validate()?;
    let (w, h) = (grad.width(), grad.height());
    if mask.width() != w || mask.height() != h || !grad.magnitude.same_shape(&ridge.values) {
        return Err(Error::DimensionMismatch {
            left: w * h,
            right: mask.width() * mask.height(),
        });
    }
    let mut votes = Grid::new(w, h);
    let (wi, hi) = (w as isize, h as isize);
    for (row, col) in mask.iter_set() {
        let mag = grad.magnitude.get(row, col);
        if mag <= 0.0 {
            continue;
        }
        let mut du = grad.iu.get(row, col) / mag;
        let mut dv = grad.iv.get(row, col) / mag;
        if du < 0.0 || (du == 0.0 && dv < 0.0) {
            du = -du;
            dv = -dv;
        }
        let weight = ridge.values.get(row, col);
        if weight == 0.0 {
            continue;
        }
        for sign in [1.0, -1.0] {
            let mut last = (isize::MIN, isize::MIN);
            for d in radius.min..=radius.max {
                let step = sign * d as f64;
                let r = (row as f64 + step * du).round() as isize;
                let c = (col as f64 + step * dv).round() as isize;
                if (r, c) == last {
                    continue;
                }
                last = (r, c);
                if r >= 0 && c >= 0 && r < hi && c < wi {
                    let idx = (r as usize, c as usize);
                    votes.set(idx.0, idx.1, votes.get(idx.0, idx.1) + weight);
                }
            }
        }
    }
    Ok(Accumulator { votes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{sobel_gradients, stddev_ridge};

    fn disk(w: usize, h: usize, cr: f64, cc: f64, radius: f64) -> Grid {
        Grid::from_fn(w, h, |r, c| {
            let d = ((r as f64 - cr).powi(2) + (c as f64 - cc).powi(2)).sqrt();
            (radius + 0.5 - d).clamp(0.0, 1.0)
        })
    }

    fn argmax(g: &Grid) -> (usize, usize) {
        let mut best = (0, 0);
        for r in 0..g.height() {
            for c in 0..g.width() {
                if g.get(r, c) > g.get(best.0, best.1) {
                    best = (r, c);
                }
            }
        }
        best
    }

    #[test]
    fn empty_mask_gives_zero_accumulator() {
        let img = disk(40, 40, 20.0, 20.0, 10.0);
        let grad = sobel_gradients(&img).unwrap();
        let ridge = stddev_ridge(&img, 5).unwrap();
        let mask = Mask::from_fn(40, 40, |_, _| false);
        let acc = build_accumulator(&grad, &mask, &ridge, RadiusRange::new(5, 15)).unwrap();
        assert_eq!(acc.votes.max(), 0.0);
    }

    #[test]
    fn single_boundary_pixel_votes_through_centre() {
        let img = disk(80, 80, 40.0, 40.0, 20.0);
        let grad = sobel_gradients(&img).unwrap();
        let ridge = stddev_ridge(&img, 5).unwrap();
        // boundary pixel on the horizontal diameter
        let mask = Mask::from_fn(80, 80, |r, c| r == 40 && c == 60);
        let acc = build_accumulator(&grad, &mask, &ridge, RadiusRange::new(15, 25)).unwrap();
        assert!(acc.votes.get(40, 40) > 0.0);
        // votes sit on row 40 only: both segments are collinear with the centre
        for r in 0..80 {
            for c in 0..80 {
                if acc.votes.get(r, c) > 0.0 {
                    assert_eq!(r, 40);
                    let dist = (c as isize - 60).unsigned_abs();
                    assert!((15..=25).contains(&dist));
                }
            }
        }
    }

    #[test]
    fn full_circle_peaks_at_centre() {
        let img = disk(100, 90, 47.0, 52.0, 20.0);
        let grad = sobel_gradients(&img).unwrap();
        let ridge = stddev_ridge(&img, 5).unwrap();
        let mask = Mask::from_threshold(&grad, 0.5);
        let acc = build_accumulator(&grad, &mask, &ridge, RadiusRange::new(15, 25)).unwrap();
        let (r, c) = argmax(&acc.votes);
        assert!((r as f64 - 47.0).abs() <= 1.0 && (c as f64 - 52.0).abs() <= 1.0);
    }

    #[test]
    fn two_circles_two_maxima() {
        let a = disk(160, 80, 40.0, 40.0, 20.0);
        let b = disk(160, 80, 38.0, 115.0, 18.0);
        let img = Grid::from_fn(160, 80, |r, c| a.get(r, c).max(b.get(r, c)));
        let grad = sobel_gradients(&img).unwrap();
        let ridge = stddev_ridge(&img, 5).unwrap();
        let mask = Mask::from_threshold(&grad, 0.5);
        let acc = build_accumulator(&grad, &mask, &ridge, RadiusRange::new(15, 25)).unwrap();
        let left = Grid::from_fn(80, 80, |r, c| acc.votes.get(r, c));
        let right = Grid::from_fn(80, 80, |r, c| acc.votes.get(r, c + 80));
        let (r1, c1) = argmax(&left);
        let (r2, c2) = argmax(&right);
        assert!((r1 as f64 - 40.0).abs() <= 1.0 && (c1 as f64 - 40.0).abs() <= 1.0);
        assert!((r2 as f64 - 38.0).abs() <= 1.0 && ((c2 + 80) as f64 - 115.0).abs() <= 1.0);
    }

    #[test]
    fn rejects_bad_radius_range() {
        let img = Grid::filled(10, 10, 0.0);
        let grad = sobel_gradients(&img).unwrap();
        let ridge = stddev_ridge(&img, 3).unwrap();
        let mask = Mask::from_fn(10, 10, |_, _| false);
        assert!(build_accumulator(&grad, &mask, &ridge, RadiusRange::new(1, 5)).is_err());
        assert!(build_accumulator(&grad, &mask, &ridge, RadiusRange::new(6, 5)).is_err());
    }
}
