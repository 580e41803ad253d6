use super::stencil::StencilCache;
use super::{Circle, RadiusRange};
use crate::imaging::RidgeMap;

/// Result of the local space/scale search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refinement {
    pub circle: Circle,
    /// Fit score of the returned circle.
    pub score: f64,
    /// Fit score of the input circle, if it was a valid configuration.
    pub initial_score: Option<f64>,
}

/// Mean ridge value over the rasterised circle; `None` if the centre is
/// outside the image or no circle pixel is.
pub fn fit_score(
    center: (isize, isize),
    radius: usize,
    ridge: &RidgeMap,
    stencils: &mut StencilCache,
) -> Option<f64> {
    let g = &ridge.values;
    g.get_checked(center.0, center.1)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for &(dr, dc) in stencils.get(radius) {
        if let Some(v) = g.get_checked(center.0 + dr, center.1 + dc) {
            sum += v;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Exhaustive search over integer centre shifts in `[-shift, shift]^2` and
/// radius changes in `[-scale, scale]`, keeping radii inside `range`.
/// Ties go to the smallest displacement, then lexicographic
/// `(drow, dcol, dradius)`. If nothing is valid the input comes back unchanged.
pub fn refine_circle(
    circle: Circle,
    ridge: &RidgeMap,
    shift: usize,
    scale: usize,
    range: RadiusRange,
    stencils: &mut StencilCache,
) -> Refinement {
    let (r0, c0) = (circle.row.round() as isize, circle.col.round() as isize);
    let d0 = circle.radius.round() as isize;
    let (s, k) = (shift as isize, scale as isize);
    let initial_score = usize::try_from(d0)
        .ok()
        .filter(|&d| range.contains(d))
        .and_then(|d| fit_score((r0, c0), d, ridge, stencils));

    let mut best: Option<((isize, isize, isize), f64)> = None;
    for dr in -s..=s {
        for dc in -s..=s {
            for dd in -k..=k {
                let d = d0 + dd;
                if d < 0 || !range.contains(d as usize) {
                    continue;
                }
                let Some(score) = fit_score((r0 + dr, c0 + dc), d as usize, ridge, stencils) else {
                    continue;
                };
                let delta = (dr, dc, dd);
                let better = match best {
                    None => true,
                    Some((bd, bs)) => {
                        score > bs
                            || (score == bs && (norm2(delta), delta) < (norm2(bd), bd))
                    }
                };
                if better {
                    best = Some((delta, score));
                }
            }
        }
    }
    match best {
        Some(((dr, dc, dd), score)) => Refinement {
            circle: Circle {
                row: (r0 + dr) as f64,
                col: (c0 + dc) as f64,
                radius: (d0 + dd) as f64,
            },
            score,
            initial_score,
        },
        None => Refinement {
            circle,
            score: initial_score.unwrap_or(0.0),
            initial_score,
        },
    }
}

fn norm2((a, b, c): (isize, isize, isize)) -> isize {
    a * a + b * b + c * c
}
