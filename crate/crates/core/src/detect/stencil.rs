use std::collections::HashMap;

/// Pixel offsets `(drow, dcol)` of a midpoint-rasterised circle, sorted and
/// without duplicates.
pub fn circle_offsets(radius: usize) -> Vec<(isize, isize)> {
    if radius == 0 {
        return vec![(0, 0)];
    }
    let r = radius as isize;
    let mut pts = Vec::with_capacity(8 * radius);
    let (mut x, mut y) = (r, 0isize);
    let mut err = 1 - r;
    while x >= y {
        for (a, b) in [(x, y), (y, x)] {
            pts.extend([(a, b), (-a, b), (a, -b), (-a, -b)]);
        }
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// Lazily built table of circle stencils keyed by radius.
#[derive(Debug, Default)]
pub struct StencilCache {
    cache: HashMap<usize, Vec<(isize, isize)>>,
}

impl StencilCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, radius: usize) -> &[(isize, isize)] {
        self.cache
            .entry(radius)
            .or_insert_with(|| circle_offsets(radius))
    }
}
