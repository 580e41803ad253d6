use serde::{Deserialize, Serialize};

use super::accumulator::Accumulator;
use crate::error::{Error, Result};
use crate::imaging::{gaussian_smooth, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub row: usize,
    pub col: usize,
    /// Smoothed accumulator value at the peak.
    pub response: f64,
}

/// Smoothed accumulator and the peaks found on it.
#[derive(Debug, Clone)]
pub struct PeakSet {
    pub smoothed: Grid,
    pub max_response: f64,
    pub peaks: Vec<Peak>,
}

/// Gaussian-smooths the accumulator and returns strict 3x3 local maxima at
/// or above `frac * max`, strongest first. A peak closer than
/// `min_separation` px to a stronger kept peak is dropped.
pub fn detect_peaks(acc: &Accumulator, frac: f64, sigma: f64, min_separation: f64) -> Result<PeakSet> {
    if !(frac > 0.0 && frac <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "peak fraction must be in (0, 1], got {frac}"
        )));
    }
    let smoothed = gaussian_smooth(&acc.votes, sigma);
    let max_response = smoothed.max().max(0.0);
    let peaks = peaks_on(&smoothed, frac * max_response, min_separation);
    Ok(PeakSet {
        smoothed,
        max_response,
        peaks,
    })
}

fn peaks_on(smoothed: &Grid, floor: f64, min_separation: f64) -> Vec<Peak> {
    let (w, h) = (smoothed.width(), smoothed.height());
    let mut raw = Vec::new();
    for r in 0..h {
        for c in 0..w {
            let v = smoothed.get(r, c);
            if v <= 0.0 || v < floor {
                continue;
            }
            let strict = (-1isize..=1).all(|dr| {
                (-1isize..=1).all(|dc| {
                    (dr == 0 && dc == 0)
                        || smoothed
                            .get_checked(r as isize + dr, c as isize + dc)
                            .is_none_or(|n| n < v)
                })
            });
            if strict {
                raw.push(Peak {
                    row: r,
                    col: c,
                    response: v,
                });
            }
        }
    }
    // stable sort keeps row-major order among equal responses
    raw.sort_by(|a, b| b.response.total_cmp(&a.response));
    let sep2 = min_separation * min_separation;
    let mut kept: Vec<Peak> = Vec::new();
    for p in raw {
        let clear = kept.iter().all(|k| {
            let dr = k.row as f64 - p.row as f64;
            let dc = k.col as f64 - p.col as f64;
            dr * dr + dc * dc >= sep2
        });
        if clear {
            kept.push(p);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc_with(points: &[(usize, usize, f64)]) -> Accumulator {
        let mut votes = Grid::new(60, 40);
        for &(r, c, v) in points {
            votes.set(r, c, v);
        }
        Accumulator { votes }
    }

    #[test]
    fn zero_accumulator_has_no_peaks() {
        let p = detect_peaks(&acc_with(&[]), 0.3, 2.0, 5.0).unwrap();
        assert!(p.peaks.is_empty());
    }

    #[test]
    fn single_spike() {
        let p = detect_peaks(&acc_with(&[(20, 30, 5.0)]), 0.3, 2.0, 5.0).unwrap();
        assert_eq!(p.peaks.len(), 1);
        assert_eq!((p.peaks[0].row, p.peaks[0].col), (20, 30));
    }

    #[test]
    fn fraction_splits_strong_and_weak() {
        let acc = acc_with(&[(10, 10, 1.0), (25, 45, 0.5)]);
        let strong = detect_peaks(&acc, 0.6, 1.0, 5.0).unwrap();
        let weak = detect_peaks(&acc, 0.3, 1.0, 5.0).unwrap();
        assert_eq!(strong.peaks.len(), 1);
        assert_eq!((strong.peaks[0].row, strong.peaks[0].col), (10, 10));
        assert_eq!(weak.peaks.len(), 2);
        assert!(weak.peaks[0].response > weak.peaks[1].response);
    }

    #[test]
    fn close_peaks_merged() {
        let acc = acc_with(&[(20, 20, 1.0), (20, 26, 0.9)]);
        let p = detect_peaks(&acc, 0.3, 0.5, 10.0).unwrap();
        assert_eq!(p.peaks.len(), 1);
        assert_eq!(p.peaks[0].col, 20);
    }

    #[test]
    fn invalid_fraction() {
        assert!(detect_peaks(&acc_with(&[]), 0.0, 1.0, 1.0).is_err());
        assert!(detect_peaks(&acc_with(&[]), 1.5, 1.0, 1.0).is_err());
    }
}
