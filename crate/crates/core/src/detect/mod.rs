//! Circle detection: adaptive gradient threshold, ridge-weighted Hough
//! voting, two-level peak extraction, signature-curve radii and a local
//! space/scale refinement.

mod accumulator;
mod peaks;
mod radius;
mod refine;
mod stencil;
mod threshold;

pub use accumulator::{build_accumulator, Accumulator};
pub use peaks::{detect_peaks, Peak, PeakSet};
pub use radius::{estimate_radius, signature};
pub use refine::{fit_score, refine_circle, Refinement};
pub use stencil::{circle_offsets, StencilCache};
pub use threshold::{select_gradient_threshold, Mask, ThresholdChoice};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{sobel_gradients, stddev_ridge, RasterImage};

/// Circle hypothesis in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub row: f64,
    pub col: f64,
    pub radius: f64,
}

impl Circle {
    pub fn new(row: f64, col: f64, radius: f64) -> Self {
        Self { row, col, radius }
    }

    pub fn center_distance(&self, other: &Circle) -> f64 {
        ((self.row - other.row).powi(2) + (self.col - other.col).powi(2)).sqrt()
    }
}

/// Inclusive radius interval in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadiusRange {
    pub min: usize,
    pub max: usize,
}

impl RadiusRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    /// Pixel radii for a diameter interval in mm at `mm_per_px`.
    pub fn from_diameters_mm(diameter_mm: (f64, f64), mm_per_px: f64) -> Result<Self> {
        if !(mm_per_px > 0.0) || !(diameter_mm.0 > 0.0) || diameter_mm.0 > diameter_mm.1 {
            return Err(Error::InvalidArgument(format!(
                "cannot derive radius range from diameters {diameter_mm:?} mm at {mm_per_px} mm/px"
            )));
        }
        let range = Self {
            min: (diameter_mm.0 / (2.0 * mm_per_px)).round() as usize,
            max: (diameter_mm.1 / (2.0 * mm_per_px)).round() as usize,
        };
        range.validate()?;
        Ok(range)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min < 2 || self.min > self.max {
            return Err(Error::InvalidArgument(format!(
                "radius range {}..={} px must satisfy 2 <= min <= max",
                self.min, self.max
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn contains(&self, radius: usize) -> bool {
        (self.min..=self.max).contains(&radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectConfig {
    pub radius: RadiusRange,
    /// Accumulator fraction of the maximum for reference circles.
    pub ref_peak_frac: f64,
    /// Accumulator fraction of the maximum for candidate circles.
    pub cand_peak_frac: f64,
    /// Centre shift searched during refinement, +/- px.
    pub refine_shift: usize,
    /// Radius change searched during refinement, +/- px.
    pub refine_scale: usize,
    pub smoothing_sigma: f64,
    pub threshold_grid_size: usize,
    pub ridge_window: usize,
}

impl DetectConfig {
    pub fn new(radius: RadiusRange) -> Self {
        Self {
            radius,
            ref_peak_frac: 0.6,
            cand_peak_frac: 0.3,
            refine_shift: 5,
            refine_scale: 5,
            smoothing_sigma: 2.0,
            threshold_grid_size: 20,
            ridge_window: 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.radius.validate()?;
        if !(self.cand_peak_frac > 0.0
            && self.cand_peak_frac <= self.ref_peak_frac
            && self.ref_peak_frac <= 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "need 0 < cand_peak_frac ({}) <= ref_peak_frac ({}) <= 1",
                self.cand_peak_frac, self.ref_peak_frac
            )));
        }
        if self.threshold_grid_size < 2 {
            return Err(Error::InvalidArgument("threshold_grid_size must be >= 2".into()));
        }
        if self.ridge_window < 3 || self.ridge_window % 2 == 0 {
            return Err(Error::InvalidArgument("ridge_window must be odd and >= 3".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub circle: Circle,
    /// Smoothed accumulator response of the originating peak.
    pub peak_response: f64,
    /// Member of the reference set.
    pub is_reference: bool,
}

/// Candidate circles in descending peak order; reference circles are the
/// flagged subset, so the reference set is contained in the candidates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn circles(&self) -> Vec<Circle> {
        self.candidates.iter().map(|c| c.circle).collect()
    }

    pub fn reference_indices(&self) -> Vec<usize> {
        self.candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_reference)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn reference_flags(&self) -> Vec<bool> {
        self.candidates.iter().map(|c| c.is_reference).collect()
    }
}

/// Intermediate products kept for diagnostics.
#[derive(Debug, Clone)]
pub struct DetectionTrace {
    pub candidates: CandidateSet,
    pub threshold: Option<ThresholdChoice>,
    pub accumulator: Option<Accumulator>,
}

pub fn detect_circles(img: &RasterImage, cfg: &DetectConfig) -> Result<CandidateSet> {
    detect_circles_traced(img, cfg).map(|t| t.candidates)
}

/// Full detection chain: luminance, Sobel, ridge map, threshold search,
/// voting, peaks at the candidate level (references flagged by the higher
/// level), signature radius and refinement.
pub fn detect_circles_traced(img: &RasterImage, cfg: &DetectConfig) -> Result<DetectionTrace> {
    cfg.validate()?;
    let gray = img.luminance();
    let grad = sobel_gradients(&gray)?;
    let ridge = stddev_ridge(&gray, cfg.ridge_window)?;
    let choice = match select_gradient_threshold(&grad, &ridge, cfg.threshold_grid_size) {
        Ok(c) => c,
        Err(Error::EmptyDetection) => {
            return Ok(DetectionTrace {
                candidates: CandidateSet::default(),
                threshold: None,
                accumulator: None,
            })
        }
        Err(e) => return Err(e),
    };
    let mask = Mask::from_threshold(&grad, choice.threshold);
    let acc = build_accumulator(&grad, &mask, &ridge, cfg.radius)?;
    let peak_set = detect_peaks(
        &acc,
        cfg.cand_peak_frac,
        cfg.smoothing_sigma,
        cfg.radius.min as f64,
    )?;
    let ref_floor = cfg.ref_peak_frac * peak_set.max_response;

    let refined: Vec<Option<Candidate>> = peak_set
        .peaks
        .par_iter()
        .map_init(StencilCache::new, |stencils, peak| {
            let (radius, _) = estimate_radius((peak.row, peak.col), &grad, cfg.radius, stencils)?;
            let coarse = Circle::new(peak.row as f64, peak.col as f64, radius as f64);
            let fine = refine_circle(
                coarse,
                &ridge,
                cfg.refine_shift,
                cfg.refine_scale,
                cfg.radius,
                stencils,
            );
            Some(Candidate {
                circle: fine.circle,
                peak_response: peak.response,
                is_reference: peak.response >= ref_floor,
            })
        })
        .collect();

    let candidates = suppress_duplicates(refined.into_iter().flatten().collect());
    Ok(DetectionTrace {
        candidates: CandidateSet { candidates },
        threshold: Some(choice),
        accumulator: Some(acc),
    })
}

/// Refinement can move two peaks onto the same circle; keep the stronger one
/// (input is in descending peak order) and carry over the reference flag.
fn suppress_duplicates(cands: Vec<Candidate>) -> Vec<Candidate> {
    let mut kept: Vec<Candidate> = Vec::with_capacity(cands.len());
    for c in cands {
        let dup = kept.iter_mut().find(|k| {
            k.circle.center_distance(&c.circle) < 0.5 * k.circle.radius.min(c.circle.radius)
        });
        match dup {
            Some(k) => k.is_reference |= c.is_reference,
            None => kept.push(c),
        }
    }
    kept
}
