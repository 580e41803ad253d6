//! Pixel-to-millimetre conversion, diameter histograms and agreement
//! statistics against manual measurements.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detect::Circle;
use crate::error::{Error, Result};
use crate::features::pearson_correlation;

/// Physical width of the scale label.
pub const LABEL_WIDTH_MM: f64 = 13.0;
pub const HISTOGRAM_STEP_MM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleCalibration {
    pub label_width_mm: f64,
    pub label_width_px: f64,
    /// Millimetres per pixel.
    pub ratio: f64,
}

impl ScaleCalibration {
    pub fn mm(&self, px: f64) -> f64 {
        self.ratio * px
    }
}

pub fn calibrate_scale(label_width_px: f64) -> Result<ScaleCalibration> {
    calibrate_scale_with(LABEL_WIDTH_MM, label_width_px)
}

pub fn calibrate_scale_with(label_width_mm: f64, label_width_px: f64) -> Result<ScaleCalibration> {
    if !(label_width_px.is_finite() && label_width_px > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale label width must be positive, got {label_width_px} px"
        )));
    }
    if !(label_width_mm.is_finite() && label_width_mm > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scale label width must be positive, got {label_width_mm} mm"
        )));
    }
    Ok(ScaleCalibration {
        label_width_mm,
        label_width_px,
        ratio: label_width_mm / label_width_px,
    })
}

/// Diameter in millimetres of every circle (`2 r` times the ratio).
pub fn measure_berries(berries: &[Circle], cal: &ScaleCalibration) -> Vec<f64> {
    berries.iter().map(|c| cal.mm(2.0 * c.radius)).collect()
}

/// Rounds half-up to the nearest multiple of `HISTOGRAM_STEP_MM`.
pub fn round_to_bin(d: f64) -> f64 {
    // nudge against representation error so e.g. 9.75 rounds up
    ((d / HISTOGRAM_STEP_MM) + 0.5 + 1e-9).floor() * HISTOGRAM_STEP_MM
}

/// Occupied bins only, keyed by bin centre.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<(f64, usize)>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|&(_, c)| c).sum()
    }

    pub fn count(&self, center: f64) -> usize {
        self.bins
            .iter()
            .find(|&&(c, _)| (c - center).abs() < 1e-9)
            .map_or(0, |&(_, n)| n)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_mm,count\n");
        for (c, n) in &self.bins {
            s.push_str(&format!("{c:.1},{n}\n"));
        }
        s
    }
}

pub fn build_histogram(diameters_mm: &[f64]) -> Histogram {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for &d in diameters_mm {
        *counts.entry((round_to_bin(d) / HISTOGRAM_STEP_MM).round() as i64).or_default() += 1;
    }
    Histogram {
        bins: counts
            .into_iter()
            .map(|(k, n)| (k as f64 * HISTOGRAM_STEP_MM, n))
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub count: usize,
    pub mean_mm: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std_mm: f64,
    pub std_undefined: bool,
    /// Framework mean minus manual mean.
    pub md_mm: Option<f64>,
    pub mad_mm: Option<f64>,
}

/// Statistics over the unrounded diameters. `None` when there is nothing to
/// measure.
pub fn summarize(diameters_mm: &[f64], manual_mean_mm: Option<f64>) -> Option<SizeSummary> {
    let n = diameters_mm.len();
    if n == 0 {
        return None;
    }
    let mean = diameters_mm.iter().sum::<f64>() / n as f64;
    let (std, undefined) = if n < 2 {
        (0.0, true)
    } else {
        let ss: f64 = diameters_mm.iter().map(|d| (d - mean).powi(2)).sum();
        ((ss / (n - 1) as f64).sqrt(), false)
    };
    let md = manual_mean_mm.map(|m| mean - m);
    Some(SizeSummary {
        count: n,
        mean_mm: mean,
        std_mm: std,
        std_undefined: undefined,
        md_mm: md,
        mad_mm: md.map(f64::abs),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchAgreement {
    pub images: usize,
    /// Mean of the per-image differences.
    pub md_mm: f64,
    /// Mean of the per-image absolute differences.
    pub mad_mm: f64,
    pub correlation: Option<f64>,
}

/// Pearson correlation between per-image framework and manual means.
pub fn batch_correlation(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "correlation needs at least 2 images with manual means, got {}",
            pairs.len()
        )));
    }
    let (a, b): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
    pearson_correlation(&a, &b)
}

/// Batch-level MD, MAD and correlation; `None` without any pair.
pub fn batch_agreement(pairs: &[(f64, f64)]) -> Option<BatchAgreement> {
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    Some(BatchAgreement {
        images: pairs.len(),
        md_mm: pairs.iter().map(|(f, m)| f - m).sum::<f64>() / n,
        mad_mm: pairs.iter().map(|(f, m)| (f - m).abs()).sum::<f64>() / n,
        correlation: batch_correlation(pairs).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibration_examples() {
        assert_eq!(calibrate_scale(130.0).unwrap().ratio, 0.1);
        assert_eq!(calibrate_scale(13.0).unwrap().ratio, 1.0);
        assert!(calibrate_scale(0.0).is_err());
        assert!(calibrate_scale(-4.0).is_err());
    }

    #[test]
    fn radius_to_diameter() {
        let cal = calibrate_scale(130.0).unwrap();
        let d = measure_berries(&[Circle::new(0.0, 0.0, 47.5)], &cal);
        assert!((d[0] - 9.5).abs() < 1e-12);
        assert!(measure_berries(&[], &cal).is_empty());
    }

    #[test]
    fn histogram_rounding() {
        let h = build_histogram(&[9.4, 9.6, 9.74]);
        assert_eq!(h.bins, vec![(9.5, 3)]);
        assert_eq!(build_histogram(&[9.75]).bins, vec![(10.0, 1)]);
        assert_eq!(build_histogram(&[9.25, 9.2499]).bins, vec![(9.0, 1), (9.5, 1)]);
        assert_eq!(build_histogram(&[]).total(), 0);
    }

    #[test]
    fn summary_values() {
        let s = summarize(&[11.0, 12.6], Some(11.8)).unwrap();
        assert!((s.mean_mm - 11.8).abs() < 1e-12);
        assert!(s.md_mm.unwrap().abs() < 1e-12);
        let s = summarize(&[9.5], Some(8.5)).unwrap();
        assert!(s.std_undefined && s.std_mm == 0.0);
        assert!((s.md_mm.unwrap() - 1.0).abs() < 1e-12);
        assert!(summarize(&[], None).is_none());
    }

    #[test]
    fn correlation_cases() {
        assert!((batch_correlation(&[(1.0, 3.0), (2.0, 5.0), (3.0, 7.0)]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(batch_correlation(&[(4.0, 3.0), (4.0, 5.0)]).unwrap(), 0.0);
        assert!(batch_correlation(&[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn batch_mad_dominates_md() {
        let a = batch_agreement(&[(10.0, 9.0), (8.0, 9.5)]).unwrap();
        assert!((a.md_mm - -0.25).abs() < 1e-12);
        assert!((a.mad_mm - 1.25).abs() < 1e-12);
    }
}
