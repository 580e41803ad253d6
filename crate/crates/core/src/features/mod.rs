//! Per-candidate descriptors (colour, HoG, gist) and their projection to a
//! scalar per kind: the median correlation with the reference descriptors.

mod correlation;
mod gist;
mod hog;

pub use correlation::{median, pearson_correlation};
pub use gist::{GistBank, GistParams};
pub use hog::{hog_descriptor, HogParams};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::Circle;
use crate::error::{Error, Result};
use crate::imaging::{resize_bilinear, RasterImage};

/// Square RGB patch cut around a circle and resampled to a fixed side.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub image: RasterImage,
    /// Index of the originating candidate, if any.
    pub source: Option<usize>,
}

impl Patch {
    pub fn side(&self) -> usize {
        self.image.width()
    }

    /// Wraps an arbitrary image (e.g. an external reference patch),
    /// resampling it to `side x side` RGB.
    pub fn from_image(img: &RasterImage, side: usize) -> Result<Self> {
        let rgb = img.to_rgb();
        Ok(Self {
            image: resize_bilinear(&rgb, side, side)?,
            source: None,
        })
    }
}

/// Crops the `2r x 2r` square centred on the circle (replicate padding past
/// the border) and resizes it to `side x side`.
pub fn extract_patch(img: &RasterImage, circle: &Circle, side: usize) -> Result<Patch> {
    if side < 8 {
        return Err(Error::InvalidArgument(format!(
            "patch side must be >= 8, got {side}"
        )));
    }
    let crop = ((2.0 * circle.radius).round() as usize).max(1);
    let top = circle.row.round() as isize - (crop / 2) as isize;
    let left = circle.col.round() as isize - (crop / 2) as isize;
    let (w, h) = (img.width() as isize, img.height() as isize);
    let ch = img.channels();
    let mut px = Vec::with_capacity(crop * crop * 3);
    for r in 0..crop as isize {
        let rr = (top + r).clamp(0, h - 1) as usize;
        for c in 0..crop as isize {
            let cc = (left + c).clamp(0, w - 1) as usize;
            let p = img.pixel(rr, cc);
            if ch == 3 {
                px.extend_from_slice(p);
            } else {
                px.extend([p[0], p[0], p[0]]);
            }
        }
    }
    let cropped = RasterImage::from_raw_unchecked(crop, crop, 3, px);
    Ok(Patch {
        image: resize_bilinear(&cropped, side, side)?,
        source: None,
    })
}

/// Channel-interleaved, row-major vectorisation of the patch.
pub fn rgb_descriptor(patch: &Patch) -> Vec<f64> {
    patch.image.pixels().to_vec()
}

/// Scales to unit L2 norm; vectors with negligible norm become all zeros.
pub(crate) fn l2_normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Rgb,
    Hog,
    Gist,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 3] = [FeatureKind::Rgb, FeatureKind::Hog, FeatureKind::Gist];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBundle {
    pub rgb: Vec<f64>,
    pub hog: Vec<f64>,
    pub gist: Vec<f64>,
}

impl FeatureBundle {
    pub fn get(&self, kind: FeatureKind) -> &[f64] {
        match kind {
            FeatureKind::Rgb => &self.rgb,
            FeatureKind::Hog => &self.hog,
            FeatureKind::Gist => &self.gist,
        }
    }
}

/// Scalar projections `l` of one candidate, one per feature kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedFeatures {
    pub rgb: f64,
    pub hog: f64,
    pub gist: f64,
}

impl TransformedFeatures {
    pub fn get(&self, kind: FeatureKind) -> f64 {
        match kind {
            FeatureKind::Rgb => self.rgb,
            FeatureKind::Hog => self.hog,
            FeatureKind::Gist => self.gist,
        }
    }

    pub fn set(&mut self, kind: FeatureKind, value: f64) {
        match kind {
            FeatureKind::Rgb => self.rgb = value,
            FeatureKind::Hog => self.hog = value,
            FeatureKind::Gist => self.gist = value,
        }
    }
}

/// Patch geometry and descriptor settings shared by every candidate of a run.
#[derive(Debug)]
pub struct FeatureExtractor {
    patch_side: usize,
    hog: HogParams,
    gist: GistBank,
}

impl FeatureExtractor {
    pub fn new(patch_side: usize, hog: HogParams, gist: GistParams) -> Result<Self> {
        if patch_side < 8 {
            return Err(Error::InvalidArgument(format!(
                "patch side must be >= 8, got {patch_side}"
            )));
        }
        if hog.cells_per_side == 0 || hog.bins == 0 || hog.cells_per_side > patch_side {
            return Err(Error::InvalidArgument(format!("bad HoG parameters {hog:?}")));
        }
        Ok(Self {
            patch_side,
            hog,
            gist: GistBank::new(patch_side, gist)?,
        })
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    pub fn describe(&self, patch: &Patch) -> Result<FeatureBundle> {
        Ok(FeatureBundle {
            rgb: rgb_descriptor(patch),
            hog: hog_descriptor(patch, self.hog),
            gist: self.gist.descriptor(patch)?,
        })
    }

    /// Descriptors for every circle, in input order.
    pub fn describe_circles(&self, img: &RasterImage, circles: &[Circle]) -> Result<Vec<FeatureBundle>> {
        circles
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let mut patch = extract_patch(img, c, self.patch_side)?;
                patch.source = Some(i);
                self.describe(&patch)
            })
            .collect()
    }
}

/// For every candidate and kind, the median correlation with the reference
/// descriptors of that kind.
pub fn transform_features(
    candidates: &[FeatureBundle],
    references: &[FeatureBundle],
) -> Result<Vec<TransformedFeatures>> {
    if references.is_empty() {
        return Err(Error::NoReferences {
            needed: 1,
            found: 0,
        });
    }
    check_dims(candidates.iter().chain(references))?;
    candidates
        .iter()
        .map(|cand| {
            let mut tf = TransformedFeatures {
                rgb: 0.0,
                hog: 0.0,
                gist: 0.0,
            };
            for kind in FeatureKind::ALL {
                let rhos = references
                    .iter()
                    .map(|r| pearson_correlation(cand.get(kind), r.get(kind)))
                    .collect::<Result<Vec<_>>>()?;
                tf.set(kind, median(&rhos).expect("references are non-empty"));
            }
            Ok(tf)
        })
        .collect()
}

/// Descriptor dimensions must agree across a run.
fn check_dims<'a>(mut bundles: impl Iterator<Item = &'a FeatureBundle>) -> Result<()> {
    let Some(first) = bundles.next() else {
        return Ok(());
    };
    for b in bundles {
        for kind in FeatureKind::ALL {
            if b.get(kind).len() != first.get(kind).len() {
                return Err(Error::DimensionMismatch {
                    left: b.get(kind).len(),
                    right: first.get(kind).len(),
                });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(seed: u64) -> FeatureBundle {
        let v = |k: u64, n: usize| -> Vec<f64> {
            (0..n as u64)
                .map(|i| (((i + 1) * (seed * 7 + k * 13 + 3)) % 97) as f64 / 97.0)
                .collect()
        };
        FeatureBundle {
            rgb: v(1, 12),
            hog: v(2, 8),
            gist: v(3, 10),
        }
    }

    #[test]
    fn identical_to_references_gives_one() {
        let b = bundle(3);
        let tf = transform_features(&[b.clone()], &[b.clone(), b.clone(), b]).unwrap();
        for kind in FeatureKind::ALL {
            assert!((tf[0].get(kind) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_references_error() {
        assert!(matches!(
            transform_features(&[bundle(1)], &[]),
            Err(Error::NoReferences { .. })
        ));
    }

    #[test]
    fn odd_median_of_three() {
        // candidate x = [0, 1, 0, 1, ...]; references built to hit exact correlations
        let n = 40;
        let x: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let noise: Vec<f64> = (0..n).map(|i| if (i / 2) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        // x - mean and noise are orthogonal with equal norm -> corr(a x' + b noise, x) = a / sqrt(a^2 + b^2)
        let xc: Vec<f64> = x.iter().map(|v| v - 0.5).collect();
        let mk = |rho: f64| -> Vec<f64> {
            let b = (1.0 - rho * rho).sqrt() * 0.5;
            xc.iter().zip(&noise).map(|(a, e)| rho * a + b * e).collect()
        };
        let cand = FeatureBundle { rgb: x.clone(), hog: x.clone(), gist: x.clone() };
        let refs: Vec<FeatureBundle> = [0.2, 0.5, 0.9]
            .iter()
            .map(|&r| FeatureBundle { rgb: mk(r), hog: mk(r), gist: mk(r) })
            .collect();
        let tf = transform_features(&[cand], &refs).unwrap();
        assert!((tf[0].rgb - 0.5).abs() < 1e-12, "{}", tf[0].rgb);
    }

    #[test]
    fn patch_identity_crop() {
        let img = RasterImage::new(
            40,
            40,
            3,
            (0..40 * 40 * 3).map(|i| (i % 251) as f64 / 250.0).collect(),
        )
        .unwrap();
        let p = extract_patch(&img, &Circle::new(20.0, 20.0, 8.0), 16).unwrap();
        for r in 0..16 {
            for c in 0..16 {
                for k in 0..3 {
                    assert_eq!(p.image.get(r, c, k), img.get(r + 12, c + 12, k));
                }
            }
        }
    }

    #[test]
    fn corner_patch_padded() {
        let img = RasterImage::filled(30, 30, 3, 0.7);
        let p = extract_patch(&img, &Circle::new(0.0, 0.0, 10.0), 32).unwrap();
        assert_eq!((p.image.width(), p.image.height()), (32, 32));
        assert!(p.image.pixels().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn rgb_descriptor_interleaved() {
        let img = RasterImage::new(1, 1, 3, vec![0.1, 0.2, 0.3]).unwrap();
        let p = Patch { image: img, source: None };
        assert_eq!(rgb_descriptor(&p), vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn extractor_dimensions() {
        let fx = FeatureExtractor::new(32, HogParams::default(), GistParams::default()).unwrap();
        let img = RasterImage::new(
            64,
            64,
            3,
            (0..64 * 64 * 3).map(|i| ((i * 7) % 101) as f64 / 100.0).collect(),
        )
        .unwrap();
        let b = fx.describe_circles(&img, &[Circle::new(30.0, 30.0, 12.0)]).unwrap();
        assert_eq!(b[0].rgb.len(), 3 * 32 * 32);
        assert_eq!(b[0].hog.len(), 32);
        assert_eq!(b[0].gist.len(), 512);
    }
}
