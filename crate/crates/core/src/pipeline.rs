//! End-to-end analysis of one image or a batch: preprocessing, detection,
//! description, classification, sizing and the written artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::crf::{classify_candidates, Classification, ClassifyInput, KindThresholds, Label, ReferenceSource};
use crate::detect::{circle_offsets, detect_circles, CandidateSet, Circle, RadiusRange};
use crate::error::{Error, Result};
use crate::features::{FeatureBundle, FeatureExtractor, Patch};
use crate::imaging::{enhance, load_image, resize_bilinear, save_png, RasterImage};
use crate::sizing::{batch_agreement, build_histogram, calibrate_scale_with, summarize, BatchAgreement, Histogram, SizeSummary};

/// In-memory result of analysing one image.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub original_size: (usize, usize),
    /// Working image (resized, not enhanced), used for the overlay.
    pub image: RasterImage,
    /// Row and column factors from original to working pixels.
    pub factors: (f64, f64),
    /// Millimetres per working pixel.
    pub mm_per_px: Option<f64>,
    pub radius: RadiusRange,
    /// Working-pixel circles.
    pub candidates: CandidateSet,
    pub classification: Classification,
    /// Diameters of the berry set, in candidate order.
    pub diameters_mm: Vec<f64>,
    pub histogram: Histogram,
    pub summary: Option<SizeSummary>,
}

impl Analysis {
    pub fn berry_circles(&self) -> Vec<Circle> {
        self.classification
            .berries
            .iter()
            .map(|&i| self.candidates.candidates[i].circle)
            .collect()
    }

    fn mean_factor(&self) -> f64 {
        0.5 * (self.factors.0 + self.factors.1)
    }

    /// Circle mapped back to original image pixels.
    pub fn to_original(&self, c: &Circle) -> Circle {
        Circle::new(c.row / self.factors.0, c.col / self.factors.1, c.radius / self.mean_factor())
    }
}

fn working_size(cfg: &PipelineConfig, w: usize, h: usize) -> (usize, usize) {
    match cfg.resize {
        None => (w, h),
        Some((a, b)) => {
            let (long, short) = (a.max(b), a.min(b));
            if w >= h {
                (long, short)
            } else {
                (short, long)
            }
        }
    }
}

/// Runs every step on an image already in memory. `external_refs` are
/// reference patches used when too few reference circles are detected.
pub fn analyze_image(img: &RasterImage, cfg: &PipelineConfig, external_refs: Option<&[RasterImage]>) -> Result<Analysis> {
    cfg.validate()?;
    let rgb = img.to_rgb();
    let (w, h) = (rgb.width(), rgb.height());
    let (ww, wh) = working_size(cfg, w, h);
    let work = if (ww, wh) == (w, h) { rgb } else { resize_bilinear(&rgb, ww, wh)? };
    let factors = (wh as f64 / h as f64, ww as f64 / w as f64);
    let mean_factor = 0.5 * (factors.0 + factors.1);

    let mm_per_px = match cfg.scale_px {
        Some(b) => Some(calibrate_scale_with(cfg.label_width_mm, b)?.ratio / mean_factor),
        None => None,
    };
    let radius = match (cfg.radius_px, mm_per_px) {
        (Some((lo, hi)), _) => {
            let r = RadiusRange::new(
                ((lo as f64 * mean_factor).round() as usize).max(2),
                (hi as f64 * mean_factor).round() as usize,
            );
            r.validate()?;
            r
        }
        (None, Some(a)) => RadiusRange::from_diameters_mm(cfg.diameter_range_mm, a)?,
        (None, None) => unreachable!("validated config has a scale or a radius range"),
    };

    let enhanced = if cfg.enhance { enhance(&work)? } else { work.clone() };
    let candidates = detect_circles(&enhanced, &cfg.detect_config(radius))?;
    let circles = candidates.circles();
    log::info!("{} candidates, {} references", circles.len(), candidates.reference_indices().len());

    let extractor = FeatureExtractor::new(cfg.patch_side, cfg.hog_params(), cfg.gist_params())?;
    let features = extractor.describe_circles(&enhanced, &circles)?;
    let ext_features: Option<Vec<FeatureBundle>> = match external_refs {
        Some(imgs) if !imgs.is_empty() => Some(
            imgs.iter()
                .map(|p| {
                    let patch = Patch::from_image(&(if cfg.enhance { enhance(p)? } else { p.to_rgb() }), cfg.patch_side)?;
                    extractor.describe(&patch)
                })
                .collect::<Result<_>>()?,
        ),
        _ => None,
    };
    let flags = candidates.reference_flags();
    let classification = classify_candidates(
        &ClassifyInput {
            circles: &circles,
            features: &features,
            reference_flags: &flags,
            external_references: ext_features.as_deref(),
        },
        &cfg.classify_config(),
    )?;

    let diameters_mm: Vec<f64> = match mm_per_px {
        Some(a) => classification.berries.iter().map(|&i| 2.0 * circles[i].radius * a).collect(),
        None => Vec::new(),
    };
    let histogram = build_histogram(&diameters_mm);
    let summary = summarize(&diameters_mm, None);
    Ok(Analysis {
        original_size: (w, h),
        image: work,
        factors,
        mm_per_px,
        radius,
        candidates,
        classification,
        diameters_mm,
        histogram,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub bin_mm: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationEcho {
    pub reference_source: Option<ReferenceSource>,
    pub thresholds: Option<KindThresholds>,
    pub t_dist_px: Option<f64>,
    pub energy: f64,
}

/// Values derived at run time from the configuration and the image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub working_width: usize,
    pub working_height: usize,
    pub mm_per_px: Option<f64>,
    pub radius_px_min: usize,
    pub radius_px_max: usize,
    pub w_spatial: f64,
    pub percentile_used: f64,
    pub fallback_engaged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub candidates: usize,
    pub references: usize,
    pub berries: usize,
    pub classification: Option<ClassificationEcho>,
    pub sizing: Option<SizeSummary>,
    pub sizing_unavailable: bool,
    pub manual_mean_mm: Option<f64>,
    pub histogram: Vec<HistogramBin>,
    pub config: PipelineConfig,
    pub resolved: ResolvedConfig,
}

impl ImageReport {
    pub fn from_analysis(image: &str, a: &Analysis, cfg: &PipelineConfig, manual_mean_mm: Option<f64>) -> Self {
        let c = &a.classification;
        let sizing = summarize(&a.diameters_mm, manual_mean_mm);
        Self {
            image: image.to_string(),
            width: a.original_size.0,
            height: a.original_size.1,
            candidates: a.candidates.len(),
            references: a.candidates.reference_indices().len(),
            berries: c.berries.len(),
            classification: c.reference_source.map(|source| ClassificationEcho {
                reference_source: Some(source),
                thresholds: c.thresholds,
                t_dist_px: c.t_dist,
                energy: c.energy_value,
            }),
            sizing_unavailable: sizing.is_none(),
            sizing,
            manual_mean_mm,
            histogram: a
                .histogram
                .bins
                .iter()
                .map(|&(bin_mm, count)| HistogramBin { bin_mm, count })
                .collect(),
            config: cfg.clone(),
            resolved: ResolvedConfig {
                working_width: a.image.width(),
                working_height: a.image.height(),
                mm_per_px: a.mm_per_px,
                radius_px_min: a.radius.min,
                radius_px_max: a.radius.max,
                w_spatial: cfg.weights().spatial,
                percentile_used: c.percentile_used,
                fallback_engaged: c.fallback_engaged,
            },
        }
    }
}

/// `candidate_id,center_row,center_col,radius_px,diameter_mm,label` in
/// original image pixels; the diameter is empty without a scale.
pub fn diameters_csv(a: &Analysis) -> String {
    let mut s = String::from("candidate_id,center_row,center_col,radius_px,diameter_mm,label\n");
    for (i, cand) in a.candidates.candidates.iter().enumerate() {
        let o = a.to_original(&cand.circle);
        let d = a
            .mm_per_px
            .map_or(String::new(), |m| format!("{:.4}", 2.0 * cand.circle.radius * m));
        let label = match a.classification.labels.0[i] {
            Label::Berry => "berry",
            Label::NonBerry => "non_berry",
        };
        s.push_str(&format!("{i},{:.3},{:.3},{:.3},{d},{label}\n", o.row, o.col, o.radius));
    }
    s
}

/// Reads back a `diameters.csv`: each candidate's circle (original pixels)
/// and label.
pub fn read_diameters_csv(path: &Path) -> Result<Vec<(Circle, Label)>> {
    let bad = |m: String| Error::Malformed(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let num = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad(format!("row {}: bad numeric field {k}", n + 1)))
        };
        let label = match rec.get(5) {
            Some("berry") => Label::Berry,
            Some("non_berry") => Label::NonBerry,
            other => return Err(bad(format!("row {}: bad label {other:?}", n + 1))),
        };
        out.push((Circle::new(num(1)?, num(2)?, num(3)?), label));
    }
    Ok(out)
}

/// Working image with berries outlined in red and rejected candidates in
/// blue.
pub fn render_overlay(a: &Analysis) -> RasterImage {
    let mut img = a.image.clone();
    let (w, h) = (img.width() as isize, img.height() as isize);
    for (i, cand) in a.candidates.candidates.iter().enumerate() {
        let color = match a.classification.labels.0[i] {
            Label::Berry => [1.0, 0.0, 0.0],
            Label::NonBerry => [0.0, 0.0, 1.0],
        };
        let (r0, c0) = (cand.circle.row.round() as isize, cand.circle.col.round() as isize);
        let radius = cand.circle.radius.round() as usize;
        for rr in radius.saturating_sub(1)..=radius + 1 {
            for (dr, dc) in circle_offsets(rr) {
                let (y, x) = (r0 + dr, c0 + dc);
                if (0..h).contains(&y) && (0..w).contains(&x) {
                    for (k, v) in color.iter().enumerate() {
                        img.set(y as usize, x as usize, k, *v);
                    }
                }
            }
        }
    }
    img
}

fn write(path: &Path, contents: &[u8]) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Unwritable {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `report.json`, `diameters.csv`, `histogram.csv` and `overlay.png`.
pub fn write_artifacts(out_dir: &Path, report: &ImageReport, a: &Analysis) -> Result<()> {
    create_dir(out_dir)?;
    let json = serde_json::to_string_pretty(report).expect("report serialises");
    write(&out_dir.join("report.json"), json.as_bytes())?;
    write(&out_dir.join("diameters.csv"), diameters_csv(a).as_bytes())?;
    write(&out_dir.join("histogram.csv"), a.histogram.to_csv().as_bytes())?;
    save_png(&render_overlay(a), &out_dir.join("overlay.png"))
}

/// Image files (PNG / PNM) in `dir`, sorted by name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|source| Error::Unreadable {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension().and_then(|e| e.to_str()).is_some_and(|e| {
                    matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "ppm" | "pnm" | "pbm")
                })
        })
        .collect();
    out.sort();
    Ok(out)
}

pub fn load_reference_patches(dir: &Path) -> Result<Vec<RasterImage>> {
    list_images(dir)?.iter().map(|p| load_image(p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualEntry {
    pub image: Option<String>,
    pub mean_diameter_mm: f64,
}

/// Reads manual measurements: a header with `mean_diameter_mm` and,
/// optionally, `image` naming the file each row belongs to.
pub fn read_manual_csv(path: &Path) -> Result<Vec<ManualEntry>> {
    let bad = |m: String| Error::InvalidArgument(format!("{}: {m}", path.display()));
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mean_col = col("mean_diameter_mm").ok_or_else(|| bad("missing column mean_diameter_mm".into()))?;
    let image_col = col("image");
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let v = rec.get(mean_col).unwrap_or("");
        let mean: f64 = v
            .parse()
            .map_err(|_| bad(format!("row {}: bad mean_diameter_mm '{v}'", n + 1)))?;
        out.push(ManualEntry {
            image: image_col.and_then(|c| rec.get(c)).map(str::to_string),
            mean_diameter_mm: mean,
        });
    }
    Ok(out)
}

/// Manual mean for `image`: a row naming the file (or its stem), or the only
/// row of an unlabelled sheet.
pub fn manual_mean_for(entries: &[ManualEntry], image: &Path) -> Option<f64> {
    let name = image.file_name().and_then(|n| n.to_str());
    let stem = image.file_stem().and_then(|n| n.to_str());
    entries
        .iter()
        .find(|e| e.image.as_deref().is_some_and(|i| Some(i) == name || Some(i) == stem))
        .or_else(|| match entries {
            [only] if only.image.is_none() => Some(only),
            _ => None,
        })
        .map(|e| e.mean_diameter_mm)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub manual: Vec<ManualEntry>,
    pub ref_patches: Option<PathBuf>,
}

/// Analyses one image file and writes its artifacts to `out_dir`.
pub fn run_pipeline(image: &Path, cfg: &PipelineConfig, out_dir: &Path, opts: &RunOptions) -> Result<ImageReport> {
    let img = load_image(image)?;
    let refs = match &opts.ref_patches {
        Some(dir) => Some(load_reference_patches(dir)?),
        None => None,
    };
    let analysis = analyze_image(&img, cfg, refs.as_deref())?;
    let report = ImageReport::from_analysis(
        &image.display().to_string(),
        &analysis,
        cfg,
        manual_mean_for(&opts.manual, image),
    );
    write_artifacts(out_dir, &report, &analysis)?;
    Ok(report)
}

/// Machine-readable description of a failure.
pub fn error_json(err: &Error) -> serde_json::Value {
    serde_json::json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": err.exit_code(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub image: String,
    pub output: String,
    pub status: String,
    pub exit_code: i32,
    pub error: Option<serde_json::Value>,
    pub berries: Option<usize>,
    pub mean_mm: Option<f64>,
    pub manual_mean_mm: Option<f64>,
    pub md_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub images: Vec<BatchEntry>,
    pub agreement: Option<BatchAgreement>,
}

impl BatchReport {
    /// 0 when every image was analysed, else the largest per-image code.
    pub fn exit_code(&self) -> i32 {
        self.images.iter().map(|e| e.exit_code).max().unwrap_or(0)
    }
}

/// Analyses every image with at most `workers` in flight; each gets its own
/// subdirectory of `out_dir`, and `batch.json` summarises the run.
pub fn run_batch(images: &[PathBuf], cfg: &PipelineConfig, out_dir: &Path, opts: &RunOptions, workers: usize) -> Result<BatchReport> {
    cfg.validate()?;
    create_dir(out_dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut names: Vec<String> = Vec::with_capacity(images.len());
    for (i, p) in images.iter().enumerate() {
        let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("image").to_string();
        names.push(if names.contains(&stem) { format!("{stem}_{i}") } else { stem });
    }
    let entries: Vec<BatchEntry> = pool.install(|| {
        images
            .par_iter()
            .zip(&names)
            .map(|(img, name)| {
                let sub = out_dir.join(name);
                let manual = manual_mean_for(&opts.manual, img);
                let base = BatchEntry {
                    image: img.display().to_string(),
                    output: sub.display().to_string(),
                    status: "ok".into(),
                    exit_code: 0,
                    error: None,
                    berries: None,
                    mean_mm: None,
                    manual_mean_mm: manual,
                    md_mm: None,
                };
                match run_pipeline(img, cfg, &sub, opts) {
                    Ok(r) => BatchEntry {
                        berries: Some(r.berries),
                        mean_mm: r.sizing.map(|s| s.mean_mm),
                        md_mm: r.sizing.and_then(|s| s.md_mm),
                        ..base
                    },
                    Err(e) => {
                        log::warn!("{}: {e}", img.display());
                        let j = error_json(&e);
                        // best effort: the failure is also recorded in batch.json
                        let _ = create_dir(&sub)
                            .and_then(|_| write(&sub.join("error.json"), j.to_string().as_bytes()));
                        BatchEntry {
                            status: "error".into(),
                            exit_code: e.exit_code(),
                            error: Some(j),
                            ..base
                        }
                    }
                }
            })
            .collect()
    });
    let pairs: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| Some((e.mean_mm?, e.manual_mean_mm?)))
        .collect();
    let report = BatchReport {
        images: entries,
        agreement: batch_agreement(&pairs),
    };
    let json = serde_json::to_string_pretty(&report).expect("batch report serialises");
    write(&out_dir.join("batch.json"), json.as_bytes())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn working_size_follows_orientation() {
        let cfg = PipelineConfig::default();
        assert_eq!(working_size(&cfg, 4000, 3000), (2500, 1667));
        assert_eq!(working_size(&cfg, 3000, 4000), (1667, 2500));
        let none = PipelineConfig { resize: None, ..cfg };
        assert_eq!(working_size(&none, 640, 480), (640, 480));
    }

    #[test]
    fn blank_image_gives_empty_report() {
        let cfg = PipelineConfig { scale_px: Some(30.0), resize: None, ..PipelineConfig::default() };
        let img = RasterImage::filled(120, 90, 3, 0.5);
        let a = analyze_image(&img, &cfg, None).unwrap();
        assert!(a.candidates.is_empty());
        let r = ImageReport::from_analysis("blank", &a, &cfg, None);
        assert_eq!((r.candidates, r.berries), (0, 0));
        assert!(r.sizing_unavailable && r.histogram.is_empty());
    }

    #[test]
    fn manual_lookup() {
        let rows = vec![
            ManualEntry { image: Some("a.png".into()), mean_diameter_mm: 10.0 },
            ManualEntry { image: Some("b".into()), mean_diameter_mm: 12.0 },
        ];
        assert_eq!(manual_mean_for(&rows, Path::new("x/a.png")), Some(10.0));
        assert_eq!(manual_mean_for(&rows, Path::new("b.ppm")), Some(12.0));
        assert_eq!(manual_mean_for(&rows, Path::new("c.png")), None);
        let single = vec![ManualEntry { image: None, mean_diameter_mm: 9.0 }];
        assert_eq!(manual_mean_for(&single, Path::new("any.png")), Some(9.0));
    }

    #[test]
    fn error_codes() {
        assert_eq!(Error::NoReferences { needed: 2, found: 0 }.exit_code(), 3);
        assert_eq!(Error::ZeroArea.exit_code(), 2);
        assert_eq!(error_json(&Error::NoReferences { needed: 2, found: 1 })["error"], "classification_unavailable");
    }
}
