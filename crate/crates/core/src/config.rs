//! Run-wide settings and their flat `key = value` text form.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crf::{ClassifyConfig, CrfWeights, PairwiseModel};
use crate::detect::{DetectConfig, RadiusRange};
use crate::error::{Error, Result};
use crate::features::{GistParams, HogParams};
use crate::sizing::LABEL_WIDTH_MM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Scale label width in image pixels.
    pub scale_px: Option<f64>,
    pub label_width_mm: f64,
    /// Admissible berry diameters; converted to pixel radii via the scale.
    pub diameter_range_mm: (f64, f64),
    /// Explicit pixel radius range (original image pixels), overriding the
    /// diameter range.
    pub radius_px: Option<(usize, usize)>,
    /// Long and short side of the working resolution; `None` keeps the input.
    pub resize: Option<(usize, usize)>,
    pub enhance: bool,

    pub ridge_window: usize,
    pub threshold_grid_size: usize,
    pub smoothing_sigma: f64,
    pub ref_peak_frac: f64,
    pub cand_peak_frac: f64,
    pub refine_shift: usize,
    pub refine_scale: usize,

    pub patch_side: usize,
    pub hog_cells: usize,
    pub hog_bins: usize,
    pub gist_grid: usize,
    pub gist_scales: usize,
    pub gist_orientations: usize,

    pub w_rgb: f64,
    pub w_hog: f64,
    pub w_gist: f64,
    pub w_dist: f64,
    /// `None` derives half the sum of the unary weights.
    pub w_spatial: Option<f64>,
    pub feature_sharpness: f64,
    pub distance_sharpness: f64,
    pub percentile: f64,
    pub percentile_fallback: f64,
    pub t_dist_factor: f64,
    pub edge_prune_factor: f64,
    pub pairwise: PairwiseModel,

    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let classify = ClassifyConfig::default();
        Self {
            scale_px: None,
            label_width_mm: LABEL_WIDTH_MM,
            diameter_range_mm: (5.0, 20.0),
            radius_px: None,
            resize: Some((2500, 1667)),
            enhance: true,
            ridge_window: 5,
            threshold_grid_size: 20,
            smoothing_sigma: 2.0,
            ref_peak_frac: 0.6,
            cand_peak_frac: 0.3,
            refine_shift: 5,
            refine_scale: 5,
            patch_side: 32,
            hog_cells: 2,
            hog_bins: 8,
            gist_grid: 4,
            gist_scales: 4,
            gist_orientations: 8,
            w_rgb: classify.weights.rgb,
            w_hog: classify.weights.hog,
            w_gist: classify.weights.gist,
            w_dist: classify.weights.dist,
            w_spatial: None,
            feature_sharpness: classify.feature_sharpness,
            distance_sharpness: classify.distance_sharpness,
            percentile: classify.percentile,
            percentile_fallback: classify.percentile_fallback,
            t_dist_factor: classify.t_dist_factor,
            edge_prune_factor: classify.edge_prune_factor,
            pairwise: classify.pairwise,
            seed: 0,
        }
    }
}

fn fmt_opt<T: std::fmt::Display>(v: &Option<T>, none: &str) -> String {
    v.as_ref().map_or_else(|| none.to_string(), |x| x.to_string())
}

fn fmt_pair<T: std::fmt::Display>(p: &(T, T)) -> String {
    format!("{},{}", p.0, p.1)
}

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("bad value '{v}' for {key}")))
}

fn parse_pair<T: std::str::FromStr>(key: &str, v: &str) -> Result<(T, T)> {
    let (a, b) = v
        .split_once(',')
        .ok_or_else(|| Error::Config(format!("{key} expects 'a,b', got '{v}'")))?;
    Ok((parse(key, a.trim())?, parse(key, b.trim())?))
}

fn parse_opt<T>(v: &str, none: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
    if v == none {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

impl PipelineConfig {
    pub fn weights(&self) -> CrfWeights {
        let mut w = CrfWeights::with_derived_spatial(self.w_rgb, self.w_hog, self.w_gist, self.w_dist);
        if let Some(s) = self.w_spatial {
            w.spatial = s;
        }
        w
    }

    pub fn classify_config(&self) -> ClassifyConfig {
        ClassifyConfig {
            weights: self.weights(),
            feature_sharpness: self.feature_sharpness,
            distance_sharpness: self.distance_sharpness,
            percentile: self.percentile,
            percentile_fallback: self.percentile_fallback,
            t_dist_factor: self.t_dist_factor,
            edge_prune_factor: self.edge_prune_factor,
            pairwise: self.pairwise,
        }
    }

    pub fn hog_params(&self) -> HogParams {
        HogParams {
            cells_per_side: self.hog_cells,
            bins: self.hog_bins,
        }
    }

    pub fn gist_params(&self) -> GistParams {
        GistParams {
            grid: self.gist_grid,
            scales: self.gist_scales,
            orientations: self.gist_orientations,
        }
    }

    pub fn detect_config(&self, radius: RadiusRange) -> DetectConfig {
        DetectConfig {
            radius,
            ref_peak_frac: self.ref_peak_frac,
            cand_peak_frac: self.cand_peak_frac,
            refine_shift: self.refine_shift,
            refine_scale: self.refine_scale,
            smoothing_sigma: self.smoothing_sigma,
            threshold_grid_size: self.threshold_grid_size,
            ridge_window: self.ridge_window,
        }
    }

    /// Checks that do not depend on the image.
    pub fn validate(&self) -> Result<()> {
        if self.scale_px.is_none() && self.radius_px.is_none() {
            return Err(Error::Config("either scale_px or radius_px must be set".into()));
        }
        if let Some(b) = self.scale_px {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Config(format!("scale_px must be positive, got {b}")));
            }
        }
        if let Some((lo, hi)) = self.radius_px {
            RadiusRange::new(lo, hi).validate()?;
        }
        if let Some((a, b)) = self.resize {
            if a < 16 || b < 16 {
                return Err(Error::Config(format!("resize target {a}x{b} too small")));
            }
        }
        self.detect_config(RadiusRange::new(2, 2)).validate()?;
        self.classify_config().validate()?;
        Ok(())
    }

    /// One `key = value` line per field, in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("scale_px", fmt_opt(&self.scale_px, "none"));
        put("label_width_mm", self.label_width_mm.to_string());
        put("diameter_range_mm", fmt_pair(&self.diameter_range_mm));
        put("radius_px", self.radius_px.as_ref().map_or("none".into(), fmt_pair));
        put("resize", self.resize.as_ref().map_or("none".into(), fmt_pair));
        put("enhance", self.enhance.to_string());
        put("ridge_window", self.ridge_window.to_string());
        put("threshold_grid_size", self.threshold_grid_size.to_string());
        put("smoothing_sigma", self.smoothing_sigma.to_string());
        put("ref_peak_frac", self.ref_peak_frac.to_string());
        put("cand_peak_frac", self.cand_peak_frac.to_string());
        put("refine_shift", self.refine_shift.to_string());
        put("refine_scale", self.refine_scale.to_string());
        put("patch_side", self.patch_side.to_string());
        put("hog_cells", self.hog_cells.to_string());
        put("hog_bins", self.hog_bins.to_string());
        put("gist_grid", self.gist_grid.to_string());
        put("gist_scales", self.gist_scales.to_string());
        put("gist_orientations", self.gist_orientations.to_string());
        put("w_rgb", self.w_rgb.to_string());
        put("w_hog", self.w_hog.to_string());
        put("w_gist", self.w_gist.to_string());
        put("w_dist", self.w_dist.to_string());
        put("w_spatial", fmt_opt(&self.w_spatial, "auto"));
        put("feature_sharpness", self.feature_sharpness.to_string());
        put("distance_sharpness", self.distance_sharpness.to_string());
        put("percentile", self.percentile.to_string());
        put("percentile_fallback", self.percentile_fallback.to_string());
        put("t_dist_factor", self.t_dist_factor.to_string());
        put("edge_prune_factor", self.edge_prune_factor.to_string());
        put("pairwise", self.pairwise.to_string());
        put("seed", self.seed.to_string());
        s
    }

    /// Applies `key = value` lines on top of the defaults. Blank lines and
    /// `#` comments are skipped; unknown or repeated keys are errors.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if !seen.insert(k.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key '{k}'", n + 1)));
            }
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, k: &str, v: &str) -> Result<()> {
        match k {
            "scale_px" => self.scale_px = parse_opt(v, "none", |v| parse(k, v))?,
            "label_width_mm" => self.label_width_mm = parse(k, v)?,
            "diameter_range_mm" => self.diameter_range_mm = parse_pair(k, v)?,
            "radius_px" => self.radius_px = parse_opt(v, "none", |v| parse_pair(k, v))?,
            "resize" => self.resize = parse_opt(v, "none", |v| parse_pair(k, v))?,
            "enhance" => self.enhance = parse(k, v)?,
            "ridge_window" => self.ridge_window = parse(k, v)?,
            "threshold_grid_size" => self.threshold_grid_size = parse(k, v)?,
            "smoothing_sigma" => self.smoothing_sigma = parse(k, v)?,
            "ref_peak_frac" => self.ref_peak_frac = parse(k, v)?,
            "cand_peak_frac" => self.cand_peak_frac = parse(k, v)?,
            "refine_shift" => self.refine_shift = parse(k, v)?,
            "refine_scale" => self.refine_scale = parse(k, v)?,
            "patch_side" => self.patch_side = parse(k, v)?,
            "hog_cells" => self.hog_cells = parse(k, v)?,
            "hog_bins" => self.hog_bins = parse(k, v)?,
            "gist_grid" => self.gist_grid = parse(k, v)?,
            "gist_scales" => self.gist_scales = parse(k, v)?,
            "gist_orientations" => self.gist_orientations = parse(k, v)?,
            "w_rgb" => self.w_rgb = parse(k, v)?,
            "w_hog" => self.w_hog = parse(k, v)?,
            "w_gist" => self.w_gist = parse(k, v)?,
            "w_dist" => self.w_dist = parse(k, v)?,
            "w_spatial" => self.w_spatial = parse_opt(v, "auto", |v| parse(k, v))?,
            "feature_sharpness" => self.feature_sharpness = parse(k, v)?,
            "distance_sharpness" => self.distance_sharpness = parse(k, v)?,
            "percentile" => self.percentile = parse(k, v)?,
            "percentile_fallback" => self.percentile_fallback = parse(k, v)?,
            "t_dist_factor" => self.t_dist_factor = parse(k, v)?,
            "edge_prune_factor" => self.edge_prune_factor = parse(k, v)?,
            "pairwise" => self.pairwise = v.parse()?,
            "seed" => self.seed = parse(k, v)?,
            _ => return Err(Error::Config(format!("unknown key '{k}'"))),
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }
}
