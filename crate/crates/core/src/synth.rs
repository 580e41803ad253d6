//! Synthetic berry-cluster scenes with exact ground truth, and detection
//! scoring against that truth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::detect::Circle;
use crate::error::{Error, Result};
use crate::imaging::RasterImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub mm_per_px: f64,
    pub clusters: usize,
    /// Inclusive range of the total disk count.
    pub disks: (usize, usize),
    pub radius_px: (f64, f64),
    /// Cluster standard deviation in multiples of the mean radius.
    pub cluster_spread: f64,
    pub berry_color: [f64; 3],
    pub color_jitter: f64,
    pub background_color: [f64; 3],
    pub texture: f64,
    /// Relative brightness change across the image.
    pub illumination: f64,
    pub noise: f64,
    /// Share of disks placed partly behind a neighbour.
    pub occlusion_fraction: f64,
    /// Share of disks rendered at reduced contrast against the background.
    pub low_contrast_fraction: f64,
    /// Elongated non-circular clutter objects (stems, leaf edges).
    pub distractors: usize,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 2500,
            height: 1667,
            mm_per_px: 13.0 / 78.0,
            clusters: 3,
            disks: (20, 40),
            radius_px: (15.0, 45.0),
            cluster_spread: 3.0,
            berry_color: [0.62, 0.74, 0.38],
            color_jitter: 0.05,
            background_color: [0.13, 0.24, 0.10],
            texture: 0.04,
            illumination: 0.3,
            noise: 0.01,
            occlusion_fraction: 0.3,
            low_contrast_fraction: 0.0,
            distractors: 6,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.width < 16 || self.height < 16 {
            return bad(format!("scene too small: {}x{}", self.width, self.height));
        }
        if self.disks.0 > self.disks.1 || self.clusters == 0 {
            return bad(format!("bad disk/cluster counts {:?} / {}", self.disks, self.clusters));
        }
        if !(self.radius_px.0 >= 2.0 && self.radius_px.0 <= self.radius_px.1) {
            return bad(format!("bad radius range {:?}", self.radius_px));
        }
        if 2.0 * self.radius_px.1 + 8.0 > self.width.min(self.height) as f64 {
            return bad(format!("radius {} does not fit the scene", self.radius_px.1));
        }
        for (name, f) in [
            ("occlusion_fraction", self.occlusion_fraction),
            ("low_contrast_fraction", self.low_contrast_fraction),
        ] {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("{name} must be in [0, 1], got {f}"));
            }
        }
        if !(self.mm_per_px > 0.0) {
            return bad(format!("mm_per_px must be positive, got {}", self.mm_per_px));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthDisk {
    pub circle: Circle,
    pub cluster: usize,
    /// Drawn behind at least one overlapping neighbour.
    pub occluded: bool,
    pub low_contrast: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub width: usize,
    pub height: usize,
    pub mm_per_px: f64,
    pub disks: Vec<TruthDisk>,
}

impl GroundTruth {
    pub fn circles(&self) -> Vec<Circle> {
        self.disks.iter().map(|d| d.circle).collect()
    }

    pub fn mean_diameter_mm(&self) -> Option<f64> {
        if self.disks.is_empty() {
            return None;
        }
        let sum: f64 = self.disks.iter().map(|d| 2.0 * d.circle.radius).sum();
        Some(sum / self.disks.len() as f64 * self.mm_per_px)
    }
}

const PLACEMENT_ATTEMPTS: usize = 4000;
const GAP_PX: f64 = 2.0;

fn overlap_band(ri: f64, rj: f64) -> (f64, f64) {
    let lo = (0.75 * (ri + rj)).max(ri.max(rj) + 0.5 * ri.min(rj));
    (lo, 0.92 * (ri + rj))
}

fn place_disks(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Result<Vec<TruthDisk>> {
    let n = rng.gen_range(spec.disks.0..=spec.disks.1);
    let n_occ = (spec.occlusion_fraction * n as f64).round() as usize;
    let n_front = n - n_occ;
    let (rmin, rmax) = spec.radius_px;
    let mean_r = 0.5 * (rmin + rmax);
    let spread = Normal::new(0.0, spec.cluster_spread * mean_r).expect("finite spread");
    let (w, h) = (spec.width as f64, spec.height as f64);
    let margin = (spec.cluster_spread * mean_r).min(0.25 * w.min(h)) + rmax;
    let centers: Vec<(f64, f64)> = (0..spec.clusters)
        .map(|_| {
            (
                rng.gen_range(margin.min(h / 2.0)..=(h - margin).max(h / 2.0)),
                rng.gen_range(margin.min(w / 2.0)..=(w - margin).max(w / 2.0)),
            )
        })
        .collect();
    let inside = |c: &Circle| c.row >= c.radius + 2.0 && c.col >= c.radius + 2.0 && c.row <= h - c.radius - 3.0 && c.col <= w - c.radius - 3.0;

    let mut disks: Vec<TruthDisk> = Vec::with_capacity(n);
    for _ in 0..n_front {
        let r = rng.gen_range(rmin..=rmax);
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let cluster = rng.gen_range(0..spec.clusters);
            let c = Circle::new(
                centers[cluster].0 + spread.sample(rng),
                centers[cluster].1 + spread.sample(rng),
                r,
            );
            if inside(&c) && disks.iter().all(|d| c.center_distance(&d.circle) >= r + d.circle.radius + GAP_PX) {
                disks.push(TruthDisk { circle: c, cluster, occluded: false, low_contrast: false });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InfeasiblePacking { requested: n, attempts: PLACEMENT_ATTEMPTS });
        }
    }
    for _ in 0..n_occ {
        let r = rng.gen_range(rmin..=rmax);
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            if n_front == 0 {
                break;
            }
            let j = rng.gen_range(0..n_front);
            let front = disks[j];
            let (lo, hi) = overlap_band(r, front.circle.radius);
            if lo > hi {
                continue;
            }
            let d = rng.gen_range(lo..=hi);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let c = Circle::new(
                front.circle.row + d * angle.sin(),
                front.circle.col + d * angle.cos(),
                r,
            );
            let fits = inside(&c)
                && disks.iter().enumerate().all(|(k, o)| {
                    let dist = c.center_distance(&o.circle);
                    let clear = dist >= r + o.circle.radius + GAP_PX;
                    if k < n_front {
                        let (lo_k, hi_k) = overlap_band(r, o.circle.radius);
                        clear || (dist >= lo_k && dist <= hi_k)
                    } else {
                        clear
                    }
                });
            if fits {
                disks.push(TruthDisk { circle: c, cluster: front.cluster, occluded: true, low_contrast: false });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InfeasiblePacking { requested: n, attempts: PLACEMENT_ATTEMPTS });
        }
    }
    let n_low = (spec.low_contrast_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    for i in 0..n_low {
        let k = rng.gen_range(i..n);
        order.swap(i, k);
        disks[order[i]].low_contrast = true;
    }
    Ok(disks)
}

/// Smooth random field in about `[-1, 1]`: bilinear interpolation of a
/// coarse lattice of uniform values.
fn value_noise(w: usize, h: usize, cell: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gw = w / cell + 2;
    let gh = h / cell + 2;
    let lattice: Vec<f64> = (0..gw * gh).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        let fr = r as f64 / cell as f64;
        let (r0, tr) = (fr.floor() as usize, fr.fract());
        for c in 0..w {
            let fc = c as f64 / cell as f64;
            let (c0, tc) = (fc.floor() as usize, fc.fract());
            let v = |rr: usize, cc: usize| lattice[rr * gw + cc];
            out[r * w + c] = (1.0 - tr) * ((1.0 - tc) * v(r0, c0) + tc * v(r0, c0 + 1))
                + tr * ((1.0 - tc) * v(r0 + 1, c0) + tc * v(r0 + 1, c0 + 1));
        }
    }
    out
}

fn blend(px: &mut [f64], idx: usize, color: [f64; 3], alpha: f64) {
    for k in 0..3 {
        px[idx * 3 + k] = alpha * color[k] + (1.0 - alpha) * px[idx * 3 + k];
    }
}

fn draw_ellipse(px: &mut [f64], w: usize, h: usize, center: (f64, f64), axes: (f64, f64), angle: f64, color: [f64; 3]) {
    let (ca, sa) = (angle.cos(), angle.sin());
    let ext = axes.0.max(axes.1) + 1.0;
    let r0 = (center.0 - ext).floor().max(0.0) as usize;
    let r1 = ((center.0 + ext).ceil() as usize).min(h - 1);
    let c0 = (center.1 - ext).floor().max(0.0) as usize;
    let c1 = ((center.1 + ext).ceil() as usize).min(w - 1);
    for r in r0..=r1 {
        for c in c0..=c1 {
            let (dy, dx) = (r as f64 - center.0, c as f64 - center.1);
            let u = (dx * ca + dy * sa) / axes.0;
            let v = (-dx * sa + dy * ca) / axes.1;
            let rho = (u * u + v * v).sqrt();
            // approximate edge coverage in units of the minor axis
            let cov = ((1.0 - rho) * axes.1 + 0.5).clamp(0.0, 1.0);
            if cov > 0.0 {
                blend(px, r * w + c, color, cov);
            }
        }
    }
}

fn draw_berry(px: &mut [f64], w: usize, h: usize, disk: &Circle, color: [f64; 3]) {
    let r = disk.radius;
    let hl = (disk.row - 0.35 * r, disk.col - 0.35 * r);
    let hl_s2 = 2.0 * (0.22 * r).powi(2);
    let r0 = (disk.row - r - 1.0).floor().max(0.0) as usize;
    let r1 = ((disk.row + r + 1.0).ceil() as usize).min(h - 1);
    let c0 = (disk.col - r - 1.0).floor().max(0.0) as usize;
    let c1 = ((disk.col + r + 1.0).ceil() as usize).min(w - 1);
    for y in r0..=r1 {
        for x in c0..=c1 {
            let (dy, dx) = (y as f64 - disk.row, x as f64 - disk.col);
            let rho = (dy * dy + dx * dx).sqrt();
            let cov = (r + 0.5 - rho).clamp(0.0, 1.0);
            if cov == 0.0 {
                continue;
            }
            let falloff = 1.0 - 0.3 * (rho / r).min(1.0).powi(2);
            let highlight = 0.25 * (-((y as f64 - hl.0).powi(2) + (x as f64 - hl.1).powi(2)) / hl_s2).exp();
            let shaded = [0, 1, 2].map(|k| color[k] * falloff + highlight);
            blend(px, y * w + x, shaded, cov);
        }
    }
}

/// Renders the scene described by `spec`. Identical specs give identical
/// images.
pub fn render_scene(spec: &SceneSpec) -> Result<(RasterImage, GroundTruth)> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let disks = place_disks(spec, &mut rng)?;

    let texture = value_noise(w, h, 24, &mut rng);
    let mut px = vec![0.0; w * h * 3];
    for (i, t) in texture.iter().enumerate() {
        for k in 0..3 {
            px[i * 3 + k] = spec.background_color[k] * (1.0 + 0.6 * t) + spec.texture * t;
        }
    }

    let mean_r = 0.5 * (spec.radius_px.0 + spec.radius_px.1);
    for _ in 0..spec.distractors {
        let center = (rng.gen_range(0.0..h as f64), rng.gen_range(0.0..w as f64));
        let axes = (rng.gen_range(2.0..5.0) * mean_r, rng.gen_range(0.12..0.3) * mean_r);
        let angle = rng.gen_range(0.0..std::f64::consts::PI);
        let shade = rng.gen_range(0.8..1.2);
        draw_ellipse(&mut px, w, h, center, axes, angle, [0.45 * shade, 0.33 * shade, 0.2 * shade]);
    }

    let jitter = Normal::new(0.0, spec.color_jitter.max(1e-12)).expect("finite jitter");
    let colors: Vec<[f64; 3]> = disks
        .iter()
        .map(|d| {
            let j = jitter.sample(&mut rng);
            let base = spec.berry_color.map(|v| v + j);
            if d.low_contrast {
                [0, 1, 2].map(|k| spec.background_color[k] + 0.4 * (base[k] - spec.background_color[k]))
            } else {
                base
            }
        })
        .collect();
    // occluded disks sit behind the front layer
    for pass in [true, false] {
        for (d, color) in disks.iter().zip(&colors) {
            if d.occluded == pass {
                draw_berry(&mut px, w, h, &d.circle, *color);
            }
        }
    }

    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (ga, gb) = (angle.cos(), angle.sin());
    let diag = ((w * w + h * h) as f64).sqrt();
    let sensor = Normal::new(0.0, spec.noise.max(1e-12)).expect("finite noise");
    for r in 0..h {
        for c in 0..w {
            let proj = ((c as f64 - w as f64 / 2.0) * ga + (r as f64 - h as f64 / 2.0) * gb) / diag;
            let gain = 1.0 + spec.illumination * proj;
            for k in 0..3 {
                let i = (r * w + c) * 3 + k;
                px[i] = (px[i] * gain + sensor.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
    }

    let image = RasterImage::new(w, h, 3, px)?;
    Ok((
        image,
        GroundTruth {
            width: w,
            height: h,
            mm_per_px: spec.mm_per_px,
            disks,
        },
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub detected: usize,
    pub truth: usize,
    pub matched: usize,
    pub precision: f64,
    pub recall: f64,
    /// Set when nothing was detected; precision is then 1 by convention.
    pub empty_detection: bool,
    /// Mean absolute diameter error over matches, pixels.
    pub diameter_mae_px: Option<f64>,
}

/// Greedy one-to-one matching, closest centres first. A pair qualifies when
/// both the centre distance and the radius difference are within `tol`.
pub fn evaluate_detection(detected: &[Circle], truth: &[Circle], tol: f64) -> Result<DetectionScore> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, d) in detected.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let dist = d.center_distance(t);
            if dist <= tol && (d.radius - t.radius).abs() <= tol {
                pairs.push((dist, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_d = vec![false; detected.len()];
    let mut used_t = vec![false; truth.len()];
    let mut matched = 0;
    let mut abs_err = 0.0;
    for (_, i, j) in pairs {
        if !used_d[i] && !used_t[j] {
            used_d[i] = true;
            used_t[j] = true;
            matched += 1;
            abs_err += 2.0 * (detected[i].radius - truth[j].radius).abs();
        }
    }
    let empty = detected.is_empty();
    Ok(DetectionScore {
        detected: detected.len(),
        truth: truth.len(),
        matched,
        precision: if empty { 1.0 } else { matched as f64 / detected.len() as f64 },
        recall: if truth.is_empty() { 1.0 } else { matched as f64 / truth.len() as f64 },
        empty_detection: empty,
        diameter_mae_px: (matched > 0).then(|| abs_err / matched as f64),
    })
}
