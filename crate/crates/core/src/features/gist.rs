use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{l2_normalize, Patch};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GistParams {
    /// Spatial averaging grid along each side.
    pub grid: usize,
    pub scales: usize,
    pub orientations: usize,
}

impl Default for GistParams {
    fn default() -> Self {
        Self {
            grid: 4,
            scales: 4,
            orientations: 8,
        }
    }
}

impl GistParams {
    pub fn dim(&self) -> usize {
        self.grid * self.grid * self.scales * self.orientations
    }
}

/// Radial width of each band, in octaves.
const RADIAL_SIGMA_OCT: f64 = 0.5;
/// Highest band centre, cycles per pixel; lower bands halve it.
const TOP_BAND: f64 = 0.25;

/// Frequency-domain filter bank for one patch size.
///
/// Band `s` is centred at `0.25 / 2^s` cycles/px with a Gaussian profile in
/// log2-frequency (sigma half an octave). Orientation `o` is centred at
/// `o * pi / orientations` measured from the row axis, with a Gaussian
/// angular profile whose sigma is half the orientation spacing. Filters are
/// zero at DC and symmetric in frequency, so responses are real.
pub struct GistBank {
    side: usize,
    params: GistParams,
    /// `scales * orientations` transfer functions, row-major `side x side`.
    filters: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for GistBank {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GistBank")
            .field("side", &self.side)
            .field("params", &self.params)
            .finish()
    }
}

fn fft_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64 / n as f64
    } else {
        (k as f64 - n as f64) / n as f64
    }
}

impl GistBank {
    pub fn new(side: usize, params: GistParams) -> Result<Self> {
        if side < 16 {
            return Err(Error::InvalidArgument(format!(
                "gist needs patches of at least 16 px, got {side}"
            )));
        }
        if params.grid == 0 || params.scales == 0 || params.orientations == 0 || params.grid > side {
            return Err(Error::InvalidArgument(format!("bad gist parameters {params:?}")));
        }
        let angular_sigma = PI / params.orientations as f64 / 2.0;
        let mut filters = Vec::with_capacity(params.scales * params.orientations);
        for s in 0..params.scales {
            let center = TOP_BAND / 2f64.powi(s as i32);
            for o in 0..params.orientations {
                let theta0 = o as f64 * PI / params.orientations as f64;
                let mut h = vec![0.0; side * side];
                for ku in 0..side {
                    let fu = fft_freq(ku, side);
                    for kv in 0..side {
                        let fv = fft_freq(kv, side);
                        let f = (fu * fu + fv * fv).sqrt();
                        if f == 0.0 {
                            continue;
                        }
                        let radial = (-(f / center).log2().powi(2)
                            / (2.0 * RADIAL_SIGMA_OCT * RADIAL_SIGMA_OCT))
                            .exp();
                        let theta = fv.atan2(fu);
                        let dtheta = (theta - theta0 + PI / 2.0).rem_euclid(PI) - PI / 2.0;
                        let angular = (-dtheta * dtheta / (2.0 * angular_sigma * angular_sigma)).exp();
                        h[ku * side + kv] = radial * angular;
                    }
                }
                filters.push(h);
            }
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            side,
            params,
            filters,
            fft: planner.plan_fft_forward(side),
            ifft: planner.plan_fft_inverse(side),
        })
    }

    pub fn params(&self) -> GistParams {
        self.params
    }

    pub fn side(&self) -> usize {
        self.side
    }

    fn fft2(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.side;
        let plan = if inverse { &self.ifft } else { &self.fft };
        for row in data.chunks_exact_mut(n) {
            plan.process(row);
        }
        let mut col = vec![Complex64::default(); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            plan.process(&mut col);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
    }

    /// Spatially pooled band energies, scale-major then orientation then
    /// grid cell (row-major), L2-normalised; all zeros for a flat patch.
    pub fn descriptor(&self, patch: &Patch) -> Result<Vec<f64>> {
        let n = self.side;
        if patch.side() != n {
            return Err(Error::DimensionMismatch {
                left: patch.side(),
                right: n,
            });
        }
        let gray = patch.image.luminance();
        let mut spectrum: Vec<Complex64> = gray
            .as_slice()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.fft2(&mut spectrum, false);

        let g = self.params.grid;
        let norm = 1.0 / (n * n) as f64;
        let mut out = Vec::with_capacity(self.params.dim());
        let mut work = vec![Complex64::default(); n * n];
        let mut cell_sum = vec![0.0; g * g];
        let mut cell_count = vec![0usize; g * g];
        for r in 0..n {
            for c in 0..n {
                cell_count[(r * g / n) * g + c * g / n] += 1;
            }
        }
        for filter in &self.filters {
            for ((w, s), h) in work.iter_mut().zip(&spectrum).zip(filter) {
                *w = s * *h;
            }
            self.fft2(&mut work, true);
            cell_sum.iter_mut().for_each(|v| *v = 0.0);
            for r in 0..n {
                for c in 0..n {
                    let v = work[r * n + c] * norm;
                    cell_sum[(r * g / n) * g + c * g / n] += v.norm_sqr();
                }
            }
            out.extend(cell_sum.iter().zip(&cell_count).map(|(s, &k)| s / k as f64));
        }
        l2_normalize(&mut out);
        Ok(out)
    }
}
