use serde::{Deserialize, Serialize};

use super::{Label, PROB_CLAMP};
use crate::error::{Error, Result};
use crate::features::{pearson_correlation, FeatureBundle, FeatureKind};

/// `P(berry)` / `P(non-berry)` for one candidate and one evidence source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbPair {
    pub berry: f64,
    pub non_berry: f64,
}

impl ProbPair {
    /// Builds the pair from `P(non-berry)`, clamped away from 0 and 1.
    pub fn from_non_berry(p: f64) -> Self {
        let non_berry = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        Self {
            berry: 1.0 - non_berry,
            non_berry,
        }
    }

    pub fn uniform() -> Self {
        Self::from_non_berry(0.5)
    }

    pub fn get(&self, label: Label) -> f64 {
        match label {
            Label::Berry => self.berry,
            Label::NonBerry => self.non_berry,
        }
    }
}

/// Per-kind feature thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KindThresholds {
    pub rgb: f64,
    pub hog: f64,
    pub gist: f64,
}

impl KindThresholds {
    pub fn get(&self, kind: FeatureKind) -> f64 {
        match kind {
            FeatureKind::Rgb => self.rgb,
            FeatureKind::Hog => self.hog,
            FeatureKind::Gist => self.gist,
        }
    }
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], level: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&level) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = level * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// All correlations between distinct reference pairs, per kind.
pub fn reference_correlations(refs: &[FeatureBundle]) -> Result<[Vec<f64>; 3]> {
    if refs.len() < 2 {
        return Err(Error::NoReferences {
            needed: 2,
            found: refs.len(),
        });
    }
    let mut out: [Vec<f64>; 3] = Default::default();
    for (k, kind) in FeatureKind::ALL.into_iter().enumerate() {
        for i in 0..refs.len() {
            for j in i + 1..refs.len() {
                out[k].push(pearson_correlation(refs[i].get(kind), refs[j].get(kind))?);
            }
        }
    }
    Ok(out)
}

/// Per-kind quantile at `level` of the pairwise reference correlations.
pub fn percentile_threshold(refs: &[FeatureBundle], level: f64) -> Result<KindThresholds> {
    let corr = reference_correlations(refs)?;
    thresholds_from_correlations(&corr, level)
}

pub fn thresholds_from_correlations(corr: &[Vec<f64>; 3], level: f64) -> Result<KindThresholds> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "quantile level must be in (0, 1), got {level}"
        )));
    }
    let q = |v: &Vec<f64>| {
        quantile(v, level).ok_or(Error::NoReferences {
            needed: 2,
            found: 0,
        })
    };
    Ok(KindThresholds {
        rgb: q(&corr[0])?,
        hog: q(&corr[1])?,
        gist: q(&corr[2])?,
    })
}

/// Sigmoid posterior of a projected feature `l` against threshold `t`:
/// `P(non-berry) = 1 / (1 + exp(s (l - t)))`.
pub fn unary_posterior(l: f64, t: f64, sharpness: f64) -> ProbPair {
    ProbPair::from_non_berry(1.0 / (1.0 + (sharpness * (l - t)).exp()))
}

/// Spatial-isolation posterior. `P(non-berry)` rises with the mean
/// neighbour distance and is floored at 0.5, so only isolation counts as
/// evidence. The sigmoid argument is `s (l - t) / t`. An infinite distance
/// (no neighbours) saturates at the clamp.
pub fn distance_posterior(l_dist: f64, t_dist: f64, sharpness: f64) -> ProbPair {
    if l_dist.is_infinite() {
        return ProbPair::from_non_berry(1.0);
    }
    let u = sharpness * (l_dist - t_dist) / t_dist;
    ProbPair::from_non_berry((1.0 / (1.0 + (-u).exp())).max(0.5))
}
