use serde::{Deserialize, Serialize};

use super::energy::{assemble_energy, concatenated_features, pairwise_phi, CrfEnergy, CrfWeights, PairwiseModel, UnaryRow, UnaryTable};
use super::graph::{build_neighbor_graph_with, mean_neighbor_distance, median_edge_length, NeighborGraph};
use super::posterior::{
    distance_posterior, reference_correlations, thresholds_from_correlations, unary_posterior, KindThresholds, ProbPair,
};
use super::solve::{brute_force_solve, solve_graphcut};
use super::{Labeling, DEFAULT_EDGE_PRUNE_FACTOR};
use crate::detect::Circle;
use crate::error::{Error, Result};
use crate::features::{median, transform_features, FeatureBundle, TransformedFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub weights: CrfWeights,
    pub feature_sharpness: f64,
    pub distance_sharpness: f64,
    /// Fraction of reference pairs whose correlation must lie at or above
    /// the threshold; larger values accept more candidates.
    pub percentile: f64,
    /// Used once if `percentile` labels nothing as berry.
    pub percentile_fallback: f64,
    /// `t_dist` as a multiple of the median reference diameter.
    pub t_dist_factor: f64,
    pub edge_prune_factor: f64,
    pub pairwise: PairwiseModel,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            weights: CrfWeights::default(),
            feature_sharpness: 10.0,
            distance_sharpness: 10.0,
            percentile: 0.5,
            percentile_fallback: 0.7,
            t_dist_factor: 3.0,
            edge_prune_factor: DEFAULT_EDGE_PRUNE_FACTOR,
            pairwise: PairwiseModel::Potts,
        }
    }
}

impl ClassifyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("percentile", self.percentile), ("percentile_fallback", self.percentile_fallback)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidArgument(format!("{name} must be in (0, 1), got {p}")));
            }
        }
        for (name, v) in [
            ("feature_sharpness", self.feature_sharpness),
            ("distance_sharpness", self.distance_sharpness),
            ("t_dist_factor", self.t_dist_factor),
            ("edge_prune_factor", self.edge_prune_factor),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

pub struct ClassifyInput<'a> {
    pub circles: &'a [Circle],
    pub features: &'a [FeatureBundle],
    pub reference_flags: &'a [bool],
    /// Descriptors of user-supplied reference patches, used when fewer than
    /// two internal references were detected.
    pub external_references: Option<&'a [FeatureBundle]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    Internal,
    External,
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub labels: Labeling,
    pub berries: Vec<usize>,
    pub percentile_used: f64,
    pub fallback_engaged: bool,
    pub reference_source: Option<ReferenceSource>,
    pub thresholds: Option<KindThresholds>,
    pub t_dist: Option<f64>,
    pub transformed: Vec<TransformedFeatures>,
    pub l_dist: Vec<f64>,
    #[serde(skip)]
    pub graph: Option<NeighborGraph>,
    #[serde(skip)]
    pub energy: Option<CrfEnergy>,
    pub energy_value: f64,
}

/// Labels every candidate berry or non-berry. The percentile threshold is
/// tried once more with `percentile_fallback` when the first pass finds no
/// berry.
pub fn classify_candidates(input: &ClassifyInput<'_>, cfg: &ClassifyConfig) -> Result<Classification> {
    cfg.validate()?;
    let n = input.circles.len();
    if input.features.len() != n || input.reference_flags.len() != n {
        return Err(Error::DimensionMismatch {
            left: input.features.len().max(input.reference_flags.len()),
            right: n,
        });
    }
    if n == 0 {
        return Ok(Classification {
            labels: Labeling(Vec::new()),
            berries: Vec::new(),
            percentile_used: cfg.percentile,
            fallback_engaged: false,
            reference_source: None,
            thresholds: None,
            t_dist: None,
            transformed: Vec::new(),
            l_dist: Vec::new(),
            graph: None,
            energy: None,
            energy_value: 0.0,
        });
    }

    let internal: Vec<usize> = (0..n).filter(|&i| input.reference_flags[i]).collect();
    let diameters = |idx: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        idx.map(|i| 2.0 * input.circles[i].radius).collect()
    };
    let (refs, source, ref_diams): (Vec<FeatureBundle>, _, _) = if internal.len() >= 2 {
        (
            internal.iter().map(|&i| input.features[i].clone()).collect(),
            ReferenceSource::Internal,
            diameters(&mut internal.iter().copied()),
        )
    } else {
        match input.external_references {
            Some(ext) if ext.len() >= 2 => (ext.to_vec(), ReferenceSource::External, diameters(&mut (0..n))),
            _ => {
                return Err(Error::NoReferences {
                    needed: 2,
                    found: internal.len(),
                })
            }
        }
    };
    let t_dist = cfg.t_dist_factor * median(&ref_diams).expect("non-empty diameters");
    if !(t_dist > 0.0) {
        return Err(Error::InvalidArgument(format!("distance threshold must be positive, got {t_dist}")));
    }

    let transformed = transform_features(input.features, &refs)?;
    let correlations = reference_correlations(&refs)?;

    let centers: Vec<(f64, f64)> = input.circles.iter().map(|c| (c.col, c.row)).collect();
    let graph = build_neighbor_graph_with(&centers, cfg.edge_prune_factor);
    let l_dist = mean_neighbor_distance(&graph, &centers);
    let q = median_edge_length(&graph, &centers);
    let x_con = concatenated_features(input.features, &l_dist, q)?;
    let phis = graph
        .edges
        .iter()
        .map(|&(a, b)| pairwise_phi(&x_con[a], &x_con[b]))
        .collect::<Result<Vec<_>>>()?;
    let dist_post: Vec<ProbPair> = l_dist
        .iter()
        .map(|&d| distance_posterior(d, t_dist, cfg.distance_sharpness))
        .collect();

    let run = |p: f64| -> Result<(KindThresholds, CrfEnergy, Labeling)> {
        // keep a fraction p of the reference pairs at or above t
        let t = thresholds_from_correlations(&correlations, 1.0 - p)?;
        let s = cfg.feature_sharpness;
        let rows = transformed
            .iter()
            .zip(&dist_post)
            .map(|(tf, &dist)| UnaryRow {
                rgb: unary_posterior(tf.rgb, t.rgb, s),
                hog: unary_posterior(tf.hog, t.hog, s),
                gist: unary_posterior(tf.gist, t.gist, s),
                dist,
            })
            .collect();
        let energy = assemble_energy(UnaryTable { rows }, &graph, &phis, cfg.weights, cfg.pairwise)?;
        let labels = match cfg.pairwise {
            PairwiseModel::Potts => solve_graphcut(&energy)?,
            PairwiseModel::Literal => brute_force_solve(&energy)?,
        };
        Ok((t, energy, labels))
    };

    let mut percentile_used = cfg.percentile;
    let mut fallback_engaged = false;
    let (mut t, mut energy, mut labels) = run(cfg.percentile)?;
    if labels.berry_indices().is_empty() {
        log::info!(
            "no berry at percentile {}; retrying at {}",
            cfg.percentile,
            cfg.percentile_fallback
        );
        (t, energy, labels) = run(cfg.percentile_fallback)?;
        percentile_used = cfg.percentile_fallback;
        fallback_engaged = true;
    }
    Ok(Classification {
        berries: labels.berry_indices(),
        energy_value: energy.energy(&labels),
        labels,
        percentile_used,
        fallback_engaged,
        reference_source: Some(source),
        thresholds: Some(t),
        t_dist: Some(t_dist),
        transformed,
        l_dist,
        graph: Some(graph),
        energy: Some(energy),
    })
}
