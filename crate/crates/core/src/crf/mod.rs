//! Berry / non-berry labelling of detected circles with a conditional random
//! field over the candidates' neighbourhood graph, solved exactly by min-cut.

mod classify;
mod energy;
mod graph;
mod maxflow;
mod posterior;
mod solve;

pub use classify::{classify_candidates, Classification, ClassifyConfig, ClassifyInput, ReferenceSource};
pub use energy::{
    assemble_energy, concatenated_features, pairwise_phi, CrfEnergy, CrfWeights, PairwiseModel, UnaryRow,
    UnaryTable,
};
pub use graph::{build_neighbor_graph, build_neighbor_graph_with, mean_neighbor_distance, median_edge_length, NeighborGraph};
pub use maxflow::FlowNetwork;
pub use posterior::{
    distance_posterior, percentile_threshold, quantile, reference_correlations, thresholds_from_correlations,
    unary_posterior, KindThresholds, ProbPair,
};
pub use solve::{brute_force_solve, solve_graphcut, BRUTE_FORCE_MAX_NODES};

use serde::{Deserialize, Serialize};

/// Probabilities are kept inside `[PROB_CLAMP, 1 - PROB_CLAMP]`.
pub const PROB_CLAMP: f64 = 1e-9;
pub const DEFAULT_EDGE_PRUNE_FACTOR: f64 = 3.0;

/// `NonBerry` orders first, so the all-non-berry labelling is the
/// lexicographically smallest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonBerry,
    Berry,
}

impl Label {
    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labeling(pub Vec<Label>);

impl Labeling {
    pub fn all(n: usize, label: Label) -> Self {
        Self(vec![label; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn berry_indices(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == Label::Berry)
            .map(|(i, _)| i)
            .collect()
    }
}
