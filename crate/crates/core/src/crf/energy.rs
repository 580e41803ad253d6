use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::graph::NeighborGraph;
use super::posterior::ProbPair;
use super::{Label, Labeling};
use crate::error::{Error, Result};
use crate::features::FeatureBundle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrfWeights {
    pub rgb: f64,
    pub hog: f64,
    pub gist: f64,
    pub dist: f64,
    pub spatial: f64,
}

impl Default for CrfWeights {
    fn default() -> Self {
        Self::with_derived_spatial(0.5, 0.5, 1.0, 2.0)
    }
}

impl CrfWeights {
    /// Unary weights with `spatial` set to half their sum.
    pub fn with_derived_spatial(rgb: f64, hog: f64, gist: f64, dist: f64) -> Self {
        Self {
            rgb,
            hog,
            gist,
            dist,
            spatial: 0.5 * (rgb + hog + gist + dist),
        }
    }

    pub fn unary_sum(&self) -> f64 {
        self.rgb + self.hog + self.gist + self.dist
    }

    fn validate(&self) -> Result<()> {
        let all = [self.rgb, self.hog, self.gist, self.dist, self.spatial];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "CRF weights must be finite and non-negative: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairwiseModel {
    /// `exp(-phi / sigma) [y != y']`: similar neighbours are pulled together.
    #[default]
    Potts,
    /// `phi [y == y']`: non-submodular, exhaustive search only.
    Literal,
}

impl std::str::FromStr for PairwiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "potts" => Ok(Self::Potts),
            "literal" => Ok(Self::Literal),
            _ => Err(Error::InvalidArgument(format!(
                "pairwise model must be 'potts' or 'literal', got '{s}'"
            ))),
        }
    }
}

impl std::fmt::Display for PairwiseModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Potts => "potts",
            Self::Literal => "literal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnaryRow {
    pub rgb: ProbPair,
    pub hog: ProbPair,
    pub gist: ProbPair,
    pub dist: ProbPair,
}

impl UnaryRow {
    pub fn uniform() -> Self {
        let u = ProbPair::uniform();
        Self {
            rgb: u,
            hog: u,
            gist: u,
            dist: u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnaryTable {
    pub rows: Vec<UnaryRow>,
}

/// Euclidean distance between two concatenated feature vectors.
pub fn pairwise_phi(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
}

/// Per candidate: `[unit rgb; hog; gist; (q / 10) * d]`, where `d` is the
/// mean neighbour distance mapped affinely onto `[-1, 1]` over the
/// population. Isolated candidates (infinite distance) map to 1.
pub fn concatenated_features(bundles: &[FeatureBundle], l_dist: &[f64], q: f64) -> Result<Vec<Vec<f64>>> {
    if bundles.len() != l_dist.len() {
        return Err(Error::DimensionMismatch {
            left: bundles.len(),
            right: l_dist.len(),
        });
    }
    let finite = l_dist.iter().copied().filter(|d| d.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    let scale = |d: f64| {
        if !d.is_finite() {
            1.0
        } else if hi - lo > 1e-12 {
            2.0 * (d - lo) / (hi - lo) - 1.0
        } else {
            0.0
        }
    };
    Ok(bundles
        .iter()
        .zip(l_dist)
        .map(|(b, &d)| {
            let mut rgb = b.rgb.clone();
            crate::features::l2_normalize(&mut rgb);
            let mut x = Vec::with_capacity(rgb.len() + b.hog.len() + b.gist.len() + 1);
            x.extend(rgb);
            x.extend_from_slice(&b.hog);
            x.extend_from_slice(&b.gist);
            x.push(q / 10.0 * scale(d));
            x
        })
        .collect())
}

/// Binary CRF energy with costs precomputed per node and edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfEnergy {
    pub weights: CrfWeights,
    pub unaries: UnaryTable,
    pub edges: Vec<(usize, usize)>,
    pub phis: Vec<f64>,
    pub pairwise: PairwiseModel,
    /// Contrast normaliser of the Potts term (mean `phi`, or 1 if that is 0).
    pub sigma_phi: f64,
    /// `node_costs[i][label]`: weighted negative log posterior.
    pub node_costs: Vec<[f64; 2]>,
    /// `edge_costs[e][label_i][label_j]`.
    pub edge_costs: Vec<[[f64; 2]; 2]>,
}

/// Sums `-w log P` over the four unary sources and attaches the pairwise
/// term on every graph edge.
pub fn assemble_energy(
    unaries: UnaryTable,
    graph: &NeighborGraph,
    phis: &[f64],
    weights: CrfWeights,
    pairwise: PairwiseModel,
) -> Result<CrfEnergy> {
    weights.validate()?;
    if unaries.rows.len() != graph.nodes {
        return Err(Error::DimensionMismatch {
            left: unaries.rows.len(),
            right: graph.nodes,
        });
    }
    if phis.len() != graph.edges.len() {
        return Err(Error::DimensionMismatch {
            left: phis.len(),
            right: graph.edges.len(),
        });
    }
    if let Some(bad) = phis.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::NonFinite(format!("pairwise distance {bad}")));
    }

    let node_costs = unaries
        .rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut cost = [0.0; 2];
            for label in [Label::NonBerry, Label::Berry] {
                cost[label.index()] = -(weights.rgb * row.rgb.get(label).ln()
                    + weights.hog * row.hog.get(label).ln()
                    + weights.gist * row.gist.get(label).ln()
                    + weights.dist * row.dist.get(label).ln());
            }
            if cost.iter().all(|c| c.is_finite()) {
                Ok(cost)
            } else {
                Err(Error::NonFinite(format!("unary cost of node {i}: {cost:?}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mean_phi = if phis.is_empty() {
        0.0
    } else {
        phis.iter().sum::<f64>() / phis.len() as f64
    };
    let sigma_phi = if mean_phi > 1e-12 { mean_phi } else { 1.0 };
    let edge_costs = phis
        .iter()
        .map(|&phi| match pairwise {
            PairwiseModel::Potts => {
                let w = weights.spatial * (-phi / sigma_phi).exp();
                [[0.0, w], [w, 0.0]]
            }
            PairwiseModel::Literal => {
                let w = weights.spatial * phi;
                [[w, 0.0], [0.0, w]]
            }
        })
        .collect();

    Ok(CrfEnergy {
        weights,
        unaries,
        edges: graph.edges.clone(),
        phis: phis.to_vec(),
        pairwise,
        sigma_phi,
        node_costs,
        edge_costs,
    })
}

impl CrfEnergy {
    pub fn nodes(&self) -> usize {
        self.node_costs.len()
    }

    pub fn energy(&self, labels: &Labeling) -> f64 {
        assert_eq!(labels.len(), self.nodes(), "labelling size");
        let l = &labels.0;
        let unary: f64 = self
            .node_costs
            .iter()
            .zip(l)
            .map(|(c, y)| c[y.index()])
            .sum();
        let pair: f64 = self
            .edges
            .iter()
            .zip(&self.edge_costs)
            .map(|(&(a, b), v)| v[l[a].index()][l[b].index()])
            .sum();
        unary + pair
    }

    /// Line-oriented text dump with shortest round-trip float formatting.
    pub fn dump(&self) -> String {
        let w = &self.weights;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "crf nodes {} edges {} pairwise {} sigma_phi {}",
            self.nodes(),
            self.edges.len(),
            self.pairwise,
            self.sigma_phi
        );
        let _ = writeln!(
            s,
            "weights rgb {} hog {} gist {} dist {} spatial {}",
            w.rgb, w.hog, w.gist, w.dist, w.spatial
        );
        for (i, (row, cost)) in self.unaries.rows.iter().zip(&self.node_costs).enumerate() {
            let _ = writeln!(
                s,
                "node {i} p_berry {} {} {} {} cost {} {}",
                row.rgb.berry, row.hog.berry, row.gist.berry, row.dist.berry, cost[0], cost[1]
            );
        }
        for (((a, b), phi), v) in self.edges.iter().zip(&self.phis).zip(&self.edge_costs) {
            let _ = writeln!(
                s,
                "edge {a} {b} phi {phi} cost {} {} {} {}",
                v[0][0], v[0][1], v[1][0], v[1][1]
            );
        }
        s
    }
}
