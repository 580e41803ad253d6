use std::collections::{BTreeSet, HashMap};

use delaunator::Point;
use serde::{Deserialize, Serialize};

use super::DEFAULT_EDGE_PRUNE_FACTOR;
use crate::features::median;

/// Undirected neighbourhood of the candidate centres: adjacent Voronoi
/// cells, i.e. Delaunay edges, minus overly long edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph {
    pub nodes: usize,
    /// Sorted `(i, j)` pairs with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub neighbors: Vec<Vec<usize>>,
    /// Nodes that shared a centre with an earlier node.
    pub merged_duplicates: usize,
}

impl NeighborGraph {
    fn from_edges(nodes: usize, edges: BTreeSet<(usize, usize)>, merged_duplicates: usize) -> Self {
        let mut neighbors = vec![Vec::new(); nodes];
        for &(a, b) in &edges {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        neighbors.iter_mut().for_each(|n| n.sort_unstable());
        Self {
            nodes,
            edges: edges.into_iter().collect(),
            neighbors,
            merged_duplicates,
        }
    }
}

pub fn build_neighbor_graph(centers: &[(f64, f64)]) -> NeighborGraph {
    build_neighbor_graph_with(centers, DEFAULT_EDGE_PRUNE_FACTOR)
}

/// Delaunay adjacency of `centers` with edges longer than
/// `prune_factor * median edge length` removed. Collinear input falls back
/// to a chain through the points in line order. Coincident centres are
/// triangulated once; the copies inherit the edges of the first one.
pub fn build_neighbor_graph_with(centers: &[(f64, f64)], prune_factor: f64) -> NeighborGraph {
    let n = centers.len();
    let mut rep_of = vec![0usize; n];
    let mut unique: Vec<usize> = Vec::new();
    let mut seen: HashMap<(u64, u64), usize> = HashMap::new();
    for (i, &(x, y)) in centers.iter().enumerate() {
        let key = (x.to_bits(), y.to_bits());
        match seen.get(&key) {
            Some(&r) => rep_of[i] = r,
            None => {
                seen.insert(key, i);
                rep_of[i] = i;
                unique.push(i);
            }
        }
    }
    let merged = n - unique.len();
    if merged > 0 {
        log::warn!("{merged} candidate(s) share a centre with another; merged for triangulation");
    }

    let mut base: BTreeSet<(usize, usize)> = BTreeSet::new();
    let add = |a: usize, b: usize, set: &mut BTreeSet<(usize, usize)>| {
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    };
    if unique.len() >= 3 {
        let pts: Vec<Point> = unique
            .iter()
            .map(|&i| Point {
                x: centers[i].0,
                y: centers[i].1,
            })
            .collect();
        let tri = delaunator::triangulate(&pts);
        for t in tri.triangles.chunks_exact(3) {
            for k in 0..3 {
                add(unique[t[k]], unique[t[(k + 1) % 3]], &mut base);
            }
        }
    }
    if base.is_empty() && unique.len() >= 2 {
        let mut order = unique.clone();
        order.sort_by(|&a, &b| {
            centers[a]
                .0
                .total_cmp(&centers[b].0)
                .then(centers[a].1.total_cmp(&centers[b].1))
        });
        for w in order.windows(2) {
            add(w[0], w[1], &mut base);
        }
    }

    let len = |&(a, b): &(usize, usize)| dist(centers[a], centers[b]);
    let lengths: Vec<f64> = base.iter().map(len).collect();
    if let Some(med) = median(&lengths) {
        let limit = prune_factor * med;
        base.retain(|e| len(e) <= limit);
    }

    let mut edges = base.clone();
    if merged > 0 {
        for (i, &r) in rep_of.iter().enumerate() {
            if r == i {
                continue;
            }
            for &(a, b) in &base {
                if a == r {
                    add(i, b, &mut edges);
                } else if b == r {
                    add(i, a, &mut edges);
                }
            }
        }
    }
    NeighborGraph::from_edges(n, edges, merged)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Mean Euclidean distance from each node to its neighbours; isolated nodes
/// get `f64::INFINITY`.
pub fn mean_neighbor_distance(graph: &NeighborGraph, centers: &[(f64, f64)]) -> Vec<f64> {
    graph
        .neighbors
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            if nb.is_empty() {
                f64::INFINITY
            } else {
                nb.iter().map(|&j| dist(centers[i], centers[j])).sum::<f64>() / nb.len() as f64
            }
        })
        .collect()
}

/// Median length over the graph's edges, 0 without edges.
pub fn median_edge_length(graph: &NeighborGraph, centers: &[(f64, f64)]) -> f64 {
    let lengths: Vec<f64> = graph
        .edges
        .iter()
        .map(|&(a, b)| dist(centers[a], centers[b]))
        .collect();
    median(&lengths).unwrap_or(0.0)
}
