use super::energy::CrfEnergy;
use super::maxflow::FlowNetwork;
use super::{Label, Labeling};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_MAX_NODES: usize = 20;

const BERRY: usize = Label::Berry as usize;
const NON_BERRY: usize = Label::NonBerry as usize;

/// Exact minimiser of a submodular energy via one s-t min-cut. The source
/// side is berry; nodes left unreachable from the source in the residual
/// graph are non-berry, which resolves ties towards non-berry.
pub fn solve_graphcut(e: &CrfEnergy) -> Result<Labeling> {
    let n = e.nodes();
    let tol = 1e-12 * (1.0 + e.edge_costs.iter().flatten().flatten().map(|v| v.abs()).sum::<f64>());
    // cost of each node when on the source side (berry) / sink side (non-berry)
    let mut src = Vec::with_capacity(n);
    let mut snk = Vec::with_capacity(n);
    for c in &e.node_costs {
        src.push(c[BERRY]);
        snk.push(c[NON_BERRY]);
    }
    let (s, t) = (n, n + 1);
    let mut net = FlowNetwork::new(n + 2);
    let mut pair_caps = Vec::with_capacity(e.edges.len());
    for (k, (&(i, j), v)) in e.edges.iter().zip(&e.edge_costs).enumerate() {
        // x = 0 on the source side; table entries indexed by (x_i, x_j)
        let a = v[BERRY][BERRY];
        let b = v[BERRY][NON_BERRY];
        let c = v[NON_BERRY][BERRY];
        let d = v[NON_BERRY][NON_BERRY];
        let coupling = b + c - a - d;
        if coupling < -tol {
            return Err(Error::NonSubmodular(format!(
                "edge {k} ({i}, {j}): V(b,b) + V(n,n) = {} exceeds V(b,n) + V(n,b) = {}",
                a + d,
                b + c
            )));
        }
        snk[i] += c - a;
        snk[j] += d - c;
        pair_caps.push((i, j, coupling.max(0.0)));
    }
    for i in 0..n {
        let m = src[i].min(snk[i]);
        net.add_edge(s, i, snk[i] - m, 0.0);
        net.add_edge(i, t, src[i] - m, 0.0);
    }
    for (i, j, cap) in pair_caps {
        net.add_edge(i, j, cap, 0.0);
    }
    net.max_flow(s, t);
    let side = net.source_side(s);
    Ok(Labeling(
        side[..n]
            .iter()
            .map(|&on_source| if on_source { Label::Berry } else { Label::NonBerry })
            .collect(),
    ))
}

/// Exhaustive search over all `2^n` labellings; among minimisers (within a
/// relative `1e-12`) the lexicographically smallest wins.
pub fn brute_force_solve(e: &CrfEnergy) -> Result<Labeling> {
    let n = e.nodes();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(Error::TooManyNodes {
            nodes: n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let mut labels = Labeling::all(n, Label::NonBerry);
    let mut best = labels.clone();
    let mut best_e = e.energy(&labels);
    // node 0 is the most significant bit, so counting up is lexicographic
    for mask in 1u32..(1u32 << n) {
        for (i, l) in labels.0.iter_mut().enumerate() {
            *l = if mask >> (n - 1 - i) & 1 == 1 {
                Label::Berry
            } else {
                Label::NonBerry
            };
        }
        let en = e.energy(&labels);
        if en < best_e - 1e-12 * (1.0 + best_e.abs()) {
            best_e = en;
            best.clone_from(&labels);
        }
    }
    Ok(best)
}
