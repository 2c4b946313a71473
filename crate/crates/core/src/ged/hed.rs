use std::time::Instant;

use super::{EditCostModel, GedKind, GedResult};
use crate::error::Result;
use crate::graph::{LabeledCfg, Provenance};

fn degree_cost(from: usize, to: usize, delete: f64, insert: f64) -> f64 {
    if from > to {
        (from - to) as f64 * delete
    } else {
        (to - from) as f64 * insert
    }
}

/// Hausdorff edit distance, a lower bound on GED.
///
/// Every node of either graph picks its cheapest counterpart independently.
/// Substitution costs are split between the two endpoints, and every edge
/// operation is shared between the two nodes it touches, which is where the
/// halving comes from.
pub fn hed_ged_lower(g1: &LabeledCfg, g2: &LabeledCfg, costs: &EditCostModel) -> Result<GedResult> {
    costs.validate()?;
    let start = Instant::now();
    let n1 = g1.node_count();
    let n2 = g2.node_count();

    let pair_cost = |u: usize, v: usize| -> f64 {
        let edges = degree_cost(
            g1.out_degree(u),
            g2.out_degree(v),
            costs.edge_delete,
            costs.edge_insert,
        ) + degree_cost(
            g1.in_degree(u),
            g2.in_degree(v),
            costs.edge_delete,
            costs.edge_insert,
        );
        costs.substitute(g1.label(u), g2.label(v)) / 2.0 + edges / 4.0
    };

    let mut best_1: Vec<f64> = (0..n1)
        .map(|u| {
            costs.node_delete
                + (g1.out_degree(u) + g1.in_degree(u)) as f64 * costs.edge_delete / 2.0
        })
        .collect();
    let mut best_2: Vec<f64> = (0..n2)
        .map(|v| {
            costs.node_insert
                + (g2.out_degree(v) + g2.in_degree(v)) as f64 * costs.edge_insert / 2.0
        })
        .collect();
    for (u, b1) in best_1.iter_mut().enumerate() {
        for (v, b2) in best_2.iter_mut().enumerate() {
            let c = pair_cost(u, v);
            if c < *b1 {
                *b1 = c;
            }
            if c < *b2 {
                *b2 = c;
            }
        }
    }
    let distance = best_1.iter().sum::<f64>() + best_2.iter().sum::<f64>();
    Ok(GedResult {
        distance,
        kind: GedKind::LowerBound,
        expanded_states: None,
        elapsed: start.elapsed(),
        provenance: Provenance::Hed,
    })
}
