use std::cmp::Ordering;
use std::time::Instant;

use super::{canonical_order, edit_path_cost, solve_assignment, EditCostModel, GedKind, GedResult};
use crate::error::Result;
use crate::graph::{LabeledCfg, Provenance};

/// Cells that must never be chosen by the assignment solver.
const FORBIDDEN: f64 = 1e15;

/// Bipartite GED upper bound.
///
/// Builds the `(n1+n2) x (n1+n2)` cost matrix whose substitution block
/// includes the cost of matching local in/out edge counts, solves it with
/// the Hungarian method, and returns the true cost of the edit path the
/// assignment induces.
pub fn lsap_ged_upper(
    g1: &LabeledCfg,
    g2: &LabeledCfg,
    costs: &EditCostModel,
) -> Result<GedResult> {
    costs.validate()?;
    let start = Instant::now();
    let distance = if costs.is_symmetric() && canonical_order(g1, g2) == Ordering::Greater {
        assignment_path_cost(g2, g1, costs)
    } else {
        assignment_path_cost(g1, g2, costs)
    };
    Ok(GedResult {
        distance,
        kind: GedKind::UpperBound,
        expanded_states: None,
        elapsed: start.elapsed(),
        provenance: Provenance::Lsap,
    })
}

fn degree_cost(from: usize, to: usize, delete: f64, insert: f64) -> f64 {
    if from > to {
        (from - to) as f64 * delete
    } else {
        (to - from) as f64 * insert
    }
}

/// Riesen-Bunke style square cost matrix, row-major.
pub(crate) fn bipartite_cost_matrix(
    g1: &LabeledCfg,
    g2: &LabeledCfg,
    costs: &EditCostModel,
) -> (Vec<f64>, usize) {
    let n1 = g1.node_count();
    let n2 = g2.node_count();
    let n = n1 + n2;
    let mut m = vec![0.0; n * n];
    for u in 0..n1 {
        for v in 0..n2 {
            m[u * n + v] = costs.substitute(g1.label(u), g2.label(v))
                + degree_cost(
                    g1.out_degree(u),
                    g2.out_degree(v),
                    costs.edge_delete,
                    costs.edge_insert,
                )
                + degree_cost(
                    g1.in_degree(u),
                    g2.in_degree(v),
                    costs.edge_delete,
                    costs.edge_insert,
                );
        }
        for k in 0..n1 {
            m[u * n + n2 + k] = if k == u {
                costs.node_delete + (g1.out_degree(u) + g1.in_degree(u)) as f64 * costs.edge_delete
            } else {
                FORBIDDEN
            };
        }
    }
    for k in 0..n2 {
        let row = n1 + k;
        for v in 0..n2 {
            m[row * n + v] = if k == v {
                costs.node_insert + (g2.out_degree(v) + g2.in_degree(v)) as f64 * costs.edge_insert
            } else {
                FORBIDDEN
            };
        }
        // epsilon -> epsilon block stays zero
    }
    (m, n)
}

fn assignment_path_cost(g1: &LabeledCfg, g2: &LabeledCfg, costs: &EditCostModel) -> f64 {
    let n2 = g2.node_count();
    let (matrix, n) = bipartite_cost_matrix(g1, g2, costs);
    let assignment = solve_assignment(&matrix, n);
    let map: Vec<Option<usize>> = (0..g1.node_count())
        .map(|u| {
            let col = assignment[u];
            debug_assert!(matrix[u * n + col] < FORBIDDEN);
            (col < n2).then_some(col)
        })
        .collect();
    edit_path_cost(g1, g2, &map, costs)
}
