//! Graph edit distance: exact A* search, the bipartite (Hungarian) upper
//! bound, the Hausdorff lower bound, and the distance-to-similarity map.

mod exact;
mod hed;
mod hungarian;
mod lsap;

pub use exact::{exact_ged, DEFAULT_BUDGET};
pub use hed::hed_ged_lower;
pub use hungarian::solve_assignment;
pub use lsap::lsap_ged_upper;

use std::cmp::Ordering;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{LabeledCfg, Provenance};

/// Node-count threshold below which ground truth uses exact search.
pub const DEFAULT_EXACT_NODE_LIMIT: usize = 10;

/// Per-operation edit costs shared by every GED algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditCostModel {
    pub node_insert: f64,
    pub node_delete: f64,
    /// Charged only when the two labels differ.
    pub node_substitute: f64,
    pub edge_insert: f64,
    pub edge_delete: f64,
}

impl Default for EditCostModel {
    fn default() -> Self {
        EditCostModel {
            node_insert: 1.0,
            node_delete: 1.0,
            node_substitute: 1.0,
            edge_insert: 1.0,
            edge_delete: 1.0,
        }
    }
}

impl EditCostModel {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.node_insert,
            self.node_delete,
            self.node_substitute,
            self.edge_insert,
            self.edge_delete,
        ];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Config(format!(
                "edit costs must be finite and >= 0: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn substitute(&self, a: &str, b: &str) -> f64 {
        if a == b {
            0.0
        } else {
            self.node_substitute
        }
    }

    /// Insertions and deletions cost the same, so GED(g1,g2) = GED(g2,g1).
    pub fn is_symmetric(&self) -> bool {
        self.node_insert == self.node_delete && self.edge_insert == self.edge_delete
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GedKind {
    Exact,
    UpperBound,
    LowerBound,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GedResult {
    pub distance: f64,
    pub kind: GedKind,
    /// Number of A* states popped; only set by exact search.
    pub expanded_states: Option<u64>,
    pub elapsed: Duration,
    pub provenance: Provenance,
}

/// Maps a distance to a similarity in (0, 1]: `exp(-2 * ged / (n1 + n2))`.
pub fn normalize_similarity(ged: f64, n1: usize, n2: usize) -> Result<f64> {
    if !ged.is_finite() || ged < 0.0 {
        return Err(Error::NegativeGed(ged));
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::Invalid("node counts must be at least 1".into()));
    }
    Ok((-2.0 * ged / (n1 + n2) as f64).exp())
}

/// Exact search for small pairs, the LSAP upper bound otherwise.
pub fn ground_truth_ged(
    g1: &LabeledCfg,
    g2: &LabeledCfg,
    costs: &EditCostModel,
    exact_node_limit: usize,
) -> Result<GedResult> {
    if g1.node_count().max(g2.node_count()) <= exact_node_limit {
        exact_ged(g1, g2, costs, DEFAULT_BUDGET)
    } else {
        lsap_ged_upper(g1, g2, costs)
    }
}

/// Total cost of the edit path induced by a node map.
///
/// `map[u]` is the image of `g1` node `u` in `g2`, or `None` if `u` is
/// deleted. `g2` nodes without a preimage are inserted. Edges follow: a `g1`
/// edge survives only when both endpoints map onto a `g2` edge with the same
/// direction, everything else is deleted, and uncovered `g2` edges are
/// inserted.
pub fn edit_path_cost(
    g1: &LabeledCfg,
    g2: &LabeledCfg,
    map: &[Option<usize>],
    costs: &EditCostModel,
) -> f64 {
    debug_assert_eq!(map.len(), g1.node_count());
    let mut inverse = vec![None; g2.node_count()];
    let mut cost = 0.0;
    for (u, image) in map.iter().enumerate() {
        match *image {
            Some(v) => {
                debug_assert!(inverse[v].is_none(), "node map must be injective");
                inverse[v] = Some(u);
                cost += costs.substitute(g1.label(u), g2.label(v));
            }
            None => cost += costs.node_delete,
        }
    }
    cost += inverse.iter().filter(|p| p.is_none()).count() as f64 * costs.node_insert;
    for &(a, b) in g1.edges() {
        let kept = matches!((map[a], map[b]), (Some(x), Some(y)) if g2.has_edge(x, y));
        if !kept {
            cost += costs.edge_delete;
        }
    }
    for &(x, y) in g2.edges() {
        let covered = matches!((inverse[x], inverse[y]), (Some(a), Some(b)) if g1.has_edge(a, b));
        if !covered {
            cost += costs.edge_insert;
        }
    }
    cost
}

/// Deterministic total order on graphs, used to pick a canonical orientation
/// for the approximations so they return the same value for (g1, g2) and
/// (g2, g1).
pub(crate) fn canonical_order(g1: &LabeledCfg, g2: &LabeledCfg) -> Ordering {
    (g1.node_count(), g1.edge_count(), g1.labels(), g1.edges()).cmp(&(
        g2.node_count(),
        g2.edge_count(),
        g2.labels(),
        g2.edges(),
    ))
}
