use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use super::{lsap_ged_upper, EditCostModel, GedKind, GedResult};
use crate::error::{Error, Result};
use crate::graph::{LabeledCfg, Provenance};

/// Default cap on the number of expanded A* states.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

const NO_PARENT: u32 = u32::MAX;
const DELETED: u32 = u32::MAX;
const SLACK: f64 = 1e-9;

struct SearchNode {
    parent: u32,
    /// Image of g1 node `depth - 1`, or `DELETED`.
    image: u32,
    depth: u32,
    cost: f64,
    /// Number of g2 edges with both endpoints already used.
    closed_edges_2: u32,
}

#[derive(PartialEq)]
struct OpenEntry {
    bound: f64,
    heuristic: f64,
    seq: u64,
    node: u32,
}

impl Eq for OpenEntry {}

impl Ord for OpenEntry {
    // BinaryHeap is a max-heap: invert so the smallest bound pops first,
    // then the smallest heuristic, then the earliest insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.heuristic.total_cmp(&self.heuristic))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for OpenEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Precomputed per-depth data for the heuristic.
struct Problem<'a> {
    g1: &'a LabeledCfg,
    g2: &'a LabeledCfg,
    costs: &'a EditCostModel,
    label_ids_2: Vec<usize>,
    num_labels: usize,
    /// `remaining_labels_1[d][l]`: count of label `l` among g1 nodes `d..`.
    remaining_labels_1: Vec<Vec<u32>>,
    /// `remaining_edges_1[d]`: g1 edges with at least one endpoint `>= d`.
    remaining_edges_1: Vec<u32>,
}

impl<'a> Problem<'a> {
    fn new(g1: &'a LabeledCfg, g2: &'a LabeledCfg, costs: &'a EditCostModel) -> Self {
        let mut ids: HashMap<&str, usize> = HashMap::new();
        let mut intern = |l: &'a str| {
            let next = ids.len();
            *ids.entry(l).or_insert(next)
        };
        let label_ids_1: Vec<usize> = g1.labels().iter().map(|l| intern(l)).collect();
        let label_ids_2: Vec<usize> = g2.labels().iter().map(|l| intern(l)).collect();
        let num_labels = ids.len();
        let n1 = g1.node_count();
        let mut remaining_labels_1 = vec![vec![0u32; num_labels]; n1 + 1];
        for d in (0..n1).rev() {
            remaining_labels_1[d] = remaining_labels_1[d + 1].clone();
            remaining_labels_1[d][label_ids_1[d]] += 1;
        }
        let remaining_edges_1 = (0..=n1)
            .map(|d| g1.edges().iter().filter(|&&(a, b)| a.max(b) >= d).count() as u32)
            .collect();
        Problem {
            g1,
            g2,
            costs,
            label_ids_2,
            num_labels,
            remaining_labels_1,
            remaining_edges_1,
        }
    }

    /// Lower bound on the cost of completing a partial map in which g1
    /// nodes `< depth` are processed and `unused_labels_2` counts the
    /// labels of the still-unused g2 nodes.
    fn heuristic(
        &self,
        depth: usize,
        unused_labels_2: &[u32],
        unused_2: usize,
        open_edges_2: u32,
    ) -> f64 {
        let c = self.costs;
        let r1 = self.remaining_labels_1[depth].as_slice();
        let left = (self.g1.node_count() - depth) as f64;
        let right = unused_2 as f64;
        let same: f64 = r1
            .iter()
            .zip(unused_labels_2)
            .map(|(&a, &b)| a.min(b) as f64)
            .sum();
        let a = left - same;
        let b = right - same;
        let s = a.min(b);
        let nodes = s * c.node_substitute.min(c.node_delete + c.node_insert)
            + (a - s) * c.node_delete
            + (b - s) * c.node_insert;
        let e1 = self.remaining_edges_1[depth] as f64;
        let e2 = open_edges_2 as f64;
        let edges = if e1 > e2 {
            (e1 - e2) * c.edge_delete
        } else {
            (e2 - e1) * c.edge_insert
        };
        nodes + edges
    }

    /// Cost added by mapping g1 node `u` (all g1 nodes `< u` are processed)
    /// to `image`, including every edge between `u` and processed nodes.
    fn increment(
        &self,
        u: usize,
        image: Option<usize>,
        map: &[Option<usize>],
        inverse: &[Option<usize>],
    ) -> f64 {
        let (g1, g2, c) = (self.g1, self.g2, self.costs);
        let mut cost = match image {
            Some(v) => c.substitute(g1.label(u), g2.label(v)),
            None => c.node_delete,
        };
        for &w in g1.successors(u) {
            if w < u {
                let kept = matches!((image, map[w]), (Some(v), Some(x)) if g2.has_edge(v, x));
                if !kept {
                    cost += c.edge_delete;
                }
            }
        }
        for &w in g1.predecessors(u) {
            if w < u {
                let kept = matches!((image, map[w]), (Some(v), Some(x)) if g2.has_edge(x, v));
                if !kept {
                    cost += c.edge_delete;
                }
            }
        }
        if let Some(v) = image {
            for &x in g2.successors(v) {
                if let Some(w) = inverse[x] {
                    if !g1.has_edge(u, w) {
                        cost += c.edge_insert;
                    }
                }
            }
            for &x in g2.predecessors(v) {
                if let Some(w) = inverse[x] {
                    if !g1.has_edge(w, u) {
                        cost += c.edge_insert;
                    }
                }
            }
        }
        cost
    }
}

/// Exact GED by A* over partial node maps.
///
/// g1 nodes are processed in id order; each is mapped to an unused g2 node
/// or deleted, and the remaining g2 nodes are inserted once every g1 node is
/// processed. The heuristic is the label-multiset assignment bound on the
/// unprocessed nodes plus an edge-count bound, both admissible. Children
/// whose bound exceeds the LSAP upper bound are never pushed.
pub fn exact_ged(
    g1: &LabeledCfg,
    g2: &LabeledCfg,
    costs: &EditCostModel,
    budget: u64,
) -> Result<GedResult> {
    costs.validate()?;
    let start = Instant::now();
    let upper = lsap_ged_upper(g1, g2, costs)?.distance;
    let p = Problem::new(g1, g2, costs);
    let n1 = g1.node_count();
    let n2 = g2.node_count();
    let e2 = g2.edge_count() as u32;

    let mut arena: Vec<SearchNode> = Vec::new();
    let mut open = BinaryHeap::new();
    let mut seq = 0u64;

    let mut all_labels_2 = vec![0u32; p.num_labels];
    for &l in &p.label_ids_2 {
        all_labels_2[l] += 1;
    }
    let root_h = p.heuristic(0, &all_labels_2, n2, e2);
    arena.push(SearchNode {
        parent: NO_PARENT,
        image: DELETED,
        depth: 0,
        cost: 0.0,
        closed_edges_2: 0,
    });
    open.push(OpenEntry {
        bound: root_h,
        heuristic: root_h,
        seq,
        node: 0,
    });

    let mut expanded = 0u64;
    let mut map: Vec<Option<usize>> = vec![None; n1];
    let mut inverse: Vec<Option<usize>> = vec![None; n2];
    let mut unused_labels_2 = vec![0u32; p.num_labels];

    while let Some(entry) = open.pop() {
        let idx = entry.node as usize;
        let depth = arena[idx].depth as usize;
        if depth == n1 {
            return Ok(GedResult {
                distance: arena[idx].cost,
                kind: GedKind::Exact,
                expanded_states: Some(expanded),
                elapsed: start.elapsed(),
                provenance: Provenance::Exact,
            });
        }
        if expanded >= budget {
            return Err(Error::BudgetExhausted {
                budget,
                lower_bound: entry.bound,
            });
        }
        expanded += 1;

        // Rebuild the partial map of this node.
        map.iter_mut().for_each(|m| *m = None);
        inverse.iter_mut().for_each(|m| *m = None);
        let mut cursor = idx;
        while arena[cursor].parent != NO_PARENT {
            let node = &arena[cursor];
            let u = node.depth as usize - 1;
            if node.image != DELETED {
                map[u] = Some(node.image as usize);
                inverse[node.image as usize] = Some(u);
            }
            cursor = node.parent as usize;
        }
        unused_labels_2.copy_from_slice(&all_labels_2);
        let mut unused_2 = n2;
        for (v, pre) in inverse.iter().enumerate() {
            if pre.is_some() {
                unused_labels_2[p.label_ids_2[v]] -= 1;
                unused_2 -= 1;
            }
        }

        let u = depth;
        let parent_cost = arena[idx].cost;
        let parent_closed = arena[idx].closed_edges_2;
        let candidates = (0..n2)
            .filter(|&v| inverse[v].is_none())
            .map(Some)
            .chain(std::iter::once(None));
        for image in candidates {
            let step = p.increment(u, image, &map, &inverse);
            let mut closed = parent_closed;
            let mut child_unused = unused_2;
            if let Some(v) = image {
                let touching = g2
                    .successors(v)
                    .iter()
                    .chain(g2.predecessors(v))
                    .filter(|&&x| inverse[x].is_some())
                    .count() as u32;
                closed += touching;
                child_unused -= 1;
            }
            let mut cost = parent_cost + step;
            let heuristic = if u + 1 == n1 {
                // Leaf: insert whatever remains of g2.
                cost += child_unused as f64 * costs.node_insert
                    + (e2 - closed) as f64 * costs.edge_insert;
                0.0
            } else {
                if let Some(v) = image {
                    unused_labels_2[p.label_ids_2[v]] -= 1;
                }
                let h = p.heuristic(u + 1, &unused_labels_2, child_unused, e2 - closed);
                if let Some(v) = image {
                    unused_labels_2[p.label_ids_2[v]] += 1;
                }
                h
            };
            let bound = cost + heuristic;
            if bound > upper + SLACK {
                continue;
            }
            seq += 1;
            arena.push(SearchNode {
                parent: idx as u32,
                image: image.map_or(DELETED, |v| v as u32),
                depth: (u + 1) as u32,
                cost,
                closed_edges_2: closed,
            });
            open.push(OpenEntry {
                bound,
                heuristic,
                seq,
                node: (arena.len() - 1) as u32,
            });
        }
    }
    // The LSAP path itself is always within the bound, so the search can
    // only run dry through floating-point slack; fall back to it.
    Ok(GedResult {
        distance: upper,
        kind: GedKind::Exact,
        expanded_states: Some(expanded),
        elapsed: start.elapsed(),
        provenance: Provenance::Exact,
    })
}
