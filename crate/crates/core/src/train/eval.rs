use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mse, EpochLoss};
use crate::error::{Error, Result};
use crate::ged::{
    exact_ged, hed_ged_lower, lsap_ged_upper, normalize_similarity, EditCostModel, DEFAULT_BUDGET,
};
use crate::graph::{GraphPairRecord, LabeledCfg};
use crate::model::{GraphEmbedding, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exact,
    Lsap,
    Hed,
    Funcgnn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Exact, Method::Lsap, Method::Hed, Method::Funcgnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Lsap => "lsap",
            Method::Hed => "hed",
            Method::Funcgnn => "funcgnn",
        }
    }

    fn is_classical(self) -> bool {
        self != Method::Funcgnn
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method '{s}', expected exact, lsap, hed or funcgnn"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions {
    pub methods: Vec<Method>,
    /// Worker threads for the parallel classical pass; 1 disables it.
    pub workers: usize,
    pub exact_budget: u64,
    /// Pairs whose larger graph exceeds this are not run through exact.
    pub exact_node_limit: Option<usize>,
    pub costs: EditCostModel,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            methods: Method::ALL.to_vec(),
            workers: 1,
            exact_budget: DEFAULT_BUDGET,
            exact_node_limit: Some(crate::ged::DEFAULT_EXACT_NODE_LIMIT),
            costs: EditCostModel::default(),
        }
    }
}

/// One line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: Method,
    pub parallelism: usize,
    /// `None` when every pair was excluded.
    pub mse: Option<f64>,
    /// Wall time of the whole pass over the set, in seconds.
    pub wall_time_s: f64,
    pub pairs: usize,
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub index: usize,
    pub graph_1: Option<String>,
    pub graph_2: Option<String>,
    pub ground_truth: f64,
    /// Predicted similarity per method; excluded pairs are absent.
    pub predictions: BTreeMap<Method, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedPair {
    pub method: Method,
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<MethodRow>,
    pub pairs: Vec<PairPrediction>,
    pub excluded: Vec<ExcludedPair>,
    /// Mean `|y(i, j) - y(j, i)|` of the model over the evaluated pairs.
    pub funcgnn_asymmetry: Option<f64>,
    pub loss_curve: Vec<EpochLoss>,
}

impl EvalReport {
    pub fn row(&self, method: Method, parallelism: usize) -> Option<&MethodRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.parallelism == parallelism)
    }

    /// The same report with every wall time set to zero, for comparing runs.
    pub fn without_timings(&self) -> EvalReport {
        let mut r = self.clone();
        r.rows.iter_mut().for_each(|row| row.wall_time_s = 0.0);
        r
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))
    }

    /// Aligned text table: one line per method and worker count.
    pub fn table(&self) -> String {
        let header = [
            "method",
            "workers",
            "MSE (1e-3)",
            "time (s)",
            "pairs",
            "excluded",
        ];
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.method.as_str().to_string(),
                    r.parallelism.to_string(),
                    r.mse.map_or("-".into(), |m| format!("{:.3}", m * 1e3)),
                    format!("{:.4}", r.wall_time_s),
                    r.pairs.to_string(),
                    r.excluded.to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |cells: &[&str], out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&header, &mut out);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(
            &rule.iter().map(String::as_str).collect::<Vec<_>>(),
            &mut out,
        );
        for row in &body {
            line(
                &row.iter().map(String::as_str).collect::<Vec<_>>(),
                &mut out,
            );
        }
        out
    }
}

type Outcome = std::result::Result<f64, String>;

fn classical(method: Method, r: &GraphPairRecord, opts: &EvalOptions) -> Result<Outcome> {
    let (g1, g2) = (&r.graph_1, &r.graph_2);
    let result = match method {
        Method::Exact => {
            let largest = g1.node_count().max(g2.node_count());
            if let Some(limit) = opts.exact_node_limit {
                if largest > limit {
                    return Ok(Err(format!(
                        "{largest} nodes exceeds the exact limit of {limit}"
                    )));
                }
            }
            match exact_ged(g1, g2, &opts.costs, opts.exact_budget) {
                Err(e @ Error::BudgetExhausted { .. }) => return Ok(Err(e.to_string())),
                other => other?,
            }
        }
        Method::Lsap => lsap_ged_upper(g1, g2, &opts.costs)?,
        Method::Hed => hed_ged_lower(g1, g2, &opts.costs)?,
        Method::Funcgnn => unreachable!("not a classical method"),
    };
    Ok(Ok(normalize_similarity(
        result.distance,
        g1.node_count(),
        g2.node_count(),
    )?))
}

/// Embeds every distinct graph once, then scores each pair.
pub fn predict_pairs(model: &Model, records: &[GraphPairRecord]) -> Result<Vec<f64>> {
    let mut cache: HashMap<&LabeledCfg, GraphEmbedding> = HashMap::new();
    for r in records {
        for g in [&r.graph_1, &r.graph_2] {
            if !cache.contains_key(g) {
                cache.insert(g, model.embed(g)?);
            }
        }
    }
    let scorer = model.scorer();
    records
        .iter()
        .map(|r| scorer.score(&cache[&r.graph_1], &cache[&r.graph_2]))
        .collect()
}

fn asymmetry(model: &Model, records: &[GraphPairRecord], forward: &[f64]) -> Result<f64> {
    let reversed: Vec<GraphPairRecord> = records
        .iter()
        .map(|r| GraphPairRecord {
            graph_1: r.graph_2.clone(),
            graph_2: r.graph_1.clone(),
            ..r.clone()
        })
        .collect();
    let back = predict_pairs(model, &reversed)?;
    Ok(forward
        .iter()
        .zip(&back)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / forward.len() as f64)
}

/// Scores `records` with every requested method and reports MSE against
/// the stored similarity plus the wall time of each full pass.
///
/// Every method gets a serial row. With `workers > 1` the classical methods
/// also get a row timed on a pool of that many threads. Exact runs that hit
/// the node limit or the expansion budget are listed in `excluded` and left
/// out of that method's MSE.
pub fn evaluate_methods(
    records: &[GraphPairRecord],
    model: Option<&Model>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::Invalid("nothing to evaluate".into()));
    }
    if opts.methods.is_empty() {
        return Err(Error::Config("no evaluation methods given".into()));
    }
    if opts.workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    let mut methods = opts.methods.clone();
    methods.dedup();
    let mut pairs: Vec<PairPrediction> = records
        .iter()
        .enumerate()
        .map(|(index, r)| PairPrediction {
            index,
            graph_1: r.graph_1.name().map(str::to_string),
            graph_2: r.graph_2.name().map(str::to_string),
            ground_truth: r.similarity,
            predictions: BTreeMap::new(),
        })
        .collect();
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    let mut funcgnn_asymmetry = None;

    for &method in &methods {
        let (outcomes, elapsed): (Vec<Outcome>, f64) = if method.is_classical() {
            let start = Instant::now();
            let out = records
                .iter()
                .map(|r| classical(method, r, opts))
                .collect::<Result<Vec<_>>>()?;
            (out, start.elapsed().as_secs_f64())
        } else {
            let model = model
                .ok_or_else(|| Error::Invalid("funcgnn evaluation needs a trained model".into()))?;
            let start = Instant::now();
            let preds = predict_pairs(model, records)?;
            let elapsed = start.elapsed().as_secs_f64();
            funcgnn_asymmetry = Some(asymmetry(model, records, &preds)?);
            (preds.into_iter().map(Ok).collect(), elapsed)
        };

        let mut p = Vec::new();
        let mut t = Vec::new();
        for (i, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(y) => {
                    pairs[i].predictions.insert(method, y);
                    p.push(y);
                    t.push(records[i].similarity);
                }
                Err(reason) => excluded.push(ExcludedPair {
                    method,
                    index: i,
                    reason,
                }),
            }
        }
        let dropped = records.len() - p.len();
        let method_mse = if p.is_empty() {
            None
        } else {
            Some(mse(&p, &t)?)
        };
        rows.push(MethodRow {
            method,
            parallelism: 1,
            mse: method_mse,
            wall_time_s: elapsed,
            pairs: records.len(),
            excluded: dropped,
        });

        if method.is_classical() && opts.workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(opts.workers)
                .build()
                .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
            let start = Instant::now();
            pool.install(|| {
                records
                    .par_iter()
                    .map(|r| classical(method, r, opts))
                    .collect::<Result<Vec<_>>>()
            })?;
            let elapsed = start.elapsed().as_secs_f64();
            rows.push(MethodRow {
                method,
                parallelism: opts.workers,
                mse: method_mse,
                wall_time_s: elapsed,
                pairs: records.len(),
                excluded: dropped,
            });
        }
    }
    Ok(EvalReport {
        rows,
        pairs,
        excluded,
        funcgnn_asymmetry,
        loss_curve: Vec::new(),
    })
}

/// Serial wall times of funcgnn against lsap over a whole set and against
/// exact over the pairs small enough for exact search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeComparison {
    pub pairs: usize,
    pub small_pairs: usize,
    pub node_limit: usize,
    /// Each time is the fastest of this many passes.
    pub repeats: usize,
    pub funcgnn_s: f64,
    pub lsap_s: f64,
    pub funcgnn_small_s: f64,
    pub exact_small_s: f64,
    /// Small pairs where exact ran out of budget; still included in the time.
    pub exact_budget_failures: usize,
    pub lsap_speedup: f64,
    pub exact_speedup: f64,
}

fn fastest<T>(repeats: usize, mut pass: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let mut best: Option<(T, f64)> = None;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let out = pass()?;
        let elapsed = start.elapsed().as_secs_f64();
        if best.as_ref().is_none_or(|(_, t)| elapsed < *t) {
            best = Some((out, elapsed));
        }
    }
    Ok(best.expect("at least one pass"))
}

/// Times serial passes of funcgnn, lsap and exact. The exact comparison is
/// restricted to pairs whose larger graph has at most `node_limit` nodes,
/// and funcgnn is timed again on that same subset.
pub fn compare_runtimes(
    records: &[GraphPairRecord],
    model: &Model,
    node_limit: usize,
    exact_budget: u64,
    repeats: usize,
) -> Result<RuntimeComparison> {
    let small: Vec<GraphPairRecord> = records
        .iter()
        .filter(|r| r.graph_1.node_count().max(r.graph_2.node_count()) <= node_limit)
        .cloned()
        .collect();
    if records.is_empty() || small.is_empty() {
        return Err(Error::Invalid(format!(
            "need pairs overall and pairs with at most {node_limit} nodes"
        )));
    }
    let opts = EvalOptions {
        exact_budget,
        exact_node_limit: Some(node_limit),
        ..Default::default()
    };
    let classical_pass = |method: Method, set: &[GraphPairRecord]| {
        set.iter()
            .map(|r| classical(method, r, &opts))
            .collect::<Result<Vec<Outcome>>>()
    };
    let (_, funcgnn_s) = fastest(repeats, || predict_pairs(model, records))?;
    let (_, lsap_s) = fastest(repeats, || classical_pass(Method::Lsap, records))?;
    let (_, funcgnn_small_s) = fastest(repeats, || predict_pairs(model, &small))?;
    let (exact, exact_small_s) = fastest(repeats, || classical_pass(Method::Exact, &small))?;
    Ok(RuntimeComparison {
        pairs: records.len(),
        small_pairs: small.len(),
        node_limit,
        repeats: repeats.max(1),
        funcgnn_s,
        lsap_s,
        funcgnn_small_s,
        exact_small_s,
        exact_budget_failures: exact.iter().filter(|o| o.is_err()).count(),
        lsap_speedup: lsap_s / funcgnn_s,
        exact_speedup: exact_small_s / funcgnn_small_s,
    })
}

/// Ground truth, prediction and absolute error for one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudy {
    pub graph_1: Option<String>,
    pub graph_2: Option<String>,
    pub ground_truth: f64,
    pub prediction: f64,
    pub error: f64,
}

pub fn case_study(record: &GraphPairRecord, model: &Model) -> Result<CaseStudy> {
    let prediction = model.predict(&record.graph_1, &record.graph_2)?;
    Ok(CaseStudy {
        graph_1: record.graph_1.name().map(str::to_string),
        graph_2: record.graph_2.name().map(str::to_string),
        ground_truth: record.similarity,
        prediction,
        error: (prediction - record.similarity).abs(),
    })
}
