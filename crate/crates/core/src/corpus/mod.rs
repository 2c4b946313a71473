//! Mini-language frontend and mutation-based corpus generation.
//!
//! Programs are single functions in a small C-like language (see
//! `docs/grammar.ebnf`). Each lowers to a [`LabeledCfg`]; single-operator
//! mutants augment the population, and every ordered pair of graphs is
//! labeled with its ground-truth edit distance.

mod ast;
mod cfg;
mod mutate;
mod parser;

pub use ast::{BinOp, Expr, Function, Param, Stmt, Type, UnOp};
pub use cfg::build_cfg;
pub use mutate::{
    mutable_sites, mutate, replacement, sample_mutations, MutableSite, MutationKind, MutationOp,
};
pub use parser::parse;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ged::{ground_truth_ged, EditCostModel};
use crate::graph::{GraphPairRecord, LabeledCfg, Provenance};

/// A named single-function program.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniProgram {
    pub name: String,
    pub source: String,
}

impl MiniProgram {
    pub fn new(name: impl Into<String>, source: impl Into<String>) -> Self {
        MiniProgram {
            name: name.into(),
            source: source.into(),
        }
    }

    pub fn cfg(&self) -> Result<LabeledCfg> {
        Ok(build_cfg(&parse(&self.source)?)?.with_name(self.name.clone()))
    }
}

macro_rules! builtin {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../programs/", $name, ".mini")))),*]
    };
}

const BUILTIN: &[(&str, &str)] = builtin!(
    "arraySum",
    "bubbleSort",
    "heapSort",
    "elementwiseMax",
    "bitwiseOr",
    "calVariance",
    "countZeros",
    "binarySearch",
    "insertionSort",
    "matrixMultiply",
    "mergeSort",
    "gcd",
    "sieve",
    "levenshtein",
    "power",
    "kadane",
    "selectionSort",
    "runLength",
    "absDiff",
    "quickSort",
    "elementwiseMin",
    "bitwiseAnd",
    "calMean",
    "arrayDivision",
    "dotProduct",
    "linearSearch",
    "factorial",
    "fibonacci",
    "isPrime",
    "reverseArray",
    "maxElement",
    "countOnes",
    "matrixTrace",
    "lcsLength",
    "collatzSteps",
    "prefixSum",
    "transpose",
    "secondLargest",
    "horner",
    "bitReverse",
    "checksum",
);

/// The bundled algorithm implementations, in a fixed order.
pub fn builtin_programs() -> Vec<MiniProgram> {
    BUILTIN
        .iter()
        .map(|(n, s)| MiniProgram::new(*n, *s))
        .collect()
}

/// Loads every `*.mini` file in `dir`, sorted by file name.
pub fn load_program_dir(dir: &Path) -> Result<Vec<MiniProgram>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "mini") {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Invalid(format!(
            "no .mini files in {}",
            dir.display()
        )));
    }
    paths
        .into_iter()
        .map(|path| {
            let source = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let name = path.file_stem().unwrap().to_string_lossy().into_owned();
            // Validate eagerly so failures name the file.
            parse(&source).map_err(|e| Error::Dataset {
                path: path.clone(),
                message: e.to_string(),
            })?;
            Ok(MiniProgram { name, source })
        })
        .collect()
}

/// Name of the original program a graph was derived from.
pub fn family_of(name: &str) -> &str {
    match name.rfind("_m") {
        Some(i) if name[i + 2..].chars().all(|c| c.is_ascii_digit()) && i + 2 < name.len() => {
            &name[..i]
        }
        _ => name,
    }
}

fn mutation_seed(seed: u64, program_index: usize) -> u64 {
    seed ^ (program_index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// CFGs of every program followed by its mutants (`name_m1`, `name_m2`, ...).
pub fn build_graphs(
    programs: &[MiniProgram],
    mutants_per_program: usize,
    seed: u64,
) -> Result<Vec<LabeledCfg>> {
    let mut graphs = Vec::with_capacity(programs.len() * (1 + mutants_per_program));
    for (i, p) in programs.iter().enumerate() {
        let parent = p
            .cfg()
            .map_err(|e| Error::Mutation(format!("{}: {e}", p.name)))?;
        graphs.push(parent);
        let ops = sample_mutations(p, mutants_per_program, mutation_seed(seed, i))?;
        for (k, op) in ops.iter().enumerate() {
            let mutant = mutate(p, op)?;
            graphs.push(mutant.cfg()?.with_name(format!("{}_m{}", p.name, k + 1)));
        }
    }
    Ok(graphs)
}

/// Labels every ordered pair `(i, j)` of `graphs`, self-pairs included, in
/// row-major order.
pub fn label_all_pairs(
    graphs: &[LabeledCfg],
    costs: &EditCostModel,
    exact_node_limit: usize,
) -> Result<Vec<GraphPairRecord>> {
    let m = graphs.len();
    // Distances are symmetric, so only the upper triangle is computed.
    let upper: Vec<(usize, usize)> = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).collect();
    let labels: Vec<(f64, Provenance)> = upper
        .par_iter()
        .map(|&(i, j)| {
            let r =
                ground_truth_ged(&graphs[i], &graphs[j], costs, exact_node_limit).map_err(|e| {
                    Error::Invalid(format!(
                        "labeling ({}, {}): {e}",
                        graphs[i].name().unwrap_or("?"),
                        graphs[j].name().unwrap_or("?")
                    ))
                })?;
            Ok((r.distance, r.provenance))
        })
        .collect::<Result<_>>()?;
    let mut table = vec![(0.0, Provenance::Exact); m * m];
    for (&(i, j), &label) in upper.iter().zip(&labels) {
        table[i * m + j] = label;
        table[j * m + i] = label;
    }
    let mut records = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let (ged, provenance) = table[i * m + j];
            records.push(GraphPairRecord::new(
                graphs[i].clone(),
                graphs[j].clone(),
                ged,
                provenance,
            )?);
        }
    }
    Ok(records)
}

/// Builds CFGs for all programs and their mutants and labels all `M^2`
/// ordered pairs.
pub fn generate_corpus(
    programs: &[MiniProgram],
    mutants_per_program: usize,
    costs: &EditCostModel,
    exact_node_limit: usize,
    seed: u64,
) -> Result<Vec<GraphPairRecord>> {
    let graphs = build_graphs(programs, mutants_per_program, seed)?;
    label_all_pairs(&graphs, costs, exact_node_limit)
}

/// Size and label statistics of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub graphs: usize,
    pub pairs: usize,
    pub min_nodes: usize,
    pub mean_nodes: f64,
    pub max_nodes: usize,
    pub exact_pairs: usize,
    pub lsap_pairs: usize,
    /// Ten equal-width bins over (0, 1].
    pub similarity_histogram: Vec<usize>,
}

pub fn summarize(graphs: &[LabeledCfg], records: &[GraphPairRecord]) -> CorpusSummary {
    let sizes: Vec<usize> = graphs.iter().map(|g| g.node_count()).collect();
    let mut histogram = vec![0usize; 10];
    for r in records {
        let bin = ((r.similarity * 10.0).ceil() as usize).clamp(1, 10) - 1;
        histogram[bin] += 1;
    }
    CorpusSummary {
        graphs: graphs.len(),
        pairs: records.len(),
        min_nodes: sizes.iter().copied().min().unwrap_or(0),
        mean_nodes: sizes.iter().sum::<usize>() as f64 / sizes.len().max(1) as f64,
        max_nodes: sizes.iter().copied().max().unwrap_or(0),
        exact_pairs: records
            .iter()
            .filter(|r| r.provenance == Provenance::Exact)
            .count(),
        lsap_pairs: records
            .iter()
            .filter(|r| r.provenance == Provenance::Lsap)
            .count(),
        similarity_histogram: histogram,
    }
}
