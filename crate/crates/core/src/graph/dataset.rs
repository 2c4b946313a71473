use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LabeledCfg;
use crate::error::{Error, Result};
use crate::ged::normalize_similarity;

/// Which GED algorithm produced a record's distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Exact,
    Lsap,
    Hed,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Exact => "exact",
            Provenance::Lsap => "lsap",
            Provenance::Hed => "hed",
        }
    }
}

/// One labeled training example: two graphs and their ground-truth distance.
///
/// `similarity` is derived from `ged` and the node counts and is not stored
/// on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPairRecord {
    pub graph_1: LabeledCfg,
    pub graph_2: LabeledCfg,
    pub ged: f64,
    pub similarity: f64,
    pub provenance: Provenance,
}

impl GraphPairRecord {
    pub fn new(
        graph_1: LabeledCfg,
        graph_2: LabeledCfg,
        ged: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        let similarity = normalize_similarity(ged, graph_1.node_count(), graph_2.node_count())?;
        Ok(GraphPairRecord {
            graph_1,
            graph_2,
            ged,
            similarity,
            provenance,
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordRepr {
    graph_1: LabeledCfg,
    graph_2: LabeledCfg,
    ged: f64,
    provenance: Provenance,
}

pub fn write_pair_dataset(records: &[GraphPairRecord], path: &Path) -> Result<()> {
    let reprs: Vec<RecordRepr> = records
        .iter()
        .map(|r| RecordRepr {
            graph_1: r.graph_1.clone(),
            graph_2: r.graph_2.clone(),
            ged: r.ged,
            provenance: r.provenance,
        })
        .collect();
    let text = serde_json::to_string(&reprs).expect("record serialization cannot fail");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_pair_dataset(path: &Path) -> Result<Vec<GraphPairRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pair_dataset(&text).map_err(|message| Error::Dataset {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_pair_dataset(text: &str) -> std::result::Result<Vec<GraphPairRecord>, String> {
    if text.trim().is_empty() {
        return Err("no records".into());
    }
    let values: Vec<serde_json::Value> =
        serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    if values.is_empty() {
        return Err("no records".into());
    }
    values
        .into_iter()
        .enumerate()
        .map(|(index, v)| {
            let repr: RecordRepr = serde_json::from_value(v).map_err(|e| {
                Error::Record {
                    index,
                    message: e.to_string(),
                }
                .to_string()
            })?;
            if !repr.ged.is_finite() || repr.ged < 0.0 {
                return Err(Error::Record {
                    index,
                    message: format!("ged must be a non-negative number, got {}", repr.ged),
                }
                .to_string());
            }
            GraphPairRecord::new(repr.graph_1, repr.graph_2, repr.ged, repr.provenance).map_err(
                |e| {
                    Error::Record {
                        index,
                        message: e.to_string(),
                    }
                    .to_string()
                },
            )
        })
        .collect()
}
