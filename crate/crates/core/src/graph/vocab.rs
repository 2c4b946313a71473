use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::LabeledCfg;
use crate::error::{Error, Result};

/// Dense label index used for one-hot node features.
///
/// Known labels occupy `0..D-1` in first-seen order; the unknown-label slot
/// is always the last index, `D-1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelVocabulary {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl TryFrom<Vec<String>> for LabelVocabulary {
    type Error = Error;

    fn try_from(labels: Vec<String>) -> Result<Self> {
        Self::from_labels(labels)
    }
}

impl From<LabelVocabulary> for Vec<String> {
    fn from(v: LabelVocabulary) -> Self {
        v.labels
    }
}

impl LabelVocabulary {
    pub fn from_labels(labels: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Invalid(format!("duplicate vocabulary label {l:?}")));
            }
        }
        Ok(LabelVocabulary { labels, index })
    }

    /// Number of one-hot dimensions, including the unknown slot.
    pub fn dim(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn unk_index(&self) -> usize {
        self.labels.len()
    }

    pub fn known_labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> usize {
        self.index.get(label).copied().unwrap_or(self.unk_index())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.index.contains_key(label)
    }

    /// Index of every node label of `g`, in node order.
    pub fn encode(&self, g: &LabeledCfg) -> Vec<usize> {
        g.labels().iter().map(|l| self.index_of(l)).collect()
    }
}

pub fn build_vocabulary<'a, I>(corpus: I) -> Result<LabelVocabulary>
where
    I: IntoIterator<Item = &'a LabeledCfg>,
{
    let mut labels = Vec::new();
    let mut index = HashMap::new();
    let mut graphs = 0usize;
    for g in corpus {
        graphs += 1;
        for l in g.labels() {
            if !index.contains_key(l) {
                index.insert(l.clone(), labels.len());
                labels.push(l.clone());
            }
        }
    }
    if graphs == 0 {
        return Err(Error::EmptyCorpus);
    }
    Ok(LabelVocabulary { labels, index })
}

pub fn one_hot(label: &str, vocab: &LabelVocabulary) -> Vec<f64> {
    let mut v = vec![0.0; vocab.dim()];
    v[vocab.index_of(label)] = 1.0;
    v
}
