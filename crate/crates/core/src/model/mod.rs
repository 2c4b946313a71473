//! The graph similarity network.
//!
//! Three GraphSAGE mean-aggregation layers embed the nodes of each graph,
//! attention pooling turns node embeddings into a graph embedding, and a
//! neural tensor network compares the two graph embeddings. A histogram of
//! pairwise node similarities is appended, and a small fully connected head
//! maps the result to a similarity in (0, 1).

mod network;

pub use network::{
    attention_pool, encode_graph, node_similarity_histogram, ntn_compare, sage_layer,
    squared_error, GraphEmbedding, GraphEncoding, GraphInput, ParamVars, TapeEncoding,
};

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Matrix, Tape};
use crate::error::{Error, Result};
use crate::graph::{LabelVocabulary, LabeledCfg};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// One-hot input width: known labels plus the UNK slot. Zero means
    /// "take it from the vocabulary".
    pub vocab_size: usize,
    /// Output width of each GraphSAGE layer.
    pub sage_dims: Vec<usize>,
    pub ntn_slices: usize,
    pub histogram_bins: usize,
    /// Widths of the fully connected head; the last one must be 1.
    pub fc_dims: Vec<usize>,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 0,
            sage_dims: vec![64, 64, 32],
            ntn_slices: 16,
            histogram_bins: 16,
            fc_dims: vec![32, 16, 8, 1],
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.vocab_size == 0 {
            return bad("vocab_size must be at least 1");
        }
        if self.sage_dims.is_empty() || self.sage_dims.contains(&0) {
            return bad("sage_dims must be non-empty and positive");
        }
        if self.ntn_slices == 0 {
            return bad("ntn_slices must be at least 1");
        }
        if self.histogram_bins == 0 {
            return bad("histogram_bins must be at least 1");
        }
        if self.fc_dims.contains(&0) || self.fc_dims.last() != Some(&1) {
            return bad("fc_dims must be positive and end in 1");
        }
        Ok(())
    }

    /// Width of the final node embeddings.
    pub fn embedding_dim(&self) -> usize {
        *self.sage_dims.last().expect("validated")
    }
}

/// Pair scoring against one model with the bin edges precomputed.
#[derive(Debug, Clone)]
pub struct Scorer<'a> {
    params: &'a ModelParams,
    edges: Vec<f64>,
}

impl Scorer<'_> {
    pub fn score(&self, e1: &GraphEmbedding, e2: &GraphEmbedding) -> Result<f64> {
        network::score_embeddings(e1, e2, self.params, &self.edges)
    }
}

/// Every learnable tensor. Weight matrices map column vectors, except the
/// GraphSAGE and attention weights, which right-multiply row embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `in x out` per layer; the first has one row per vocabulary slot.
    pub sage: Vec<Matrix>,
    /// `F x F`.
    pub attention: Matrix,
    /// `k` slices, each `F x F`.
    pub ntn_w: Vec<Matrix>,
    /// `k x 2F`.
    pub ntn_v: Matrix,
    /// `k x 1`.
    pub ntn_b: Matrix,
    /// `out x in` per layer.
    pub fc_w: Vec<Matrix>,
    /// `out x 1` per layer.
    pub fc_b: Vec<Matrix>,
}

fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize, fan_out: usize) -> Matrix {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("sized above")
}

impl ModelParams {
    /// Uniform Glorot initialization from `config.seed`; biases start at 0.
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut sage = Vec::new();
        let mut d_in = config.vocab_size;
        for &d_out in &config.sage_dims {
            sage.push(glorot(&mut rng, d_in, d_out, d_in, d_out));
            d_in = d_out;
        }
        let f = config.embedding_dim();
        let k = config.ntn_slices;
        let attention = glorot(&mut rng, f, f, f, f);
        let ntn_w = (0..k).map(|_| glorot(&mut rng, f, f, f, f)).collect();
        let ntn_v = glorot(&mut rng, k, 2 * f, 2 * f, k);
        let ntn_b = Matrix::zeros(k, 1);
        let mut fc_w = Vec::new();
        let mut fc_b = Vec::new();
        let mut d_in = k + config.histogram_bins;
        for &d_out in &config.fc_dims {
            fc_w.push(glorot(&mut rng, d_out, d_in, d_in, d_out));
            fc_b.push(Matrix::zeros(d_out, 1));
            d_in = d_out;
        }
        Ok(ModelParams {
            sage,
            attention,
            ntn_w,
            ntn_v,
            ntn_b,
            fc_w,
            fc_b,
        })
    }

    /// All tensors in a fixed order.
    pub fn tensors(&self) -> Vec<&Matrix> {
        let mut out: Vec<&Matrix> = self.sage.iter().collect();
        out.push(&self.attention);
        out.extend(&self.ntn_w);
        out.push(&self.ntn_v);
        out.push(&self.ntn_b);
        out.extend(&self.fc_w);
        out.extend(&self.fc_b);
        out
    }

    /// Same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Matrix> {
        let mut out: Vec<&mut Matrix> = self.sage.iter_mut().collect();
        out.push(&mut self.attention);
        out.extend(&mut self.ntn_w);
        out.push(&mut self.ntn_v);
        out.push(&mut self.ntn_b);
        out.extend(&mut self.fc_w);
        out.extend(&mut self.fc_b);
        out
    }

    /// Human-readable names in [`ModelParams::tensors`] order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..self.sage.len()).map(|i| format!("sage.{i}")).collect();
        out.push("attention".into());
        out.extend((0..self.ntn_w.len()).map(|i| format!("ntn_w.{i}")));
        out.push("ntn_v".into());
        out.push("ntn_b".into());
        out.extend((0..self.fc_w.len()).map(|i| format!("fc_w.{i}")));
        out.extend((0..self.fc_b.len()).map(|i| format!("fc_b.{i}")));
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|m| m.len()).sum()
    }

    /// Checks every tensor shape against `config`.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let expected = ModelParams::shapes(config);
        let actual: Vec<(usize, usize)> = self.tensors().iter().map(|m| m.shape()).collect();
        if self.sage.len() != config.sage_dims.len()
            || self.ntn_w.len() != config.ntn_slices
            || self.fc_w.len() != config.fc_dims.len()
            || self.fc_b.len() != config.fc_dims.len()
        {
            return Err(Error::Checkpoint(
                "parameter count does not match the model config".into(),
            ));
        }
        for ((name, e), a) in self.tensor_names().iter().zip(&expected).zip(&actual) {
            if e != a {
                return Err(Error::Checkpoint(format!(
                    "{name} has shape {a:?}, config expects {e:?}"
                )));
            }
        }
        if !self.tensors().iter().all(|m| m.is_finite()) {
            return Err(Error::Checkpoint(
                "parameters contain non-finite values".into(),
            ));
        }
        Ok(())
    }

    fn shapes(config: &ModelConfig) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut d_in = config.vocab_size;
        for &d in &config.sage_dims {
            out.push((d_in, d));
            d_in = d;
        }
        let f = d_in;
        let k = config.ntn_slices;
        out.push((f, f));
        out.extend(std::iter::repeat_n((f, f), k));
        out.push((k, 2 * f));
        out.push((k, 1));
        let mut d_in = k + config.histogram_bins;
        for &d in &config.fc_dims {
            out.push((d, d_in));
            d_in = d;
        }
        out.extend(config.fc_dims.iter().map(|&d| (d, 1)));
        out
    }
}

/// Predicted similarity of `(g1, g2)`, computed on a fresh tape.
pub fn forward(
    g1: &LabeledCfg,
    g2: &LabeledCfg,
    vocab: &LabelVocabulary,
    params: &ModelParams,
    config: &ModelConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = ParamVars::bind(&mut tape, params)?;
    let e1 = vars.encode(&mut tape, &GraphInput::new(g1, vocab))?;
    let e2 = vars.encode(&mut tape, &GraphInput::new(g2, vocab))?;
    let y = vars.forward(&mut tape, &e1, &e2, config)?;
    Ok(tape.value(y).item())
}

/// Configuration, vocabulary and parameters: everything needed to predict.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: LabelVocabulary,
    pub params: ModelParams,
}

pub const CHECKPOINT_FORMAT: &str = "funcgnn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format: String,
    version: u32,
    config: ModelConfig,
    vocabulary: LabelVocabulary,
    params: ModelParams,
}

impl Model {
    /// A freshly initialized model; `config.vocab_size` is set from `vocab`.
    pub fn new(mut config: ModelConfig, vocab: LabelVocabulary) -> Result<Self> {
        config.vocab_size = vocab.dim();
        let params = ModelParams::init(&config)?;
        Ok(Model {
            config,
            vocab,
            params,
        })
    }

    pub fn input(&self, g: &LabeledCfg) -> GraphInput {
        GraphInput::new(g, &self.vocab)
    }

    /// Graph-level quantities reused by every pair the graph takes part in.
    pub fn embed(&self, g: &LabeledCfg) -> Result<GraphEmbedding> {
        GraphEmbedding::new(&self.input(g), &self.params)
    }

    /// Similarity of two pre-embedded graphs.
    pub fn score(&self, e1: &GraphEmbedding, e2: &GraphEmbedding) -> Result<f64> {
        self.scorer().score(e1, e2)
    }

    /// Scores many pairs without recomputing the histogram bin edges.
    pub fn scorer(&self) -> Scorer<'_> {
        Scorer {
            params: &self.params,
            edges: network::bin_edges(self.config.histogram_bins),
        }
    }

    pub fn predict(&self, g1: &LabeledCfg, g2: &LabeledCfg) -> Result<f64> {
        self.score(&self.embed(g1)?, &self.embed(g2)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config: self.config.clone(),
            vocabulary: self.vocab.clone(),
            params: self.params.clone(),
        };
        serde_json::to_string(&ck).map_err(|e| Error::Checkpoint(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("not valid JSON: {e}")))?;
        if value.get("format").and_then(|f| f.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Checkpoint("not a model checkpoint".into()));
        }
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(CHECKPOINT_VERSION as u64) {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {}, expected {CHECKPOINT_VERSION}",
                version.map_or("?".to_string(), |v| v.to_string())
            )));
        }
        let ck: Checkpoint =
            serde_json::from_value(value).map_err(|e| Error::Checkpoint(e.to_string()))?;
        ck.config.validate()?;
        if ck.vocabulary.dim() != ck.config.vocab_size {
            return Err(Error::Checkpoint(format!(
                "vocabulary has {} slots but the config says {}",
                ck.vocabulary.dim(),
                ck.config.vocab_size
            )));
        }
        ck.params.check_shapes(&ck.config)?;
        Ok(Model {
            config: ck.config,
            vocab: ck.vocabulary,
            params: ck.params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text).map_err(|e| match e {
            Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_vocabulary;

    fn small_model() -> Model {
        let g = LabeledCfg::from_strs(
            &["i = 0", "if i < n", "i = i + 1", "return"],
            &[(0, 1), (1, 2), (2, 1), (1, 3)],
        )
        .unwrap();
        let vocab = build_vocabulary([&g]).unwrap();
        let config = ModelConfig {
            sage_dims: vec![6, 5, 4],
            ntn_slices: 3,
            histogram_bins: 4,
            fc_dims: vec![5, 1],
            seed: 11,
            ..Default::default()
        };
        Model::new(config, vocab).unwrap()
    }

    #[test]
    fn config_validation() {
        let mut c = ModelConfig {
            vocab_size: 5,
            ..Default::default()
        };
        assert!(c.validate().is_ok());
        c.fc_dims = vec![8, 2];
        assert!(c.validate().is_err());
        c.fc_dims = vec![1];
        c.ntn_slices = 0;
        assert!(c.validate().is_err());
        c.ntn_slices = 1;
        c.histogram_bins = 0;
        assert!(c.validate().is_err());
        assert!(ModelConfig::default().validate().is_err());
    }

    #[test]
    fn init_shapes_and_determinism() {
        let m = small_model();
        assert_eq!(m.config.vocab_size, 5);
        m.params.check_shapes(&m.config).unwrap();
        assert_eq!(m.params.sage[0].shape(), (5, 6));
        assert_eq!(m.params.ntn_v.shape(), (3, 8));
        assert_eq!(m.params.fc_w[0].shape(), (5, 7));
        assert_eq!(ModelParams::init(&m.config).unwrap(), m.params);
        let names = m.params.tensor_names();
        assert_eq!(names.len(), m.params.tensors().len());
        assert_eq!(names[3], "attention");
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let m = small_model();
        let back = Model::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn checkpoint_version_mismatch() {
        let m = small_model();
        let text = m
            .to_json()
            .unwrap()
            .replace("\"version\":1", "\"version\":7");
        let err = Model::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("version 7"), "{err}");
        assert!(Model::from_json("{\"format\":\"other\"}").is_err());
    }

    #[test]
    fn checkpoint_shape_mismatch() {
        let mut m = small_model();
        m.params.ntn_b = Matrix::zeros(2, 1);
        let err = Model::from_json(&m.to_json().unwrap())
            .unwrap_err()
            .to_string();
        assert!(err.contains("ntn_b"), "{err}");
    }
}
