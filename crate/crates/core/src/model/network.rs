use super::{ModelConfig, ModelParams};
use crate::autodiff::{sigmoid, Matrix, Tape, Var};

use crate::error::{Error, Result};
use crate::graph::{LabelVocabulary, LabeledCfg};

/// Model-ready view of one graph: vocabulary index per node and the
/// row-normalized aggregation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphInput {
    pub label_ids: Vec<usize>,
    /// Row `v` averages `v` itself and every predecessor and successor.
    pub mean_adj: Matrix,
}

impl GraphInput {
    pub fn new(g: &LabeledCfg, vocab: &LabelVocabulary) -> Self {
        let n = g.node_count();
        let mut adj = Matrix::zeros(n, n);
        for v in 0..n {
            adj.set(v, v, 1.0);
            for &u in g.predecessors(v).iter().chain(g.successors(v)) {
                adj.set(v, u, 1.0);
            }
            let w = 1.0 / adj.row(v).iter().filter(|&&x| x != 0.0).count() as f64;
            for u in 0..n {
                if adj.get(v, u) != 0.0 {
                    adj.set(v, u, w);
                }
            }
        }
        GraphInput {
            label_ids: vocab.encode(g),
            mean_adj: adj,
        }
    }

    pub fn node_count(&self) -> usize {
        self.label_ids.len()
    }
}

/// One GraphSAGE mean-aggregation layer: `relu(A * H * W)`, where row `v`
/// of `A * H` is the mean of `v`'s embedding and its neighbors'.
pub fn sage_layer(h_prev: &Matrix, input: &GraphInput, w: &Matrix) -> Result<Matrix> {
    if h_prev.rows() != input.node_count() {
        return Err(Error::Shape {
            op: "sage_layer",
            lhs: h_prev.shape(),
            rhs: input.mean_adj.shape(),
        });
    }
    Ok(input.mean_adj.matmul(&h_prev.matmul(w)?)?.into_relu())
}

/// Node embeddings `U`, context `c`, attention weights `a` and the pooled
/// graph embedding `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEncoding {
    /// `N x F`.
    pub u: Matrix,
    /// `1 x F`.
    pub c: Matrix,
    /// `N x 1`, non-negative and not normalized.
    pub a: Matrix,
    /// `F x 1`, equal to `sum_v a_v * U_v`.
    pub h: Matrix,
}

/// `c = relu(mean(U) * W)`, `a = relu(U * c^T)`, `h = U^T * a`.
pub fn attention_pool(u: &Matrix, attention: &Matrix) -> Result<(Matrix, Matrix, Matrix)> {
    let c = u.mean_rows()?.matmul(attention)?.into_relu();
    let a = u.matmul(&c.transpose())?.into_relu();
    let h = u.transpose().matmul(&a)?;
    Ok((c, a, h))
}

fn node_embeddings(input: &GraphInput, params: &ModelParams) -> Result<Matrix> {
    let first = &params.sage[0];
    let mut u = input
        .mean_adj
        .matmul(&first.gather_rows(&input.label_ids)?)?
        .into_relu();
    for w in &params.sage[1..] {
        u = sage_layer(&u, input, w)?;
    }
    Ok(u)
}

pub fn encode_graph(
    g: &LabeledCfg,
    vocab: &LabelVocabulary,
    params: &ModelParams,
) -> Result<GraphEncoding> {
    encode_input(&GraphInput::new(g, vocab), params)
}

fn encode_input(input: &GraphInput, params: &ModelParams) -> Result<GraphEncoding> {
    let u = node_embeddings(input, params)?;
    let (c, a, h) = attention_pool(&u, &params.attention)?;
    Ok(GraphEncoding { u, c, a, h })
}

/// `relu(h_i^T W[s] h_j + V[s] * [h_i; h_j] + b[s])` for every slice `s`,
/// as a `k x 1` column.
pub fn ntn_compare(h_i: &Matrix, h_j: &Matrix, params: &ModelParams) -> Result<Matrix> {
    let proj: Vec<Matrix> = params
        .ntn_w
        .iter()
        .map(|w| w.matmul(h_j))
        .collect::<Result<_>>()?;
    ntn_from_projection(h_i, h_j, &proj, params)
}

fn ntn_from_projection(
    h_i: &Matrix,
    h_j: &Matrix,
    proj_j: &[Matrix],
    params: &ModelParams,
) -> Result<Matrix> {
    let mut out = Vec::with_capacity(proj_j.len());
    ntn_into(h_i, h_j, proj_j, params, &mut out)?;
    Ok(Matrix::column(out))
}

/// Appends the relu'd slice scores to `out`.
fn ntn_into(
    h_i: &Matrix,
    h_j: &Matrix,
    proj_j: &[Matrix],
    params: &ModelParams,
    out: &mut Vec<f64>,
) -> Result<()> {
    let v = &params.ntn_v;
    if v.cols() != h_i.len() + h_j.len() || v.rows() != proj_j.len() {
        return Err(Error::Shape {
            op: "ntn",
            lhs: v.shape(),
            rhs: (h_i.len() + h_j.len(), 1),
        });
    }
    let mut stacked = Vec::with_capacity(v.cols());
    stacked.extend_from_slice(h_i.data());
    stacked.extend_from_slice(h_j.data());
    for (s, (p, b)) in proj_j.iter().zip(params.ntn_b.data()).enumerate() {
        let x = dot(h_i, p) + crate::autodiff::dot(v.row(s), &stacked) + b;
        out.push(relu(x));
    }
    Ok(())
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

fn dot(a: &Matrix, b: &Matrix) -> f64 {
    crate::autodiff::dot(a.data(), b.data())
}

/// Normalized histogram of `sigmoid(<U_i[r], U_j[s]>)` over all row pairs,
/// with the smaller matrix zero-padded to the larger row count. The `b`
/// bins split [0, 1] evenly; a value of exactly 1 lands in the last bin.
///
/// Binning compares the raw inner product against the logits of the bin
/// edges, which is equivalent to binning the sigmoid and avoids the
/// exponentials. Padded entries all equal `sigmoid(0)` and are counted in
/// one step.
pub fn node_similarity_histogram(u_i: &Matrix, u_j: &Matrix, bins: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(bins);
    histogram_into(u_i, u_j, &bin_edges(bins), &mut out);
    out
}

/// Logits of the inner bin edges `1/b, ..., (b-1)/b`.
pub(super) fn bin_edges(bins: usize) -> Vec<f64> {
    (1..bins)
        .map(|i| {
            let p = i as f64 / bins as f64;
            (p / (1.0 - p)).ln()
        })
        .collect()
}

fn histogram_into(u_i: &Matrix, u_j: &Matrix, edges: &[f64], out: &mut Vec<f64>) {
    let bins = edges.len() + 1;
    let bin_of = |x: f64| edges.partition_point(|&e| e <= x);
    let (n1, n2) = (u_i.rows(), u_j.rows());
    let n = n1.max(n2);
    let start = out.len();
    out.resize(start + bins, 0.0);
    let counts = &mut out[start..];
    for r in 0..n1 {
        let a = u_i.row(r);
        for s in 0..n2 {
            counts[bin_of(crate::autodiff::dot(a, u_j.row(s)))] += 1.0;
        }
    }
    counts[bin_of(0.0)] += (n * n - n1 * n2) as f64;
    let total = (n * n) as f64;
    counts.iter_mut().for_each(|c| *c /= total);
}

/// Runs the fully connected layers on the concatenated comparison vector.
fn head_from(mut z: Vec<f64>, params: &ModelParams) -> Result<f64> {
    let mut next = Vec::with_capacity(z.len());
    let last = params.fc_w.len() - 1;
    for (l, (w, b)) in params.fc_w.iter().zip(&params.fc_b).enumerate() {
        if w.cols() != z.len() || b.len() != w.rows() {
            return Err(Error::Shape {
                op: "fc",
                lhs: w.shape(),
                rhs: (z.len(), 1),
            });
        }
        next.clear();
        for (r, bias) in b.data().iter().enumerate() {
            let x = crate::autodiff::dot(w.row(r), &z) + bias;
            next.push(if l < last { relu(x) } else { x });
        }
        std::mem::swap(&mut z, &mut next);
    }
    let y = sigmoid(z[0]);
    if !y.is_finite() {
        return Err(Error::NonFinite("forward"));
    }
    Ok(y)
}

/// Per-graph values cached for inference: the encoding plus `W[s] * h` for
/// every tensor slice.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphEmbedding {
    pub encoding: GraphEncoding,
    ntn_proj: Vec<Matrix>,
}

impl GraphEmbedding {
    pub fn new(input: &GraphInput, params: &ModelParams) -> Result<Self> {
        let encoding = encode_input(input, params)?;
        let ntn_proj = params
            .ntn_w
            .iter()
            .map(|w| w.matmul(&encoding.h))
            .collect::<Result<_>>()?;
        Ok(GraphEmbedding { encoding, ntn_proj })
    }
}

pub(super) fn score_embeddings(
    e1: &GraphEmbedding,
    e2: &GraphEmbedding,
    params: &ModelParams,
    edges: &[f64],
) -> Result<f64> {
    let mut z = Vec::with_capacity(params.ntn_b.len() + edges.len() + 1);
    ntn_into(&e1.encoding.h, &e2.encoding.h, &e2.ntn_proj, params, &mut z)?;
    histogram_into(&e1.encoding.u, &e2.encoding.u, edges, &mut z);
    head_from(z, params)
}

/// Tape handles for every parameter tensor.
#[derive(Debug, Clone)]
pub struct ParamVars {
    pub sage: Vec<Var>,
    pub attention: Var,
    pub ntn_w: Vec<Var>,
    pub ntn_v: Var,
    pub ntn_b: Var,
    pub fc_w: Vec<Var>,
    pub fc_b: Vec<Var>,
}

/// Tape handles of a graph's encoding.
#[derive(Debug, Clone, Copy)]
pub struct TapeEncoding {
    pub u: Var,
    pub c: Var,
    pub a: Var,
    pub h: Var,
}

impl ParamVars {
    /// Records every tensor of `params` as a trainable leaf.
    pub fn bind(tape: &mut Tape, params: &ModelParams) -> Result<Self> {
        let mut leaf = |m: &Matrix| tape.param(m.clone());
        Ok(ParamVars {
            sage: params.sage.iter().map(&mut leaf).collect::<Result<_>>()?,
            attention: leaf(&params.attention)?,
            ntn_w: params.ntn_w.iter().map(&mut leaf).collect::<Result<_>>()?,
            ntn_v: leaf(&params.ntn_v)?,
            ntn_b: leaf(&params.ntn_b)?,
            fc_w: params.fc_w.iter().map(&mut leaf).collect::<Result<_>>()?,
            fc_b: params.fc_b.iter().map(&mut leaf).collect::<Result<_>>()?,
        })
    }

    /// Handles in [`ModelParams::tensors`] order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = self.sage.clone();
        out.push(self.attention);
        out.extend(&self.ntn_w);
        out.push(self.ntn_v);
        out.push(self.ntn_b);
        out.extend(&self.fc_w);
        out.extend(&self.fc_b);
        out
    }

    /// Accumulated gradients in [`ModelParams::tensors`] order.
    pub fn grads(&self, tape: &Tape) -> Vec<Matrix> {
        self.vars()
            .into_iter()
            .map(|v| tape.grad(v).expect("bound as param").clone())
            .collect()
    }

    pub fn encode(&self, tape: &mut Tape, input: &GraphInput) -> Result<TapeEncoding> {
        let adj = tape.constant(input.mean_adj.clone())?;
        let hw = tape.gather_rows(self.sage[0], &input.label_ids)?;
        let agg = tape.matmul(adj, hw)?;
        let mut u = tape.relu(agg)?;
        for &w in &self.sage[1..] {
            let hw = tape.matmul(u, w)?;
            let agg = tape.matmul(adj, hw)?;
            u = tape.relu(agg)?;
        }
        let mean = tape.mean_rows(u)?;
        let ctx = tape.matmul(mean, self.attention)?;
        let c = tape.relu(ctx)?;
        let ct = tape.transpose(c)?;
        let logits = tape.matmul(u, ct)?;
        let a = tape.relu(logits)?;
        let ut = tape.transpose(u)?;
        let h = tape.matmul(ut, a)?;
        Ok(TapeEncoding { u, c, a, h })
    }

    pub fn ntn(&self, tape: &mut Tape, h_i: Var, h_j: Var) -> Result<Var> {
        let mut scores = Vec::with_capacity(self.ntn_w.len());
        for &w in &self.ntn_w {
            let proj = tape.matmul(w, h_j)?;
            scores.push(tape.inner_product(h_i, proj)?);
        }
        let scores = tape.concat_rows(&scores)?;
        let stacked = tape.concat_rows(&[h_i, h_j])?;
        let linear = tape.matmul(self.ntn_v, stacked)?;
        let pre = tape.add(scores, linear)?;
        let pre = tape.add(pre, self.ntn_b)?;
        tape.relu(pre)
    }

    /// The histogram enters the tape as a constant computed from
    /// gradient-stopped node embeddings.
    pub fn histogram(&self, tape: &mut Tape, u_i: Var, u_j: Var, bins: usize) -> Result<Var> {
        let si = tape.stop_gradient(u_i)?;
        let sj = tape.stop_gradient(u_j)?;
        let hist = node_similarity_histogram(tape.value(si), tape.value(sj), bins);
        tape.constant(Matrix::column(hist))
    }

    /// Predicted similarity of an encoded pair, as a 1x1.
    pub fn forward(
        &self,
        tape: &mut Tape,
        e1: &TapeEncoding,
        e2: &TapeEncoding,
        config: &ModelConfig,
    ) -> Result<Var> {
        let hist = self.histogram(tape, e1.u, e2.u, config.histogram_bins)?;
        self.forward_with_histogram(tape, e1, e2, hist)
    }

    /// [`ParamVars::forward`] with the histogram features supplied by the
    /// caller.
    pub fn forward_with_histogram(
        &self,
        tape: &mut Tape,
        e1: &TapeEncoding,
        e2: &TapeEncoding,
        hist: Var,
    ) -> Result<Var> {
        let ntn = self.ntn(tape, e1.h, e2.h)?;
        let mut z = tape.concat_rows(&[ntn, hist])?;
        let last = self.fc_w.len() - 1;
        for (l, (&w, &b)) in self.fc_w.iter().zip(&self.fc_b).enumerate() {
            let pre = tape.matmul(w, z)?;
            z = tape.add(pre, b)?;
            if l < last {
                z = tape.relu(z)?;
            }
        }
        tape.sigmoid(z)
    }
}

/// Squared error of one prediction on the tape.
pub fn squared_error(tape: &mut Tape, y_hat: Var, target: f64) -> Result<Var> {
    let t = tape.constant(Matrix::scalar(target))?;
    let diff = tape.sub(y_hat, t)?;
    tape.mul_elem(diff, diff)
}
