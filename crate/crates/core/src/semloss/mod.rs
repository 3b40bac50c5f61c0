//! Contextual-vector loss head.
//!
//! Each six-eight verse pair is summarized by a contextual vector: token
//! embeddings go through single-head scaled dot-product self-attention, then
//! an LSTM, and the last hidden state is kept. The training objective for a
//! block is the next-token cross-entropy plus, for every stanza, the squared
//! distance between the contextual vectors of its two verse pairs.
//!
//! Gradients are computed analytically (reverse mode through the loss terms,
//! the LSTM recursion and attention) and can be checked against central
//! finite differences with [`gradcheck`].

pub mod gradcheck;
mod matrix;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LossError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty token sequence")]
    EmptySequence,
    #[error("target {id} at position {position} outside vocabulary of {vocab}")]
    IdOutOfRange {
        position: usize,
        id: usize,
        vocab: usize,
    },
    #[error("need at least two logit rows, got {0}")]
    DegenerateSequence(usize),
    #[error("stanza {stanza} has {pairs} verse pairs, expected 2")]
    MissingPair { stanza: usize, pairs: usize },
}

type Result<T> = std::result::Result<T, LossError>;

pub type Sequence = Vec<Vec<f64>>;

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-scale..=scale))
}

/// Query/key/value projections, each `d_model x d_model`, applied as `x W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub w_q: Matrix,
    pub w_k: Matrix,
    pub w_v: Matrix,
}

impl AttentionParams {
    pub fn zeros(d_model: usize) -> Self {
        AttentionParams {
            w_q: Matrix::zeros(d_model, d_model),
            w_k: Matrix::zeros(d_model, d_model),
            w_v: Matrix::zeros(d_model, d_model),
        }
    }

    pub fn random(d_model: usize, scale: f64, rng: &mut impl Rng) -> Self {
        AttentionParams {
            w_q: uniform(d_model, d_model, scale, rng),
            w_k: uniform(d_model, d_model, scale, rng),
            w_v: uniform(d_model, d_model, scale, rng),
        }
    }

    pub fn d_model(&self) -> usize {
        self.w_q.rows()
    }

    fn validate(&self) -> Result<()> {
        let d = self.d_model();
        for (name, m) in [("w_q", &self.w_q), ("w_k", &self.w_k), ("w_v", &self.w_v)] {
            if m.rows() != d || m.cols() != d {
                return Err(LossError::ShapeMismatch(format!(
                    "{name} is {}x{}, expected {d}x{d}",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        3 * self.w_q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        [&self.w_q, &self.w_k, &self.w_v]
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect()
    }

    /// Inverse of [`to_flat`](Self::to_flat) for the same shape as `self`.
    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let n = self.w_q.len();
        AttentionParams {
            w_q: self.w_q.with_data(&flat[..n]),
            w_k: self.w_k.with_data(&flat[n..2 * n]),
            w_v: self.w_v.with_data(&flat[2 * n..3 * n]),
        }
    }
}

/// One LSTM gate: `input` is `d_hidden x d_in`, `recurrent` is
/// `d_hidden x d_hidden`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub input: Matrix,
    pub recurrent: Matrix,
    pub bias: Vec<f64>,
}

impl GateParams {
    fn zeros(d_in: usize, d_hidden: usize) -> Self {
        GateParams {
            input: Matrix::zeros(d_hidden, d_in),
            recurrent: Matrix::zeros(d_hidden, d_hidden),
            bias: vec![0.0; d_hidden],
        }
    }

    fn random(d_in: usize, d_hidden: usize, scale: f64, rng: &mut impl Rng) -> Self {
        GateParams {
            input: uniform(d_hidden, d_in, scale, rng),
            recurrent: uniform(d_hidden, d_hidden, scale, rng),
            bias: (0..d_hidden).map(|_| rng.gen_range(-scale..=scale)).collect(),
        }
    }

    /// `input x + recurrent h + bias`
    fn preactivation(&self, x: &[f64], h: &[f64]) -> Vec<f64> {
        let mut z = self.input.mul_vec(x);
        let r = self.recurrent.mul_vec(h);
        for ((z, r), b) in z.iter_mut().zip(r).zip(&self.bias) {
            *z += r + b;
        }
        z
    }

    fn len(&self) -> usize {
        self.input.len() + self.recurrent.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub forget: GateParams,
    pub input: GateParams,
    pub output: GateParams,
    /// Candidate cell state, passed through tanh.
    pub cell: GateParams,
}

impl LstmParams {
    pub fn zeros(d_in: usize, d_hidden: usize) -> Self {
        LstmParams {
            forget: GateParams::zeros(d_in, d_hidden),
            input: GateParams::zeros(d_in, d_hidden),
            output: GateParams::zeros(d_in, d_hidden),
            cell: GateParams::zeros(d_in, d_hidden),
        }
    }

    pub fn random(d_in: usize, d_hidden: usize, scale: f64, rng: &mut impl Rng) -> Self {
        LstmParams {
            forget: GateParams::random(d_in, d_hidden, scale, rng),
            input: GateParams::random(d_in, d_hidden, scale, rng),
            output: GateParams::random(d_in, d_hidden, scale, rng),
            cell: GateParams::random(d_in, d_hidden, scale, rng),
        }
    }

    pub fn d_in(&self) -> usize {
        self.forget.input.cols()
    }

    pub fn d_hidden(&self) -> usize {
        self.forget.bias.len()
    }

    fn gates(&self) -> [&GateParams; 4] {
        [&self.forget, &self.input, &self.output, &self.cell]
    }

    fn gates_mut(&mut self) -> [&mut GateParams; 4] {
        [&mut self.forget, &mut self.input, &mut self.output, &mut self.cell]
    }

    fn validate(&self) -> Result<()> {
        let (d_in, d_h) = (self.d_in(), self.d_hidden());
        for g in self.gates() {
            if g.input.rows() != d_h
                || g.input.cols() != d_in
                || g.recurrent.rows() != d_h
                || g.recurrent.cols() != d_h
                || g.bias.len() != d_h
            {
                return Err(LossError::ShapeMismatch(format!(
                    "inconsistent LSTM gate shapes (d_in {d_in}, d_hidden {d_h})"
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gates().iter().map(|g| g.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened as input matrices (f, i, o, c), then recurrent matrices,
    /// then biases.
    pub fn to_flat(&self) -> Vec<f64> {
        let g = self.gates();
        let mut out = Vec::with_capacity(self.len());
        for gate in g {
            out.extend_from_slice(gate.input.as_slice());
        }
        for gate in g {
            out.extend_from_slice(gate.recurrent.as_slice());
        }
        for gate in g {
            out.extend_from_slice(&gate.bias);
        }
        out
    }

    pub fn with_flat(&self, flat: &[f64]) -> Self {
        let mut p = self.clone();
        let mut at = 0;
        for gate in p.gates_mut() {
            let n = gate.input.len();
            gate.input = gate.input.with_data(&flat[at..at + n]);
            at += n;
        }
        for gate in p.gates_mut() {
            let n = gate.recurrent.len();
            gate.recurrent = gate.recurrent.with_data(&flat[at..at + n]);
            at += n;
        }
        for gate in p.gates_mut() {
            let n = gate.bias.len();
            gate.bias.copy_from_slice(&flat[at..at + n]);
            at += n;
        }
        p
    }
}

fn check_sequence(x: &[Vec<f64>], dim: usize, what: &str) -> Result<()> {
    if x.is_empty() {
        return Err(LossError::EmptySequence);
    }
    if let Some((t, v)) = x.iter().enumerate().find(|(_, v)| v.len() != dim) {
        return Err(LossError::ShapeMismatch(format!(
            "{what} step {t} has length {}, expected {dim}",
            v.len()
        )));
    }
    Ok(())
}

struct AttentionCache {
    q: Matrix,
    k: Matrix,
    v: Matrix,
    weights: Matrix,
    out: Matrix,
}

fn attention_forward(x: &Matrix, p: &AttentionParams) -> AttentionCache {
    let q = x.matmul(&p.w_q);
    let k = x.matmul(&p.w_k);
    let v = x.matmul(&p.w_v);
    let scale = 1.0 / (p.d_model() as f64).sqrt();
    let mut weights = q.matmul(&k.transpose());
    for t in 0..weights.rows() {
        let row = weights.row_mut(t);
        row.iter_mut().for_each(|s| *s *= scale);
        softmax_in_place(row);
    }
    let out = weights.matmul(&v);
    AttentionCache {
        q,
        k,
        v,
        weights,
        out,
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in row.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    row.iter_mut().for_each(|s| *s /= sum);
}

/// Row-stochastic attention weights `softmax(Q K^T / sqrt(d_model))`.
pub fn attention_weights(x: &[Vec<f64>], params: &AttentionParams) -> Result<Sequence> {
    params.validate()?;
    check_sequence(x, params.d_model(), "attention input")?;
    Ok(attention_forward(&Matrix::from_rows(x), params).weights.to_rows())
}

/// Unmasked single-head scaled dot-product self-attention.
pub fn self_attention(x: &[Vec<f64>], params: &AttentionParams) -> Result<Sequence> {
    params.validate()?;
    check_sequence(x, params.d_model(), "attention input")?;
    Ok(attention_forward(&Matrix::from_rows(x), params).out.to_rows())
}

#[derive(Debug, Clone)]
struct LstmStep {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    f: Vec<f64>,
    i: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmOutput {
    pub hidden: Sequence,
    pub cell: Sequence,
}

fn lstm_steps(x: &[Vec<f64>], p: &LstmParams, h0: &[f64], c0: &[f64]) -> (Vec<LstmStep>, LstmOutput) {
    let mut h = h0.to_vec();
    let mut c = c0.to_vec();
    let mut steps = Vec::with_capacity(x.len());
    let mut out = LstmOutput {
        hidden: Vec::with_capacity(x.len()),
        cell: Vec::with_capacity(x.len()),
    };
    for xt in x {
        let f: Vec<f64> = p.forget.preactivation(xt, &h).into_iter().map(sigmoid).collect();
        let i: Vec<f64> = p.input.preactivation(xt, &h).into_iter().map(sigmoid).collect();
        let o: Vec<f64> = p.output.preactivation(xt, &h).into_iter().map(sigmoid).collect();
        let g: Vec<f64> = p.cell.preactivation(xt, &h).into_iter().map(f64::tanh).collect();
        let c_new: Vec<f64> = (0..c.len()).map(|r| f[r] * c[r] + i[r] * g[r]).collect();
        let tanh_c: Vec<f64> = c_new.iter().map(|v| v.tanh()).collect();
        let h_new: Vec<f64> = o.iter().zip(&tanh_c).map(|(o, t)| o * t).collect();
        steps.push(LstmStep {
            x: xt.clone(),
            h_prev: h,
            c_prev: c,
            f,
            i,
            o,
            g,
            tanh_c,
        });
        out.hidden.push(h_new.clone());
        out.cell.push(c_new.clone());
        h = h_new;
        c = c_new;
    }
    (steps, out)
}

/// Runs the LSTM over `x` from the given initial state and returns every
/// hidden and cell state.
pub fn lstm_forward(x: &[Vec<f64>], params: &LstmParams, h0: &[f64], c0: &[f64]) -> Result<LstmOutput> {
    params.validate()?;
    check_sequence(x, params.d_in(), "LSTM input")?;
    let d_h = params.d_hidden();
    if h0.len() != d_h || c0.len() != d_h {
        return Err(LossError::ShapeMismatch(format!(
            "initial state lengths {}/{}, expected {d_h}",
            h0.len(),
            c0.len()
        )));
    }
    Ok(lstm_steps(x, params, h0, c0).1)
}

/// Last LSTM hidden state over self-attended token embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualVector(pub Vec<f64>);

pub fn contextual_vector(tokens: &[Vec<f64>], attn: &AttentionParams, lstm: &LstmParams) -> Result<ContextualVector> {
    check_dims(attn, lstm)?;
    let attended = self_attention(tokens, attn)?;
    let zeros = vec![0.0; lstm.d_hidden()];
    let out = lstm_forward(&attended, lstm, &zeros, &zeros)?;
    Ok(ContextualVector(out.hidden.last().cloned().unwrap_or_default()))
}

fn check_dims(attn: &AttentionParams, lstm: &LstmParams) -> Result<()> {
    attn.validate()?;
    lstm.validate()?;
    if attn.d_model() != lstm.d_in() {
        return Err(LossError::ShapeMismatch(format!(
            "attention d_model {} != LSTM d_in {}",
            attn.d_model(),
            lstm.d_in()
        )));
    }
    Ok(())
}

fn check_targets(logits: &[Vec<f64>], targets: &[usize]) -> Result<usize> {
    let m = logits.len();
    if m < 2 {
        return Err(LossError::DegenerateSequence(m));
    }
    let vocab = logits[0].len();
    if vocab == 0 || logits.iter().any(|r| r.len() != vocab) {
        return Err(LossError::ShapeMismatch("ragged or empty logit rows".into()));
    }
    if targets.len() != m - 1 {
        return Err(LossError::ShapeMismatch(format!(
            "{} targets for {m} logit rows, expected {}",
            targets.len(),
            m - 1
        )));
    }
    if let Some((position, &id)) = targets.iter().enumerate().find(|(_, &id)| id >= vocab) {
        return Err(LossError::IdOutOfRange { position, id, vocab });
    }
    Ok(vocab)
}

/// `-log softmax(row)[target]` via log-sum-exp with max subtraction.
fn token_nll(row: &[f64], target: usize) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    lse - row[target]
}

/// Mean next-token cross-entropy: row `i` of `logits` scores the token at
/// position `i + 1`, whose 0-based vocabulary id is `targets[i]`. The last
/// row has no target.
pub fn ce_loss(logits: &[Vec<f64>], targets: &[usize]) -> Result<f64> {
    check_targets(logits, targets)?;
    let sum: f64 = targets.iter().enumerate().map(|(i, &k)| token_nll(&logits[i], k)).sum();
    Ok(sum / targets.len() as f64)
}

/// Cross-entropy and its gradient with respect to every logit.
pub fn ce_loss_with_grad(logits: &[Vec<f64>], targets: &[usize]) -> Result<(f64, Sequence)> {
    let vocab = check_targets(logits, targets)?;
    let scale = 1.0 / targets.len() as f64;
    let mut grad = vec![vec![0.0; vocab]; logits.len()];
    let mut sum = 0.0;
    for (i, &k) in targets.iter().enumerate() {
        sum += token_nll(&logits[i], k);
        let mut p = logits[i].clone();
        softmax_in_place(&mut p);
        for (j, pj) in p.into_iter().enumerate() {
            grad[i][j] = scale * (pj - if j == k { 1.0 } else { 0.0 });
        }
    }
    Ok((sum * scale, grad))
}

/// Token embeddings for the two six-eight verse pairs of one stanza.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StanzaPairs {
    pub pairs: Vec<Sequence>,
}

/// A training block: language-model logits with next-token targets, and the
/// stanzas whose verse pairs are compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub logits: Sequence,
    pub targets: Vec<usize>,
    pub stanzas: Vec<StanzaPairs>,
}

/// How the squared differences between two contextual vectors are reduced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PairReduction {
    /// Sum over components.
    #[default]
    Sum,
    /// Mean over components.
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub mse: f64,
    pub total: f64,
    /// d total / d parameters, laid out as `attn.to_flat()` then
    /// `lstm.to_flat()`.
    pub gradients: Vec<f64>,
    /// d total / d logits, row-major.
    pub logit_gradients: Vec<f64>,
    /// Contextual vectors `(prev, next)` per stanza.
    pub vectors: Vec<(ContextualVector, ContextualVector)>,
}

fn check_block(block: &Block) -> Result<()> {
    for (s, stanza) in block.stanzas.iter().enumerate() {
        if stanza.pairs.len() != 2 {
            return Err(LossError::MissingPair {
                stanza: s + 1,
                pairs: stanza.pairs.len(),
            });
        }
    }
    Ok(())
}

fn pair_distance(a: &[f64], b: &[f64], reduction: PairReduction) -> f64 {
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    match reduction {
        PairReduction::Sum => s,
        PairReduction::Mean => s / a.len() as f64,
    }
}

/// Forward-only evaluation of the combined loss.
pub fn custom_loss_value(
    block: &Block,
    attn: &AttentionParams,
    lstm: &LstmParams,
    reduction: PairReduction,
) -> Result<f64> {
    check_block(block)?;
    let ce = ce_loss(&block.logits, &block.targets)?;
    let mut mse = 0.0;
    for stanza in &block.stanzas {
        let prev = contextual_vector(&stanza.pairs[0], attn, lstm)?;
        let next = contextual_vector(&stanza.pairs[1], attn, lstm)?;
        mse += pair_distance(&prev.0, &next.0, reduction);
    }
    Ok(ce + mse)
}

/// Combined loss with analytic gradients.
pub fn custom_loss(
    block: &Block,
    attn: &AttentionParams,
    lstm: &LstmParams,
    reduction: PairReduction,
) -> Result<LossBreakdown> {
    check_block(block)?;
    check_dims(attn, lstm)?;
    let (ce, logit_grad) = ce_loss_with_grad(&block.logits, &block.targets)?;

    let mut g_attn = AttentionParams::zeros(attn.d_model());
    let mut g_lstm = LstmParams::zeros(lstm.d_in(), lstm.d_hidden());
    let mut mse = 0.0;
    let mut vectors = Vec::with_capacity(block.stanzas.len());
    let d_h = lstm.d_hidden();

    for stanza in &block.stanzas {
        let prev = PairForward::run(&stanza.pairs[0], attn, lstm)?;
        let next = PairForward::run(&stanza.pairs[1], attn, lstm)?;
        let (e_prev, e_next) = (prev.last_hidden(), next.last_hidden());
        mse += pair_distance(e_prev, e_next, reduction);

        let coef = match reduction {
            PairReduction::Sum => 2.0,
            PairReduction::Mean => 2.0 / d_h as f64,
        };
        let d_prev: Vec<f64> = e_prev.iter().zip(e_next).map(|(a, b)| coef * (a - b)).collect();
        let d_next: Vec<f64> = d_prev.iter().map(|v| -v).collect();
        prev.backward(&d_prev, attn, lstm, &mut g_attn, &mut g_lstm);
        next.backward(&d_next, attn, lstm, &mut g_attn, &mut g_lstm);
        vectors.push((
            ContextualVector(e_prev.to_vec()),
            ContextualVector(e_next.to_vec()),
        ));
    }

    let mut gradients = g_attn.to_flat();
    gradients.extend(g_lstm.to_flat());
    Ok(LossBreakdown {
        ce,
        mse,
        total: ce + mse,
        gradients,
        logit_gradients: logit_grad.into_iter().flatten().collect(),
        vectors,
    })
}

/// Saved activations of one verse pair for the backward pass.
struct PairForward {
    x: Matrix,
    attn: AttentionCache,
    steps: Vec<LstmStep>,
    hidden: Sequence,
}

impl PairForward {
    fn run(tokens: &[Vec<f64>], attn: &AttentionParams, lstm: &LstmParams) -> Result<Self> {
        check_sequence(tokens, attn.d_model(), "token embedding")?;
        let x = Matrix::from_rows(tokens);
        let cache = attention_forward(&x, attn);
        let zeros = vec![0.0; lstm.d_hidden()];
        let (steps, out) = lstm_steps(&cache.out.to_rows(), lstm, &zeros, &zeros);
        Ok(PairForward {
            x,
            attn: cache,
            steps,
            hidden: out.hidden,
        })
    }

    fn last_hidden(&self) -> &[f64] {
        self.hidden.last().expect("non-empty sequence")
    }

    /// Accumulates parameter gradients given d loss / d h_T.
    fn backward(
        &self,
        d_last: &[f64],
        attn: &AttentionParams,
        lstm: &LstmParams,
        g_attn: &mut AttentionParams,
        g_lstm: &mut LstmParams,
    ) {
        let d_h = lstm.d_hidden();
        let t_len = self.steps.len();
        let mut dh = d_last.to_vec();
        let mut dc = vec![0.0; d_h];
        let mut d_attn_out = Matrix::zeros(t_len, attn.d_model());

        for (t, s) in self.steps.iter().enumerate().rev() {
            let mut dz = [vec![0.0; d_h], vec![0.0; d_h], vec![0.0; d_h], vec![0.0; d_h]];
            for r in 0..d_h {
                let d_o = dh[r] * s.tanh_c[r];
                dc[r] += dh[r] * s.o[r] * (1.0 - s.tanh_c[r] * s.tanh_c[r]);
                let d_f = dc[r] * s.c_prev[r];
                let d_i = dc[r] * s.g[r];
                let d_g = dc[r] * s.i[r];
                dz[0][r] = d_f * s.f[r] * (1.0 - s.f[r]);
                dz[1][r] = d_i * s.i[r] * (1.0 - s.i[r]);
                dz[2][r] = d_o * s.o[r] * (1.0 - s.o[r]);
                dz[3][r] = d_g * (1.0 - s.g[r] * s.g[r]);
                dc[r] *= s.f[r];
            }
            let mut dh_prev = vec![0.0; d_h];
            let dx = d_attn_out.row_mut(t);
            for ((gate, grad), dz) in lstm.gates().into_iter().zip(g_lstm.gates_mut()).zip(&dz) {
                grad.input.add_outer(dz, &s.x);
                grad.recurrent.add_outer(dz, &s.h_prev);
                for (b, d) in grad.bias.iter_mut().zip(dz) {
                    *b += d;
                }
                gate.input.add_transpose_mul_vec(dz, dx);
                gate.recurrent.add_transpose_mul_vec(dz, &mut dh_prev);
            }
            dh = dh_prev;
        }

        // attention: out = A V, A = softmax(Q K^T / sqrt(d))
        let c = &self.attn;
        let scale = 1.0 / (attn.d_model() as f64).sqrt();
        let d_weights = d_attn_out.matmul(&c.v.transpose());
        let d_v = c.weights.transpose().matmul(&d_attn_out);
        let mut d_scores = Matrix::zeros(t_len, t_len);
        for t in 0..t_len {
            let a = c.weights.row(t);
            let da = d_weights.row(t);
            let dot: f64 = a.iter().zip(da).map(|(x, y)| x * y).sum();
            for (j, ds) in d_scores.row_mut(t).iter_mut().enumerate() {
                *ds = a[j] * (da[j] - dot) * scale;
            }
        }
        let d_q = d_scores.matmul(&c.k);
        let d_k = d_scores.transpose().matmul(&c.q);
        let xt = self.x.transpose();
        g_attn.w_q.add_assign(&xt.matmul(&d_q));
        g_attn.w_k.add_assign(&xt.matmul(&d_k));
        g_attn.w_v.add_assign(&xt.matmul(&d_v));
    }
}

/// Sizes of a synthetic loss instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceDims {
    pub d_model: usize,
    pub d_hidden: usize,
    pub vocab: usize,
    /// Maximum tokens per verse pair; actual lengths vary in `1..=max_len`.
    pub max_len: usize,
    pub stanzas: usize,
}

impl Default for InstanceDims {
    fn default() -> Self {
        InstanceDims {
            d_model: 4,
            d_hidden: 3,
            vocab: 7,
            max_len: 6,
            stanzas: 2,
        }
    }
}

fn random_sequence(max_len: usize, dim: usize, rng: &mut impl Rng) -> Sequence {
    let len = rng.gen_range(1..=max_len.max(1));
    (0..len)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect()
}

/// Seeded random block and parameters. Embeddings and logits are drawn from
/// `[-1, 1]`, weights from `[-0.5, 0.5]`.
pub fn random_instance(dims: InstanceDims, rng: &mut impl Rng) -> (Block, AttentionParams, LstmParams) {
    let attn = AttentionParams::random(dims.d_model, 0.5, rng);
    let lstm = LstmParams::random(dims.d_model, dims.d_hidden, 0.5, rng);
    let stanzas = (0..dims.stanzas)
        .map(|_| StanzaPairs {
            pairs: vec![
                random_sequence(dims.max_len, dims.d_model, rng),
                random_sequence(dims.max_len, dims.d_model, rng),
            ],
        })
        .collect();
    let m = 2 + rng.gen_range(0..=dims.max_len);
    let logits = (0..m)
        .map(|_| (0..dims.vocab).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    let targets = (0..m - 1).map(|_| rng.gen_range(0..dims.vocab)).collect();
    (
        Block {
            logits,
            targets,
            stanzas,
        },
        attn,
        lstm,
    )
}
