use std::cell::Cell;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::tokenize::EncodedDocument;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Result, VidError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ff_dim: usize,
    pub max_len: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d_model: 32,
            heads: 2,
            layers: 2,
            ff_dim: 64,
            max_len: 64,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model == 0 || self.heads == 0 || self.layers == 0 || self.ff_dim == 0 {
            return Err(VidError::Parameter("encoder dimensions must be positive".into()));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return Err(VidError::Parameter(format!(
                "d_model {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        if self.max_len < 3 {
            return Err(VidError::Parameter("max_len must be at least 3".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }
}

/// Which row of the contextual encoding a classifier reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum View {
    /// The `[CLS]` position (index 0).
    Document,
    /// The first drug-token position.
    Drug,
}

impl View {
    pub fn position(self, doc: &EncodedDocument) -> usize {
        match self {
            View::Document => 0,
            View::Drug => doc.drug_position,
        }
    }

    pub fn other(self) -> View {
        match self {
            View::Document => View::Drug,
            View::Drug => View::Document,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            View::Document => "doc",
            View::Drug => "drug",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadParams {
    pub wq: Tensor,
    pub wk: Tensor,
    pub wv: Tensor,
    pub wo: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub heads: Vec<HeadParams>,
    pub bo: Tensor,
    pub ln1_gamma: Tensor,
    pub ln1_beta: Tensor,
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    pub ln2_gamma: Tensor,
    pub ln2_beta: Tensor,
}

/// Weights of a post-norm transformer encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    pub token_embedding: Tensor,
    pub position_embedding: Tensor,
    pub emb_ln_gamma: Tensor,
    pub emb_ln_beta: Tensor,
    pub layers: Vec<LayerParams>,
}

fn dense<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    Tensor::randn(vec![rows, cols], 1.0 / (rows as f64).sqrt(), rng).trainable()
}

fn ones(n: usize) -> Tensor {
    Tensor::filled(vec![n], 1.0).trainable()
}

/// Standard deviation of token and position embeddings at initialization.
pub const EMBEDDING_STD: f64 = 0.02;

fn zeros(n: usize) -> Tensor {
    Tensor::zeros(vec![n]).trainable()
}

impl EncoderParams {
    pub fn init<R: Rng + ?Sized>(config: EncoderConfig, vocab_size: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if vocab_size == 0 {
            return Err(VidError::Parameter("empty vocabulary".into()));
        }
        let d = config.d_model;
        let dh = config.head_dim();
        let token_embedding = Tensor::randn(vec![vocab_size, d], EMBEDDING_STD, rng).trainable();
        let position_embedding = Tensor::randn(vec![config.max_len, d], EMBEDDING_STD, rng).trainable();
        let layers = (0..config.layers)
            .map(|_| LayerParams {
                heads: (0..config.heads)
                    .map(|_| HeadParams {
                        wq: dense(d, dh, rng),
                        wk: dense(d, dh, rng),
                        wv: dense(d, dh, rng),
                        wo: dense(dh, d, rng),
                    })
                    .collect(),
                bo: zeros(d),
                ln1_gamma: ones(d),
                ln1_beta: zeros(d),
                w1: dense(d, config.ff_dim, rng),
                b1: zeros(config.ff_dim),
                w2: dense(config.ff_dim, d, rng),
                b2: zeros(d),
                ln2_gamma: ones(d),
                ln2_beta: zeros(d),
            })
            .collect();
        Ok(Self {
            config,
            token_embedding,
            position_embedding,
            emb_ln_gamma: ones(d),
            emb_ln_beta: zeros(d),
            layers,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.token_embedding.shape()[0]
    }

    /// Every tensor with a stable name, in declaration order.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = vec![
            ("token_embedding".to_string(), &self.token_embedding),
            ("position_embedding".to_string(), &self.position_embedding),
            ("emb_ln_gamma".to_string(), &self.emb_ln_gamma),
            ("emb_ln_beta".to_string(), &self.emb_ln_beta),
        ];
        for (l, layer) in self.layers.iter().enumerate() {
            for (h, head) in layer.heads.iter().enumerate() {
                out.push((format!("layer{l}.head{h}.wq"), &head.wq));
                out.push((format!("layer{l}.head{h}.wk"), &head.wk));
                out.push((format!("layer{l}.head{h}.wv"), &head.wv));
                out.push((format!("layer{l}.head{h}.wo"), &head.wo));
            }
            out.push((format!("layer{l}.bo"), &layer.bo));
            out.push((format!("layer{l}.ln1_gamma"), &layer.ln1_gamma));
            out.push((format!("layer{l}.ln1_beta"), &layer.ln1_beta));
            out.push((format!("layer{l}.w1"), &layer.w1));
            out.push((format!("layer{l}.b1"), &layer.b1));
            out.push((format!("layer{l}.w2"), &layer.w2));
            out.push((format!("layer{l}.b2"), &layer.b2));
            out.push((format!("layer{l}.ln2_gamma"), &layer.ln2_gamma));
            out.push((format!("layer{l}.ln2_beta"), &layer.ln2_beta));
        }
        out
    }

    /// Mutable tensors in the same order as [`EncoderParams::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = vec![
            &mut self.token_embedding,
            &mut self.position_embedding,
            &mut self.emb_ln_gamma,
            &mut self.emb_ln_beta,
        ];
        for layer in &mut self.layers {
            for head in &mut layer.heads {
                out.push(&mut head.wq);
                out.push(&mut head.wk);
                out.push(&mut head.wv);
                out.push(&mut head.wo);
            }
            out.push(&mut layer.bo);
            out.push(&mut layer.ln1_gamma);
            out.push(&mut layer.ln1_beta);
            out.push(&mut layer.w1);
            out.push(&mut layer.b1);
            out.push(&mut layer.w2);
            out.push(&mut layer.b2);
            out.push(&mut layer.ln2_gamma);
            out.push(&mut layer.ln2_beta);
        }
        out
    }

    /// Expected `(name, shape)` list for this configuration and vocabulary.
    pub fn expected_shapes(config: &EncoderConfig, vocab_size: usize) -> Vec<(String, Vec<usize>)> {
        let d = config.d_model;
        let dh = config.head_dim();
        let mut out = vec![
            ("token_embedding".to_string(), vec![vocab_size, d]),
            ("position_embedding".to_string(), vec![config.max_len, d]),
            ("emb_ln_gamma".to_string(), vec![d]),
            ("emb_ln_beta".to_string(), vec![d]),
        ];
        for l in 0..config.layers {
            for h in 0..config.heads {
                out.push((format!("layer{l}.head{h}.wq"), vec![d, dh]));
                out.push((format!("layer{l}.head{h}.wk"), vec![d, dh]));
                out.push((format!("layer{l}.head{h}.wv"), vec![d, dh]));
                out.push((format!("layer{l}.head{h}.wo"), vec![dh, d]));
            }
            out.push((format!("layer{l}.bo"), vec![d]));
            out.push((format!("layer{l}.ln1_gamma"), vec![d]));
            out.push((format!("layer{l}.ln1_beta"), vec![d]));
            out.push((format!("layer{l}.w1"), vec![d, config.ff_dim]));
            out.push((format!("layer{l}.b1"), vec![config.ff_dim]));
            out.push((format!("layer{l}.w2"), vec![config.ff_dim, d]));
            out.push((format!("layer{l}.b2"), vec![d]));
            out.push((format!("layer{l}.ln2_gamma"), vec![d]));
            out.push((format!("layer{l}.ln2_beta"), vec![d]));
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.is_finite())
    }

    /// Records every tensor as a leaf on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> EncoderVars {
        let vars: Vec<Var> = self.named_tensors().iter().map(|(_, t)| tape.leaf(t)).collect();
        EncoderVars::from_flat(&self.config, &vars)
    }

    /// Per-token contextual representations, shape `[len, d]`.
    pub fn forward(&self, tape: &mut Tape, vars: &EncoderVars, doc: &EncodedDocument) -> Result<Var> {
        self.forward_with(tape, vars, doc, None)
    }

    /// [`forward`](Self::forward) with optional training-time dropout after the
    /// embedding layer and on each residual branch.
    pub fn forward_with(
        &self,
        tape: &mut Tape,
        vars: &EncoderVars,
        doc: &EncodedDocument,
        mut dropout: Option<&mut Dropout>,
    ) -> Result<Var> {
        let n = doc.len();
        if n == 0 {
            return Err(VidError::Empty("document has no tokens".into()));
        }
        if n > self.config.max_len {
            return Err(VidError::Parameter(format!(
                "sequence of {n} tokens exceeds max_len {}",
                self.config.max_len
            )));
        }
        if doc.mask.len() != n {
            return Err(VidError::Contract("mask length differs from token count".into()));
        }
        let positions: Vec<usize> = (0..n).collect();
        let tok = tape.embedding(vars.token_embedding, &doc.ids)?;
        let pos = tape.embedding(vars.position_embedding, &positions)?;
        let sum = tape.add(tok, pos)?;
        let mut x = tape.layer_norm(sum, vars.emb_ln_gamma, vars.emb_ln_beta)?;
        x = Dropout::apply(&mut dropout, tape, x)?;
        let mask = Some(doc.mask.as_slice());
        for layer in &vars.layers {
            let mut attn: Option<Var> = None;
            for head in &layer.heads {
                let q = tape.matmul(x, head.wq)?;
                let k = tape.matmul(x, head.wk)?;
                let v = tape.matmul(x, head.wv)?;
                let ctx = tape.attention(q, k, v, mask)?;
                let proj = tape.matmul(ctx, head.wo)?;
                attn = Some(match attn {
                    None => proj,
                    Some(acc) => tape.add(acc, proj)?,
                });
            }
            let attn = tape.add_row(attn.expect("at least one head"), layer.bo)?;
            let attn = Dropout::apply(&mut dropout, tape, attn)?;
            let res = tape.add(x, attn)?;
            x = tape.layer_norm(res, layer.ln1_gamma, layer.ln1_beta)?;
            let h = tape.matmul(x, layer.w1)?;
            let h = tape.add_row(h, layer.b1)?;
            let h = tape.gelu(h);
            let h = tape.matmul(h, layer.w2)?;
            let h = tape.add_row(h, layer.b2)?;
            let h = Dropout::apply(&mut dropout, tape, h)?;
            let res = tape.add(x, h)?;
            x = tape.layer_norm(res, layer.ln2_gamma, layer.ln2_beta)?;
        }
        Ok(x)
    }
}

/// Training-time dropout settings and the generator drawing its masks.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut dyn RngCore,
}

impl Dropout<'_> {
    pub fn apply(dropout: &mut Option<&mut Dropout>, tape: &mut Tape, x: Var) -> Result<Var> {
        match dropout {
            Some(d) => tape.dropout(x, d.rate, &mut *d.rng),
            None => Ok(x),
        }
    }
}

/// Tape handles mirroring [`EncoderParams`].
#[derive(Debug, Clone)]
pub struct EncoderVars {
    pub token_embedding: Var,
    pub position_embedding: Var,
    pub emb_ln_gamma: Var,
    pub emb_ln_beta: Var,
    pub layers: Vec<LayerVars>,
    flat: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct LayerVars {
    pub heads: Vec<HeadVars>,
    pub bo: Var,
    pub ln1_gamma: Var,
    pub ln1_beta: Var,
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
    pub ln2_gamma: Var,
    pub ln2_beta: Var,
}

#[derive(Debug, Clone)]
pub struct HeadVars {
    pub wq: Var,
    pub wk: Var,
    pub wv: Var,
    pub wo: Var,
}

impl EncoderVars {
    fn from_flat(config: &EncoderConfig, flat: &[Var]) -> Self {
        let mut it = flat.iter().copied();
        let mut next = || it.next().expect("flat var list matches config");
        let token_embedding = next();
        let position_embedding = next();
        let emb_ln_gamma = next();
        let emb_ln_beta = next();
        let layers = (0..config.layers)
            .map(|_| LayerVars {
                heads: (0..config.heads)
                    .map(|_| HeadVars {
                        wq: next(),
                        wk: next(),
                        wv: next(),
                        wo: next(),
                    })
                    .collect(),
                bo: next(),
                ln1_gamma: next(),
                ln1_beta: next(),
                w1: next(),
                b1: next(),
                w2: next(),
                b2: next(),
                ln2_gamma: next(),
                ln2_beta: next(),
            })
            .collect();
        Self {
            token_embedding,
            position_embedding,
            emb_ln_gamma,
            emb_ln_beta,
            layers,
            flat: flat.to_vec(),
        }
    }

    /// Handles in the order of [`EncoderParams::named_tensors`].
    pub fn flat(&self) -> &[Var] {
        &self.flat
    }
}

thread_local! {
    static ENCODE_CALLS: Cell<u64> = const { Cell::new(0) };
}

/// Number of [`encode`] calls made on the current thread.
pub fn encode_call_count() -> u64 {
    ENCODE_CALLS.with(Cell::get)
}

/// Runs the encoder once and returns the `[len, d]` representations.
pub fn encode(doc: &EncodedDocument, params: &EncoderParams) -> Result<Tensor> {
    ENCODE_CALLS.with(|c| c.set(c.get() + 1));
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape);
    let out = params.forward(&mut tape, &vars, doc)?;
    Ok(tape.tensor(out))
}

/// One view of a document: a single row of its encoding.
pub fn extract_view(encoded: &Tensor, doc: &EncodedDocument, view: View) -> Result<Vec<f64>> {
    let (rows, _) = encoded.dims2();
    if rows != doc.len() {
        return Err(VidError::Contract(format!(
            "encoding has {rows} rows but document has {} tokens",
            doc.len()
        )));
    }
    Ok(encoded.row(view.position(doc)).to_vec())
}
