//! Sentence and relation-name encoder.
//!
//! Token embeddings are mean-pooled three ways (whole marked sentence, head
//! span, tail span), concatenated and linearly projected to `d` dimensions.
//! Relation names use the same pooling with all three slots set to the mean
//! of the name tokens. Outputs are not normalized.

mod gradcheck;
mod marking;
mod vocab;

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;

use crate::benchmark::{Span, TaggedSentence};
use crate::checkpoint::TensorFile;
use crate::error::{Error, Result};
use crate::par::Exec;

pub use gradcheck::{check_gradient, GradCheckReport, ParamCoord, ProbeResult};
pub use marking::{mark_entities, MarkedSentence};
pub use vocab::{
    Vocab, WordVectors, HEAD_MARKER, HEAD_MARKER_ID, TAIL_MARKER, TAIL_MARKER_ID, UNK, UNK_ID,
};

/// Trainable encoder parameters. `projection` is `d x 3*d_e`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub d_e: usize,
    pub d: usize,
    pub embeddings: Vec<f64>,
    pub projection: Vec<f64>,
    pub bias: Vec<f64>,
}

impl EncoderParams {
    pub fn zeros(vocab_size: usize, d_e: usize, d: usize) -> Self {
        EncoderParams {
            d_e,
            d,
            embeddings: vec![0.0; vocab_size * d_e],
            projection: vec![0.0; d * 3 * d_e],
            bias: vec![0.0; d],
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embeddings.len() / self.d_e
    }

    pub fn pooled_dim(&self) -> usize {
        3 * self.d_e
    }

    pub fn embedding(&self, id: u32) -> &[f64] {
        let s = id as usize * self.d_e;
        &self.embeddings[s..s + self.d_e]
    }

    pub fn embedding_mut(&mut self, id: u32) -> &mut [f64] {
        let s = id as usize * self.d_e;
        &mut self.embeddings[s..s + self.d_e]
    }

    pub fn is_finite(&self) -> bool {
        self.embeddings
            .iter()
            .chain(&self.projection)
            .chain(&self.bias)
            .all(|x| x.is_finite())
    }

    pub fn param_mut(&mut self, coord: ParamCoord) -> &mut f64 {
        match coord {
            ParamCoord::Embedding { token, dim } => {
                &mut self.embeddings[token as usize * self.d_e + dim]
            }
            ParamCoord::Projection(i) => &mut self.projection[i],
            ParamCoord::Bias(i) => &mut self.bias[i],
        }
    }
}

/// Token ids plus the two entity spans, ready for pooling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncoderInput {
    pub ids: Vec<u32>,
    pub head: Span,
    pub tail: Span,
}

/// Parameter gradients. Embedding rows are stored sparsely.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embeddings: BTreeMap<u32, Vec<f64>>,
    pub projection: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros(params: &EncoderParams) -> Self {
        Gradients {
            embeddings: BTreeMap::new(),
            projection: vec![0.0; params.projection.len()],
            bias: vec![0.0; params.bias.len()],
        }
    }

    pub fn get(&self, coord: ParamCoord) -> f64 {
        match coord {
            ParamCoord::Embedding { token, dim } => {
                self.embeddings.get(&token).map_or(0.0, |row| row[dim])
            }
            ParamCoord::Projection(i) => self.projection[i],
            ParamCoord::Bias(i) => self.bias[i],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.embeddings
            .values()
            .flatten()
            .chain(&self.projection)
            .chain(&self.bias)
            .all(|&x| x == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub vocab: Vocab,
    pub params: EncoderParams,
}

impl Encoder {
    /// Random initialization. Embedding rows come from `word_vectors` when the
    /// token has one; all other rows and the projection are Gaussian.
    pub fn init<R: Rng + ?Sized>(
        vocab: Vocab,
        d_e: usize,
        d: usize,
        word_vectors: Option<&WordVectors>,
        rng: &mut R,
    ) -> Result<Self> {
        if d_e == 0 || d == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if let Some(wv) = word_vectors {
            if !wv.is_empty() && wv.dim() != d_e {
                return Err(Error::Dimension {
                    expected: d_e,
                    actual: wv.dim(),
                });
            }
        }
        let mut params = EncoderParams::zeros(vocab.len(), d_e, d);
        let emb = Normal::new(0.0, 1.0 / (d_e as f64).sqrt()).unwrap();
        for (id, tok) in vocab.tokens().iter().enumerate() {
            let row = params.embedding_mut(id as u32);
            match word_vectors.and_then(|wv| wv.get(tok)) {
                Some(v) => row.copy_from_slice(v),
                None => row.iter_mut().for_each(|x| *x = emb.sample(rng)),
            }
        }
        let proj = Normal::new(0.0, 1.0 / ((3 * d_e) as f64).sqrt()).unwrap();
        params
            .projection
            .iter_mut()
            .for_each(|x| *x = proj.sample(rng));
        Ok(Encoder { vocab, params })
    }

    pub fn dim(&self) -> usize {
        self.params.d
    }

    pub fn sentence_input(&self, s: &MarkedSentence) -> Result<EncoderInput> {
        if s.tokens.is_empty() {
            return Err(Error::Empty("sentence"));
        }
        Ok(EncoderInput {
            ids: s.tokens.iter().map(|t| self.vocab.id(t)).collect(),
            head: s.head,
            tail: s.tail,
        })
    }

    pub fn tagged_input(&self, s: &TaggedSentence) -> Result<EncoderInput> {
        self.sentence_input(&mark_entities(s)?)
    }

    pub fn name_input<S: AsRef<str>>(&self, name: &[S]) -> Result<EncoderInput> {
        if name.is_empty() {
            return Err(Error::Empty("relation name"));
        }
        let all = Span::new(0, name.len() - 1);
        Ok(EncoderInput {
            ids: name.iter().map(|t| self.vocab.id(t.as_ref())).collect(),
            head: all,
            tail: all,
        })
    }

    /// `[mean(all), mean(head), mean(tail)]`.
    pub fn pool(&self, input: &EncoderInput) -> Vec<f64> {
        let d_e = self.params.d_e;
        let mut pooled = vec![0.0; 3 * d_e];
        let n = input.ids.len() as f64;
        let (nh, nt) = (input.head.len() as f64, input.tail.len() as f64);
        for (pos, &id) in input.ids.iter().enumerate() {
            let row = self.params.embedding(id);
            for k in 0..d_e {
                pooled[k] += row[k] / n;
            }
            if input.head.contains(pos) {
                for k in 0..d_e {
                    pooled[d_e + k] += row[k] / nh;
                }
            }
            if input.tail.contains(pos) {
                for k in 0..d_e {
                    pooled[2 * d_e + k] += row[k] / nt;
                }
            }
        }
        pooled
    }

    pub fn project(&self, pooled: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let width = p.pooled_dim();
        (0..p.d)
            .map(|i| {
                let row = &p.projection[i * width..(i + 1) * width];
                p.bias[i] + row.iter().zip(pooled).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect()
    }

    pub fn forward(&self, input: &EncoderInput) -> Vec<f64> {
        self.project(&self.pool(input))
    }

    pub fn encode_sentence(&self, s: &MarkedSentence) -> Result<Vec<f64>> {
        Ok(self.forward(&self.sentence_input(s)?))
    }

    /// Marks entities and encodes.
    pub fn encode(&self, s: &TaggedSentence) -> Result<Vec<f64>> {
        Ok(self.forward(&self.tagged_input(s)?))
    }

    pub fn encode_relation_name<S: AsRef<str>>(&self, name: &[S]) -> Result<Vec<f64>> {
        Ok(self.forward(&self.name_input(name)?))
    }

    /// Encodes many sentences, preserving order.
    pub fn encode_all(&self, sentences: &[&TaggedSentence], exec: Exec) -> Result<Vec<Vec<f64>>> {
        exec.try_map(sentences, |s| self.encode(s))
    }

    /// Accumulates the gradient of a downstream scalar given `d_out` = ∂L/∂output.
    pub fn backward(
        &self,
        input: &EncoderInput,
        pooled: &[f64],
        d_out: &[f64],
        grads: &mut Gradients,
    ) {
        let p = &self.params;
        let (d_e, width) = (p.d_e, p.pooled_dim());
        let mut d_pooled = vec![0.0; width];
        for (i, &g) in d_out.iter().enumerate().take(p.d) {
            if g == 0.0 {
                continue;
            }
            grads.bias[i] += g;
            let row = &p.projection[i * width..(i + 1) * width];
            let grow = &mut grads.projection[i * width..(i + 1) * width];
            for j in 0..width {
                grow[j] += g * pooled[j];
                d_pooled[j] += g * row[j];
            }
        }
        let n = input.ids.len() as f64;
        let (nh, nt) = (input.head.len() as f64, input.tail.len() as f64);
        for (pos, &id) in input.ids.iter().enumerate() {
            let row = grads.embeddings.entry(id).or_insert_with(|| vec![0.0; d_e]);
            let in_head = input.head.contains(pos);
            let in_tail = input.tail.contains(pos);
            for k in 0..d_e {
                let mut g = d_pooled[k] / n;
                if in_head {
                    g += d_pooled[d_e + k] / nh;
                }
                if in_tail {
                    g += d_pooled[2 * d_e + k] / nt;
                }
                row[k] += g;
            }
        }
    }

    /// Plain SGD step. Embedding rows are left fixed unless `train_embeddings`.
    pub fn apply_sgd(&mut self, grads: &Gradients, lr: f64, train_embeddings: bool) {
        let p = &mut self.params;
        for (w, g) in p.projection.iter_mut().zip(&grads.projection) {
            *w -= lr * g;
        }
        for (b, g) in p.bias.iter_mut().zip(&grads.bias) {
            *b -= lr * g;
        }
        if train_embeddings {
            for (&id, g) in &grads.embeddings {
                for (w, g) in p.embedding_mut(id).iter_mut().zip(g) {
                    *w -= lr * g;
                }
            }
        }
    }

    pub fn to_tensor_file(&self) -> Result<TensorFile> {
        let p = &self.params;
        let mut f = TensorFile::new(json!({
            "kind": "encoder",
            "d_e": p.d_e,
            "d": p.d,
            "vocab": self.vocab.tokens(),
        }));
        f.push(
            "token_embeddings",
            vec![p.vocab_size(), p.d_e],
            p.embeddings.clone(),
        )?;
        f.push(
            "projection",
            vec![p.d, p.pooled_dim()],
            p.projection.clone(),
        )?;
        f.push("bias", vec![p.d], p.bias.clone())?;
        Ok(f)
    }

    pub fn from_tensor_file(f: &TensorFile) -> Result<Self> {
        let meta = &f.meta;
        let dim = |k: &str| {
            meta.get(k)
                .and_then(|v| v.as_u64())
                .map(|v| v as usize)
                .ok_or_else(|| Error::Checkpoint(format!("missing {k}")))
        };
        let (d_e, d) = (dim("d_e")?, dim("d")?);
        let vocab: Vec<String> = serde_json::from_value(
            meta.get("vocab")
                .cloned()
                .ok_or_else(|| Error::Checkpoint("missing vocab".into()))?,
        )?;
        let vocab = Vocab::from_list(vocab)?;
        let take = |name: &str, shape: Vec<usize>| -> Result<Vec<f64>> {
            let t = f.get(name)?;
            if t.shape != shape {
                return Err(Error::Checkpoint(format!(
                    "{name}: expected shape {shape:?}, found {:?}",
                    t.shape
                )));
            }
            Ok(t.data.clone())
        };
        let params = EncoderParams {
            d_e,
            d,
            embeddings: take("token_embeddings", vec![vocab.len(), d_e])?,
            projection: take("projection", vec![d, 3 * d_e])?,
            bias: take("bias", vec![d])?,
        };
        if !params.is_finite() {
            return Err(Error::Checkpoint("non-finite parameters".into()));
        }
        Ok(Encoder { vocab, params })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_tensor_file()?.write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_tensor_file(&TensorFile::read(path)?)
    }
}

/// Index of an encoder output recorded in a [`Trace`].
pub type NodeId = usize;

/// Records forward passes so a loss can hand back ∂L/∂output per node.
pub struct Trace<'a> {
    encoder: &'a Encoder,
    nodes: Vec<(EncoderInput, Vec<f64>)>,
}

impl<'a> Trace<'a> {
    pub fn new(encoder: &'a Encoder) -> Self {
        Trace {
            encoder,
            nodes: Vec::new(),
        }
    }

    pub fn encoder(&self) -> &Encoder {
        self.encoder
    }

    pub fn encode(&mut self, input: EncoderInput) -> (NodeId, Vec<f64>) {
        let pooled = self.encoder.pool(&input);
        let out = self.encoder.project(&pooled);
        self.nodes.push((input, pooled));
        (self.nodes.len() - 1, out)
    }

    /// Encodes a batch (fanned out per `exec`); node ids are assigned in order.
    pub fn encode_batch(
        &mut self,
        inputs: Vec<EncoderInput>,
        exec: Exec,
    ) -> Vec<(NodeId, Vec<f64>)> {
        let enc = self.encoder;
        let pooled = exec.map(&inputs, |inp| {
            let p = enc.pool(inp);
            let out = enc.project(&p);
            (p, out)
        });
        inputs
            .into_iter()
            .zip(pooled)
            .map(|(inp, (p, out))| {
                self.nodes.push((inp, p));
                (self.nodes.len() - 1, out)
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Scalar loss plus ∂L/∂output for each traced node that influences it.
#[derive(Debug, Clone, Default)]
pub struct LossValue {
    pub value: f64,
    pub output_grads: Vec<(NodeId, Vec<f64>)>,
}

/// Runs `loss` against a fresh trace and backpropagates its output gradients
/// into parameter gradients.
pub fn gradient<F>(encoder: &Encoder, loss: F) -> Result<(f64, Gradients)>
where
    F: FnOnce(&mut Trace<'_>) -> Result<LossValue>,
{
    let mut trace = Trace::new(encoder);
    let lv = loss(&mut trace)?;
    if !lv.value.is_finite() {
        return Err(Error::NonFinite {
            value: lv.value,
            context: "encoder gradient".into(),
        });
    }
    let mut grads = Gradients::zeros(&encoder.params);
    for (node, d_out) in &lv.output_grads {
        let (input, pooled) = &trace.nodes[*node];
        encoder.backward(input, pooled, d_out, &mut grads);
    }
    Ok((lv.value, grads))
}
