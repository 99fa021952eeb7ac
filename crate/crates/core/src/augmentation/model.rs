use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pairs::{build_pair_batches, PairBatch};
use crate::benchmark::{Corpus, TaggedSentence};
use crate::checkpoint::TensorFile;
use crate::encoder::{gradient, Encoder, EncoderInput, LossValue, NodeId};
use crate::error::{Error, Result};
use crate::par::Exec;

/// Sentence encoder whose outputs are L2-normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityModel {
    pub encoder: Encoder,
}

impl SimilarityModel {
    pub fn new(encoder: Encoder) -> Self {
        SimilarityModel { encoder }
    }

    pub fn dim(&self) -> usize {
        self.encoder.dim()
    }

    /// Unit-norm sentence representation.
    pub fn represent(&self, s: &TaggedSentence) -> Result<Vec<f64>> {
        normalize(self.encoder.encode(s)?)
    }

    pub fn represent_all(
        &self,
        sentences: &[&TaggedSentence],
        exec: Exec,
    ) -> Result<Vec<Vec<f64>>> {
        exec.try_map(sentences, |s| self.represent(s))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_tensor_file()?.write(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(SimilarityModel::new(Encoder::from_tensor_file(
            &TensorFile::read(path)?,
        )?))
    }

    pub fn to_tensor_file(&self) -> Result<TensorFile> {
        let mut f = self.encoder.to_tensor_file()?;
        f.meta["kind"] = "similarity".into();
        Ok(f)
    }

    /// Hash of the serialized checkpoint; keys the corpus-vector cache.
    pub fn content_hash(&self) -> Result<String> {
        self.to_tensor_file()?.content_hash()
    }
}

fn normalize(y: Vec<f64>) -> Result<Vec<f64>> {
    let n = y.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(y.into_iter().map(|x| x / n).collect())
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Pair score: logistic of the dot product of the two representations.
pub fn sigma(model: &SimilarityModel, a: &TaggedSentence, b: &TaggedSentence) -> Result<f64> {
    let (za, zb) = (model.represent(a)?, model.represent(b)?);
    Ok(logistic(za.iter().zip(&zb).map(|(x, y)| x * y).sum()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub train_embeddings: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            steps: 300,
            lr: 0.05,
            batch_size: 16,
            seed: 0,
            train_embeddings: true,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PretrainReport {
    /// Summed pair loss per step.
    pub losses: Vec<f64>,
}

/// Binary cross-entropy of pair scores, summed over one batch.
pub fn pretrain_loss(model: &SimilarityModel, corpus: &Corpus, batch: &PairBatch) -> Result<f64> {
    let mut total = 0.0;
    for (pairs, positive) in [(&batch.positives, true), (&batch.negatives, false)] {
        for &(i, j) in pairs {
            let s = sigma(model, corpus.get(i), corpus.get(j))?;
            total -= if positive { s.ln() } else { (1.0 - s).ln() };
        }
    }
    Ok(total)
}

/// Per-node backward through y ↦ y/‖y‖.
fn normalize_backward(y: &[f64], z: &[f64], dz: &[f64]) -> Vec<f64> {
    let n = y.iter().map(|x| x * x).sum::<f64>().sqrt();
    let zdz: f64 = z.iter().zip(dz).map(|(a, b)| a * b).sum();
    dz.iter().zip(z).map(|(g, zi)| (g - zi * zdz) / n).collect()
}

fn batch_loss_value(
    trace: &mut crate::encoder::Trace<'_>,
    corpus: &Corpus,
    batch: &PairBatch,
) -> Result<LossValue> {
    let enc = trace.encoder();
    let mut slots: Vec<usize> = batch
        .positives
        .iter()
        .chain(&batch.negatives)
        .flat_map(|&(i, j)| [i, j])
        .collect();
    slots.sort_unstable();
    slots.dedup();
    let inputs: Vec<EncoderInput> = slots
        .iter()
        .map(|&i| enc.tagged_input(corpus.get(i)))
        .collect::<Result<_>>()?;
    let nodes = trace.encode_batch(inputs, Exec::default());
    let mut ys: Vec<(NodeId, Vec<f64>, Vec<f64>)> = Vec::with_capacity(nodes.len());
    for (id, y) in nodes {
        let z = normalize(y.clone())?;
        ys.push((id, y, z));
    }
    let pos = |i: usize| slots.binary_search(&i).unwrap();
    let mut dz: Vec<Vec<f64>> = ys.iter().map(|(_, y, _)| vec![0.0; y.len()]).collect();
    let mut value = 0.0;
    for (pairs, positive) in [(&batch.positives, true), (&batch.negatives, false)] {
        for &(i, j) in pairs {
            let (a, b) = (pos(i), pos(j));
            let dot: f64 = ys[a].2.iter().zip(&ys[b].2).map(|(x, y)| x * y).sum();
            let s = logistic(dot);
            let (l, dl_ddot) = if positive {
                (-s.ln(), -(1.0 - s))
            } else {
                (-(1.0 - s).ln(), s)
            };
            value += l;
            for k in 0..dz[a].len() {
                let (za, zb) = (ys[a].2[k], ys[b].2[k]);
                dz[a][k] += dl_ddot * zb;
                dz[b][k] += dl_ddot * za;
            }
        }
    }
    let output_grads = ys
        .iter()
        .zip(&dz)
        .map(|((id, y, z), g)| (*id, normalize_backward(y, z, g)))
        .collect();
    Ok(LossValue {
        value,
        output_grads,
    })
}

/// Gradient descent on the pair loss, one batch per step. Stops early when the
/// batch stream runs dry.
pub fn pretrain_similarity<I>(
    model: &mut SimilarityModel,
    corpus: &Corpus,
    batches: I,
    steps: usize,
    lr: f64,
    train_embeddings: bool,
) -> Result<PretrainReport>
where
    I: IntoIterator<Item = PairBatch>,
{
    let mut report = PretrainReport::default();
    for (step, batch) in batches.into_iter().take(steps).enumerate() {
        let (value, grads) = gradient(&model.encoder, |t| batch_loss_value(t, corpus, &batch))
            .map_err(|e| match e {
                Error::NonFinite { value, .. } => Error::NonFinite {
                    value,
                    context: format!(
                        "similarity pretraining step {step} ({} positive, {} negative pairs)",
                        batch.positives.len(),
                        batch.negatives.len()
                    ),
                },
                other => other,
            })?;
        model.encoder.apply_sgd(&grads, lr, train_embeddings);
        if !model.encoder.params.is_finite() {
            return Err(Error::NonFinite {
                value: f64::NAN,
                context: format!("similarity parameters diverged at step {step} (loss {value})"),
            });
        }
        report.losses.push(value);
    }
    Ok(report)
}

/// Pretrains with batches drawn by a sampler seeded from `cfg.seed`.
pub fn pretrain(
    model: &mut SimilarityModel,
    corpus: &Corpus,
    cfg: &PretrainConfig,
) -> Result<PretrainReport> {
    let batches = build_pair_batches(corpus, cfg.batch_size, ChaCha8Rng::seed_from_u64(cfg.seed));
    pretrain_similarity(
        model,
        corpus,
        batches,
        cfg.steps,
        cfg.lr,
        cfg.train_embeddings,
    )
}
