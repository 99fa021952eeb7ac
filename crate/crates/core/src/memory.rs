//! Episodic memory: exemplar selection, storage, relation-embedding refresh
//! and hard-negative generation.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::benchmark::{relation_name_tokens, Entity, LineRecord, Sample};
use crate::encoder::Encoder;
use crate::error::{Error, Result};
use crate::objectives::{similarity, Metric};
use crate::par::Exec;

/// One exemplar per seen relation, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MemoryStore {
    entries: IndexMap<String, (usize, Sample)>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `sample` as the exemplar of its relation, written at task `step`.
    pub fn insert(&mut self, step: usize, sample: Sample) -> Result<()> {
        if sample.is_augmented() {
            return Err(Error::Protocol(format!(
                "augmented sample {} cannot enter memory",
                sample.id
            )));
        }
        if self.entries.contains_key(&sample.relation) {
            return Err(Error::Protocol(format!(
                "relation {:?} already has an exemplar",
                sample.relation
            )));
        }
        self.entries.insert(sample.relation.clone(), (step, sample));
        Ok(())
    }

    pub fn get(&self, relation: &str) -> Option<&Sample> {
        self.entries.get(relation).map(|(_, s)| s)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &Sample> {
        self.entries.values().map(|(_, s)| s)
    }

    /// `(step, exemplar)` pairs in insertion order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, &Sample)> {
        self.entries.values().map(|(k, s)| (*k, s))
    }

    /// Exemplars written at `step`.
    pub fn written_at(&self, step: usize) -> impl Iterator<Item = &Sample> {
        self.entries
            .values()
            .filter(move |(k, _)| *k == step)
            .map(|(_, s)| s)
    }

    /// Writes one line per exemplar: relation, write step and the record.
    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for (step, s) in self.entries() {
            let rec = MemoryRecord {
                step,
                id: s.id,
                record: LineRecord::from_sentence(&s.sentence, Some(&s.relation)),
            };
            out.push_str(&serde_json::to_string(&rec)?);
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut store = MemoryStore::new();
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let rec: MemoryRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            let sentence = rec.record.sentence().ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "missing head or tail".into(),
            })??;
            let relation = rec.record.relation.clone().ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "missing relation".into(),
            })?;
            store.insert(rec.step, Sample::new(rec.id, sentence, relation))?;
        }
        Ok(store)
    }
}

#[derive(Serialize, Deserialize)]
struct MemoryRecord {
    step: usize,
    id: usize,
    #[serde(flatten)]
    record: LineRecord,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelationEntry {
    pub id: String,
    pub name: Vec<String>,
    pub embedding: Vec<f64>,
}

/// Relation anchors in the order relations became known.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationTable {
    entries: Vec<RelationEntry>,
    index: HashMap<String, usize>,
}

impl RelationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a relation with its name-only embedding. Returns its index.
    pub fn add(&mut self, id: &str, name: Vec<String>, encoder: &Encoder) -> Result<usize> {
        if let Some(&i) = self.index.get(id) {
            return Ok(i);
        }
        let name = if name.is_empty() {
            vec![id.to_string()]
        } else {
            name
        };
        let embedding = encoder.encode_relation_name(&name)?;
        self.entries.push(RelationEntry {
            id: id.to_string(),
            name,
            embedding,
        });
        self.index.insert(id.to_string(), self.entries.len() - 1);
        Ok(self.entries.len() - 1)
    }

    /// Adds a relation with name tokens derived from its identifier.
    pub fn add_from_id(&mut self, id: &str, encoder: &Encoder) -> Result<usize> {
        self.add(id, relation_name_tokens(id), encoder)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RelationEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn embeddings(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.embedding.clone()).collect()
    }

    pub fn set_embedding(&mut self, i: usize, embedding: Vec<f64>) {
        self.entries[i].embedding = embedding;
    }
}

/// Mean embedding of `samples`.
pub fn centroid(samples: &[&Sample], encoder: &Encoder) -> Result<Vec<f64>> {
    let embs = encode_samples(samples, encoder, Exec::default())?;
    mean_vector(&embs).ok_or(Error::Empty("centroid samples"))
}

fn encode_samples(samples: &[&Sample], encoder: &Encoder, exec: Exec) -> Result<Vec<Vec<f64>>> {
    let sentences: Vec<_> = samples.iter().map(|s| &s.sentence).collect();
    encoder.encode_all(&sentences, exec)
}

fn mean_vector(vs: &[Vec<f64>]) -> Option<Vec<f64>> {
    let first = vs.first()?;
    let mut acc = vec![0.0; first.len()];
    for v in vs {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    let n = vs.len() as f64;
    Some(acc.into_iter().map(|a| a / n).collect())
}

/// Distance matching the metric's geometry: `1 − cos` or Euclidean distance.
/// `None` when cosine is undefined.
pub fn distance(u: &[f64], v: &[f64], metric: Metric) -> Option<f64> {
    match metric {
        Metric::Cosine => similarity(u, v, metric).ok().map(|c| 1.0 - c),
        Metric::NegL2 => similarity(u, v, metric).ok().map(|g| -g),
    }
}

/// Index of the embedding closest to the centroid of `embeddings`; ties go to
/// the lowest index.
pub fn closest_to_centroid(embeddings: &[Vec<f64>], metric: Metric) -> Result<usize> {
    let c = mean_vector(embeddings).ok_or(Error::Empty("exemplar candidates"))?;
    let mut best = (0, f64::INFINITY);
    for (i, e) in embeddings.iter().enumerate() {
        if let Some(d) = distance(e, &c, metric) {
            if d < best.1 {
                best = (i, d);
            }
        }
    }
    Ok(best.0)
}

/// The sample whose embedding is nearest its relation's centroid. Candidates
/// must be original training samples.
pub fn select_exemplar<'a>(
    samples: &[&'a Sample],
    encoder: &Encoder,
    metric: Metric,
) -> Result<&'a Sample> {
    if samples.is_empty() {
        return Err(Error::Empty("exemplar candidates"));
    }
    if let Some(s) = samples.iter().find(|s| s.is_augmented()) {
        return Err(Error::Protocol(format!(
            "augmented sample {} offered for memory selection",
            s.id
        )));
    }
    let embs = encode_samples(samples, encoder, Exec::default())?;
    Ok(samples[closest_to_centroid(&embs, metric)?])
}

/// Sets each anchor to mean(encode(name), encode(exemplar)) when the relation has an exemplar;
/// relations without one get their name-only embedding.
pub fn refresh_relation_embeddings(
    table: &mut RelationTable,
    store: &MemoryStore,
    encoder: &Encoder,
) -> Result<()> {
    let updates = Exec::default().try_map(table.entries(), |e| -> Result<Vec<f64>> {
        let name = encoder.encode_relation_name(&e.name)?;
        Ok(match store.get(&e.id) {
            Some(x) => {
                let v = encoder.encode(&x.sentence)?;
                name.iter().zip(&v).map(|(a, b)| (a + b) / 2.0).collect()
            }
            None => name,
        })
    })?;
    for (i, v) in updates.into_iter().enumerate() {
        table.set_embedding(i, v);
    }
    Ok(())
}

/// Corrupted copies of a memory sample.
pub type HardNegativeSet = Vec<Sample>;

/// For each batch position in `memory_positions`, draws `n_neg` partners
/// uniformly from the other batch members and swaps in the partner's head or
/// tail entity (fair coin per negative). Labels are preserved.
pub fn generate_hard_negatives<R: Rng + ?Sized>(
    batch: &[&Sample],
    memory_positions: &[usize],
    n_neg: usize,
    rng: &mut R,
) -> Vec<(usize, HardNegativeSet)> {
    memory_positions
        .iter()
        .map(|&pos| {
            let anchor = batch[pos];
            let mut negs = Vec::with_capacity(n_neg);
            if batch.len() > 1 {
                for _ in 0..n_neg {
                    let mut j = rng.random_range(0..batch.len() - 1);
                    if j >= pos {
                        j += 1;
                    }
                    let partner = &batch[j].sentence;
                    let (entity, tokens) = if rng.random_bool(0.5) {
                        (Entity::Head, partner.head_tokens())
                    } else {
                        (Entity::Tail, partner.tail_tokens())
                    };
                    let mut neg = anchor.clone();
                    neg.sentence = anchor.sentence.replace_entity(entity, tokens);
                    negs.push(neg);
                }
            }
            (pos, negs)
        })
        .collect()
}
