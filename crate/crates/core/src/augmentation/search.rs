use std::cmp::Ordering;
use std::path::Path;

use serde_json::json;

use super::model::SimilarityModel;
use crate::benchmark::Corpus;
use crate::checkpoint::TensorFile;
use crate::error::{Error, Result};
use crate::par::Exec;

/// Precomputed unit-norm representations of every corpus record.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusVectors {
    dim: usize,
    data: Vec<f64>,
    corpus_hash: String,
    model_hash: String,
}

impl CorpusVectors {
    pub fn compute(model: &SimilarityModel, corpus: &Corpus, exec: Exec) -> Result<Self> {
        let sentences: Vec<_> = corpus.records().iter().collect();
        let vs = model.represent_all(&sentences, exec)?;
        let mut cv = Self::from_vectors(model.dim(), vs)?;
        cv.corpus_hash = corpus.content_hash();
        cv.model_hash = model.content_hash()?;
        Ok(cv)
    }

    pub fn from_vectors(dim: usize, vectors: Vec<Vec<f64>>) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * vectors.len());
        for v in vectors {
            if v.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: v.len(),
                });
            }
            data.extend(v);
        }
        Ok(CorpusVectors {
            dim,
            data,
            corpus_hash: String::new(),
            model_hash: String::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = TensorFile::new(json!({
            "kind": "corpus_vectors",
            "corpus_hash": self.corpus_hash,
            "model_hash": self.model_hash,
        }));
        f.push("vectors", vec![self.len(), self.dim], self.data.clone())?;
        f.write(path)
    }

    /// Loads a cache file if it was produced for this corpus and model.
    pub fn load_cached(
        path: impl AsRef<Path>,
        corpus: &Corpus,
        model: &SimilarityModel,
    ) -> Result<Option<Self>> {
        let path = path.as_ref();
        if !path.exists() {
            return Ok(None);
        }
        let f = TensorFile::read(path)?;
        let key = |k: &str| {
            f.meta
                .get(k)
                .and_then(|v| v.as_str())
                .unwrap_or("")
                .to_string()
        };
        let (ch, mh) = (key("corpus_hash"), key("model_hash"));
        if ch != corpus.content_hash() || mh != model.content_hash()? {
            return Ok(None);
        }
        let t = f.get("vectors")?;
        let dim = t.shape.get(1).copied().unwrap_or(0);
        Ok(Some(CorpusVectors {
            dim,
            data: t.data.clone(),
            corpus_hash: ch,
            model_hash: mh,
        }))
    }

    /// Returns cached vectors when valid, otherwise computes and writes them.
    pub fn load_or_compute(
        path: impl AsRef<Path>,
        corpus: &Corpus,
        model: &SimilarityModel,
        exec: Exec,
    ) -> Result<Self> {
        if let Some(v) = Self::load_cached(&path, corpus, model)? {
            return Ok(v);
        }
        let v = Self::compute(model, corpus, exec)?;
        v.save(path)?;
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub index: usize,
    pub score: f64,
}

/// Higher score first; equal scores by ascending index.
fn rank(a: &Hit, b: &Hit) -> Ordering {
    b.score.total_cmp(&a.score).then(a.index.cmp(&b.index))
}

fn best_k(mut hits: Vec<Hit>, k: usize) -> Vec<Hit> {
    if hits.len() > k {
        hits.select_nth_unstable_by(k - 1, rank);
        hits.truncate(k);
    }
    hits.sort_by(rank);
    hits
}

const CHUNK: usize = 4096;

/// Exact top-`k` corpus records by dot product with `query`. Returns every
/// record, sorted, when the corpus holds fewer than `k`.
pub fn top_k(query: &[f64], vectors: &CorpusVectors, k: usize, exec: Exec) -> Vec<Hit> {
    if k == 0 || vectors.is_empty() {
        return Vec::new();
    }
    let n = vectors.len();
    let n_chunks = n.div_ceil(CHUNK);
    let partial = exec.map_range(n_chunks, |c| {
        let hits = (c * CHUNK..((c + 1) * CHUNK).min(n))
            .map(|i| Hit {
                index: i,
                score: vectors.get(i).iter().zip(query).map(|(a, b)| a * b).sum(),
            })
            .collect();
        best_k(hits, k)
    });
    best_k(partial.into_iter().flatten().collect(), k)
}
