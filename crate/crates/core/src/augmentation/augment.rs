use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::model::{logistic, SimilarityModel};
use super::search::{top_k, CorpusVectors};
use crate::benchmark::{Corpus, Sample, Source, Task};
use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchedBy {
    Entity,
    Search,
}

/// A corpus record selected for a query sample. `score` is the pair score
/// (logistic of the representation dot product).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Augmented {
    pub corpus_index: usize,
    pub relation: String,
    pub score: f64,
    pub matched_by: MatchedBy,
    pub query_id: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentationResult {
    pub items: Vec<Augmented>,
}

impl AugmentationResult {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Corpus records with exactly the sample's ordered (head, tail) surface forms.
pub fn entity_match(corpus: &Corpus, sample: &Sample) -> Vec<usize> {
    corpus
        .lookup(&sample.sentence.head_text(), &sample.sentence.tail_text())
        .to_vec()
}

/// Keeps candidates whose pair score with the sample exceeds `alpha`, labeled with the
/// sample's relation.
pub fn filter_by_threshold(
    model: &SimilarityModel,
    sample: &Sample,
    corpus: &Corpus,
    candidates: &[usize],
    alpha: f64,
) -> Result<AugmentationResult> {
    let q = model.represent(&sample.sentence)?;
    let mut items = Vec::new();
    for &c in candidates {
        let z = model.represent(corpus.get(c))?;
        let score = logistic(q.iter().zip(&z).map(|(a, b)| a * b).sum());
        if score > alpha {
            items.push(Augmented {
                corpus_index: c,
                relation: sample.relation.clone(),
                score,
                matched_by: MatchedBy::Entity,
                query_id: sample.id,
            });
        }
    }
    Ok(AugmentationResult { items })
}

/// Exact top-`k` corpus records for the sample's representation, labeled with
/// its relation. No threshold applies on this path.
pub fn similarity_search_topk(
    model: &SimilarityModel,
    sample: &Sample,
    vectors: &CorpusVectors,
    k: usize,
) -> Result<AugmentationResult> {
    let q = model.represent(&sample.sentence)?;
    if !vectors.is_empty() && vectors.dim() != q.len() {
        return Err(Error::Dimension {
            expected: q.len(),
            actual: vectors.dim(),
        });
    }
    let items = top_k(&q, vectors, k, Exec::Sequential)
        .into_iter()
        .map(|h| Augmented {
            corpus_index: h.index,
            relation: sample.relation.clone(),
            score: logistic(h.score),
            matched_by: MatchedBy::Search,
            query_id: sample.id,
        })
        .collect();
    Ok(AugmentationResult { items })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub alpha: f64,
    pub k: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { alpha: 0.65, k: 1 }
    }
}

/// What happened for one query sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub sample_id: usize,
    /// |Q| from entity matching.
    pub entity_candidates: usize,
    pub used_search: bool,
    pub selected: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub queries: Vec<QueryOutcome>,
    pub added: usize,
    pub duplicates_collapsed: usize,
    pub conflicts_resolved: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTask {
    /// Original training samples followed by augmented ones (by corpus index).
    pub train: Vec<Sample>,
    pub selected: Vec<Augmented>,
    pub stats: AugmentStats,
}

/// Expands a few-shot task's training set. Each query uses entity matching
/// plus thresholding, or top-K search when entity matching finds nothing.
/// A record picked by several queries is kept once, under the label of its
/// highest-scoring selection.
pub fn augment_task(
    task: &Task,
    corpus: &Corpus,
    model: &SimilarityModel,
    vectors: &CorpusVectors,
    cfg: &AugmentConfig,
) -> Result<AugmentedTask> {
    if task.index <= 1 {
        return Err(Error::Protocol(
            "augmentation applies only to few-shot tasks (index > 1)".into(),
        ));
    }
    if corpus.is_empty() {
        return Ok(AugmentedTask {
            train: task.train.clone(),
            selected: Vec::new(),
            stats: AugmentStats {
                queries: task
                    .train
                    .iter()
                    .map(|s| QueryOutcome {
                        sample_id: s.id,
                        entity_candidates: 0,
                        used_search: false,
                        selected: 0,
                    })
                    .collect(),
                ..Default::default()
            },
        });
    }
    let per_query = Exec::default().try_map(
        &task.train,
        |s| -> Result<(QueryOutcome, AugmentationResult)> {
            let q = entity_match(corpus, s);
            let (res, used_search) = if q.is_empty() {
                (similarity_search_topk(model, s, vectors, cfg.k)?, true)
            } else {
                (filter_by_threshold(model, s, corpus, &q, cfg.alpha)?, false)
            };
            Ok((
                QueryOutcome {
                    sample_id: s.id,
                    entity_candidates: q.len(),
                    used_search,
                    selected: res.len(),
                },
                res,
            ))
        },
    )?;

    let mut stats = AugmentStats::default();
    let mut best: BTreeMap<usize, Augmented> = BTreeMap::new();
    for (outcome, res) in per_query {
        stats.queries.push(outcome);
        for item in res.items {
            match best.get_mut(&item.corpus_index) {
                None => {
                    best.insert(item.corpus_index, item);
                }
                Some(prev) => {
                    if prev.relation == item.relation {
                        stats.duplicates_collapsed += 1;
                    } else {
                        stats.conflicts_resolved += 1;
                    }
                    if item.score > prev.score {
                        *prev = item;
                    }
                }
            }
        }
    }
    let selected: Vec<Augmented> = best.into_values().collect();
    stats.added = selected.len();
    let mut train = task.train.clone();
    train.extend(selected.iter().map(|a| Sample {
        id: a.corpus_index,
        sentence: corpus.get(a.corpus_index).clone(),
        relation: a.relation.clone(),
        source: Source::Augmented,
    }));
    Ok(AugmentedTask {
        train,
        selected,
        stats,
    })
}
