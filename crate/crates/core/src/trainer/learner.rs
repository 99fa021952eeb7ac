use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{Method, RunConfig};
use crate::augmentation::{augment_task, AugmentStats, CorpusVectors, SimilarityModel};
use crate::benchmark::{cumulative_test_set, Corpus, Sample, Task, TaskSequence};
use crate::encoder::{gradient, Encoder, LossValue, NodeId};
use crate::error::{Error, Result};
use crate::memory::{
    generate_hard_negatives, refresh_relation_embeddings, select_exemplar, MemoryStore,
    RelationTable,
};
use crate::objectives::{
    loss_con_grad, loss_new_grad, similarity, LossBreakdown, LossWeights, MemoryItem, Metric,
    ScoredBatch,
};
use crate::par::Exec;

/// Everything augmentation needs: the unlabeled corpus, the similarity model
/// and its precomputed corpus vectors.
#[derive(Clone, Copy)]
pub struct AugmentContext<'a> {
    pub corpus: &'a Corpus,
    pub model: &'a SimilarityModel,
    pub vectors: &'a CorpusVectors,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AugmentSummary {
    pub added: usize,
    pub duplicates_collapsed: usize,
    pub conflicts_resolved: usize,
    pub search_queries: usize,
}

impl From<&AugmentStats> for AugmentSummary {
    fn from(s: &AugmentStats) -> Self {
        AugmentSummary {
            added: s.added,
            duplicates_collapsed: s.duplicates_collapsed,
            conflicts_resolved: s.conflicts_resolved,
            search_queries: s.queries.iter().filter(|q| q.used_search).count(),
        }
    }
}

/// Bookkeeping for one processed task.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StepLog {
    pub step: usize,
    pub new_relations: usize,
    pub train_original: usize,
    pub train_augmented: usize,
    pub augment: Option<AugmentSummary>,
    /// Mean batch loss per epoch of the new-task phase.
    pub new_task_losses: Vec<f64>,
    /// Mean batch loss per epoch of the rehearsal phase.
    pub rehearsal_losses: Vec<f64>,
    pub memory_size: usize,
    pub relation_count: usize,
}

/// Outcome of evaluating on the cumulative test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub step: usize,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    /// Accuracy restricted to each seen task's test split, in task order.
    pub per_task: Vec<f64>,
    /// (relation, sample id) of every evaluated sample, in evaluation order.
    pub evaluated: Vec<(String, usize)>,
}

/// Index of the highest score; the first one wins ties.
pub fn argmax_first(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i)
}

/// Nearest anchor by `metric`.
pub fn predict(embedding: &[f64], anchors: &[Vec<f64>], metric: Metric) -> Result<usize> {
    if anchors.is_empty() {
        return Err(Error::Empty("relation table"));
    }
    let scores = anchors
        .iter()
        .map(|r| similarity(embedding, r, metric))
        .collect::<Result<Vec<_>>>()?;
    Ok(argmax_first(&scores).expect("nonempty"))
}

/// Model state carried across the task sequence.
#[derive(Debug, Clone)]
pub struct Learner {
    config: RunConfig,
    encoder: Encoder,
    relations: RelationTable,
    memory: MemoryStore,
    /// Every original training sample seen so far (joint training only).
    history: Vec<Sample>,
    steps_done: usize,
    rng: ChaCha8Rng,
    exec: Exec,
}

impl Learner {
    pub fn new(config: RunConfig, encoder: Encoder, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Learner {
            config,
            encoder,
            relations: RelationTable::new(),
            memory: MemoryStore::new(),
            history: Vec::new(),
            steps_done: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            exec: Exec::default(),
        })
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn relations(&self) -> &RelationTable {
        &self.relations
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn steps_done(&self) -> usize {
        self.steps_done
    }

    pub fn train_initial_task(&mut self, task: &Task) -> Result<StepLog> {
        if task.index != 1 || self.steps_done != 0 {
            return Err(Error::Protocol(format!(
                "initial task must have index 1 on a fresh learner (got index {}, {} steps done)",
                task.index, self.steps_done
            )));
        }
        self.learn(task, None)
    }

    pub fn step_task(
        &mut self,
        task: &Task,
        augment: Option<AugmentContext<'_>>,
    ) -> Result<StepLog> {
        if task.index != self.steps_done + 1 || task.index < 2 {
            return Err(Error::Protocol(format!(
                "expected task {} next, got task {}",
                self.steps_done + 1,
                task.index
            )));
        }
        self.learn(task, augment)
    }

    /// Runs the first task through `train_initial_task` and later ones
    /// through `step_task`.
    pub fn process(&mut self, task: &Task, augment: Option<AugmentContext<'_>>) -> Result<StepLog> {
        if task.index == 1 {
            self.train_initial_task(task)
        } else {
            self.step_task(task, augment)
        }
    }

    fn learn(&mut self, task: &Task, augment: Option<AugmentContext<'_>>) -> Result<StepLog> {
        let method = self.config.method;
        let mut log = StepLog {
            step: task.index,
            new_relations: task.relations.len(),
            train_original: task.train.len(),
            ..Default::default()
        };

        let expanded = if method.uses_augmentation() && task.index > 1 {
            let ctx = augment.ok_or_else(|| {
                Error::Config(format!(
                    "method {method} needs an augmentation corpus and similarity model"
                ))
            })?;
            let aug = augment_task(
                task,
                ctx.corpus,
                ctx.model,
                ctx.vectors,
                &self.config.augment,
            )?;
            log.train_augmented = aug.train.len() - task.train.len();
            log.augment = Some(AugmentSummary::from(&aug.stats));
            aug.train
        } else {
            task.train.clone()
        };

        for rel in &task.relations {
            self.relations.add_from_id(rel, &self.encoder)?;
        }

        let new_weights = match method {
            Method::Replay => LossWeights::ce_only(),
            _ => self.config.weights,
        };
        let items: Vec<(&Sample, bool)> = expanded.iter().map(|s| (s, false)).collect();
        for _ in 0..self.config.iter1 * self.config.epochs_per_iter {
            let loss = self.epoch(&items, &new_weights)?;
            log.new_task_losses.push(loss);
        }

        if method.uses_memory() {
            for rel in &task.relations {
                let candidates: Vec<&Sample> =
                    task.train.iter().filter(|s| &s.relation == rel).collect();
                let exemplar = select_exemplar(&candidates, &self.encoder, self.config.metric)?;
                self.memory.insert(task.index, exemplar.clone())?;
            }
            if method == Method::Joint {
                self.history.extend(task.train.iter().cloned());
            }

            let history = std::mem::take(&mut self.history);
            let memory = self.memory.clone();
            let base: &[Sample] = if method == Method::Joint {
                &history
            } else {
                &expanded
            };
            let rehearsal = combine_with_memory(base, &memory);
            let mem_weights = match method {
                Method::Replay => LossWeights::ce_only(),
                _ => self.config.weights,
            };
            for _ in 0..self.config.iter2 {
                let mut total = 0.0;
                for _ in 0..self.config.epochs_per_iter {
                    total += self.epoch(&rehearsal, &mem_weights)?;
                }
                log.rehearsal_losses
                    .push(total / self.config.epochs_per_iter as f64);
                refresh_relation_embeddings(&mut self.relations, &self.memory, &self.encoder)?;
            }
            self.history = history;
        }

        self.steps_done = task.index;
        log.memory_size = self.memory.len();
        log.relation_count = self.relations.len();
        Ok(log)
    }

    /// One shuffled pass in mini-batches; returns the mean batch loss.
    fn epoch(&mut self, items: &[(&Sample, bool)], weights: &LossWeights) -> Result<f64> {
        if items.is_empty() {
            return Ok(0.0);
        }
        let mut order: Vec<usize> = (0..items.len()).collect();
        order.shuffle(&mut self.rng);
        let mut sum = 0.0;
        let mut n = 0;
        for chunk in order.chunks(self.config.batch_size) {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| items[i].0).collect();
            let memory_positions: Vec<usize> = chunk
                .iter()
                .enumerate()
                .filter(|(_, &i)| items[i].1)
                .map(|(p, _)| p)
                .collect();
            sum += self.batch_step(&batch, &memory_positions, weights)?.total;
            n += 1;
        }
        Ok(sum / n as f64)
    }

    fn batch_step(
        &mut self,
        batch: &[&Sample],
        memory_positions: &[usize],
        w: &LossWeights,
    ) -> Result<LossBreakdown> {
        let anchors = self.relations.embeddings();
        let targets = batch
            .iter()
            .map(|s| {
                self.relations.index_of(&s.relation).ok_or_else(|| {
                    Error::Protocol(format!(
                        "relation `{}` not in the relation table",
                        s.relation
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let negatives = if w.lambda_con > 0.0 && !memory_positions.is_empty() {
            generate_hard_negatives(
                batch,
                memory_positions,
                self.config.hard_negatives,
                &mut self.rng,
            )
        } else {
            Vec::new()
        };
        let inputs = batch
            .iter()
            .map(|s| self.encoder.tagged_input(&s.sentence))
            .collect::<Result<Vec<_>>>()?;
        let neg_inputs = negatives
            .iter()
            .flat_map(|(_, negs)| negs.iter())
            .map(|s| self.encoder.tagged_input(&s.sentence))
            .collect::<Result<Vec<_>>>()?;

        let (exec, metric, margins) = (self.exec, self.config.metric, self.config.margins);
        let mut breakdown = LossBreakdown::default();
        let (_, grads) = gradient(&self.encoder, |trace| {
            let nodes = trace.encode_batch(inputs, exec);
            let embeddings: Vec<Vec<f64>> = nodes.iter().map(|(_, e)| e.clone()).collect();
            let scored = ScoredBatch::new(&embeddings, &targets, &anchors, metric)?;
            let (mut bd, d_scores) = loss_new_grad(&scored, w, &margins);
            let d_emb = scored.embedding_grads(&d_scores)?;
            let mut output_grads: Vec<(NodeId, Vec<f64>)> =
                nodes.iter().map(|(id, _)| *id).zip(d_emb).collect();

            if !negatives.is_empty() {
                let neg_nodes = trace.encode_batch(neg_inputs, exec);
                let mut next = 0;
                let items: Vec<MemoryItem> = negatives
                    .iter()
                    .map(|(pos, negs)| {
                        let embs = neg_nodes[next..next + negs.len()]
                            .iter()
                            .map(|(_, e)| e.clone())
                            .collect();
                        next += negs.len();
                        MemoryItem {
                            embedding: embeddings[*pos].clone(),
                            target: targets[*pos],
                            negatives: embs,
                        }
                    })
                    .collect();
                let (con, cg) = loss_con_grad(&items, &anchors, margins.m3, metric)?;
                let mut neg_iter = neg_nodes.iter();
                for (((pos, _), d_anchor), d_negs) in
                    negatives.iter().zip(&cg.anchors).zip(&cg.negatives)
                {
                    for (g, d) in output_grads[*pos].1.iter_mut().zip(d_anchor) {
                        *g += w.lambda_con * d;
                    }
                    for d in d_negs {
                        let (id, _) = neg_iter.next().expect("one node per negative");
                        output_grads.push((*id, d.iter().map(|x| w.lambda_con * x).collect()));
                    }
                }
                bd.con = con;
                bd.total += w.lambda_con * con;
            }
            breakdown = bd;
            Ok(LossValue {
                value: bd.total,
                output_grads,
            })
        })?;
        self.encoder.apply_sgd(
            &grads,
            self.config.learning_rate,
            self.config.encoder.train_embeddings,
        );
        if !self.encoder.params.is_finite() {
            return Err(Error::NonFinite {
                value: f64::NAN,
                context: format!(
                    "encoder parameters after update (step {})",
                    self.steps_done + 1
                ),
            });
        }
        Ok(breakdown)
    }

    pub fn infer(&self, sample: &Sample) -> Result<&str> {
        let emb = self.encoder.encode(&sample.sentence)?;
        let i = predict(&emb, &self.relations.embeddings(), self.config.metric)?;
        Ok(&self.relations.entries()[i].id)
    }

    /// Predicted relation index for each sample.
    pub fn infer_all(&self, samples: &[&Sample]) -> Result<Vec<usize>> {
        if self.relations.is_empty() {
            return Err(Error::Empty("relation table"));
        }
        let anchors = self.relations.embeddings();
        let metric = self.config.metric;
        let sentences: Vec<_> = samples.iter().map(|s| &s.sentence).collect();
        let embs = self.encoder.encode_all(&sentences, self.exec)?;
        self.exec.try_map(&embs, |e| predict(e, &anchors, metric))
    }

    pub fn evaluate(&self, seq: &TaskSequence, k: usize) -> Result<f64> {
        Ok(self.evaluate_detailed(seq, k)?.accuracy)
    }

    pub fn evaluate_detailed(&self, seq: &TaskSequence, k: usize) -> Result<Evaluation> {
        if k > self.steps_done {
            return Err(Error::Protocol(format!(
                "step {k} has not been trained yet"
            )));
        }
        let test = cumulative_test_set(seq, k)?;
        let predicted = self.infer_all(&test)?;
        let hits: Vec<bool> = test
            .iter()
            .zip(&predicted)
            .map(|(s, &p)| self.relations.entries()[p].id == s.relation)
            .collect();
        let mut per_task = Vec::with_capacity(k);
        let mut offset = 0;
        for task in &seq.tasks[..k] {
            let n = task.test.len();
            let c = hits[offset..offset + n].iter().filter(|h| **h).count();
            per_task.push(ratio(c, n));
            offset += n;
        }
        let correct = hits.iter().filter(|h| **h).count();
        Ok(Evaluation {
            step: k,
            correct,
            total: test.len(),
            accuracy: ratio(correct, test.len()),
            per_task,
            evaluated: test.iter().map(|s| (s.relation.clone(), s.id)).collect(),
        })
    }
}

fn ratio(c: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        c as f64 / n as f64
    }
}

/// Union of `base` and the memory exemplars. Items that are stored exemplars
/// are flagged; exemplars missing from `base` are appended.
fn combine_with_memory<'a>(base: &'a [Sample], memory: &'a MemoryStore) -> Vec<(&'a Sample, bool)> {
    let stored: HashSet<(&str, usize)> = memory
        .samples()
        .map(|s| (s.relation.as_str(), s.id))
        .collect();
    let mut present = HashSet::new();
    let mut out: Vec<(&Sample, bool)> = base
        .iter()
        .map(|s| {
            let key = (s.relation.as_str(), s.id);
            let is_mem = !s.is_augmented() && stored.contains(&key);
            if is_mem {
                present.insert(key);
            }
            (s, is_mem)
        })
        .collect();
    for s in memory.samples() {
        if !present.contains(&(s.relation.as_str(), s.id)) {
            out.push((s, true));
        }
    }
    out
}
