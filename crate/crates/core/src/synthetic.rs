//! Synthetic relation benchmark with Gaussian-cluster token semantics.
//!
//! Every relation owns a latent direction. Its trigger words and name words
//! are noisy copies of that direction in a pretrained word-vector table;
//! filler and entity words are isotropic noise. Sentences mix fillers, a few
//! triggers and two entity mentions. The corpus holds planted paraphrases of
//! labeled samples (same ordered entity pair, same relation), distractors
//! sharing exactly one entity, occasional same-pair sentences expressing a
//! different relation, and unrelated background sentences.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::benchmark::{Corpus, RelationGroups, Sample, Span, TaggedSentence};
use crate::encoder::WordVectors;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_relations: usize,
    pub samples_per_relation: usize,
    pub dim: usize,
    /// Relations are drawn around this many shared centers.
    pub n_clusters: usize,
    /// Spread of relation directions around their cluster center.
    pub relation_spread: f64,
    /// Distinct wordings per relation, each with its own trigger cluster.
    pub patterns_per_relation: usize,
    /// Spread of pattern directions around their relation direction.
    pub pattern_spread: f64,
    /// Trigger words per pattern.
    pub triggers_per_pattern: usize,
    pub triggers_per_sentence: usize,
    /// Noise of trigger word vectors around the relation direction.
    pub word_noise: f64,
    /// Noise of relation-name word vectors around the relation direction.
    pub name_noise: f64,
    /// Entity words cluster around one of this many type directions; each
    /// relation fixes a head type and a tail type.
    pub n_entity_types: usize,
    /// Noise of entity word vectors around their type direction.
    pub entity_noise: f64,
    pub n_fillers: usize,
    pub min_fillers: usize,
    pub max_fillers: usize,
    /// Share of labeled samples that get planted corpus paraphrases.
    pub paraphrase_fraction: f64,
    pub paraphrases_per_sample: usize,
    /// One-entity-shared distractors per paraphrased sample.
    pub distractors_per_sample: usize,
    /// Probability that a paraphrased sample also gets a same-pair sentence of
    /// another relation.
    pub same_pair_noise: f64,
    pub background_records: usize,
    /// Paraphrase groups written to a separate corpus never used for training.
    pub heldout_groups: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_relations: 40,
            samples_per_relation: 60,
            dim: 48,
            n_clusters: 8,
            relation_spread: 1.5,
            patterns_per_relation: 1,
            pattern_spread: 1.0,
            triggers_per_pattern: 30,
            triggers_per_sentence: 2,
            word_noise: 3.0,
            name_noise: 0.2,
            n_entity_types: 4,
            entity_noise: 0.1,
            n_fillers: 400,
            min_fillers: 5,
            max_fillers: 10,
            paraphrase_fraction: 1.0,
            paraphrases_per_sample: 2,
            distractors_per_sample: 1,
            same_pair_noise: 0.0,
            background_records: 500,
            heldout_groups: 200,
            seed: 0,
        }
    }
}

/// A corpus record planted as a paraphrase of a labeled sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Planted {
    pub sample_id: usize,
    pub relation: String,
    pub corpus_index: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticBenchmark {
    pub groups: RelationGroups,
    pub corpus: Corpus,
    /// Fresh entity pairs with two same-relation paraphrases and one
    /// one-entity-shared distractor each.
    pub heldout: Corpus,
    pub word_vectors: WordVectors,
    pub planted: Vec<Planted>,
    /// Generating relation of every corpus record, by corpus index.
    pub corpus_relations: Vec<String>,
}

struct Words {
    used: HashSet<String>,
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh", "tr", "kl",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

impl Words {
    /// An unused pseudo-word. Lengthens after repeated collisions so the
    /// namespace never runs out.
    fn fresh<R: Rng>(&mut self, rng: &mut R, syllables: usize, prefix: &str) -> String {
        let mut attempts = 0usize;
        loop {
            let mut w = prefix.to_string();
            for _ in 0..syllables + attempts / 64 {
                w.push_str(ONSETS.choose(rng).unwrap());
                w.push_str(VOWELS.choose(rng).unwrap());
            }
            if self.used.insert(w.clone()) {
                return w;
            }
            attempts += 1;
        }
    }
}

fn gaussian<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng) / (dim as f64).sqrt())
        .collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

struct RelationSpec {
    id: String,
    /// Trigger words of each pattern.
    patterns: Vec<Vec<String>>,
    head_type: usize,
    tail_type: usize,
}

struct Generator<'a> {
    cfg: &'a SyntheticConfig,
    rng: ChaCha8Rng,
    words: Words,
    wv: WordVectors,
    fillers: Vec<String>,
    entity_types: Vec<Vec<f64>>,
    relations: Vec<RelationSpec>,
}

impl Generator<'_> {
    fn entity(&mut self, ty: usize) -> Vec<String> {
        let n = if self.rng.random_bool(0.3) { 2 } else { 1 };
        (0..n)
            .map(|_| {
                let w = self.words.fresh(&mut self.rng, 2, "E");
                let noise = gaussian(&mut self.rng, self.cfg.dim, self.cfg.entity_noise);
                let v = add(&self.entity_types[ty], &noise);
                self.wv.insert(w.clone(), v).unwrap();
                w
            })
            .collect()
    }

    fn sentence(&mut self, rel: usize, head: &[String], tail: &[String]) -> TaggedSentence {
        enum Item {
            Word(String),
            Head,
            Tail,
        }
        let n_fill = self
            .rng
            .random_range(self.cfg.min_fillers..=self.cfg.max_fillers);
        let mut items: Vec<Item> = (0..n_fill)
            .map(|_| Item::Word(self.fillers.choose(&mut self.rng).unwrap().clone()))
            .collect();
        let pattern = self.rng.random_range(0..self.relations[rel].patterns.len());
        for _ in 0..self.cfg.triggers_per_sentence {
            let w = self.relations[rel].patterns[pattern]
                .choose(&mut self.rng)
                .unwrap()
                .clone();
            items.push(Item::Word(w));
        }
        items.push(Item::Head);
        items.push(Item::Tail);
        items.shuffle(&mut self.rng);
        let mut tokens = Vec::new();
        let (mut h, mut t) = (Span::new(0, 0), Span::new(0, 0));
        for item in items {
            match item {
                Item::Word(w) => tokens.push(w),
                Item::Head => {
                    h = Span::new(tokens.len(), tokens.len() + head.len() - 1);
                    tokens.extend_from_slice(head);
                }
                Item::Tail => {
                    t = Span::new(tokens.len(), tokens.len() + tail.len() - 1);
                    tokens.extend_from_slice(tail);
                }
            }
        }
        TaggedSentence::new(tokens, h, t).expect("generated spans are valid")
    }

    fn other_relation(&mut self, rel: usize) -> usize {
        let n = self.relations.len();
        (rel + self.rng.random_range(1..n)) % n
    }

    fn pair(&mut self, rel: usize) -> (Vec<String>, Vec<String>) {
        let (h, t) = (self.relations[rel].head_type, self.relations[rel].tail_type);
        (self.entity(h), self.entity(t))
    }

    /// Sentence of relation `other` sharing exactly one entity with (head, tail).
    fn distractor(
        &mut self,
        rel: usize,
        head: &[String],
        tail: &[String],
    ) -> (TaggedSentence, usize) {
        let other = self.other_relation(rel);
        let s = if self.rng.random_bool(0.5) {
            let fresh = self.entity(self.relations[other].tail_type);
            self.sentence(other, head, &fresh)
        } else {
            let fresh = self.entity(self.relations[other].head_type);
            self.sentence(other, &fresh, tail)
        };
        (s, other)
    }
}

pub fn generate(cfg: &SyntheticConfig) -> SyntheticBenchmark {
    assert!(
        cfg.n_relations >= 2
            && cfg.n_clusters >= 1
            && cfg.patterns_per_relation >= 1
            && cfg.triggers_per_pattern >= 1
            && cfg.n_entity_types >= 1
    );
    let mut g = Generator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        words: Words {
            used: HashSet::new(),
        },
        wv: WordVectors::new(cfg.dim),
        fillers: Vec::new(),
        entity_types: Vec::new(),
        relations: Vec::new(),
    };
    let dim = cfg.dim;

    for _ in 0..cfg.n_fillers {
        let w = g.words.fresh(&mut g.rng, 2, "");
        let v = gaussian(&mut g.rng, dim, 1.0);
        g.wv.insert(w.clone(), v).unwrap();
        g.fillers.push(w);
    }

    g.entity_types = (0..cfg.n_entity_types)
        .map(|_| unit(gaussian(&mut g.rng, dim, 1.0)))
        .collect();
    let centers: Vec<Vec<f64>> = (0..cfg.n_clusters)
        .map(|_| unit(gaussian(&mut g.rng, dim, 1.0)))
        .collect();
    for r in 0..cfg.n_relations {
        let spread = gaussian(&mut g.rng, dim, cfg.relation_spread);
        let dir = unit(add(&centers[r % cfg.n_clusters], &spread));
        let noisy = |g: &mut Generator, word: String, center: &[f64], scale: f64| {
            let noise = gaussian(&mut g.rng, dim, scale);
            g.wv.insert(word.clone(), add(center, &noise)).unwrap();
            word
        };
        let name: Vec<String> = (0..2)
            .map(|_| {
                let w = g.words.fresh(&mut g.rng, 3, "");
                noisy(&mut g, w, &dir, cfg.name_noise)
            })
            .collect();
        let mut patterns = Vec::with_capacity(cfg.patterns_per_relation);
        for _ in 0..cfg.patterns_per_relation {
            let center = if cfg.patterns_per_relation == 1 {
                dir.clone()
            } else {
                unit(add(&dir, &gaussian(&mut g.rng, dim, cfg.pattern_spread)))
            };
            let words = (0..cfg.triggers_per_pattern)
                .map(|_| {
                    let w = g.words.fresh(&mut g.rng, 2, "");
                    noisy(&mut g, w, &center, cfg.word_noise)
                })
                .collect();
            patterns.push(words);
        }
        let head_type = g.rng.random_range(0..cfg.n_entity_types);
        let tail_type = g.rng.random_range(0..cfg.n_entity_types);
        g.relations.push(RelationSpec {
            id: name.join("_"),
            patterns,
            head_type,
            tail_type,
        });
    }

    let mut groups = RelationGroups::new();
    let mut corpus_records: Vec<(TaggedSentence, usize, Option<usize>)> = Vec::new();
    let mut id = 0;
    for r in 0..cfg.n_relations {
        let mut samples = Vec::with_capacity(cfg.samples_per_relation);
        for _ in 0..cfg.samples_per_relation {
            let (head, tail) = g.pair(r);
            let s = g.sentence(r, &head, &tail);
            let rel_id = g.relations[r].id.clone();
            if g.rng.random_bool(cfg.paraphrase_fraction) {
                for _ in 0..cfg.paraphrases_per_sample {
                    let p = g.sentence(r, &head, &tail);
                    corpus_records.push((p, r, Some(id)));
                }
                for _ in 0..cfg.distractors_per_sample {
                    let (d, other) = g.distractor(r, &head, &tail);
                    corpus_records.push((d, other, None));
                }
                if g.rng.random_bool(cfg.same_pair_noise) {
                    let other = g.other_relation(r);
                    let n = g.sentence(other, &head, &tail);
                    corpus_records.push((n, other, None));
                }
            }
            samples.push(Sample::new(id, s, rel_id));
            id += 1;
        }
        groups.insert(g.relations[r].id.clone(), samples);
    }
    for _ in 0..cfg.background_records {
        let r = g.rng.random_range(0..cfg.n_relations);
        let (head, tail) = g.pair(r);
        let s = g.sentence(r, &head, &tail);
        corpus_records.push((s, r, None));
    }
    corpus_records.shuffle(&mut g.rng);

    // Ids follow file order (relations sorted by identifier).
    let mut renumber = std::collections::HashMap::new();
    for (new_id, s) in groups.values_mut().flatten().enumerate() {
        renumber.insert(s.id, new_id);
        s.id = new_id;
    }

    let mut planted = Vec::new();
    let mut records = Vec::with_capacity(corpus_records.len());
    let mut corpus_relations = Vec::with_capacity(corpus_records.len());
    for (i, (s, r, origin)) in corpus_records.into_iter().enumerate() {
        let relation = g.relations[r].id.clone();
        if let Some(sample_id) = origin {
            planted.push(Planted {
                sample_id: renumber[&sample_id],
                relation: relation.clone(),
                corpus_index: i,
            });
        }
        records.push(s);
        corpus_relations.push(relation);
    }

    let mut heldout = Vec::with_capacity(cfg.heldout_groups * 3);
    for _ in 0..cfg.heldout_groups {
        let r = g.rng.random_range(0..cfg.n_relations);
        let (head, tail) = g.pair(r);
        heldout.push(g.sentence(r, &head, &tail));
        heldout.push(g.sentence(r, &head, &tail));
        heldout.push(g.distractor(r, &head, &tail).0);
    }

    SyntheticBenchmark {
        groups,
        corpus: Corpus::from_records(records),
        heldout: Corpus::from_records(heldout),
        word_vectors: g.wv,
        planted,
        corpus_relations,
    }
}
