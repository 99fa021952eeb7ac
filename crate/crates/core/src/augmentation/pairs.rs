use rand::seq::IndexedRandom;
use rand::Rng;

use crate::benchmark::Corpus;

/// Corpus index pairs for one pretraining step; `negatives.len() == positives.len()`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairBatch {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

impl PairBatch {
    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }
}

/// Endless stream of balanced pair batches. Yields nothing when no entity
/// pair occurs twice.
pub struct PairSampler<'a, R> {
    corpus: &'a Corpus,
    groups: Vec<&'a [usize]>,
    batch_size: usize,
    rng: R,
}

/// Positives share the ordered entity pair; each positive gets one negative
/// that shares exactly the head or exactly the tail with one of its members.
pub fn build_pair_batches<R: Rng>(
    corpus: &Corpus,
    batch_size: usize,
    rng: R,
) -> PairSampler<'_, R> {
    let groups: Vec<&[usize]> = corpus
        .pair_groups()
        .map(|(_, g)| g)
        .filter(|g| g.len() >= 2)
        .collect();
    if groups.is_empty() {
        log::warn!("no entity pair occurs twice in the corpus; similarity pretraining skipped");
    }
    PairSampler {
        corpus,
        groups,
        batch_size: batch_size.max(1),
        rng,
    }
}

impl<R: Rng> PairSampler<'_, R> {
    /// Records sharing exactly one entity with `i`.
    fn one_entity_partners(&self, i: usize) -> Vec<usize> {
        let r = self.corpus.get(i);
        let (h, t) = (r.head_text(), r.tail_text());
        let mut out: Vec<usize> = self
            .corpus
            .with_head(&h)
            .iter()
            .copied()
            .filter(|&j| self.corpus.get(j).tail_text() != t)
            .collect();
        out.extend(
            self.corpus
                .with_tail(&t)
                .iter()
                .copied()
                .filter(|&j| self.corpus.get(j).head_text() != h),
        );
        out
    }

    pub fn has_positives(&self) -> bool {
        !self.groups.is_empty()
    }
}

impl<R: Rng> Iterator for PairSampler<'_, R> {
    type Item = PairBatch;

    fn next(&mut self) -> Option<PairBatch> {
        if self.groups.is_empty() {
            return None;
        }
        let mut batch = PairBatch::default();
        let max_attempts = self.batch_size * 20;
        for _ in 0..max_attempts {
            if batch.len() == self.batch_size {
                break;
            }
            let group = *self.groups.choose(&mut self.rng).unwrap();
            let a = self.rng.random_range(0..group.len());
            let mut b = self.rng.random_range(0..group.len() - 1);
            if b >= a {
                b += 1;
            }
            let (a, b) = (group[a], group[b]);
            let anchor = if self.rng.random_bool(0.5) { a } else { b };
            let partners = self.one_entity_partners(anchor);
            let Some(&n) = partners.choose(&mut self.rng) else {
                continue;
            };
            batch.positives.push((a, b));
            batch.negatives.push((anchor, n));
        }
        (!batch.is_empty()).then_some(batch)
    }
}
