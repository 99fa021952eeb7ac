#![allow(dead_code)]

use cfrl_core::benchmark::{Sample, Span, TaggedSentence};
use cfrl_core::encoder::{Encoder, Vocab};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

/// A random sentence over `w0..w{n_words}` with disjoint, non-empty entity spans.
pub fn random_sentence<R: Rng>(rng: &mut R, n_words: usize) -> TaggedSentence {
    let len = rng.random_range(5..10);
    let tokens: Vec<String> = (0..len)
        .map(|_| format!("w{}", rng.random_range(0..n_words)))
        .collect();
    let h_len = rng.random_range(1..3);
    let t_len = rng.random_range(1..3);
    let h_start = rng.random_range(0..len - h_len - t_len + 1);
    let t_start = rng.random_range(h_start + h_len..len - t_len + 1);
    let (head, tail) = (
        Span::new(h_start, h_start + h_len - 1),
        Span::new(t_start, t_start + t_len - 1),
    );
    if rng.random_bool(0.5) {
        TaggedSentence::new(tokens, tail, head).unwrap()
    } else {
        TaggedSentence::new(tokens, head, tail).unwrap()
    }
}

pub fn random_samples<R: Rng>(
    rng: &mut R,
    n: usize,
    relations: &[&str],
    n_words: usize,
) -> Vec<Sample> {
    (0..n)
        .map(|id| {
            let r = relations[rng.random_range(0..relations.len())];
            Sample::new(id, random_sentence(rng, n_words), r)
        })
        .collect()
}

pub fn encoder(n_words: usize, d_e: usize, d: usize, seed: u64) -> Encoder {
    let vocab = Vocab::from_tokens(words(n_words));
    Encoder::init(vocab, d_e, d, None, &mut rng(seed)).unwrap()
}

pub fn random_vectors<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}
pub mod fixture;
pub mod grad;
pub mod oracle;
pub mod protocol;
