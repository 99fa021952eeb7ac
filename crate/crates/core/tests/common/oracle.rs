//! Naive re-implementations and the equivalence checks built on them.

use std::collections::BTreeSet;

use cfrl_core::augmentation::{similarity_search_topk, CorpusVectors, SimilarityModel};
use cfrl_core::benchmark::{Sample, TaggedSentence};
use cfrl_core::encoder::Encoder;
use cfrl_core::memory::select_exemplar;
use cfrl_core::objectives::{
    loss_ce, loss_con, loss_mem, loss_mm, loss_new, loss_pm, LossWeights, Margins, MemoryItem,
    Metric, ScoredBatch,
};
use cfrl_core::par::Exec;
use cfrl_core::trainer::predict;
use rand::Rng;

use super::*;

pub const TRIALS: u64 = 100;
const N_WORDS: usize = 40;

// Naive encoder: marker insertion, three means, affine map.

fn naive_encode(enc: &Encoder, s: &TaggedSentence) -> Vec<f64> {
    let mut toks: Vec<&str> = Vec::new();
    let (mut head, mut tail) = (Vec::new(), Vec::new());
    for (i, t) in s.tokens.iter().enumerate() {
        if i == s.head.start {
            toks.push("#");
        }
        if i == s.tail.start {
            toks.push("@");
        }
        if s.head.contains(i) {
            head.push(toks.len());
        }
        if s.tail.contains(i) {
            tail.push(toks.len());
        }
        toks.push(t);
        if i == s.head.end {
            toks.push("#");
        }
        if i == s.tail.end {
            toks.push("@");
        }
    }
    let d_e = enc.params.d_e;
    let row = |tok: &str| enc.params.embedding(enc.vocab.id(tok)).to_vec();
    let mean = |idx: &[usize]| {
        let mut m = vec![0.0; d_e];
        for &i in idx {
            for (a, x) in m.iter_mut().zip(row(toks[i])) {
                *a += x;
            }
        }
        m.iter().map(|a| a / idx.len() as f64).collect::<Vec<_>>()
    };
    let all: Vec<usize> = (0..toks.len()).collect();
    let pooled: Vec<f64> = [mean(&all), mean(&head), mean(&tail)].concat();
    (0..enc.params.d)
        .map(|i| {
            let w = &enc.params.projection[i * 3 * d_e..(i + 1) * 3 * d_e];
            enc.params.bias[i] + w.iter().zip(&pooled).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}

fn naive_cos(u: &[f64], v: &[f64]) -> f64 {
    let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    (d / (nu * nv)).clamp(-1.0, 1.0)
}

fn naive_l2(u: &[f64], v: &[f64]) -> f64 {
    -u.iter()
        .zip(v)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

fn naive_sim(u: &[f64], v: &[f64], metric: Metric) -> f64 {
    match metric {
        Metric::Cosine => naive_cos(u, v),
        Metric::NegL2 => naive_l2(u, v),
    }
}

fn naive_exemplar(samples: &[Sample], enc: &Encoder, metric: Metric) -> usize {
    let embs: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| naive_encode(enc, &s.sentence))
        .collect();
    let n = embs.len() as f64;
    let c: Vec<f64> = (0..embs[0].len())
        .map(|k| embs.iter().map(|e| e[k]).sum::<f64>() / n)
        .collect();
    let dist = |e: &[f64]| match metric {
        Metric::Cosine => 1.0 - naive_cos(e, &c),
        Metric::NegL2 => -naive_l2(e, &c),
    };
    let mut best = 0;
    for i in 1..embs.len() {
        // strict, so ties keep the first
        if dist(&embs[i]) < dist(&embs[best]) {
            best = i;
        }
    }
    best
}

pub fn exemplar_selection_matches_naive() {
    for trial in 0..TRIALS {
        let mut r = rng(trial);
        let n = r.random_range(1..=100);
        let enc = encoder(N_WORDS, 4, 6, trial);
        let samples = random_samples(&mut r, n, &["rel"], N_WORDS);
        let refs: Vec<&Sample> = samples.iter().collect();
        for metric in [Metric::Cosine, Metric::NegL2] {
            let got = select_exemplar(&refs, &enc, metric).unwrap();
            let want = naive_exemplar(&samples, &enc, metric);
            assert_eq!(got.id, samples[want].id, "trial {trial} {metric:?}");
        }
    }
}

pub fn exemplar_ties_pick_first() {
    let enc = encoder(N_WORDS, 4, 6, 3);
    let mut r = rng(3);
    let s = random_sentence(&mut r, N_WORDS);
    let samples: Vec<Sample> = (0..5).map(|i| Sample::new(i, s.clone(), "rel")).collect();
    let refs: Vec<&Sample> = samples.iter().collect();
    assert_eq!(select_exemplar(&refs, &enc, Metric::Cosine).unwrap().id, 0);
}

fn naive_topk(q: &[f64], corpus: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = corpus
        .iter()
        .enumerate()
        .map(|(i, v)| (i, q.iter().zip(v).map(|(a, b)| a * b).sum()))
        .collect();
    // stable sort keeps ascending index among equal scores
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    scored.into_iter().take(k).map(|(i, _)| i).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

pub fn similarity_search_matches_naive() {
    for trial in 0..TRIALS {
        let mut r = rng(500 + trial);
        let n = r.random_range(1..=100);
        let model = SimilarityModel::new(encoder(N_WORDS, 4, 5, 500 + trial));
        let records: Vec<TaggedSentence> =
            (0..n).map(|_| random_sentence(&mut r, N_WORDS)).collect();
        // duplicate records create exact score ties
        let records: Vec<TaggedSentence> = records
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if i % 7 == 3 {
                    records[i - 1].clone()
                } else {
                    s.clone()
                }
            })
            .collect();
        let naive_vecs: Vec<Vec<f64>> = records
            .iter()
            .map(|s| unit(naive_encode(&model.encoder, s)))
            .collect();
        let lib_vecs = model
            .represent_all(&records.iter().collect::<Vec<_>>(), Exec::Sequential)
            .unwrap();
        let vectors = CorpusVectors::from_vectors(model.dim(), lib_vecs).unwrap();
        let query = Sample::new(0, random_sentence(&mut r, N_WORDS), "rel");
        let q = unit(naive_encode(&model.encoder, &query.sentence));
        for k in [1, 3, n + 2] {
            let got: Vec<usize> = similarity_search_topk(&model, &query, &vectors, k)
                .unwrap()
                .items
                .iter()
                .map(|a| a.corpus_index)
                .collect();
            assert_eq!(got, naive_topk(&q, &naive_vecs, k), "trial {trial} k={k}");
        }
    }
}

pub fn inference_matches_naive() {
    for trial in 0..TRIALS {
        let mut r = rng(900 + trial);
        let n_rel = r.random_range(1..=100);
        let dim = r.random_range(1..6);
        // coarse grid so ties occur
        let grid = |r: &mut rand_chacha::ChaCha8Rng| (r.random_range(-3..=3) as f64) * 0.5;
        let anchors: Vec<Vec<f64>> = (0..n_rel)
            .map(|_| loop {
                let v: Vec<f64> = (0..dim).map(|_| grid(&mut r)).collect();
                if v.iter().any(|x| *x != 0.0) {
                    break v;
                }
            })
            .collect();
        let emb: Vec<f64> = loop {
            let v: Vec<f64> = (0..dim).map(|_| grid(&mut r)).collect();
            if v.iter().any(|x| *x != 0.0) {
                break v;
            }
        };
        for metric in [Metric::Cosine, Metric::NegL2] {
            let scores: Vec<f64> = anchors.iter().map(|a| naive_sim(&emb, a, metric)).collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let want = scores.iter().position(|s| *s == max).unwrap();
            assert_eq!(
                predict(&emb, &anchors, metric).unwrap(),
                want,
                "trial {trial} {metric:?}"
            );
        }
    }
}

// Losses written directly from their definitions.

fn naive_ce(rows: &[Vec<f64>], t: &[usize]) -> f64 {
    let mut s = 0.0;
    for (row, &ti) in rows.iter().zip(t) {
        let z: f64 = row.iter().map(|x| x.exp()).sum();
        s += -(row[ti].exp() / z).ln();
    }
    s / rows.len() as f64
}

fn naive_mm(rows: &[Vec<f64>], t: &[usize], m1: f64) -> f64 {
    let mut s = 0.0;
    for (row, &ti) in rows.iter().zip(t) {
        for (j, x) in row.iter().enumerate() {
            if j != ti {
                s += (m1 - row[ti] + x).max(0.0);
            }
        }
    }
    s / rows.len() as f64
}

fn naive_pm(rows: &[Vec<f64>], t: &[usize], m2: f64) -> f64 {
    let mut s = 0.0;
    for (row, &ti) in rows.iter().zip(t) {
        let wrong = row
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != ti)
            .map(|(_, x)| *x)
            .fold(f64::NEG_INFINITY, f64::max);
        if wrong.is_finite() {
            s += (m2 - row[ti] + wrong).max(0.0);
        }
    }
    s / rows.len() as f64
}

fn naive_con(items: &[MemoryItem], rel: &[Vec<f64>], m3: f64, metric: Metric) -> f64 {
    items
        .iter()
        .map(|it| {
            let r = &rel[it.target];
            let negs: f64 = it.negatives.iter().map(|n| naive_sim(n, r, metric)).sum();
            (m3 - naive_sim(&it.embedding, r, metric) + negs).max(0.0)
        })
        .sum()
}

pub fn losses_match_naive() {
    let w = LossWeights::default();
    for trial in 0..TRIALS {
        let mut r = rng(1300 + trial);
        let n = r.random_range(1..=100);
        let n_rel = r.random_range(1..=20);
        let dim = r.random_range(2..8);
        let m = Margins {
            m1: r.random_range(0.0..1.0),
            m2: r.random_range(0.0..1.0),
            m3: r.random_range(0.0..1.0),
        };
        let rel = random_vectors(&mut r, n_rel, dim);
        let embs = random_vectors(&mut r, n, dim);
        let t: Vec<usize> = (0..n).map(|_| r.random_range(0..n_rel)).collect();
        for metric in [Metric::Cosine, Metric::NegL2] {
            let b = ScoredBatch::new(&embs, &t, &rel, metric).unwrap();
            let rows: Vec<Vec<f64>> = embs
                .iter()
                .map(|e| rel.iter().map(|a| naive_sim(e, a, metric)).collect())
                .collect();
            let ce = naive_ce(&rows, &t);
            let mm = naive_mm(&rows, &t, m.m1);
            let pm = naive_pm(&rows, &t, m.m2);
            assert!((loss_ce(&b) - ce).abs() < 1e-10, "ce trial {trial}");
            assert!((loss_mm(&b, m.m1) - mm).abs() < 1e-10, "mm trial {trial}");
            assert!((loss_pm(&b, m.m2) - pm).abs() < 1e-10, "pm trial {trial}");
            let new = ce + mm + pm;
            assert!(
                (loss_new(&b, &w, &m) - new).abs() < 1e-10,
                "new trial {trial}"
            );

            let mem_idx: BTreeSet<usize> = (0..n).filter(|_| r.random_bool(0.3)).collect();
            let items: Vec<MemoryItem> = mem_idx
                .iter()
                .map(|&i| {
                    let n_neg = r.random_range(0..4);
                    MemoryItem {
                        embedding: embs[i].clone(),
                        target: t[i],
                        negatives: random_vectors(&mut r, n_neg, dim),
                    }
                })
                .collect();
            let con = naive_con(&items, &rel, m.m3, metric);
            assert!(
                (loss_con(&items, &rel, m.m3, metric).unwrap() - con).abs() < 1e-10,
                "con trial {trial}"
            );
            let mem = new + w.lambda_con * con;
            assert!(
                (loss_mem(&b, &items, &rel, &w, &m, metric).unwrap() - mem).abs() < 1e-10,
                "mem trial {trial}"
            );
        }
    }
}
