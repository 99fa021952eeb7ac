//! Finite-difference checks of the trainer's loss composition.

use cfrl_core::benchmark::Sample;
use cfrl_core::encoder::{check_gradient, LossValue, NodeId, ParamCoord, Trace};
use cfrl_core::memory::generate_hard_negatives;
use cfrl_core::objectives::{
    loss_con_grad, loss_new_grad, LossWeights, Margins, MemoryItem, Metric, ScoredBatch,
};
use cfrl_core::par::Exec;
use cfrl_core::Result;

use super::*;

pub const STEP: f64 = 1e-5;
pub const TOL: f64 = 1e-4;
pub const POINTS: u64 = 12;
const PROBES: usize = 8;
const N_WORDS: usize = 30;
const RELATIONS: [&str; 4] = ["r0", "r1", "r2", "r3"];

const MARGINS: Margins = Margins {
    m1: 0.5,
    m2: 0.5,
    m3: 0.3,
};

pub fn only(ce: f64, mm: f64, pm: f64, con: f64) -> LossWeights {
    LossWeights {
        lambda_ce: ce,
        lambda_mm: mm,
        lambda_pm: pm,
        lambda_con: con,
    }
}

/// Weighted new-task loss over `batch`, plus the contrastive term when
/// `negatives` is non-empty. Mirrors one trainer update.
fn batch_loss(
    trace: &mut Trace<'_>,
    batch: &[Sample],
    negatives: &[(usize, Vec<Sample>)],
    anchors: &[Vec<f64>],
    w: &LossWeights,
    metric: Metric,
) -> Result<LossValue> {
    let enc = trace.encoder();
    let inputs = batch
        .iter()
        .map(|s| enc.tagged_input(&s.sentence))
        .collect::<Result<Vec<_>>>()?;
    let neg_inputs = negatives
        .iter()
        .flat_map(|(_, n)| n.iter())
        .map(|s| enc.tagged_input(&s.sentence))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<usize> = batch
        .iter()
        .map(|s| RELATIONS.iter().position(|r| *r == s.relation).unwrap())
        .collect();

    let nodes = trace.encode_batch(inputs, Exec::Sequential);
    let embeddings: Vec<Vec<f64>> = nodes.iter().map(|(_, e)| e.clone()).collect();
    let scored = ScoredBatch::new(&embeddings, &targets, anchors, metric)?;
    let (bd, d_scores) = loss_new_grad(&scored, w, &MARGINS);
    let mut value = bd.total;
    let mut grads: Vec<(NodeId, Vec<f64>)> = nodes
        .iter()
        .map(|(id, _)| *id)
        .zip(scored.embedding_grads(&d_scores)?)
        .collect();

    if !negatives.is_empty() {
        let neg_nodes = trace.encode_batch(neg_inputs, Exec::Sequential);
        let mut next = 0;
        let items: Vec<MemoryItem> = negatives
            .iter()
            .map(|(pos, n)| {
                let embs = neg_nodes[next..next + n.len()]
                    .iter()
                    .map(|(_, e)| e.clone())
                    .collect();
                next += n.len();
                MemoryItem {
                    embedding: embeddings[*pos].clone(),
                    target: targets[*pos],
                    negatives: embs,
                }
            })
            .collect();
        let (con, cg) = loss_con_grad(&items, anchors, MARGINS.m3, metric)?;
        value += w.lambda_con * con;
        let mut neg_iter = neg_nodes.iter();
        for (((pos, _), da), dn) in negatives.iter().zip(&cg.anchors).zip(&cg.negatives) {
            for (g, d) in grads[*pos].1.iter_mut().zip(da) {
                *g += w.lambda_con * d;
            }
            for d in dn {
                let (id, _) = neg_iter.next().unwrap();
                grads.push((*id, d.iter().map(|x| w.lambda_con * x).collect()));
            }
        }
    }
    Ok(LossValue {
        value,
        output_grads: grads,
    })
}

/// Runs the check at `POINTS` random parameter points; returns the largest
/// relative error seen.
pub fn check(
    name: &str,
    w: LossWeights,
    with_memory: bool,
    metric: Metric,
) -> std::result::Result<f64, String> {
    let mut nonzero = 0;
    let mut worst = 0.0f64;
    for point in 0..POINTS {
        let mut r = rng(1000 + point);
        let encoder = encoder(N_WORDS, 6, 5, 2000 + point);
        let batch = random_samples(&mut r, 6, &RELATIONS, N_WORDS);
        let anchors = random_vectors(&mut r, RELATIONS.len(), 5);
        let negatives = if with_memory {
            let refs: Vec<&Sample> = batch.iter().collect();
            generate_hard_negatives(&refs, &[0, 3], 2, &mut r)
        } else {
            Vec::new()
        };
        let loss = |t: &mut Trace<'_>| batch_loss(t, &batch, &negatives, &anchors, &w, metric);
        let tokens: Vec<u32> = batch
            .iter()
            .flat_map(|s| s.sentence.tokens.iter())
            .map(|t| encoder.vocab.id(t))
            .collect();
        let coords = ParamCoord::sample(&encoder.params, &tokens, PROBES, &mut r);
        let report = check_gradient(&encoder, &loss, &coords, STEP).map_err(|e| e.to_string())?;
        if report.probes.iter().any(|p| p.analytic.abs() > 1e-8) {
            nonzero += 1;
        }
        worst = worst.max(report.max_rel_error);
        if !report.passes(TOL) {
            return Err(format!(
                "{name} at point {point}: max relative error {:.3e}",
                report.max_rel_error
            ));
        }
    }
    if nonzero < POINTS / 2 {
        return Err(format!("{name}: gradient vanished at most points"));
    }
    Ok(worst)
}

/// Every loss of the objective, as (name, weights, uses memory).
pub fn all_losses() -> Vec<(&'static str, LossWeights, bool)> {
    vec![
        ("ce", only(1.0, 0.0, 0.0, 0.0), false),
        ("mm", only(0.0, 1.0, 0.0, 0.0), false),
        ("pm", only(0.0, 0.0, 1.0, 0.0), false),
        ("con", only(0.0, 0.0, 0.0, 1.0), true),
        ("new", LossWeights::default(), false),
        ("mem", LossWeights::default(), true),
    ]
}
