//! Similarity function and training losses.
//!
//! Classification, multi-margin and pairwise-margin losses are averaged over
//! the batch; the memory contrastive loss is summed over memory items.
//! Relation embeddings are treated as constants: gradients flow only into
//! sentence embeddings.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Cosine,
    NegL2,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "neg_l2" => Ok(Metric::NegL2),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

fn check_dims(u: &[f64], v: &[f64]) -> Result<()> {
    if u.len() != v.len() {
        return Err(Error::Dimension {
            expected: u.len(),
            actual: v.len(),
        });
    }
    Ok(())
}

/// Cosine similarity or negative Euclidean distance.
pub fn similarity(u: &[f64], v: &[f64], metric: Metric) -> Result<f64> {
    check_dims(u, v)?;
    match metric {
        Metric::Cosine => {
            let (nu, nv) = (norm(u), norm(v));
            if nu == 0.0 || nv == 0.0 {
                return Err(Error::ZeroVector);
            }
            Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
        }
        Metric::NegL2 => Ok(-u
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()),
    }
}

/// Similarity and its gradient with respect to `u`.
pub fn similarity_grad(u: &[f64], v: &[f64], metric: Metric) -> Result<(f64, Vec<f64>)> {
    check_dims(u, v)?;
    match metric {
        Metric::Cosine => {
            let (nu, nv) = (norm(u), norm(v));
            if nu == 0.0 || nv == 0.0 {
                return Err(Error::ZeroVector);
            }
            let cos = (dot(u, v) / (nu * nv)).clamp(-1.0, 1.0);
            let grad = u
                .iter()
                .zip(v)
                .map(|(a, b)| b / (nu * nv) - cos * a / (nu * nu))
                .collect();
            Ok((cos, grad))
        }
        Metric::NegL2 => {
            let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
            let dist = norm(&diff);
            let grad = if dist == 0.0 {
                vec![0.0; u.len()]
            } else {
                diff.iter().map(|x| -x / dist).collect()
            };
            Ok((-dist, grad))
        }
    }
}

/// Relative weights of the component losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_ce: f64,
    pub lambda_mm: f64,
    pub lambda_pm: f64,
    pub lambda_con: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_ce: 1.0,
            lambda_mm: 1.0,
            lambda_pm: 1.0,
            lambda_con: 0.1,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lambda_ce,
            self.lambda_mm,
            self.lambda_pm,
            self.lambda_con,
        ];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!(
                "loss weights must be finite and nonnegative: {self:?}"
            )));
        }
        Ok(())
    }

    /// Classification term only (used by the replay baseline).
    pub fn ce_only() -> Self {
        LossWeights {
            lambda_ce: 1.0,
            lambda_mm: 0.0,
            lambda_pm: 0.0,
            lambda_con: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Margins {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Margins {
            m1: 0.2,
            m2: 0.2,
            m3: 0.01,
        }
    }
}

impl Margins {
    pub fn validate(&self) -> Result<()> {
        if [self.m1, self.m2, self.m3]
            .iter()
            .any(|m| !m.is_finite() || *m < 0.0)
        {
            return Err(Error::Config(format!(
                "margins must be finite and nonnegative: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Per-sample similarity rows against every known relation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredBatch {
    targets: Vec<usize>,
    scores: Vec<Vec<f64>>,
    /// Gradient of each score with respect to the sample embedding, present when built from embeddings.
    score_grads: Option<Vec<Vec<Vec<f64>>>>,
}

impl ScoredBatch {
    /// Scores `embeddings` against `relations` under `metric`.
    pub fn new(
        embeddings: &[Vec<f64>],
        targets: &[usize],
        relations: &[Vec<f64>],
        metric: Metric,
    ) -> Result<Self> {
        if embeddings.len() != targets.len() {
            return Err(Error::Dimension {
                expected: embeddings.len(),
                actual: targets.len(),
            });
        }
        let mut scores = Vec::with_capacity(embeddings.len());
        let mut grads = Vec::with_capacity(embeddings.len());
        for e in embeddings {
            let mut row = Vec::with_capacity(relations.len());
            let mut grow = Vec::with_capacity(relations.len());
            for r in relations {
                let (s, g) = similarity_grad(e, r, metric)?;
                row.push(s);
                grow.push(g);
            }
            scores.push(row);
            grads.push(grow);
        }
        let mut b = Self::from_scores(scores, targets.to_vec())?;
        b.score_grads = Some(grads);
        Ok(b)
    }

    /// A batch from precomputed similarity rows.
    pub fn from_scores(scores: Vec<Vec<f64>>, targets: Vec<usize>) -> Result<Self> {
        if scores.len() != targets.len() {
            return Err(Error::Dimension {
                expected: scores.len(),
                actual: targets.len(),
            });
        }
        let width = scores.first().map_or(0, Vec::len);
        for (row, &t) in scores.iter().zip(&targets) {
            if row.len() != width {
                return Err(Error::Dimension {
                    expected: width,
                    actual: row.len(),
                });
            }
            if t >= width {
                return Err(Error::Range {
                    what: "target relation index",
                    value: t,
                    lo: 0,
                    hi: width.saturating_sub(1),
                });
            }
        }
        Ok(ScoredBatch {
            targets,
            scores,
            score_grads: None,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_relations(&self) -> usize {
        self.scores.first().map_or(0, Vec::len)
    }

    pub fn scores(&self) -> &[Vec<f64>] {
        &self.scores
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    /// Chains ∂L/∂scores to ∂L/∂embeddings.
    pub fn embedding_grads(&self, d_scores: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let grads = self.score_grads.as_ref().ok_or_else(|| {
            Error::Config("batch was built from raw scores; no embedding gradients".into())
        })?;
        Ok(grads
            .iter()
            .zip(d_scores)
            .map(|(rows, ds)| {
                let dim = rows.first().map_or(0, Vec::len);
                let mut out = vec![0.0; dim];
                for (g, &w) in rows.iter().zip(ds) {
                    if w != 0.0 {
                        for (o, x) in out.iter_mut().zip(g) {
                            *o += w * x;
                        }
                    }
                }
                out
            })
            .collect())
    }

    /// Index of the highest-scoring wrong relation (first on ties).
    fn closest_wrong(&self, i: usize) -> Option<usize> {
        let t = self.targets[i];
        let mut best: Option<usize> = None;
        for (j, &s) in self.scores[i].iter().enumerate() {
            if j != t && best.is_none_or(|b| s > self.scores[i][b]) {
                best = Some(j);
            }
        }
        best
    }

    fn mean_scale(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            1.0 / self.len() as f64
        }
    }
}

/// Mean negative log-likelihood of the true relation under softmax(scores).
pub fn loss_ce(b: &ScoredBatch) -> f64 {
    loss_ce_grad(b).0
}

fn loss_ce_grad(b: &ScoredBatch) -> (f64, Vec<Vec<f64>>) {
    let scale = b.mean_scale();
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(b.len());
    for (row, &t) in b.scores.iter().zip(&b.targets) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|s| (s - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        total += z.ln() + max - row[t];
        grads.push(
            exps.iter()
                .enumerate()
                .map(|(j, e)| scale * (e / z - if j == t { 1.0 } else { 0.0 }))
                .collect(),
        );
    }
    (total * scale, grads)
}

/// Mean over samples of the hinge max(0, m1 − s_true + s_j), summed over wrong relations j.
pub fn loss_mm(b: &ScoredBatch, m1: f64) -> f64 {
    loss_mm_grad(b, m1).0
}

fn loss_mm_grad(b: &ScoredBatch, m1: f64) -> (f64, Vec<Vec<f64>>) {
    let scale = b.mean_scale();
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(b.len());
    for (row, &t) in b.scores.iter().zip(&b.targets) {
        let mut g = vec![0.0; row.len()];
        for (j, &s) in row.iter().enumerate() {
            if j == t {
                continue;
            }
            let h = m1 - row[t] + s;
            if h > 0.0 {
                total += h;
                g[j] += scale;
                g[t] -= scale;
            }
        }
        grads.push(g);
    }
    (total * scale, grads)
}

/// Mean over samples of max(0, m2 − g_t + g_s) with s the closest wrong relation.
pub fn loss_pm(b: &ScoredBatch, m2: f64) -> f64 {
    loss_pm_grad(b, m2).0
}

fn loss_pm_grad(b: &ScoredBatch, m2: f64) -> (f64, Vec<Vec<f64>>) {
    let scale = b.mean_scale();
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(b.len());
    for i in 0..b.len() {
        let (row, t) = (&b.scores[i], b.targets[i]);
        let mut g = vec![0.0; row.len()];
        if let Some(s) = b.closest_wrong(i) {
            let h = m2 - row[t] + row[s];
            if h > 0.0 {
                total += h;
                g[s] += scale;
                g[t] -= scale;
            }
        }
        grads.push(g);
    }
    (total * scale, grads)
}

/// Loss values by component; `total` is the weighted sum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub mm: f64,
    pub pm: f64,
    pub con: f64,
    pub total: f64,
}

pub fn loss_new(b: &ScoredBatch, w: &LossWeights, m: &Margins) -> f64 {
    w.lambda_ce * loss_ce(b) + w.lambda_mm * loss_mm(b, m.m1) + w.lambda_pm * loss_pm(b, m.m2)
}

/// Weighted new-task loss and ∂L/∂scores.
pub fn loss_new_grad(
    b: &ScoredBatch,
    w: &LossWeights,
    m: &Margins,
) -> (LossBreakdown, Vec<Vec<f64>>) {
    let (ce, gce) = loss_ce_grad(b);
    let (mm, gmm) = loss_mm_grad(b, m.m1);
    let (pm, gpm) = loss_pm_grad(b, m.m2);
    let grads = gce
        .iter()
        .zip(&gmm)
        .zip(&gpm)
        .map(|((a, bb), c)| {
            a.iter()
                .zip(bb)
                .zip(c)
                .map(|((x, y), z)| w.lambda_ce * x + w.lambda_mm * y + w.lambda_pm * z)
                .collect()
        })
        .collect();
    let total = w.lambda_ce * ce + w.lambda_mm * mm + w.lambda_pm * pm;
    (
        LossBreakdown {
            ce,
            mm,
            pm,
            con: 0.0,
            total,
        },
        grads,
    )
}

/// A memory sample in the current batch with its hard negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryItem {
    pub embedding: Vec<f64>,
    pub target: usize,
    pub negatives: Vec<Vec<f64>>,
}

/// Gradients of the contrastive loss for each item.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveGrads {
    pub anchors: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<Vec<f64>>>,
}

/// Sum over memory items of max(0, m3 − s(item, anchor) + Σ_neg s(neg, anchor)), all scored against the item's true anchor.
pub fn loss_con(
    items: &[MemoryItem],
    relations: &[Vec<f64>],
    m3: f64,
    metric: Metric,
) -> Result<f64> {
    Ok(loss_con_grad(items, relations, m3, metric)?.0)
}

pub fn loss_con_grad(
    items: &[MemoryItem],
    relations: &[Vec<f64>],
    m3: f64,
    metric: Metric,
) -> Result<(f64, ContrastiveGrads)> {
    let mut total = 0.0;
    let mut anchors = Vec::with_capacity(items.len());
    let mut negatives = Vec::with_capacity(items.len());
    for item in items {
        let r = relations.get(item.target).ok_or(Error::Range {
            what: "memory target index",
            value: item.target,
            lo: 0,
            hi: relations.len().saturating_sub(1),
        })?;
        let (g_true, d_true) = similarity_grad(&item.embedding, r, metric)?;
        let mut h = m3 - g_true;
        let mut d_negs = Vec::with_capacity(item.negatives.len());
        for n in &item.negatives {
            let (g, d) = similarity_grad(n, r, metric)?;
            h += g;
            d_negs.push(d);
        }
        if h > 0.0 {
            total += h;
            anchors.push(d_true.into_iter().map(|x| -x).collect());
            negatives.push(d_negs);
        } else {
            anchors.push(vec![0.0; item.embedding.len()]);
            negatives.push(d_negs.iter().map(|d| vec![0.0; d.len()]).collect());
        }
    }
    Ok((total, ContrastiveGrads { anchors, negatives }))
}

/// New-task loss on the whole batch plus the weighted contrastive loss on its memory items.
pub fn loss_mem(
    b: &ScoredBatch,
    items: &[MemoryItem],
    relations: &[Vec<f64>],
    w: &LossWeights,
    m: &Margins,
    metric: Metric,
) -> Result<f64> {
    Ok(loss_new(b, w, m) + w.lambda_con * loss_con(items, relations, m.m3, metric)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn batch(rows: Vec<Vec<f64>>, targets: Vec<usize>) -> ScoredBatch {
        ScoredBatch::from_scores(rows, targets).unwrap()
    }

    #[test]
    fn similarity_examples() {
        let v = [0.3, -1.2, 4.0];
        assert_abs_diff_eq!(
            similarity(&v, &v, Metric::Cosine).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_eq!(
            similarity(&[1.0, 0.0], &[0.0, 2.0], Metric::Cosine).unwrap(),
            0.0
        );
        assert_eq!(
            similarity(&[0.0, 0.0], &[3.0, 4.0], Metric::NegL2).unwrap(),
            -5.0
        );
        assert!(matches!(
            similarity(&[0.0, 0.0], &[1.0, 0.0], Metric::Cosine),
            Err(Error::ZeroVector)
        ));
        assert!(similarity(&[1.0], &[1.0, 0.0], Metric::NegL2).is_err());
    }

    #[test]
    fn ce_examples() {
        assert_abs_diff_eq!(
            loss_ce(&batch(vec![vec![0.4, 0.4]], vec![0])),
            2f64.ln(),
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            loss_ce(&batch(vec![vec![1.0, 0.0]], vec![0])),
            0.313_261_687_518_222_9,
            epsilon = 1e-10
        );
        assert_eq!(loss_ce(&batch(vec![vec![0.7]], vec![0])), 0.0);
    }

    #[test]
    fn mm_examples() {
        assert_abs_diff_eq!(
            loss_mm(&batch(vec![vec![0.9, 0.5, 0.8]], vec![0]), 0.2),
            0.1,
            epsilon = 1e-10
        );
        assert_eq!(
            loss_mm(&batch(vec![vec![0.9, 0.5, 0.7]], vec![0]), 0.2),
            0.0
        );
        assert_eq!(loss_mm(&batch(vec![vec![0.9]], vec![0]), 0.2), 0.0);
    }

    #[test]
    fn pm_examples() {
        assert_abs_diff_eq!(
            loss_pm(&batch(vec![vec![0.9, 0.85, 0.1]], vec![0]), 0.2),
            0.15,
            epsilon = 1e-10
        );
        assert_eq!(loss_pm(&batch(vec![vec![0.9, 0.3]], vec![0]), 0.2), 0.0);
        let tie = loss_pm(&batch(vec![vec![0.8, 0.75, 0.75]], vec![0]), 0.2);
        assert_abs_diff_eq!(tie, 0.15, epsilon = 1e-10);
        assert_eq!(loss_pm(&batch(vec![vec![0.9]], vec![0]), 0.2), 0.0);
    }

    #[test]
    fn con_examples() {
        // Unit vectors chosen so g_true = 0.9 and the negatives sum to the stated values.
        let r = vec![vec![1.0, 0.0]];
        let at = |c: f64| vec![c, (1.0 - c * c).sqrt()];
        let item = |negs: Vec<f64>| MemoryItem {
            embedding: at(0.9),
            target: 0,
            negatives: negs.into_iter().map(at).collect(),
        };
        assert_eq!(
            loss_con(&[item(vec![0.1, 0.1])], &r, 0.01, Metric::Cosine).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            loss_con(&[item(vec![0.5, 0.5])], &r, 0.01, Metric::Cosine).unwrap(),
            0.11,
            epsilon = 1e-10
        );
        assert_eq!(loss_con(&[], &r, 0.01, Metric::Cosine).unwrap(), 0.0);
        assert_abs_diff_eq!(
            loss_con(&[item(vec![])], &r, 0.95, Metric::Cosine).unwrap(),
            0.05,
            epsilon = 1e-10
        );
    }

    #[test]
    fn weighted_combinations() {
        let b = batch(vec![vec![0.9, 0.85, 0.1], vec![0.2, 0.6, 0.55]], vec![0, 1]);
        let m = Margins::default();
        let zero = LossWeights {
            lambda_ce: 0.0,
            lambda_mm: 0.0,
            lambda_pm: 0.0,
            lambda_con: 0.0,
        };
        assert_eq!(loss_new(&b, &zero, &m), 0.0);
        let one = LossWeights::default();
        let two = LossWeights {
            lambda_ce: 2.0,
            lambda_mm: 2.0,
            lambda_pm: 2.0,
            lambda_con: 0.2,
        };
        assert_abs_diff_eq!(
            loss_new(&b, &two, &m),
            2.0 * loss_new(&b, &one, &m),
            epsilon = 1e-12
        );
        let sum = loss_ce(&b) + loss_mm(&b, m.m1) + loss_pm(&b, m.m2);
        assert_abs_diff_eq!(loss_new(&b, &one, &m), sum, epsilon = 1e-12);
        // Tied two-way scores: ln 2 + 0.2 + 0.2 under the default margins.
        let tied = batch(vec![vec![0.4, 0.4]], vec![0]);
        assert_abs_diff_eq!(
            loss_new(&tied, &one, &Margins::default()),
            std::f64::consts::LN_2 + 0.4,
            epsilon = 1e-10
        );
    }

    #[test]
    fn mem_reduces_to_new() {
        let emb = vec![vec![1.0, 0.2], vec![-0.3, 0.8]];
        let rel = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let b = ScoredBatch::new(&emb, &[0, 1], &rel, Metric::Cosine).unwrap();
        let (w, m) = (LossWeights::default(), Margins::default());
        let new = loss_new(&b, &w, &m);
        assert_eq!(
            loss_mem(&b, &[], &rel, &w, &m, Metric::Cosine).unwrap(),
            new
        );
        let items = vec![MemoryItem {
            embedding: emb[0].clone(),
            target: 0,
            negatives: vec![vec![0.9, 0.1]],
        }];
        let no_con = LossWeights {
            lambda_con: 0.0,
            ..w
        };
        assert_eq!(
            loss_mem(&b, &items, &rel, &no_con, &m, Metric::Cosine).unwrap(),
            new
        );
        // Components (0.5, 0.1, 0.05, 0.11) with weights (1, 1, 1, 0.1).
        let total =
            w.lambda_ce * 0.5 + w.lambda_mm * 0.1 + w.lambda_pm * 0.05 + w.lambda_con * 0.11;
        assert_abs_diff_eq!(total, 0.661, epsilon = 1e-12);
    }

    #[test]
    fn ce_decreases_as_true_score_rises() {
        let mut last = f64::INFINITY;
        for k in 0..10 {
            let l = loss_ce(&batch(vec![vec![0.1 * k as f64, 0.3, -0.2]], vec![0]));
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn batch_validation() {
        assert!(ScoredBatch::from_scores(vec![vec![0.1, 0.2]], vec![2]).is_err());
        assert!(ScoredBatch::from_scores(vec![vec![0.1, 0.2], vec![0.1]], vec![0, 0]).is_err());
        assert!(ScoredBatch::from_scores(vec![vec![0.1]], vec![]).is_err());
    }

    #[test]
    fn similarity_grad_matches_finite_differences() {
        let u = [0.3, -0.7, 1.1];
        let v = [1.0, 0.4, -0.2];
        for metric in [Metric::Cosine, Metric::NegL2] {
            let (_, g) = similarity_grad(&u, &v, metric).unwrap();
            for k in 0..3 {
                let h = 1e-6;
                let mut up = u;
                up[k] += h;
                let mut dn = u;
                dn[k] -= h;
                let fd = (similarity(&up, &v, metric).unwrap()
                    - similarity(&dn, &v, metric).unwrap())
                    / (2.0 * h);
                assert_abs_diff_eq!(g[k], fd, epsilon = 1e-8);
            }
        }
    }

    fn arb_batch() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<usize>)> {
        (1usize..6, 1usize..5).prop_flat_map(|(n, r)| {
            (
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, r), n),
                prop::collection::vec(0..r, n),
            )
        })
    }

    proptest! {
        #[test]
        fn losses_are_nonnegative((rows, targets) in arb_batch(), m in 0.0f64..0.5) {
            let b = batch(rows, targets);
            prop_assert!(loss_ce(&b) >= 0.0);
            prop_assert!(loss_mm(&b, m) >= 0.0);
            prop_assert!(loss_pm(&b, m) >= 0.0);
        }

        #[test]
        fn hinges_inactive_with_wide_gap((mut rows, targets) in arb_batch(), m1 in 0.0f64..0.3, m2 in 0.0f64..0.3) {
            for (row, &t) in rows.iter_mut().zip(&targets) {
                let max_wrong = row.iter().enumerate().filter(|(j, _)| *j != t).map(|(_, s)| *s).fold(f64::NEG_INFINITY, f64::max);
                if max_wrong.is_finite() {
                    row[t] = max_wrong + m1.max(m2) + 1e-9;
                }
            }
            let b = batch(rows, targets);
            prop_assert_eq!(loss_mm(&b, m1), 0.0);
            prop_assert_eq!(loss_pm(&b, m2), 0.0);
        }
    }
}
