//! Step-by-step invariant checks on a full ERDA run.

use std::collections::BTreeSet;

use cfrl_core::benchmark::{build_task_sequence, SequenceParams};
use cfrl_core::encoder::Encoder;
use cfrl_core::par::Exec;
use cfrl_core::trainer::{build_vocab, Learner, Method};

use super::fixture::{run_config, Fixture};
use super::rng;

/// Returns the number of augmented samples trained on across the run.
pub fn check_erda_run(fx: &Fixture, seed: u64) -> Result<usize, String> {
    let cfg = run_config(Method::Erda);
    let seq = build_task_sequence(
        &fx.bench.groups,
        &SequenceParams {
            n_tasks: cfg.sequence.n_tasks,
            n_way: cfg.sequence.n_way,
            k_shot: cfg.sequence.k_shot,
            base_n: cfg.sequence.base_samples_per_relation,
            seed,
        },
    )
    .map_err(|e| e.to_string())?;
    let vocab = build_vocab(&fx.bench.groups, Some(&fx.bench.corpus));
    let encoder = Encoder::init(
        vocab,
        cfg.encoder.embedding_dim,
        cfg.encoder.output_dim,
        Some(&fx.bench.word_vectors),
        &mut rng(seed),
    )
    .map_err(|e| e.to_string())?;
    let mut learner = Learner::new(cfg, encoder, seed)
        .map_err(|e| e.to_string())?
        .with_exec(Exec::default());

    let mut previous: Vec<(usize, String, usize)> = Vec::new();
    let mut augmented = 0;
    for task in &seq.tasks {
        let k = task.index;
        let log = learner
            .process(task, Some(fx.augment()))
            .map_err(|e| e.to_string())?;
        augmented += log.train_augmented;

        if learner.memory().len() != learner.relations().len() {
            return Err(format!(
                "step {k}: {} exemplars for {} relations",
                learner.memory().len(),
                learner.relations().len()
            ));
        }

        let now: Vec<(usize, String, usize)> = learner
            .memory()
            .entries()
            .map(|(step, s)| (step, s.relation.clone(), s.id))
            .collect();
        let now_set: BTreeSet<_> = now.iter().cloned().collect();
        if let Some(lost) = previous.iter().find(|e| !now_set.contains(*e)) {
            return Err(format!(
                "step {k}: memory entry {lost:?} was replaced or removed"
            ));
        }
        previous = now;

        for (step, s) in learner.memory().entries() {
            if s.is_augmented() {
                return Err(format!("step {k}: augmented sample {} in memory", s.id));
            }
            let origin = &seq.tasks[step - 1];
            if !origin
                .train
                .iter()
                .any(|t| t.id == s.id && t.relation == s.relation)
            {
                return Err(format!(
                    "step {k}: exemplar {} of {} is not an original training sample of task {step}",
                    s.id, s.relation
                ));
            }
        }

        let eval = learner
            .evaluate_detailed(&seq, k)
            .map_err(|e| e.to_string())?;
        let expected: Vec<(String, usize)> = seq.tasks[..k]
            .iter()
            .flat_map(|t| t.test.iter().map(|s| (s.relation.clone(), s.id)))
            .collect();
        if eval.evaluated != expected {
            return Err(format!(
                "step {k}: evaluated samples differ from the union of test splits"
            ));
        }

        let mut correct = 0;
        for t in &seq.tasks[..k] {
            for s in &t.test {
                if learner.infer(s).map_err(|e| e.to_string())? == s.relation {
                    correct += 1;
                }
            }
        }
        if correct != eval.correct || eval.total != expected.len() {
            return Err(format!(
                "step {k}: tally {correct}/{} but evaluation reports {}/{}",
                expected.len(),
                eval.correct,
                eval.total
            ));
        }
        let by_task: usize = eval
            .per_task
            .iter()
            .zip(&seq.tasks)
            .map(|(a, t)| (a * t.test.len() as f64).round() as usize)
            .sum();
        if by_task != eval.correct {
            return Err(format!("step {k}: per-task accuracies do not add up"));
        }
    }
    Ok(augmented)
}
