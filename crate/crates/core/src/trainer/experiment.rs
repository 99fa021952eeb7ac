use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::learner::{AugmentContext, Evaluation, Learner, StepLog};
use super::stats::{mean, paired_t_test, sample_variance, TTest};
use crate::benchmark::{
    build_task_sequence, relation_name_tokens, Corpus, RelationGroups, SequenceParams,
};
use crate::encoder::{Encoder, Vocab, WordVectors};
use crate::error::{Error, Result};
use crate::par::Exec;

/// Inputs shared by every seed of an experiment.
#[derive(Clone, Copy)]
pub struct RunData<'a> {
    pub groups: &'a RelationGroups,
    pub word_vectors: Option<&'a WordVectors>,
    pub augment: Option<AugmentContext<'a>>,
}

/// Vocabulary over every dataset token, relation-name token and corpus token,
/// in sorted order.
pub fn build_vocab(groups: &RelationGroups, corpus: Option<&Corpus>) -> Vocab {
    let mut tokens: BTreeSet<&str> = BTreeSet::new();
    let mut names = Vec::new();
    for (rel, samples) in groups {
        names.extend(relation_name_tokens(rel));
        for s in samples {
            tokens.extend(s.sentence.tokens.iter().map(String::as_str));
        }
    }
    if let Some(c) = corpus {
        for r in c.records() {
            tokens.extend(r.tokens.iter().map(String::as_str));
        }
    }
    tokens.extend(names.iter().map(String::as_str));
    Vocab::from_tokens(tokens)
}

/// SHA-256 of the dataset's canonical JSON rendering.
pub fn dataset_hash(groups: &RelationGroups) -> Result<String> {
    let bytes = serde_json::to_vec(groups)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryRecord {
    pub relation: String,
    pub sample_id: usize,
    pub written_at: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub log: StepLog,
    pub evaluation: Evaluation,
    pub memory: Vec<MemoryRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedRun {
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub seconds: f64,
}

impl SeedRun {
    pub fn accuracies(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.evaluation.accuracy).collect()
    }
}

/// Builds a fresh sequence and model for `seed` and runs it end to end.
pub fn run_seed(
    config: &RunConfig,
    data: RunData<'_>,
    vocab: &Vocab,
    seed: u64,
    exec: Exec,
) -> Result<SeedRun> {
    let start = Instant::now();
    let seq = build_task_sequence(
        data.groups,
        &SequenceParams {
            n_tasks: config.sequence.n_tasks,
            n_way: config.sequence.n_way,
            k_shot: config.sequence.k_shot,
            base_n: config.sequence.base_samples_per_relation,
            seed,
        },
    )?;
    let mut seeder = ChaCha8Rng::seed_from_u64(seed);
    let mut init_rng = ChaCha8Rng::seed_from_u64(seeder.next_u64());
    let encoder = Encoder::init(
        vocab.clone(),
        config.encoder.embedding_dim,
        config.encoder.output_dim,
        data.word_vectors,
        &mut init_rng,
    )?;
    let mut learner = Learner::new(config.clone(), encoder, seeder.next_u64())?.with_exec(exec);
    let mut steps = Vec::with_capacity(seq.len());
    for task in &seq.tasks {
        let log = learner.process(task, data.augment)?;
        let evaluation = learner.evaluate_detailed(&seq, task.index)?;
        log::info!(
            "{} seed {seed} step {}: accuracy {:.4} ({} relations, {} in memory)",
            config.method,
            task.index,
            evaluation.accuracy,
            log.relation_count,
            log.memory_size
        );
        let memory = learner
            .memory()
            .entries()
            .map(|(step, s)| MemoryRecord {
                relation: s.relation.clone(),
                sample_id: s.id,
                written_at: step,
            })
            .collect();
        steps.push(StepRecord {
            log,
            evaluation,
            memory,
        });
    }
    Ok(SeedRun {
        seed,
        steps,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Per-seed, per-step accuracy on the cumulative test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyMatrix {
    seeds: Vec<u64>,
    rows: Vec<Vec<f64>>,
}

impl AccuracyMatrix {
    pub fn new(seeds: Vec<u64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if seeds.len() != rows.len() {
            return Err(Error::Validation(format!(
                "{} seeds but {} rows",
                seeds.len(),
                rows.len()
            )));
        }
        if let Some(first) = rows.first() {
            if let Some(bad) = rows.iter().find(|r| r.len() != first.len()) {
                return Err(Error::Validation(format!(
                    "ragged matrix: row of length {} vs {}",
                    bad.len(),
                    first.len()
                )));
            }
        }
        if let Some(v) = rows.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!("accuracy {v} outside [0, 1]")));
        }
        Ok(AccuracyMatrix { seeds, rows })
    }

    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_steps(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn row(&self, seed: u64) -> Option<&[f64]> {
        self.seeds
            .iter()
            .position(|s| *s == seed)
            .map(|i| self.rows[i].as_slice())
    }

    /// Values at 1-based `step` across seeds.
    pub fn column(&self, step: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[step - 1]).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        (1..=self.n_steps())
            .map(|k| mean(&self.column(k)))
            .collect()
    }

    pub fn variances(&self) -> Vec<f64> {
        (1..=self.n_steps())
            .map(|k| sample_variance(&self.column(k)))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed");
        for k in 1..=self.n_steps() {
            write!(out, ",step_{k}").unwrap();
        }
        out.push('\n');
        for (seed, row) in self.seeds.iter().zip(&self.rows) {
            write!(out, "{seed}").unwrap();
            for v in row {
                write!(out, ",{v:.6}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Empty("accuracy matrix"))?;
        let n_steps = header.split(',').count().saturating_sub(1);
        let (mut seeds, mut rows) = (Vec::new(), Vec::new());
        for (i, line) in lines {
            let parse_err = |message: String| Error::Parse {
                line: i + 1,
                message,
            };
            let mut fields = line.split(',');
            let seed = fields
                .next()
                .unwrap_or_default()
                .trim()
                .parse::<u64>()
                .map_err(|e| parse_err(e.to_string()))?;
            let row = fields
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n_steps {
                return Err(parse_err(format!(
                    "expected {n_steps} values, found {}",
                    row.len()
                )));
            }
            seeds.push(seed);
            rows.push(row);
        }
        Self::new(seeds, rows)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Paired t-test of `a` against `b` at 1-based `step`, matching rows by seed.
pub fn compare_at_step(a: &AccuracyMatrix, b: &AccuracyMatrix, step: usize) -> Result<TTest> {
    if step == 0 || step > a.n_steps() || step > b.n_steps() {
        return Err(Error::Range {
            what: "comparison step",
            value: step,
            lo: 1,
            hi: a.n_steps().min(b.n_steps()),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (seed, row) in a.seeds.iter().zip(&a.rows) {
        let other = b
            .row(*seed)
            .ok_or_else(|| Error::Validation(format!("seed {seed} missing from the baseline")))?;
        xs.push(row[step - 1]);
        ys.push(other[step - 1]);
    }
    if xs.len() != b.seeds.len() {
        return Err(Error::Validation(
            "compared runs use different seed sets".into(),
        ));
    }
    paired_t_test(&xs, &ys)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub runs: Vec<SeedRun>,
    pub failures: Vec<SeedFailure>,
    pub seconds: f64,
}

impl Experiment {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    /// Matrix over the seeds that finished.
    pub fn matrix(&self) -> Result<AccuracyMatrix> {
        AccuracyMatrix::new(
            self.runs.iter().map(|r| r.seed).collect(),
            self.runs.iter().map(SeedRun::accuracies).collect(),
        )
    }
}

/// Runs every configured seed. Seeds run concurrently under
/// `Exec::Parallel`; sequentially, the first failure stops the remaining
/// seeds. Failed seeds are reported in `failures`.
pub fn run_experiment(config: &RunConfig, data: RunData<'_>, exec: Exec) -> Result<Experiment> {
    config.validate()?;
    let start = Instant::now();
    let vocab = build_vocab(data.groups, data.augment.map(|a| a.corpus));
    let outcomes: Vec<(u64, Result<SeedRun>)> = match exec {
        Exec::Sequential => {
            let mut out = Vec::new();
            for &seed in &config.seeds {
                let r = run_seed(config, data, &vocab, seed, exec);
                let failed = r.is_err();
                out.push((seed, r));
                if failed {
                    break;
                }
            }
            out
        }
        Exec::Parallel => exec.map(&config.seeds, |&seed| {
            (seed, run_seed(config, data, &vocab, seed, exec))
        }),
    };
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in outcomes {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => {
                log::error!("seed {seed} failed: {e}");
                failures.push(SeedFailure {
                    seed,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(Experiment {
        config: config.clone(),
        runs,
        failures,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Hashes identifying the inputs of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset_hash: String,
    pub corpus_hash: Option<String>,
    pub similarity_model_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTiming {
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub method: String,
    pub status: String,
    pub config_hash: String,
    #[serde(flatten)]
    pub provenance: Provenance,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub failures: Vec<SeedFailure>,
    pub total_seconds: f64,
    pub seed_seconds: Vec<SeedTiming>,
    pub version: String,
}

impl RunManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Named reference matrix for significance columns in `summary.csv`.
pub struct Baseline<'a> {
    pub name: &'a str,
    pub matrix: &'a AccuracyMatrix,
}

/// Per-step mean and variance, plus paired tests against `baseline` if given.
pub fn summary_csv(matrix: &AccuracyMatrix, baseline: Option<&Baseline<'_>>) -> Result<String> {
    let mut out = String::from("step,mean,variance");
    if baseline.is_some() {
        out.push_str(",baseline,baseline_mean,t,p_value,degenerate");
    }
    out.push('\n');
    let (means, vars) = (matrix.means(), matrix.variances());
    for k in 1..=matrix.n_steps() {
        write!(out, "{k},{:.6},{:.6}", means[k - 1], vars[k - 1]).unwrap();
        if let Some(b) = baseline {
            let t = compare_at_step(matrix, b.matrix, k)?;
            let b_mean = mean(&b.matrix.column(k));
            write!(
                out,
                ",{},{b_mean:.6},{:.6},{:.6e},{}",
                b.name, t.t, t.p, t.degenerate
            )
            .unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes `accuracy_matrix.csv`, `summary.csv`, `steps.jsonl` and
/// `manifest.json` into `dir`.
pub fn write_artifacts(
    dir: impl AsRef<Path>,
    experiment: &Experiment,
    provenance: Provenance,
    baseline: Option<&Baseline<'_>>,
) -> Result<RunManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    // Summaries use the written precision so they agree with reports built from the CSV.
    let matrix = AccuracyMatrix::from_csv(&experiment.matrix()?.to_csv())?;
    matrix.write(dir.join("accuracy_matrix.csv"))?;

    let summary = summary_csv(&matrix, baseline)?;
    let path = dir.join("summary.csv");
    fs::write(&path, summary).map_err(|e| Error::io(&path, e))?;

    let mut steps = String::new();
    for run in &experiment.runs {
        for s in &run.steps {
            let line = serde_json::json!({ "seed": run.seed, "step": s.log.step, "record": s });
            steps.push_str(&serde_json::to_string(&line)?);
            steps.push('\n');
        }
    }
    let path = dir.join("steps.jsonl");
    fs::write(&path, steps).map_err(|e| Error::io(&path, e))?;

    let config_path = dir.join("config.toml");
    experiment.config.save(&config_path)?;

    let manifest = RunManifest {
        method: experiment.config.method.to_string(),
        status: if experiment.is_complete() {
            "complete"
        } else {
            "failed"
        }
        .into(),
        config_hash: experiment.config.hash()?,
        provenance,
        seeds: matrix.seeds().to_vec(),
        steps: matrix.n_steps(),
        failures: experiment.failures.clone(),
        total_seconds: experiment.seconds,
        seed_seconds: experiment
            .runs
            .iter()
            .map(|r| SeedTiming {
                seed: r.seed,
                seconds: r.seconds,
            })
            .collect(),
        version: env!("CARGO_PKG_VERSION").into(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
