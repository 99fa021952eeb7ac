use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::io::LineRecord;
use super::{RelationGroups, Sample, Source};
use crate::error::{Error, Result};

/// One step of the task sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    /// 1-based position in the sequence.
    pub index: usize,
    pub relations: Vec<String>,
    pub train: Vec<Sample>,
    pub valid: Vec<Sample>,
    pub test: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSequence {
    pub tasks: Vec<Task>,
    pub n_way: usize,
    pub k_shot: usize,
    pub seed: u64,
    pub base_samples_per_relation: usize,
}

impl TaskSequence {
    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, k: usize) -> Result<&Task> {
        check_step(k, self.tasks.len())?;
        Ok(&self.tasks[k - 1])
    }

    pub fn relations(&self) -> impl Iterator<Item = &String> {
        self.tasks.iter().flat_map(|t| t.relations.iter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceParams {
    pub n_tasks: usize,
    pub n_way: usize,
    pub k_shot: usize,
    pub base_n: usize,
    pub seed: u64,
}

/// Share of the post-training remainder that goes to validation.
const VALID_FRACTION_DENOM: usize = 5;

/// Partitions the relation universe into `n_tasks` tasks in a seed-determined
/// order. The first task absorbs any relations beyond `(n_tasks-1) * n_way`
/// and draws `base_n` training samples per relation; later tasks draw
/// `k_shot`. The remainder of each relation splits 20/80 into valid/test.
pub fn build_task_sequence(groups: &RelationGroups, p: &SequenceParams) -> Result<TaskSequence> {
    if p.n_tasks == 0 || p.n_way == 0 || p.k_shot == 0 || p.base_n == 0 {
        return Err(Error::Construction(
            "n_tasks, n_way, k_shot and base_n must be positive".into(),
        ));
    }
    let needed = p.n_tasks * p.n_way;
    if groups.len() < needed {
        return Err(Error::Construction(format!(
            "{} relations available, {needed} required ({} tasks x {}-way); short by {}",
            groups.len(),
            p.n_tasks,
            p.n_way,
            needed - groups.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut relations: Vec<&String> = groups.keys().collect();
    relations.shuffle(&mut rng);

    let first_size = groups.len() - (p.n_tasks - 1) * p.n_way;
    let mut tasks = Vec::with_capacity(p.n_tasks);
    let mut cursor = 0;
    for index in 1..=p.n_tasks {
        let size = if index == 1 { first_size } else { p.n_way };
        let n_train = if index == 1 { p.base_n } else { p.k_shot };
        let mut task = Task {
            index,
            relations: Vec::with_capacity(size),
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
        };
        for &rel in &relations[cursor..cursor + size] {
            let mut samples = groups[rel].clone();
            if samples.len() < n_train + 1 {
                return Err(Error::Construction(format!(
                    "relation {rel:?} in task {index} has {} samples, needs at least {} \
                     ({n_train} train + 1 test); short by {}",
                    samples.len(),
                    n_train + 1,
                    n_train + 1 - samples.len()
                )));
            }
            samples.shuffle(&mut rng);
            let rest = samples.split_off(n_train);
            let n_valid = rest.len() / VALID_FRACTION_DENOM;
            task.train.extend(samples);
            task.valid.extend(rest[..n_valid].iter().cloned());
            task.test.extend(rest[n_valid..].iter().cloned());
            task.relations.push(rel.clone());
        }
        cursor += size;
        tasks.push(task);
    }

    Ok(TaskSequence {
        tasks,
        n_way: p.n_way,
        k_shot: p.k_shot,
        seed: p.seed,
        base_samples_per_relation: p.base_n,
    })
}

fn check_step(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Range {
            what: "task step",
            value: k,
            lo: 1,
            hi: n,
        });
    }
    Ok(())
}

/// Test samples of tasks `1..=k`, in task order.
pub fn cumulative_test_set(seq: &TaskSequence, k: usize) -> Result<Vec<&Sample>> {
    check_step(k, seq.tasks.len())?;
    Ok(seq.tasks[..k].iter().flat_map(|t| t.test.iter()).collect())
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    seed: u64,
    n_way: usize,
    k_shot: usize,
    base_samples_per_relation: usize,
    n_tasks: usize,
    tasks: Vec<ManifestTask>,
}

#[derive(Serialize, Deserialize)]
struct ManifestTask {
    index: usize,
    file: String,
    relations: Vec<String>,
    n_train: usize,
    n_valid: usize,
    n_test: usize,
}

#[derive(Serialize, Deserialize)]
struct TaskRecord {
    id: usize,
    split: String,
    #[serde(flatten)]
    record: LineRecord,
}

fn task_file(index: usize) -> String {
    format!("task_{index:02}.jsonl")
}

/// Writes `manifest.json` plus one `task_NN.jsonl` per task into `dir`.
pub fn write_sequence(seq: &TaskSequence, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Manifest {
        seed: seq.seed,
        n_way: seq.n_way,
        k_shot: seq.k_shot,
        base_samples_per_relation: seq.base_samples_per_relation,
        n_tasks: seq.tasks.len(),
        tasks: Vec::new(),
    };
    for task in &seq.tasks {
        let mut out = String::new();
        for (split, samples) in [
            ("train", &task.train),
            ("valid", &task.valid),
            ("test", &task.test),
        ] {
            for s in samples {
                let rec = TaskRecord {
                    id: s.id,
                    split: split.to_string(),
                    record: LineRecord::from_sentence(&s.sentence, Some(&s.relation)),
                };
                out.push_str(&serde_json::to_string(&rec)?);
                out.push('\n');
            }
        }
        let file = task_file(task.index);
        let path = dir.join(&file);
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        manifest.tasks.push(ManifestTask {
            index: task.index,
            file,
            relations: task.relations.clone(),
            n_train: task.train.len(),
            n_valid: task.valid.len(),
            n_test: task.test.len(),
        });
    }
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
}

/// Reads a directory written by [`write_sequence`].
pub fn read_sequence(dir: impl AsRef<Path>) -> Result<TaskSequence> {
    let dir = dir.as_ref();
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut tasks = Vec::with_capacity(manifest.tasks.len());
    for mt in &manifest.tasks {
        let path = dir.join(&mt.file);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let known: BTreeSet<&String> = mt.relations.iter().collect();
        let mut task = Task {
            index: mt.index,
            relations: mt.relations.clone(),
            train: Vec::new(),
            valid: Vec::new(),
            test: Vec::new(),
        };
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i + 1;
            let rec: TaskRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
                line: line_no,
                message: format!("{}: {e}", mt.file),
            })?;
            let relation = rec.record.relation.clone().unwrap_or_default();
            if !known.contains(&relation) {
                return Err(Error::Validation(format!(
                    "{} line {line_no}: relation {relation:?} not in task",
                    mt.file
                )));
            }
            let sentence = rec.record.sentence().ok_or_else(|| Error::Parse {
                line: line_no,
                message: "missing head or tail".into(),
            })??;
            let sample = Sample {
                id: rec.id,
                sentence,
                relation,
                source: Source::Original,
            };
            match rec.split.as_str() {
                "train" => task.train.push(sample),
                "valid" => task.valid.push(sample),
                "test" => task.test.push(sample),
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("unknown split {other:?}"),
                    })
                }
            }
        }
        tasks.push(task);
    }
    Ok(TaskSequence {
        tasks,
        n_way: manifest.n_way,
        k_shot: manifest.k_shot,
        seed: manifest.seed,
        base_samples_per_relation: manifest.base_samples_per_relation,
    })
}
