use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cfrl_core::augmentation::{pretrain, CorpusVectors, SimilarityModel};
use cfrl_core::benchmark::{
    build_task_sequence, filter_relations, load_corpus, load_dataset, write_dataset,
    write_sequence, Corpus, DatasetFormat, RelationGroups, SequenceParams,
};
use cfrl_core::encoder::{Encoder, WordVectors};
use cfrl_core::par::Exec;
use cfrl_core::synthetic::{generate, SyntheticConfig};
use cfrl_core::trainer::{
    build_report, build_vocab, dataset_hash, load_run, run_experiment, write_artifacts,
    write_report, AccuracyMatrix, AugmentContext, Baseline, Method, Provenance, RunConfig, RunData,
    RunManifest,
};

#[derive(Parser)]
#[command(
    name = "cfrl",
    version,
    about = "Continual few-shot relation learning experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark: dataset, corpus, word vectors.
    Synth(SynthArgs),
    /// Build and write the task sequence for every configured seed.
    Prepare(PrepareArgs),
    /// Pretrain the sentence-pair similarity model on a corpus.
    PretrainSim(PretrainArgs),
    /// Run one method over all configured seeds.
    Run(RunArgs),
    /// Aggregate run directories into curves and a significance table.
    Report(ReportArgs),
}

#[derive(Args)]
struct DatasetArgs {
    /// Labeled dataset file.
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "jsonl")]
    format: DatasetFormat,
    /// Relation to drop before building tasks (repeatable).
    #[arg(long = "drop-relation")]
    drop: Vec<String>,
}

impl DatasetArgs {
    fn load(&self) -> Result<RelationGroups> {
        let groups = load_dataset(&self.dataset, self.format)
            .with_context(|| format!("loading dataset {}", self.dataset.display()))?;
        Ok(filter_relations(groups, &self.drop))
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// TOML file with generator settings; unspecified fields keep defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PrepareArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PretrainArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Also cover the labeled dataset's tokens in the model vocabulary.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "jsonl")]
    format: DatasetFormat,
    /// Pretrained word vectors (GloVe text format).
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output checkpoint; corpus vectors are cached next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured method.
    #[arg(long)]
    method: Option<Method>,
    /// Override the configured seeds (comma separated).
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Unlabeled corpus for augmentation.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Similarity model checkpoint from `pretrain-sim`.
    #[arg(long)]
    sim_model: Option<PathBuf>,
    /// Finished run to compare against in summary.csv.
    #[arg(long)]
    baseline_dir: Option<PathBuf>,
    /// Disable data parallelism.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories written by `run`.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// Label (directory name) or method of the reference run.
    #[arg(long, default_value = "seqrun")]
    baseline: String,
    #[arg(long)]
    out: PathBuf,
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).with_context(|| format!("reading config {}", p.display())),
        None => Ok(RunConfig::default()),
    }
}

fn load_vectors(path: Option<&Path>) -> Result<Option<WordVectors>> {
    path.map(|p| {
        WordVectors::load(p).with_context(|| format!("reading word vectors {}", p.display()))
    })
    .transpose()
}

fn vectors_cache(model: &Path) -> PathBuf {
    let mut name = model.as_os_str().to_owned();
    name.push(".vectors");
    PathBuf::from(name)
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut cfg: SyntheticConfig = match &args.config {
        Some(p) => toml::from_str(&fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => SyntheticConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let bench = generate(&cfg);
    fs::create_dir_all(&args.out)?;
    write_dataset(&bench.groups, args.out.join("dataset.jsonl"))?;
    bench.corpus.write_jsonl(args.out.join("corpus.jsonl"))?;
    bench.heldout.write_jsonl(args.out.join("heldout.jsonl"))?;
    bench.word_vectors.write(args.out.join("vectors.txt"))?;
    fs::write(
        args.out.join("planted.json"),
        serde_json::to_string_pretty(&bench.planted)?,
    )?;
    fs::write(
        args.out.join("corpus_relations.json"),
        serde_json::to_string(&bench.corpus_relations)?,
    )?;
    fs::write(args.out.join("synth.toml"), toml::to_string(&cfg)?)?;
    println!(
        "{} relations, {} samples, {} corpus records ({} planted paraphrases) -> {}",
        bench.groups.len(),
        bench.groups.values().map(Vec::len).sum::<usize>(),
        bench.corpus.len(),
        bench.planted.len(),
        args.out.display()
    );
    Ok(())
}

fn prepare(args: PrepareArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let groups = args.data.load()?;
    for &seed in &cfg.seeds {
        let seq = build_task_sequence(
            &groups,
            &SequenceParams {
                n_tasks: cfg.sequence.n_tasks,
                n_way: cfg.sequence.n_way,
                k_shot: cfg.sequence.k_shot,
                base_n: cfg.sequence.base_samples_per_relation,
                seed,
            },
        )
        .with_context(|| format!("building the task sequence for seed {seed}"))?;
        let dir = args.out.join(format!("seed_{seed}"));
        write_sequence(&seq, &dir)?;
        println!("seed {seed}: {} tasks -> {}", seq.len(), dir.display());
    }
    Ok(())
}

fn pretrain_sim(args: PretrainArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let corpus = load_corpus(&args.corpus)
        .with_context(|| format!("loading corpus {}", args.corpus.display()))?;
    let groups = match &args.dataset {
        Some(p) => load_dataset(p, args.format)?,
        None => RelationGroups::new(),
    };
    let vectors = load_vectors(args.vectors.as_deref())?;
    let vocab = build_vocab(&groups, Some(&corpus));
    let encoder = Encoder::init(
        vocab,
        cfg.encoder.embedding_dim,
        cfg.encoder.output_dim,
        vectors.as_ref(),
        &mut ChaCha8Rng::seed_from_u64(cfg.pretrain.seed),
    )?;
    let mut model = SimilarityModel::new(encoder);
    let report = pretrain(&mut model, &corpus, &cfg.pretrain)?;
    if let (Some(first), Some(last)) = (report.losses.first(), report.losses.last()) {
        println!(
            "pretrained {} steps: loss {first:.4} -> {last:.4}",
            report.losses.len()
        );
    } else {
        println!("no entity pair repeats in the corpus; model left at initialization");
    }
    model.save(&args.out)?;
    let cache = vectors_cache(&args.out);
    CorpusVectors::compute(&model, &corpus, Exec::default())?.save(&cache)?;
    println!(
        "model -> {}, corpus vectors -> {}",
        args.out.display(),
        cache.display()
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(s) = args.seeds {
        cfg.seeds = s;
    }
    cfg.validate()?;
    let exec = if args.sequential {
        Exec::Sequential
    } else {
        Exec::default()
    };
    let groups = args.data.load()?;
    let vectors = load_vectors(args.vectors.as_deref())?;

    let mut provenance = Provenance {
        dataset_hash: dataset_hash(&groups)?,
        ..Default::default()
    };
    let augment_parts: Option<(Corpus, SimilarityModel, CorpusVectors)> =
        if cfg.method.uses_augmentation() {
            let (Some(corpus_path), Some(model_path)) = (&args.corpus, &args.sim_model) else {
                bail!("method {} needs --corpus and --sim-model", cfg.method);
            };
            let corpus = load_corpus(corpus_path)?;
            let model = SimilarityModel::load(model_path)
                .with_context(|| format!("loading similarity model {}", model_path.display()))?;
            let cv =
                CorpusVectors::load_or_compute(vectors_cache(model_path), &corpus, &model, exec)?;
            provenance.corpus_hash = Some(corpus.content_hash());
            provenance.similarity_model_hash = Some(model.content_hash()?);
            Some((corpus, model, cv))
        } else {
            None
        };
    let data = RunData {
        groups: &groups,
        word_vectors: vectors.as_ref(),
        augment: augment_parts
            .as_ref()
            .map(|(corpus, model, vectors)| AugmentContext {
                corpus,
                model,
                vectors,
            }),
    };

    let baseline = args
        .baseline_dir
        .as_ref()
        .map(|dir| -> Result<(RunManifest, AccuracyMatrix)> {
            Ok((
                RunManifest::read(dir.join("manifest.json"))?,
                AccuracyMatrix::read(dir.join("accuracy_matrix.csv"))?,
            ))
        })
        .transpose()?;

    let experiment = run_experiment(&cfg, data, exec)?;
    let manifest = write_artifacts(
        &args.out,
        &experiment,
        provenance,
        baseline
            .as_ref()
            .map(|(m, matrix)| Baseline {
                name: &m.method,
                matrix,
            })
            .as_ref(),
    )?;
    let matrix = experiment.matrix()?;
    for (k, (m, v)) in matrix.means().iter().zip(matrix.variances()).enumerate() {
        println!("step {}: mean {:.4} variance {:.6}", k + 1, m, v);
    }
    println!(
        "{} ({}) -> {}",
        manifest.method,
        manifest.status,
        args.out.display()
    );
    if !experiment.is_complete() {
        let seeds: Vec<String> = experiment
            .failures
            .iter()
            .map(|f| f.seed.to_string())
            .collect();
        bail!(
            "seeds {} failed: {}; partial results written",
            seeds.join(", "),
            experiment.failures[0].message
        );
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let runs = args
        .runs
        .iter()
        .map(|d| load_run(d).with_context(|| format!("loading run {}", d.display())))
        .collect::<Result<Vec<_>>>()?;
    let report = build_report(&runs, &args.baseline)?;
    write_report(&report, &args.out)?;
    println!(
        "{:<20} {:>8} {:>8} {:>9} {:>12}",
        "run", "mean", "base", "diff", "p"
    );
    for r in report.final_rows() {
        println!(
            "{:<20} {:>8.4} {:>8.4} {:>+9.4} {:>12.3e}{}",
            r.label,
            r.mean,
            r.baseline_mean,
            r.diff,
            r.p,
            if r.degenerate { " (degenerate)" } else { "" }
        );
    }
    println!("report -> {}", args.out.display());
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Synth(a) => synth(a),
        Command::Prepare(a) => prepare(a),
        Command::PretrainSim(a) => pretrain_sim(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
    }
}
