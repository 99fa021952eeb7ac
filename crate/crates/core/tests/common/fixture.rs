//! The synthetic benchmark and run configuration shared by the end-to-end tests.

use cfrl_core::augmentation::{pretrain, CorpusVectors, SimilarityModel};
use cfrl_core::encoder::Encoder;
use cfrl_core::par::Exec;
use cfrl_core::synthetic::{generate, SyntheticBenchmark, SyntheticConfig};
use cfrl_core::trainer::{
    build_vocab, AugmentContext, EncoderConfig, Method, RunConfig, RunData, SequenceConfig,
};

use super::rng;

pub struct Fixture {
    pub bench: SyntheticBenchmark,
    pub model: SimilarityModel,
    pub vectors: CorpusVectors,
}

pub fn run_config(method: Method) -> RunConfig {
    RunConfig {
        method,
        learning_rate: 0.02,
        encoder: EncoderConfig {
            embedding_dim: 48,
            output_dim: 64,
            train_embeddings: false,
        },
        sequence: SequenceConfig {
            n_tasks: 8,
            n_way: 5,
            k_shot: 5,
            base_samples_per_relation: 40,
        },
        ..RunConfig::default()
    }
}

impl Fixture {
    pub fn build() -> Self {
        Self::build_with(&SyntheticConfig::default())
    }

    pub fn build_with(synth: &SyntheticConfig) -> Self {
        let bench = generate(synth);
        let mut cfg = run_config(Method::Erda);
        cfg.pretrain.steps = 1000;
        cfg.pretrain.lr = 0.2;
        let mut vocab = build_vocab(&bench.groups, Some(&bench.corpus));
        for s in bench.heldout.records() {
            for t in &s.tokens {
                vocab.insert(t);
            }
        }
        let encoder = Encoder::init(
            vocab,
            cfg.encoder.embedding_dim,
            cfg.encoder.output_dim,
            Some(&bench.word_vectors),
            &mut rng(cfg.pretrain.seed),
        )
        .unwrap();
        let mut model = SimilarityModel::new(encoder);
        pretrain(&mut model, &bench.corpus, &cfg.pretrain).unwrap();
        let vectors = CorpusVectors::compute(&model, &bench.corpus, Exec::default()).unwrap();
        Fixture {
            bench,
            model,
            vectors,
        }
    }

    pub fn data(&self) -> RunData<'_> {
        RunData {
            groups: &self.bench.groups,
            word_vectors: Some(&self.bench.word_vectors),
            augment: Some(self.augment()),
        }
    }

    pub fn augment(&self) -> AugmentContext<'_> {
        AugmentContext {
            corpus: &self.bench.corpus,
            model: &self.model,
            vectors: &self.vectors,
        }
    }
}
