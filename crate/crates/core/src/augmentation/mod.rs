//! Self-supervised expansion of few-shot training sets from an entity-tagged
//! corpus.
//!
//! A similarity model (the encoder architecture followed by L2
//! normalization) is pretrained on corpus sentence pairs: pairs sharing both
//! entities are positives, pairs sharing exactly one entity are hard
//! negatives. At augmentation time each few-shot sample first looks up corpus
//! sentences with the same ordered entity pair and keeps those scoring above
//! `alpha`; when no sentence shares the pair it falls back to exact top-K
//! search over precomputed corpus vectors.

mod augment;
mod model;
mod pairs;
mod search;

pub use augment::{
    augment_task, entity_match, filter_by_threshold, similarity_search_topk, AugmentConfig,
    AugmentStats, AugmentationResult, Augmented, AugmentedTask, MatchedBy, QueryOutcome,
};
pub use model::{
    logistic, pretrain, pretrain_loss, pretrain_similarity, sigma, PretrainConfig, PretrainReport,
    SimilarityModel,
};
pub use pairs::{build_pair_batches, PairBatch, PairSampler};
pub use search::{top_k, CorpusVectors, Hit};
