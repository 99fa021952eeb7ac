//! Runs methods over a task sequence: new-task training, exemplar memory,
//! rehearsal with anchor refresh, cumulative evaluation, multi-seed
//! aggregation and paired significance tests.

mod config;
mod experiment;
mod learner;
mod report;
mod stats;

pub use config::{EncoderConfig, Method, RunConfig, SequenceConfig};
pub use experiment::{
    build_vocab, compare_at_step, dataset_hash, run_experiment, run_seed, summary_csv,
    write_artifacts, AccuracyMatrix, Baseline, Experiment, MemoryRecord, Provenance, RunData,
    RunManifest, SeedFailure, SeedRun, SeedTiming, StepRecord,
};
pub use learner::{
    argmax_first, predict, AugmentContext, AugmentSummary, Evaluation, Learner, StepLog,
};
pub use report::{
    build_report, load_run, write_report, CurvePoint, LoadedRun, Report, SignificanceRow,
};
pub use stats::{mean, paired_t_test, sample_variance, TTest};
