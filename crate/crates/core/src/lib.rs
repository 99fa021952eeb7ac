//! Continual few-shot relation learning.
//!
//! A relation encoder is trained over a sequence of tasks (one data-rich
//! task followed by N-way K-shot tasks) with margin and contrastive
//! regularization of the embedding space, a one-exemplar-per-relation
//! episodic memory, and augmentation of the few-shot sets from an
//! entity-tagged corpus.

pub mod augmentation;
pub mod benchmark;
pub mod checkpoint;
pub mod encoder;
pub mod error;
pub mod memory;
pub mod objectives;
pub mod par;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
