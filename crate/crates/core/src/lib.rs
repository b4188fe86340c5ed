//! Fuzzy-Pattern Tsetlin Machine.
//!
//! Clauses vote in proportion to how many of their literals match instead of
//! the all-or-nothing conjunction of a classic Tsetlin Machine. The crate
//! covers the whole pipeline:
//!
//! * [`booleanize`] turns text and images into fixed-width bit vectors,
//! * [`dataset`] reads IDX / IMDb inputs and the packed bit-dataset container,
//! * [`model`] owns automaton state, clause banks and the model file format,
//! * [`eval`] is the fuzzy clause evaluator and class-sum aggregation,
//! * [`train`] implements Type Ia/Ib/II feedback and the epoch loop,
//! * [`infer`] is the word-wise popcount batch inference engine,
//! * [`heuristics`] suggests `T` and `S` from clause count and `LF`.

pub mod bits;
pub mod booleanize;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod heuristics;
pub mod infer;
pub mod model;
pub mod presets;
pub mod session;
pub mod train;

pub use bits::{BitSample, SampleRef};
pub use dataset::BitDataset;
pub use error::{Error, Result};
pub use eval::{class_sum, clause_failed, evaluate_clause, ClassSum, ClauseVote};
pub use heuristics::{suggest_s, suggest_t, HyperSuggestion};
pub use infer::{PackedModel, ThroughputReport};
pub use model::{Clause, ClauseBank, Hyperparameters, Mode, Model};
pub use train::{EpochReport, FalseLiteralAction, FeedbackConfig, Trainer};
