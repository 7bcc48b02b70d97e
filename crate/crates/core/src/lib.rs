//! Folksonomy analysis for Steam-style user tags: priority matrix, priority
//! taxa, a correlation-based meronomy and synonym groups.

pub mod config;
pub mod corpus;
pub mod exec;
pub mod export;
pub mod fetch;
pub mod graph;
pub mod meronomy;
pub mod pipeline;
pub mod priority;
pub mod synonymy;
pub mod synth;
pub mod taxonomy;

pub use config::PipelineConfig;
pub use corpus::{Corpus, GameId, GameRecord, TagId};
pub use exec::Execution;
pub use priority::{priority_matrix, PriorityMatrix};
