//! Nationality and region prediction from personal names by treating LLM
//! world knowledge as associative memory.
//!
//! Instead of asking a model to reason about a name, the pipeline asks two
//! specialized agents to recall real famous people who share it, votes over
//! the recalled labels for the rank-1 prediction, and fills the remaining
//! ranks with a conditional completion call. When neither agent recalls
//! anyone, a two-stage direct prediction takes over. The crate also carries
//! the full experiment harness: corpus preprocessing, stratified splits,
//! frequency-bin robustness analysis, confusion and region-level error
//! analysis, and the ablation runner.

pub mod aggregation;
pub mod backend;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod evaluation;
pub mod prediction;
pub mod prompts;
pub mod recall;
pub mod records;
pub mod taxonomy;
