//! Measuring how news outlets frame topics by prompting per-outlet masked
//! language models, plus the corpus, ground-truth and baseline plumbing
//! around it.

pub mod baselines;
pub mod corpus;
pub mod groundtruth;
pub mod jsonl;
pub mod measurement;
pub mod promptgen;
pub mod representation;
pub mod scorer;
pub mod text;
