//! Touchline is a tool-chain orchestration runtime for multimodal soccer
//! question answering. A planning agent maps a question onto an ordered
//! chain of declaratively registered tools; an execution agent walks the
//! chain step by step with a history-aware structured-instruction protocol;
//! a benchmark harness evaluates the whole pipeline on four-option QA
//! datasets with sample-weighted accuracy aggregation; and a curation
//! pipeline builds such datasets from annotation records.
//!
//! Everything model-shaped sits behind [`gateway::Gateway`], which can run
//! against a remote endpoint, a deterministic scripted table, or a
//! record/replay cache — the latter two make the full pipeline exactly
//! reproducible.

pub mod cli;
pub mod curation;
pub mod executor;
pub mod gateway;
pub mod planner;
pub mod harness;
pub mod kb;
pub mod protocol;
pub mod text;
pub mod toolbox;
