//! roleframe: batch toolkit turning raw videos into role-playing-agent
//! artifacts.
//!
//! The pipeline runs video loading → adaptive frame sampling →
//! segment captioning and summarization → dialogue generation and
//! filtering → SFT record emission, with an LLM-judge evaluation
//! harness on the side.

pub mod annotate;
pub mod dialogue;
pub mod embed;
pub mod eval;
pub mod llm;
pub mod profile;
pub mod sampler;
pub mod stats;
pub mod video;
