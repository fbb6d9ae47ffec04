//! Pipeline orchestration for the roleframe toolkit.

pub mod clients;
pub mod config;
pub mod evaluate;
pub mod pipeline;
pub mod state;
