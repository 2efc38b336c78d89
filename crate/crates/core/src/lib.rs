//! Deterministic multi-agent behavioral simulation engine.
//!
//! The crate is organized around an event-sourced world ([`engine`]), a
//! pluggable cognition layer ([`cognition`]) that turns agent observations
//! into prompts and decisions, a public goods game toolkit ([`pgg`]),
//! in-the-wild scenario builders ([`scenarios`]), a transcript extraction
//! pipeline ([`extract`]), and the statistics used to summarize experiments
//! ([`stats`]).

pub mod cognition;
pub mod engine;
pub mod extract;
pub mod money;
pub mod pgg;
pub mod policies;
pub mod scenarios;
pub mod stats;
