//! Event-sourced world model and deterministic scheduler.
//!
//! A world holds locations and agents; agents act one full loop per tick in
//! config order, and every action appends an [`Event`] witnessed by the
//! agents co-located at emission time. The log is append-only and totally
//! ordered by `(tick, seq)`, which is what makes same-seed runs replayable
//! byte for byte.

mod config;
mod event;
mod tick;
mod world;

use thiserror::Error;

pub use config::{
    AgentConfig, AnalysisSpec, CartAnalysis, ClassroomAnalysis, LocationConfig, PggAnalysis,
    PggPlayer, PlanConfig, ScenarioConfig, SCHEMA_VERSION,
};
pub use event::{Event, EventKind};
pub use tick::{advance_tick, run, HaltReason};
pub use world::{load_world, AgentProfile, AgentScratch, Location, Memory, Plan, WorldState};

use crate::cognition::BackendError;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("config schema error: {0}")]
    Schema(String),
    #[error("{context} references unknown name {name:?}")]
    Reference { context: String, name: String },
    #[error("duplicate name {0:?}")]
    DuplicateName(String),
    #[error("agent {agent:?} is not allowed in location {location:?}")]
    PlacementNotAllowed { agent: String, location: String },
    #[error("actor {actor:?} is not present in location {location:?}")]
    ActorNotPresent { actor: String, location: String },
    #[error("unknown location {0:?}")]
    UnknownLocation(String),
    #[error("agent {agent:?} may not enter location {location:?}")]
    LocationNotAllowed { agent: String, location: String },
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("run requires max_ticks >= 1")]
    InvalidMaxTicks,
    #[error("backend failed for agent {agent:?} at tick {tick}: {source}")]
    Backend {
        agent: String,
        tick: u64,
        #[source]
        source: BackendError,
    },
}
