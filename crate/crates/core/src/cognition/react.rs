//! The react step: ask the backend for a decision in the constrained reply
//! grammar, retrying malformed output once with a format reminder before
//! defaulting to continuing the current plan.
//!
//! Grammar (one line): `CONTINUE` | `PLAN: <description> @ <location> UNTIL
//! <stop condition>` | `SAY: <text>` | `MOVE: <location>` | `WAIT`.

use crate::engine::{Plan, WorldState};

use super::{
    agent_view, assemble_prompt, react_request_text, retrieve_relevant, BackendError,
    BackendRequest, CognitionBackend, RequestKind, RetrievalWeights, SamplingParams,
    DEFAULT_TOKEN_BUDGET,
};

/// How many memories the react prompt retrieves.
pub const RETRIEVAL_K: usize = 5;

const FORMAT_REMINDER: &str = "Your previous reply was not in the required format. \
     Reply with exactly one line in one of the forms listed above.";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Speak(String),
    Move(String),
    Wait,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    ContinuePlan,
    NewPlan(Plan),
    Act(Action),
}

/// Parses one grammar line. `created_tick` seeds any parsed plan.
pub fn parse_reply(text: &str, created_tick: u64) -> Option<Decision> {
    let line = text.lines().map(str::trim).find(|l| !l.is_empty())?;
    if line == "CONTINUE" {
        return Some(Decision::ContinuePlan);
    }
    if line == "WAIT" {
        return Some(Decision::Act(Action::Wait));
    }
    if let Some(rest) = line.strip_prefix("SAY:") {
        let text = rest.trim();
        if text.is_empty() {
            return None;
        }
        return Some(Decision::Act(Action::Speak(text.to_string())));
    }
    if let Some(rest) = line.strip_prefix("MOVE:") {
        let location = rest.trim();
        if location.is_empty() {
            return None;
        }
        return Some(Decision::Act(Action::Move(location.to_string())));
    }
    if let Some(rest) = line.strip_prefix("PLAN:") {
        let (description, tail) = rest.split_once(" @ ")?;
        let (location, stop_condition) = tail.split_once(" UNTIL ")?;
        let (description, location, stop_condition) = (
            description.trim(),
            location.trim(),
            stop_condition.trim(),
        );
        if description.is_empty() || location.is_empty() || stop_condition.is_empty() {
            return None;
        }
        return Some(Decision::NewPlan(Plan {
            description: description.to_string(),
            location: location.to_string(),
            stop_condition: stop_condition.to_string(),
            created_tick,
        }));
    }
    None
}

/// Grammar-valid decisions can still be semantically invalid for this world
/// (unknown location, disallowed move); those follow the malformed path.
fn validate(world: &WorldState, agent: &str, decision: Decision) -> Option<Decision> {
    match &decision {
        Decision::Act(Action::Move(location)) => {
            let loc = world.location(location)?;
            if !loc.allows(agent) {
                return None;
            }
        }
        Decision::NewPlan(plan) => {
            world.location(&plan.location)?;
        }
        _ => {}
    }
    Some(decision)
}

/// Runs one react decision for `agent`. Transport failures propagate;
/// persistent malformed output degrades to `ContinuePlan`.
pub fn react(
    world: &WorldState,
    agent: &str,
    backend: &mut dyn CognitionBackend,
) -> Result<Decision, BackendError> {
    let scratch = &world.scratch[agent];
    let retrieved = retrieve_relevant(
        &scratch.memories,
        &scratch.current_plan().description,
        RETRIEVAL_K,
        world.tick,
        &RetrievalWeights::default(),
    );
    let bundle = assemble_prompt(
        world,
        agent,
        &retrieved,
        &react_request_text(),
        DEFAULT_TOKEN_BUDGET,
    );
    let view = agent_view(world, agent);
    let request = BackendRequest {
        agent: agent.to_string(),
        kind: RequestKind::React,
        bundle,
        view,
    };
    let sampling = SamplingParams::default();
    let reply = backend.complete(&request, &sampling)?;
    if let Some(decision) =
        parse_reply(&reply, world.tick).and_then(|d| validate(world, agent, d))
    {
        return Ok(decision);
    }
    log::warn!("malformed react reply from {agent} at tick {}: {reply:?}", world.tick);
    let mut retry = request.clone();
    retry.bundle.request_text = format!("{}\n{FORMAT_REMINDER}", retry.bundle.request_text);
    let reply = backend.complete(&retry, &sampling)?;
    Ok(parse_reply(&reply, world.tick)
        .and_then(|d| validate(world, agent, d))
        .unwrap_or(Decision::ContinuePlan))
}
