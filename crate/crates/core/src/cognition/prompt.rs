//! Canonical prompt assembly.
//!
//! Section order is fixed: identity -> directives -> location -> other
//! agents' public bios -> retrieved memories -> recent witnessed events ->
//! request. The context never contains another agent's private biography or
//! any event the owner did not witness; both properties are sentinel-tested.

use crate::engine::{Event, Memory, WorldState};

use super::{BackendRequest, PromptBundle, RequestKind};

/// Default whitespace-token budget for assembled prompts.
pub const DEFAULT_TOKEN_BUDGET: usize = 4096;

/// Line inserted at the head of the recent-events section when truncation
/// dropped older events.
pub const TRUNCATION_MARKER: &str = "[earlier events omitted]";

/// How many witnessed events the recent-events section starts from before
/// budget truncation applies.
pub const RECENT_EVENTS_WINDOW: usize = 40;

/// Everything one agent can observe, in structured form. This is what
/// scripted policies consume; it is assembled from exactly the same
/// agent-visible data as the rendered prompt.
#[derive(Debug, Clone)]
pub struct AgentView {
    pub tick: u64,
    pub name: String,
    pub public_bio: String,
    pub private_bio: String,
    pub directives: Vec<String>,
    pub location: String,
    pub location_description: String,
    /// Co-located agent names, sorted.
    pub present: Vec<String>,
    /// All other agents' (name, public_bio), in turn order.
    pub public_bios: Vec<(String, String)>,
    /// Full witnessed-event history, log order.
    pub witnessed: Vec<Event>,
    pub memories: Vec<Memory>,
    pub current_plan_description: String,
}

/// Builds the observable view for `agent`.
pub fn agent_view(world: &WorldState, agent: &str) -> AgentView {
    let profile = world.agent(agent).expect("agent in world");
    let location = world
        .location(&profile.current_location)
        .expect("placement valid");
    let scratch = &world.scratch[agent];
    AgentView {
        tick: world.tick,
        name: profile.name.clone(),
        public_bio: profile.public_bio.clone(),
        private_bio: profile.private_bio.clone(),
        directives: profile.directives.clone(),
        location: location.name.clone(),
        location_description: location.description.clone(),
        present: world.occupants(&location.name).into_iter().collect(),
        public_bios: world
            .agents
            .iter()
            .filter(|a| a.name != agent)
            .map(|a| (a.name.clone(), a.public_bio.clone()))
            .collect(),
        witnessed: world.witnessed_events(agent),
        memories: scratch.memories.clone(),
        current_plan_description: scratch.current_plan().description.clone(),
    }
}

fn or_none(text: &str) -> &str {
    if text.is_empty() {
        "(none)"
    } else {
        text
    }
}

fn identity_text(world: &WorldState, agent: &str) -> String {
    let profile = world.agent(agent).expect("agent in world");
    let plan = world.scratch[agent].current_plan();
    let mut out = String::new();
    out.push_str(&format!("You are {}.\n", profile.name));
    out.push_str(&format!(
        "Private biography: {}\n",
        or_none(&profile.private_bio)
    ));
    out.push_str(&format!(
        "Public biography: {}\n",
        or_none(&profile.public_bio)
    ));
    if profile.directives.is_empty() {
        out.push_str("Directives: (none)\n");
    } else {
        out.push_str("Directives:\n");
        for (i, d) in profile.directives.iter().enumerate() {
            out.push_str(&format!("{}. {d}\n", i + 1));
        }
    }
    out.push_str(&format!(
        "Current plan: {} (at {}, until {})\n",
        plan.description, plan.location, plan.stop_condition
    ));
    out
}

/// Assembles the canonical prompt for `agent`. Deterministic given its
/// inputs; when the whitespace-token budget is exceeded, the oldest recent
/// events are dropped first and a truncation marker is recorded.
pub fn assemble_prompt(
    world: &WorldState,
    agent: &str,
    retrieved: &[Memory],
    request: &str,
    token_budget: usize,
) -> PromptBundle {
    let profile = world.agent(agent).expect("agent in world");
    let location = world
        .location(&profile.current_location)
        .expect("placement valid");
    let system_text = identity_text(world, agent);

    let mut head = String::new();
    head.push_str(&format!(
        "Current location: {}: {}\n",
        location.name, location.description
    ));
    let present: Vec<String> = world.occupants(&location.name).into_iter().collect();
    head.push_str(&format!("Agents present: {}\n", present.join(", ")));
    head.push_str("Other agents:\n");
    let others: Vec<&crate::engine::AgentProfile> =
        world.agents.iter().filter(|a| a.name != agent).collect();
    if others.is_empty() {
        head.push_str("(none)\n");
    }
    for other in others {
        head.push_str(&format!("- {}: {}\n", other.name, or_none(&other.public_bio)));
    }
    head.push_str("Relevant memories:\n");
    if retrieved.is_empty() {
        head.push_str("(none)\n");
    }
    for memory in retrieved {
        head.push_str(&format!(
            "- [tick {}] (importance {}) {}\n",
            memory.created_tick, memory.importance, memory.description
        ));
    }

    let witnessed = world.witnessed_events(agent);
    let start = witnessed.len().saturating_sub(RECENT_EVENTS_WINDOW);
    let mut events: Vec<String> = witnessed[start..]
        .iter()
        .map(|e| format!("- [{}.{}] {}", e.tick, e.seq, e.description))
        .collect();
    let mut truncated = start > 0;

    let render_events = |events: &[String], truncated: bool| {
        let mut out = String::from("Recent events:\n");
        if truncated {
            out.push_str(TRUNCATION_MARKER);
            out.push('\n');
        }
        if events.is_empty() && !truncated {
            out.push_str("(none)\n");
        }
        for line in events {
            out.push_str(line);
            out.push('\n');
        }
        out
    };

    let mut bundle = PromptBundle {
        system_text,
        context_text: format!("{head}{}", render_events(&events, truncated)),
        request_text: request.to_string(),
        token_budget,
    };
    while bundle.token_count() > token_budget && !events.is_empty() {
        events.remove(0);
        truncated = true;
        bundle.context_text = format!("{head}{}", render_events(&events, truncated));
    }
    bundle
}

/// The react request: the reply grammar, stated verbatim.
pub fn react_request_text() -> String {
    "Decide your next action. Reply with exactly one line in one of these forms:\n\
     CONTINUE\n\
     PLAN: <description> @ <location> UNTIL <stop condition>\n\
     SAY: <text>\n\
     MOVE: <location>\n\
     WAIT"
        .to_string()
}

/// Builds the compact importance-scoring request for one new memory.
pub fn importance_prompt(
    world: &WorldState,
    agent: &str,
    view: &AgentView,
    description: &str,
) -> BackendRequest {
    let bundle = PromptBundle {
        system_text: identity_text(world, agent),
        context_text: String::new(),
        request_text: format!(
            "Rate how important this memory is to remember, on a scale from 1 to 10. \
             Reply with a single integer.\nMemory: {description}"
        ),
        token_budget: DEFAULT_TOKEN_BUDGET,
    };
    BackendRequest {
        agent: agent.to_string(),
        kind: RequestKind::Importance,
        bundle,
        view: view.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{
        load_world, AgentConfig, EventKind, LocationConfig, PlanConfig, ScenarioConfig,
        SCHEMA_VERSION,
    };

    fn world_with_sentinels() -> WorldState {
        let config = ScenarioConfig {
            schema_version: SCHEMA_VERSION.into(),
            seed: 3,
            max_ticks: 10,
            locations: vec![
                LocationConfig {
                    name: "Game Room".into(),
                    description: "Players gather here.".into(),
                    allowed_agents: vec![],
                },
                LocationConfig {
                    name: "Moderation Room".into(),
                    description: "Private.".into(),
                    allowed_agents: vec![],
                },
            ],
            agents: vec![
                AgentConfig {
                    name: "Alice".into(),
                    public_bio: "Alice plays games.".into(),
                    private_bio: "You are playing a game called the Taxation Game. ZEBRA-7".into(),
                    directives: vec!["Contribute wisely.".into()],
                    initial_plan: PlanConfig {
                        description: "Play the game.".into(),
                        location: "Game Room".into(),
                        stop_condition: "game over".into(),
                    },
                },
                AgentConfig {
                    name: "Bob".into(),
                    public_bio: "Bob plays games.".into(),
                    private_bio: "GIRAFFE-9".into(),
                    directives: vec![],
                    initial_plan: PlanConfig {
                        description: "Play the game.".into(),
                        location: "Game Room".into(),
                        stop_condition: "game over".into(),
                    },
                },
            ],
            analysis: None,
        };
        load_world(&config).unwrap()
    }

    #[test]
    fn own_private_bio_only() {
        let world = world_with_sentinels();
        let alice = assemble_prompt(&world, "Alice", &[], "req", DEFAULT_TOKEN_BUDGET);
        let bob = assemble_prompt(&world, "Bob", &[], "req", DEFAULT_TOKEN_BUDGET);
        let alice_text = format!("{}{}{}", alice.system_text, alice.context_text, alice.request_text);
        let bob_text = format!("{}{}{}", bob.system_text, bob.context_text, bob.request_text);
        assert!(alice_text.contains("ZEBRA-7"));
        assert!(!alice_text.contains("GIRAFFE-9"));
        assert!(bob_text.contains("GIRAFFE-9"));
        assert!(!bob_text.contains("ZEBRA-7"));
    }

    #[test]
    fn priming_lands_in_system_text() {
        let world = world_with_sentinels();
        let bundle = assemble_prompt(&world, "Alice", &[], "req", DEFAULT_TOKEN_BUDGET);
        assert!(bundle
            .system_text
            .contains("playing a game called the Taxation Game"));
    }

    #[test]
    fn empty_world_sections_render_as_none() {
        let world = world_with_sentinels();
        let bundle = assemble_prompt(&world, "Alice", &[], "req", DEFAULT_TOKEN_BUDGET);
        assert!(bundle.context_text.contains("Relevant memories:\n(none)"));
        assert!(bundle.context_text.contains("Recent events:\n(none)"));
        assert!(bundle.token_count() > 0);
    }

    #[test]
    fn assembly_is_deterministic() {
        let world = world_with_sentinels();
        let a = assemble_prompt(&world, "Alice", &[], "req", DEFAULT_TOKEN_BUDGET);
        let b = assemble_prompt(&world, "Alice", &[], "req", DEFAULT_TOKEN_BUDGET);
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn only_witnessed_events_appear() {
        let mut world = world_with_sentinels();
        world
            .emit_event("Alice", EventKind::Speak, "Game Room", "Alice says: \"both see this\"")
            .unwrap();
        world.move_agent("Bob", "Moderation Room").unwrap();
        world
            .emit_event("Bob", EventKind::Speak, "Moderation Room", "Bob says: \"secret room talk\"")
            .unwrap();
        let alice = assemble_prompt(&world, "Alice", &[], "req", DEFAULT_TOKEN_BUDGET);
        assert!(alice.context_text.contains("both see this"));
        assert!(!alice.context_text.contains("secret room talk"));
        let bob = assemble_prompt(&world, "Bob", &[], "req", DEFAULT_TOKEN_BUDGET);
        assert!(bob.context_text.contains("secret room talk"));
    }

    #[test]
    fn truncation_drops_oldest_first_and_marks() {
        let mut world = world_with_sentinels();
        for i in 0..30 {
            world
                .emit_event(
                    "Alice",
                    EventKind::Speak,
                    "Game Room",
                    format!("Alice says: \"message number {i}\""),
                )
                .unwrap();
        }
        let full = assemble_prompt(&world, "Alice", &[], "req", DEFAULT_TOKEN_BUDGET);
        assert!(full.context_text.contains("message number 0"));
        let base_tokens = assemble_prompt(&world, "Alice", &[], "req", DEFAULT_TOKEN_BUDGET)
            .token_count();
        let tight = assemble_prompt(&world, "Alice", &[], "req", base_tokens - 40);
        assert!(tight.context_text.contains(TRUNCATION_MARKER));
        assert!(!tight.context_text.contains("message number 0"));
        assert!(tight.context_text.contains("message number 29"));
        assert!(tight.token_count() <= base_tokens - 40);
    }

    #[test]
    fn view_matches_prompt_visibility() {
        let mut world = world_with_sentinels();
        world.move_agent("Bob", "Moderation Room").unwrap();
        world
            .emit_event("Bob", EventKind::Speak, "Moderation Room", "Bob says: \"hidden\"")
            .unwrap();
        let view = agent_view(&world, "Alice");
        assert_eq!(view.name, "Alice");
        assert!(view.witnessed.iter().all(|e| e.witnessed_by("Alice")));
        assert!(view.public_bios.iter().any(|(n, _)| n == "Bob"));
        assert!(view.private_bio.contains("ZEBRA-7"));
        assert!(!format!("{view:?}").contains("GIRAFFE-9"));
    }
}
