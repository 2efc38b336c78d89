//! World state: locations, agent profiles, per-agent scratch, and the event
//! emission / movement primitives.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use super::event::{Event, EventKind};
use super::EngineError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Location {
    pub name: String,
    pub description: String,
    /// Empty set means all agents are allowed.
    pub allowed_agents: BTreeSet<String>,
}

impl Location {
    pub fn allows(&self, agent: &str) -> bool {
        self.allowed_agents.is_empty() || self.allowed_agents.contains(agent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub description: String,
    pub location: String,
    pub stop_condition: String,
    pub created_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Memory {
    pub description: String,
    pub created_tick: u64,
    /// Always within [1, 10] after clamping.
    pub importance: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentProfile {
    pub name: String,
    pub public_bio: String,
    pub private_bio: String,
    pub directives: Vec<String>,
    pub initial_plan: Plan,
    pub current_location: String,
}

/// Mutable per-agent state that never appears in the event log: the plan
/// stack (current plan last), accumulated memories, and the log cursor that
/// marks how far the agent has observed.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AgentScratch {
    pub plans: Vec<Plan>,
    pub memories: Vec<Memory>,
    pub observed: usize,
}

impl AgentScratch {
    pub fn current_plan(&self) -> &Plan {
        self.plans.last().expect("scratch always holds a plan")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub locations: Vec<Location>,
    /// Turn order is the order agents appear here (config order).
    pub agents: Vec<AgentProfile>,
    pub event_log: Vec<Event>,
    pub rng_seed: u64,
    pub scratch: BTreeMap<String, AgentScratch>,
    pub(super) next_seq: u32,
}

/// Builds a tick-0 world from a validated config: empty log, agents placed
/// at their initial plan locations.
pub fn load_world(config: &ScenarioConfig) -> Result<WorldState, EngineError> {
    config.validate()?;
    let locations = config
        .locations
        .iter()
        .map(|l| Location {
            name: l.name.clone(),
            description: l.description.clone(),
            allowed_agents: l.allowed_agents.iter().cloned().collect(),
        })
        .collect();
    let mut agents = Vec::new();
    let mut scratch = BTreeMap::new();
    for a in &config.agents {
        let plan = Plan {
            description: a.initial_plan.description.clone(),
            location: a.initial_plan.location.clone(),
            stop_condition: a.initial_plan.stop_condition.clone(),
            created_tick: 0,
        };
        agents.push(AgentProfile {
            name: a.name.clone(),
            public_bio: a.public_bio.clone(),
            private_bio: a.private_bio.clone(),
            directives: a.directives.clone(),
            initial_plan: plan.clone(),
            current_location: a.initial_plan.location.clone(),
        });
        scratch.insert(
            a.name.clone(),
            AgentScratch {
                plans: vec![plan],
                memories: Vec::new(),
                observed: 0,
            },
        );
    }
    Ok(WorldState {
        tick: 0,
        locations,
        agents,
        event_log: Vec::new(),
        rng_seed: config.seed,
        scratch,
        next_seq: 0,
    })
}

impl WorldState {
    pub fn location(&self, name: &str) -> Option<&Location> {
        self.locations.iter().find(|l| l.name == name)
    }

    pub fn agent(&self, name: &str) -> Option<&AgentProfile> {
        self.agents.iter().find(|a| a.name == name)
    }

    fn agent_mut(&mut self, name: &str) -> Option<&mut AgentProfile> {
        self.agents.iter_mut().find(|a| a.name == name)
    }

    /// Agents currently present in `location`, in name order.
    pub fn occupants(&self, location: &str) -> BTreeSet<String> {
        self.agents
            .iter()
            .filter(|a| a.current_location == location)
            .map(|a| a.name.clone())
            .collect()
    }

    pub(super) fn reset_seq(&mut self) {
        self.next_seq = 0;
    }

    /// Appends an event acted by `actor` in `location`. Witnesses are the
    /// occupants of `location` at this instant; the actor must be among them.
    pub fn emit_event(
        &mut self,
        actor: &str,
        kind: EventKind,
        location: &str,
        description: impl Into<String>,
    ) -> Result<Event, EngineError> {
        if self.location(location).is_none() {
            return Err(EngineError::UnknownLocation(location.to_string()));
        }
        let witnesses = self.occupants(location);
        if !witnesses.contains(actor) {
            return Err(EngineError::ActorNotPresent {
                actor: actor.to_string(),
                location: location.to_string(),
            });
        }
        self.next_seq += 1;
        let event = Event {
            tick: self.tick,
            seq: self.next_seq,
            actor: actor.to_string(),
            location: location.to_string(),
            kind,
            description: description.into(),
            witnesses,
        };
        self.event_log.push(event.clone());
        Ok(event)
    }

    /// Relocates `agent` to `destination`, emitting a move event witnessed at
    /// the source. When the destination already holds other agents, an
    /// arrival system event is additionally emitted there so occupants (for
    /// one, players waiting in a game room) observe the return.
    pub fn move_agent(&mut self, agent: &str, destination: &str) -> Result<(), EngineError> {
        let source = self
            .agent(agent)
            .ok_or_else(|| EngineError::UnknownAgent(agent.to_string()))?
            .current_location
            .clone();
        let dest = self
            .location(destination)
            .ok_or_else(|| EngineError::UnknownLocation(destination.to_string()))?;
        if !dest.allows(agent) {
            return Err(EngineError::LocationNotAllowed {
                agent: agent.to_string(),
                location: destination.to_string(),
            });
        }
        let description = format!("{agent} moves from {source} to {destination}.");
        self.emit_event(agent, EventKind::Move, &source, description)?;
        if source == destination {
            return Ok(());
        }
        let destination_occupied = !self.occupants(destination).is_empty();
        self.agent_mut(agent)
            .expect("agent exists")
            .current_location = destination.to_string();
        if destination_occupied {
            let description = format!("{agent} arrives in {destination}.");
            self.emit_event(agent, EventKind::System, destination, description)?;
        }
        Ok(())
    }

    /// Events witnessed by `agent`, in log order.
    pub fn witnessed_events(&self, agent: &str) -> Vec<Event> {
        self.event_log
            .iter()
            .filter(|e| e.witnessed_by(agent))
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::config::{AgentConfig, LocationConfig, PlanConfig};
    use crate::engine::SCHEMA_VERSION;

    fn agent(name: &str, location: &str) -> AgentConfig {
        AgentConfig {
            name: name.into(),
            public_bio: format!("{name} bio."),
            private_bio: String::new(),
            directives: vec![],
            initial_plan: PlanConfig {
                description: "Wait around.".into(),
                location: location.into(),
                stop_condition: "never".into(),
            },
        }
    }

    fn two_room_config() -> ScenarioConfig {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION.into(),
            seed: 1,
            max_ticks: 10,
            locations: vec![
                LocationConfig {
                    name: "Game Room".into(),
                    description: "Players gather here.".into(),
                    allowed_agents: vec![],
                },
                LocationConfig {
                    name: "Moderation Room".into(),
                    description: "Private room.".into(),
                    allowed_agents: vec![],
                },
            ],
            agents: vec![
                agent("Alice", "Game Room"),
                agent("Bob", "Game Room"),
                agent("Casey", "Moderation Room"),
            ],
            analysis: None,
        }
    }

    #[test]
    fn load_places_agents_at_plan_locations() {
        let mut config = two_room_config();
        config.agents.push(agent("David", "Game Room"));
        config.agents.push(agent("Moderator", "Moderation Room"));
        let world = load_world(&config).unwrap();
        assert_eq!(world.tick, 0);
        assert!(world.event_log.is_empty());
        assert_eq!(world.agents.len(), 5);
        assert_eq!(world.agent("Moderator").unwrap().current_location, "Moderation Room");
        assert_eq!(world.agent("Alice").unwrap().current_location, "Game Room");
        assert_eq!(world.scratch["Alice"].plans.len(), 1);
    }

    #[test]
    fn witnesses_are_colocated_agents_only() {
        let mut world = load_world(&two_room_config()).unwrap();
        let event = world
            .emit_event("Alice", EventKind::Speak, "Game Room", "Alice says: \"hi\"")
            .unwrap();
        let expect: BTreeSet<String> = ["Alice".to_string(), "Bob".to_string()].into();
        assert_eq!(event.witnesses, expect);
        assert!(!event.witnessed_by("Casey"));
    }

    #[test]
    fn lone_actor_witnesses_itself() {
        let mut world = load_world(&two_room_config()).unwrap();
        let event = world
            .emit_event("Casey", EventKind::Wait, "Moderation Room", "Casey waits.")
            .unwrap();
        assert_eq!(event.witnesses.len(), 1);
        assert!(event.witnessed_by("Casey"));
    }

    #[test]
    fn absent_actor_cannot_emit() {
        let mut world = load_world(&two_room_config()).unwrap();
        let err = world
            .emit_event("Casey", EventKind::Speak, "Game Room", "x")
            .unwrap_err();
        assert!(matches!(err, EngineError::ActorNotPresent { .. }));
    }

    #[test]
    fn move_is_witnessed_at_source_with_arrival_when_occupied() {
        let mut world = load_world(&two_room_config()).unwrap();
        world.move_agent("Alice", "Moderation Room").unwrap();
        assert_eq!(world.agent("Alice").unwrap().current_location, "Moderation Room");
        let move_event = &world.event_log[0];
        assert_eq!(move_event.kind, EventKind::Move);
        assert_eq!(move_event.location, "Game Room");
        assert!(move_event.witnessed_by("Bob"));
        assert!(!move_event.witnessed_by("Casey"));
        // Casey occupies the destination, so an arrival system event follows.
        let arrival = &world.event_log[1];
        assert_eq!(arrival.kind, EventKind::System);
        assert_eq!(arrival.location, "Moderation Room");
        assert!(arrival.witnessed_by("Casey"));
        assert!(arrival.witnessed_by("Alice"));
        assert_eq!(arrival.description, "Alice arrives in Moderation Room.");
    }

    #[test]
    fn move_to_empty_destination_is_single_event() {
        let mut world = load_world(&two_room_config()).unwrap();
        world.move_agent("Casey", "Game Room").unwrap();
        assert_eq!(world.event_log.len(), 2); // move + arrival into occupied Game Room
        let mut world = load_world(&two_room_config()).unwrap();
        // Empty the destination first.
        world.move_agent("Casey", "Game Room").unwrap();
        let before = world.event_log.len();
        world.move_agent("Alice", "Moderation Room").unwrap();
        assert_eq!(world.event_log.len(), before + 1);
    }

    #[test]
    fn noop_move_changes_nothing_but_the_log() {
        let mut world = load_world(&two_room_config()).unwrap();
        world.move_agent("Alice", "Game Room").unwrap();
        assert_eq!(world.agent("Alice").unwrap().current_location, "Game Room");
        assert_eq!(world.event_log.len(), 1);
        assert_eq!(
            world.event_log[0].description,
            "Alice moves from Game Room to Game Room."
        );
    }

    #[test]
    fn movement_respects_allowed_agents() {
        let mut config = two_room_config();
        config.locations.push(LocationConfig {
            name: "Work Room".into(),
            description: "Students only.".into(),
            allowed_agents: vec!["Alice".into(), "Bob".into()],
        });
        let mut world = load_world(&config).unwrap();
        assert!(matches!(
            world.move_agent("Casey", "Work Room"),
            Err(EngineError::LocationNotAllowed { .. })
        ));
        world.move_agent("Bob", "Work Room").unwrap();
        assert_eq!(world.agent("Bob").unwrap().current_location, "Work Room");
        assert!(matches!(
            world.move_agent("Bob", "Lounge"),
            Err(EngineError::UnknownLocation(_))
        ));
        assert!(matches!(
            world.move_agent("Nobody", "Game Room"),
            Err(EngineError::UnknownAgent(_))
        ));
    }
}
