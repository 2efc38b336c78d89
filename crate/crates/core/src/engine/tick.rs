//! The deterministic scheduler: one full agent loop (observe, memorize,
//! react, act) per agent per tick, agents strictly in config order.

use crate::cognition::{
    agent_view, importance_prompt, react, score_importance, Action, CognitionBackend, Decision,
};

use super::event::EventKind;
use super::world::{Memory, WorldState};
use super::EngineError;

/// Why [`run`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    /// The halt predicate fired after this tick.
    Halted { tick: u64 },
    /// The tick budget ran out first.
    Timeout { ticks: u64 },
}

/// Advances the world by one tick. Every agent observes newly witnessed
/// events, memorizes each with a backend-scored importance, reacts, and acts;
/// all resulting events carry the new tick.
pub fn advance_tick(
    world: &mut WorldState,
    backend: &mut dyn CognitionBackend,
) -> Result<(), EngineError> {
    world.tick += 1;
    world.reset_seq();
    let order: Vec<String> = world.agents.iter().map(|a| a.name.clone()).collect();
    for name in &order {
        observe_and_memorize(world, name, backend)?;
        let decision = react(world, name, backend).map_err(|source| EngineError::Backend {
            agent: name.clone(),
            tick: world.tick,
            source,
        })?;
        act(world, name, decision)?;
    }
    Ok(())
}

fn observe_and_memorize(
    world: &mut WorldState,
    name: &str,
    backend: &mut dyn CognitionBackend,
) -> Result<(), EngineError> {
    let observed = world.scratch[name].observed;
    let new_descriptions: Vec<String> = world.event_log[observed..]
        .iter()
        .filter(|e| e.witnessed_by(name))
        .map(|e| e.description.clone())
        .collect();
    world
        .scratch
        .get_mut(name)
        .expect("scratch exists for every agent")
        .observed = world.event_log.len();
    if new_descriptions.is_empty() {
        return Ok(());
    }
    let view = agent_view(world, name);
    for description in new_descriptions {
        let request = importance_prompt(world, name, &view, &description);
        let importance =
            score_importance(backend, &request).map_err(|source| EngineError::Backend {
                agent: name.to_string(),
                tick: world.tick,
                source,
            })?;
        world
            .scratch
            .get_mut(name)
            .expect("scratch exists for every agent")
            .memories
            .push(Memory {
                description,
                created_tick: world.tick,
                importance,
            });
    }
    Ok(())
}

fn act(world: &mut WorldState, name: &str, decision: Decision) -> Result<(), EngineError> {
    let location = world
        .agent(name)
        .expect("agent exists")
        .current_location
        .clone();
    match decision {
        Decision::ContinuePlan => {
            world.emit_event(name, EventKind::Wait, &location, format!("{name} waits."))?;
        }
        Decision::NewPlan(plan) => {
            world
                .scratch
                .get_mut(name)
                .expect("scratch exists for every agent")
                .plans
                .push(plan);
            world.emit_event(name, EventKind::Wait, &location, format!("{name} waits."))?;
        }
        Decision::Act(Action::Wait) => {
            world.emit_event(name, EventKind::Wait, &location, format!("{name} waits."))?;
        }
        Decision::Act(Action::Speak(text)) => {
            world.emit_event(
                name,
                EventKind::Speak,
                &location,
                format!("{name} says: \"{text}\""),
            )?;
        }
        Decision::Act(Action::Move(destination)) => {
            world.move_agent(name, &destination)?;
        }
    }
    Ok(())
}

/// Advances until `halt` returns true after a tick or `max_ticks` ticks ran.
pub fn run(
    world: &mut WorldState,
    backend: &mut dyn CognitionBackend,
    max_ticks: u64,
    halt: &dyn Fn(&WorldState) -> bool,
) -> Result<HaltReason, EngineError> {
    if max_ticks < 1 {
        return Err(EngineError::InvalidMaxTicks);
    }
    for _ in 0..max_ticks {
        advance_tick(world, backend)?;
        if halt(world) {
            return Ok(HaltReason::Halted { tick: world.tick });
        }
    }
    Ok(HaltReason::Timeout { ticks: max_ticks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cognition::{BackendError, BackendRequest, RequestKind, SamplingParams};
    use crate::engine::{
        load_world, AgentConfig, LocationConfig, PlanConfig, ScenarioConfig, SCHEMA_VERSION,
    };

    struct ScriptTable {
        lines: Vec<(&'static str, u64, &'static str)>,
    }

    impl CognitionBackend for ScriptTable {
        fn complete(
            &mut self,
            request: &BackendRequest,
            _sampling: &SamplingParams,
        ) -> Result<String, BackendError> {
            if request.kind == RequestKind::Importance {
                return Ok("5".into());
            }
            let reply = self
                .lines
                .iter()
                .find(|(agent, tick, _)| *agent == request.agent && *tick == request.view.tick)
                .map(|(_, _, line)| line.to_string())
                .unwrap_or_else(|| "WAIT".into());
            Ok(reply)
        }
    }

    fn config() -> ScenarioConfig {
        let agent = |name: &str, location: &str| AgentConfig {
            name: name.into(),
            public_bio: format!("{name} bio."),
            private_bio: String::new(),
            directives: vec![],
            initial_plan: PlanConfig {
                description: "Idle.".into(),
                location: location.into(),
                stop_condition: "never".into(),
            },
        };
        ScenarioConfig {
            schema_version: SCHEMA_VERSION.into(),
            seed: 9,
            max_ticks: 10,
            locations: vec![
                LocationConfig {
                    name: "Game Room".into(),
                    description: "Open.".into(),
                    allowed_agents: vec![],
                },
                LocationConfig {
                    name: "Moderation Room".into(),
                    description: "Private.".into(),
                    allowed_agents: vec![],
                },
            ],
            agents: vec![agent("Alice", "Game Room"), agent("Bob", "Game Room")],
            analysis: None,
        }
    }

    #[test]
    fn all_wait_tick_emits_one_wait_per_agent() {
        let mut world = load_world(&config()).unwrap();
        let mut backend = ScriptTable { lines: vec![] };
        advance_tick(&mut world, &mut backend).unwrap();
        assert_eq!(world.tick, 1);
        assert_eq!(world.event_log.len(), 2);
        assert_eq!(world.event_log[0].description, "Alice waits.");
        assert_eq!(world.event_log[1].description, "Bob waits.");
        assert_eq!(world.event_log[0].tick, 1);
        assert_eq!(world.event_log[0].seq, 1);
        assert_eq!(world.event_log[1].seq, 2);
    }

    #[test]
    fn move_updates_location_and_witnesses() {
        let mut world = load_world(&config()).unwrap();
        let mut backend = ScriptTable {
            lines: vec![("Alice", 1, "MOVE: Moderation Room")],
        };
        advance_tick(&mut world, &mut backend).unwrap();
        assert_eq!(world.agent("Alice").unwrap().current_location, "Moderation Room");
        let move_event = &world.event_log[0];
        assert_eq!(
            move_event.description,
            "Alice moves from Game Room to Moderation Room."
        );
        assert_eq!(move_event.location, "Game Room");
        assert!(move_event.witnessed_by("Bob"));
    }

    #[test]
    fn later_turn_agent_observes_same_tick_events() {
        let mut world = load_world(&config()).unwrap();
        let mut backend = ScriptTable {
            lines: vec![("Alice", 1, "SAY: hello there")],
        };
        advance_tick(&mut world, &mut backend).unwrap();
        // Bob's turn came after Alice spoke, so he memorized her line.
        let memories = &world.scratch["Bob"].memories;
        assert!(memories
            .iter()
            .any(|m| m.description == "Alice says: \"hello there\""));
        assert!(memories.iter().all(|m| m.created_tick == 1));
    }

    #[test]
    fn new_plan_is_pushed_and_agent_waits() {
        let mut world = load_world(&config()).unwrap();
        let mut backend = ScriptTable {
            lines: vec![("Alice", 1, "PLAN: watch the room @ Game Room UNTIL bored")],
        };
        advance_tick(&mut world, &mut backend).unwrap();
        let scratch = &world.scratch["Alice"];
        assert_eq!(scratch.plans.len(), 2);
        assert_eq!(scratch.current_plan().description, "watch the room");
        assert_eq!(scratch.current_plan().created_tick, 1);
        assert_eq!(world.event_log[0].description, "Alice waits.");
    }

    #[test]
    fn identical_runs_produce_identical_logs() {
        let lines = vec![
            ("Alice", 1, "SAY: round one"),
            ("Bob", 2, "MOVE: Moderation Room"),
            ("Bob", 4, "MOVE: Game Room"),
            ("Alice", 5, "PLAN: recap @ Game Room UNTIL done"),
        ];
        let mut logs = Vec::new();
        for _ in 0..2 {
            let mut world = load_world(&config()).unwrap();
            let mut backend = ScriptTable { lines: lines.clone() };
            for _ in 0..6 {
                advance_tick(&mut world, &mut backend).unwrap();
            }
            logs.push(serde_json::to_string(&world.event_log).unwrap());
        }
        assert_eq!(logs[0], logs[1]);
    }

    #[test]
    fn run_honors_max_ticks_and_halt() {
        let mut world = load_world(&config()).unwrap();
        let mut backend = ScriptTable { lines: vec![] };
        let reason = run(&mut world, &mut backend, 1, &|_| false).unwrap();
        assert_eq!(reason, HaltReason::Timeout { ticks: 1 });
        assert_eq!(world.tick, 1);

        let mut world = load_world(&config()).unwrap();
        let reason = run(&mut world, &mut backend, 10, &|_| true).unwrap();
        assert_eq!(reason, HaltReason::Halted { tick: 1 });
        assert_eq!(world.tick, 1);

        let mut world = load_world(&config()).unwrap();
        assert!(matches!(
            run(&mut world, &mut backend, 0, &|_| true),
            Err(EngineError::InvalidMaxTicks)
        ));
    }

    struct FailingBackend;

    impl CognitionBackend for FailingBackend {
        fn complete(
            &mut self,
            _request: &BackendRequest,
            _sampling: &SamplingParams,
        ) -> Result<String, BackendError> {
            Err(BackendError::Transport {
                attempts: 3,
                message: "down".into(),
            })
        }
    }

    #[test]
    fn backend_errors_carry_agent_and_tick() {
        let mut world = load_world(&config()).unwrap();
        let mut backend = FailingBackend;
        match advance_tick(&mut world, &mut backend) {
            Err(EngineError::Backend { agent, tick, .. }) => {
                assert_eq!(agent, "Alice");
                assert_eq!(tick, 1);
            }
            other => panic!("expected backend error, got {other:?}"),
        }
    }
}
