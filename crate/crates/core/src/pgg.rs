//! Public goods game harness: spec validation, scenario construction with
//! the turn-taking protocol encoded as directives, priming injections, exact
//! payoff arithmetic, multi-round endowment carryover, and a full game runner
//! that extracts contributions back out of the event log.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cognition::CognitionBackend;
use crate::engine::{
    load_world, run, AgentConfig, AnalysisSpec, EngineError, EventKind, HaltReason,
    LocationConfig, PggAnalysis, PggPlayer, PlanConfig, ScenarioConfig, WorldState,
    SCHEMA_VERSION,
};
use crate::extract::{
    extract_contribution, round_windows, ExtractError, ExtractValue, ExtractionRecord,
    Method,
};
use crate::money::{Cents, Multiplier};

pub const GAME_ROOM: &str = "Game Room";
pub const MODERATION_ROOM: &str = "Moderation Room";
pub const MODERATOR: &str = "Moderator";

#[derive(Debug, Error)]
pub enum PggError {
    #[error("a public goods game needs at least 3 players, got {0}")]
    TooFewPlayers(usize),
    #[error("game spec invalid: {0}")]
    Spec(String),
    #[error("endowment and contribution lists differ in length ({endowments} vs {contributions})")]
    LengthMismatch {
        endowments: usize,
        contributions: usize,
    },
    #[error("player {index} contributed {contribution} with endowment {endowment}")]
    ContributionOutOfBounds {
        index: usize,
        contribution: Cents,
        endowment: Cents,
    },
    #[error("round {round} extraction failed: {source}")]
    Extraction {
        round: u32,
        #[source]
        source: ExtractError,
    },
    #[error(
        "game timed out after {ticks} ticks; players without a round-{round} contribution: {missing:?}"
    )]
    Timeout {
        ticks: u64,
        round: u32,
        missing: Vec<String>,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Valence {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SentenceSet {
    Unity,
    Proportionality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Priming {
    #[default]
    None,
    GameName {
        valence: Valence,
    },
    Sentences {
        set: SentenceSet,
    },
}

/// A canonical private-biography injection, bit-exact per condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrimingText {
    pub condition: Priming,
    pub text: String,
}

/// The exact injection string for a non-none priming condition.
pub fn priming_injection(condition: Priming) -> Option<PrimingText> {
    let text = match condition {
        Priming::None => return None,
        Priming::GameName {
            valence: Valence::Positive,
        } => "You are playing a game called the Teamwork Game.".to_string(),
        Priming::GameName {
            valence: Valence::Negative,
        } => "You are playing a game called the Taxation Game.".to_string(),
        Priming::Sentences {
            set: SentenceSet::Unity,
        } => "You read the following sentences prior to playing the game: \
              'we are family,' 'mine is also yours,' and 'caring for each other.'"
            .to_string(),
        Priming::Sentences {
            set: SentenceSet::Proportionality,
        } => "You read the following sentences prior to playing the game: \
              'how are you useful for me,' 'I want to profit,' and 'making a deal.'"
            .to_string(),
    };
    Some(PrimingText { condition, text })
}

fn default_rounds() -> u32 {
    1
}

fn default_currency() -> String {
    "$".to_string()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub players: Vec<PggPlayer>,
    #[serde(default)]
    pub multiplier: Multiplier,
    #[serde(default = "default_rounds")]
    pub rounds: u32,
    #[serde(default)]
    pub transparency: bool,
    #[serde(default)]
    pub priming: Priming,
    #[serde(default = "default_currency")]
    pub currency_unit: String,
}

impl GameSpec {
    pub fn validate(&self) -> Result<(), PggError> {
        if self.players.len() < 3 {
            return Err(PggError::TooFewPlayers(self.players.len()));
        }
        if self.rounds < 1 {
            return Err(PggError::Spec("rounds must be at least 1".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for p in &self.players {
            if p.name == MODERATOR {
                return Err(PggError::Spec(format!(
                    "player name {MODERATOR:?} collides with the moderator"
                )));
            }
            if !seen.insert(&p.name) {
                return Err(PggError::Spec(format!("duplicate player name {:?}", p.name)));
            }
            if p.endowment.0 < 0 {
                return Err(PggError::Spec(format!(
                    "player {:?} has negative endowment",
                    p.name
                )));
            }
        }
        Ok(())
    }

    pub fn contribution_location(&self) -> &'static str {
        if self.transparency {
            GAME_ROOM
        } else {
            MODERATION_ROOM
        }
    }
}

/// Exact per-round accounting. The even pool share is rounded half-to-even
/// to cents once and applied identically to every player.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundLedger {
    pub round: u32,
    pub endowments: Vec<Cents>,
    pub contributions: Vec<Cents>,
    pub pool: Cents,
    pub payoffs: Vec<Cents>,
}

/// π_i = (e_i − c_i) + share, share = round_half_even(M·P/n).
pub fn compute_payoffs(
    endowments: &[Cents],
    contributions: &[Cents],
    multiplier: &Multiplier,
) -> Result<Vec<Cents>, PggError> {
    if endowments.len() != contributions.len() {
        return Err(PggError::LengthMismatch {
            endowments: endowments.len(),
            contributions: contributions.len(),
        });
    }
    if endowments.len() < 3 {
        return Err(PggError::TooFewPlayers(endowments.len()));
    }
    for (index, (&e, &c)) in endowments.iter().zip(contributions).enumerate() {
        if c.0 < 0 || c > e {
            return Err(PggError::ContributionOutOfBounds {
                index,
                contribution: c,
                endowment: e,
            });
        }
    }
    let pool: Cents = contributions.iter().copied().sum();
    let share = multiplier.share(pool, endowments.len());
    Ok(endowments
        .iter()
        .zip(contributions)
        .map(|(&e, &c)| e - c + share)
        .collect())
}

/// Next-round endowments: each player's payoff carries over whole.
pub fn carry_endowments(ledger: &RoundLedger) -> Vec<Cents> {
    ledger.payoffs.clone()
}

fn money(amount: Cents, unit: &str) -> String {
    format!("{unit}{}", amount.decimal_string())
}

/// Emits the scenario config realizing `spec`: moderator plus players with
/// turn-taking directives, endowments in public bios, priming in private
/// bios, and one or two rooms depending on transparency.
pub fn build_pgg_world(spec: &GameSpec, seed: u64) -> Result<ScenarioConfig, PggError> {
    spec.validate()?;
    let n = spec.players.len();
    let rounds = spec.rounds;
    let unit = &spec.currency_unit;
    let multiplier = spec.multiplier.canonical_string();
    let max_ticks = rounds as u64 * (3 * n as u64 + 6) + 4;

    let mut locations = vec![LocationConfig {
        name: GAME_ROOM.into(),
        description: if spec.transparency {
            "The game room where players gather and announce their contributions.".into()
        } else {
            "The main room where players gather.".into()
        },
        allowed_agents: vec![],
    }];
    if !spec.transparency {
        locations.push(LocationConfig {
            name: MODERATION_ROOM.into(),
            description: "A private room where players tell the moderator their contribution."
                .into(),
            allowed_agents: vec![],
        });
    }

    let moderator_room = if spec.transparency {
        GAME_ROOM
    } else {
        MODERATION_ROOM
    };
    let mut moderator_directives = vec![if spec.transparency {
        "Record each player's contribution as they announce it in the Game Room.".to_string()
    } else {
        "Record each player's contribution as they tell it to you in the Moderation Room."
            .to_string()
    }];
    if spec.transparency {
        moderator_directives.push(
            "Once all players have announced their contributions this round, announce payoffs."
                .into(),
        );
    } else {
        moderator_directives.push(
            "Once all players have made their contributions this round, move to the Game Room \
             and announce payoffs."
                .into(),
        );
    }
    moderator_directives.push(format!(
        "Payoffs are computed as follows: each player keeps the part of their endowment they \
         did not contribute and receives an even share of {multiplier} times the public pool."
    ));
    if rounds > 1 {
        moderator_directives.push(format!(
            "The game lasts {rounds} rounds. After announcing payoffs, announce that the next \
             round begins and that each player's endowment is now their payoff{}.",
            if spec.transparency {
                ""
            } else {
                ", then return to the Moderation Room"
            }
        ));
    }
    moderator_directives
        .push("After announcing the final round's payoffs, announce that the game is over.".into());

    let mut agents = vec![AgentConfig {
        name: MODERATOR.into(),
        public_bio: "This agent plays the role of the moderator.".into(),
        private_bio: String::new(),
        directives: moderator_directives,
        initial_plan: PlanConfig {
            description: "Wait for all players to make their contribution.".into(),
            location: moderator_room.into(),
            stop_condition: "all players have contributed this round".into(),
        },
    }];

    for (i, player) in spec.players.iter().enumerate() {
        let name = &player.name;
        let mut directives = Vec::new();
        if i == 0 {
            directives.push("You are the first player to contribute each round.".to_string());
        } else {
            directives.push(format!(
                "The player before you is {}.",
                spec.players[i - 1].name
            ));
        }
        if spec.transparency {
            if i == 0 {
                directives.push(
                    "At the start of each round, announce your contribution in the Game Room."
                        .into(),
                );
            } else {
                directives.push(
                    "Once the player before you has announced their contribution, announce \
                     yours in the Game Room."
                        .into(),
                );
            }
            directives.push(format!(
                "Announce your contribution as a whole dollar amount, for example: I contribute \
                 {unit}10 to the public pool."
            ));
            directives.push(
                "Do not otherwise engage with the other players until the Moderator announces \
                 payoffs."
                    .into(),
            );
        } else {
            if i == 0 {
                directives.push(
                    "At the start of each round, move to the Moderation Room to make your \
                     contribution."
                        .into(),
                );
            } else {
                directives.push(
                    "Once the player before you has returned from the Moderation Room, move to \
                     the Moderation Room to make your contribution."
                        .into(),
                );
            }
            directives.push(format!(
                "Tell the Moderator your contribution as a whole dollar amount, for example: I \
                 contribute {unit}10 to the public pool."
            ));
            directives.push("After making your contribution, return to the Game Room.".into());
            directives.push(
                "Do not engage with the other players in the Game Room until the Moderator \
                 announces payoffs."
                    .into(),
            );
        }
        directives.push(format!(
            "Your payoff is the amount of your endowment you keep plus an even share of \
             {multiplier} times the public pool, split among all {n} players."
        ));
        if rounds > 1 {
            directives.push(format!(
                "The game lasts {rounds} rounds. Your endowment for the next round equals your \
                 payoff from this round."
            ));
        }
        let plan_description = if i == 0 {
            "Make my contribution at the start of each round.".to_string()
        } else {
            format!(
                "Wait for {} to contribute, then make my contribution.",
                spec.players[i - 1].name
            )
        };
        agents.push(AgentConfig {
            name: name.clone(),
            public_bio: format!(
                "{name} is playing a public goods game. {name}'s initial endowment is {}.",
                money(player.endowment, unit)
            ),
            private_bio: priming_injection(spec.priming)
                .map(|p| p.text)
                .unwrap_or_default(),
            directives,
            initial_plan: PlanConfig {
                description: plan_description,
                location: GAME_ROOM.into(),
                stop_condition: "the game is over".into(),
            },
        });
    }

    let config = ScenarioConfig {
        schema_version: SCHEMA_VERSION.into(),
        seed,
        max_ticks,
        locations,
        agents,
        analysis: Some(AnalysisSpec::Pgg(PggAnalysis {
            players: spec.players.clone(),
            multiplier: spec.multiplier.clone(),
            rounds,
            transparency: spec.transparency,
            contribution_location: spec.contribution_location().into(),
            moderator: MODERATOR.into(),
        })),
    };
    config.validate()?;
    Ok(config)
}

#[derive(Debug)]
pub struct GameResult {
    pub players: Vec<String>,
    pub ledgers: Vec<RoundLedger>,
    pub records: Vec<ExtractionRecord>,
    pub world: WorldState,
    pub halted_at: u64,
}

fn game_over(world: &WorldState) -> bool {
    world.event_log.iter().any(|e| {
        e.kind == EventKind::Speak
            && e.actor == MODERATOR
            && e.description.contains("The game is over.")
    })
}

/// Runs one full game: simulate until the moderator declares the game over,
/// then extract every contribution from the log and compute the ledgers.
pub fn run_game(
    spec: &GameSpec,
    backend: &mut dyn CognitionBackend,
    seed: u64,
) -> Result<GameResult, PggError> {
    let config = build_pgg_world(spec, seed)?;
    let analysis = match &config.analysis {
        Some(AnalysisSpec::Pgg(analysis)) => analysis.clone(),
        _ => unreachable!("build_pgg_world always attaches a pgg analysis"),
    };
    let mut world = load_world(&config)?;
    let reason = run(&mut world, backend, config.max_ticks, &game_over)?;
    let run_id = format!("seed-{seed}");
    let (ledgers, records) = analyze_game(&world, &analysis, &run_id, reason)?;
    Ok(GameResult {
        players: analysis.players.iter().map(|p| p.name.clone()).collect(),
        ledgers,
        records,
        world,
        halted_at: match reason {
            HaltReason::Halted { tick } => tick,
            HaltReason::Timeout { ticks } => ticks,
        },
    })
}

/// Extracts every contribution from a finished game's log and recomputes the
/// per-round ledgers with exact carryover. A timed-out run errors with the
/// stalled round and the players whose contributions are missing from it.
pub fn analyze_game(
    world: &WorldState,
    analysis: &PggAnalysis,
    run_id: &str,
    reason: HaltReason,
) -> Result<(Vec<RoundLedger>, Vec<ExtractionRecord>), PggError> {
    let names: Vec<String> = analysis.players.iter().map(|p| p.name.clone()).collect();
    let windows = round_windows(&world.event_log, &analysis.moderator, analysis.rounds);
    if let HaltReason::Timeout { ticks } = reason {
        let current = windows
            .iter()
            .find(|w| w.end == (u64::MAX, u32::MAX))
            .map(|w| w.round)
            .unwrap_or(analysis.rounds);
        let window = &windows[current as usize - 1];
        let missing: Vec<String> = names
            .iter()
            .filter(|name| {
                extract_contribution(
                    &world.event_log,
                    name,
                    &analysis.contribution_location,
                    window,
                )
                .is_err()
            })
            .cloned()
            .collect();
        return Err(PggError::Timeout {
            ticks,
            round: current,
            missing,
        });
    }

    let mut ledgers = Vec::new();
    let mut records = Vec::new();
    let mut endowments: Vec<Cents> = analysis.players.iter().map(|p| p.endowment).collect();
    for window in &windows {
        let mut contributions = Vec::new();
        for name in &names {
            let (amount, evidence) = extract_contribution(
                &world.event_log,
                name,
                &analysis.contribution_location,
                window,
            )
            .map_err(|source| PggError::Extraction {
                round: window.round,
                source,
            })?;
            records.push(ExtractionRecord {
                run_id: run_id.to_string(),
                agent: name.clone(),
                round: window.round,
                value: Some(ExtractValue::Money(amount)),
                evidence: vec![evidence],
                method: Method::Regex,
                needs_review: false,
            });
            contributions.push(amount);
        }
        let payoffs = compute_payoffs(&endowments, &contributions, &analysis.multiplier)?;
        let ledger = RoundLedger {
            round: window.round,
            endowments: endowments.clone(),
            contributions: contributions.clone(),
            pool: contributions.iter().copied().sum(),
            payoffs,
        };
        endowments = carry_endowments(&ledger);
        ledgers.push(ledger);
    }
    Ok((ledgers, records))
}

/// Builds the round-r results announcement the scripted moderator speaks.
/// The final round's announcement ends the game.
pub fn results_announcement(
    round: u32,
    rounds: u32,
    names: &[String],
    payoffs: &[Cents],
    unit: &str,
) -> String {
    let listed: Vec<String> = names
        .iter()
        .zip(payoffs)
        .map(|(n, p)| format!("{n} {}", money(*p, unit)))
        .collect();
    let mut text = format!("Round {round} results: payoffs are {}.", listed.join(", "));
    if round < rounds {
        text.push_str(&format!(
            " Round {} begins; each player's endowment is now their payoff.",
            round + 1
        ));
    } else {
        text.push_str(" The game is over.");
    }
    text
}
