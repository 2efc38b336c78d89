//! Deterministic scripted policies for the canonical experiment packs.
//!
//! Each policy is a pure function of the requesting agent's observable view
//! plus the per-(seed, agent, tick) RNG that [`Scripted`](crate::cognition::Scripted)
//! derives, so whole runs replay byte-identically from a seed. The policies
//! read only what a live model could read: the rendered biographies,
//! directives, and witnessed events. Prompt parsing assumes the default `$`
//! currency unit used by every shipped pack.

use std::sync::OnceLock;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

use crate::cognition::{normal_draw, AgentView, BackendRequest, RequestKind, ScriptedPolicy};
use crate::engine::EventKind;
use crate::money::{Cents, Multiplier};
use crate::pgg::{compute_payoffs, results_announcement, GAME_ROOM, MODERATION_ROOM, MODERATOR};
use crate::scenarios::{CLASSROOM, OFFICE, RECEPTACLE, WORK_ROOM};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),
    #[error("bad parameters for policy {policy:?}: {message}")]
    BadParams { policy: String, message: String },
}

/// Which mean table a PGG player draws from. The transparency-off cell and
/// the equal-$20 endowment cell are observationally identical to an agent,
/// yet the published agent results differ (35% vs 39%), so the experiment
/// family is a policy parameter rather than an inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PggExperiment {
    Priming,
    Transparency,
    Endowment,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PggParams {
    experiment: PggExperiment,
    sd: f64,
    fade: bool,
}

impl Default for PggParams {
    fn default() -> Self {
        PggParams {
            experiment: PggExperiment::Priming,
            sd: 0.10,
            fade: false,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ClassroomParams {
    cheat_probability: f64,
}

impl Default for ClassroomParams {
    fn default() -> Self {
        ClassroomParams {
            cheat_probability: 0.6,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct CartParams {
    return_prob: f64,
    return_prob_staked: f64,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            return_prob: 0.9,
            return_prob_staked: 0.2,
        }
    }
}

/// Builds a policy by registry id: `"pgg"`, `"classroom"`, `"cart"`, or
/// `"wait"`. `params` is the pack's policy parameter object; `null` means
/// defaults.
pub fn build_policy(
    id: &str,
    params: &serde_json::Value,
) -> Result<Box<dyn ScriptedPolicy>, PolicyError> {
    let bad = |message: String| PolicyError::BadParams {
        policy: id.to_string(),
        message,
    };
    let parse = |value: &serde_json::Value| -> serde_json::Value {
        if value.is_null() {
            serde_json::Value::Object(serde_json::Map::new())
        } else {
            value.clone()
        }
    };
    match id {
        "pgg" => {
            let p: PggParams =
                serde_json::from_value(parse(params)).map_err(|e| bad(e.to_string()))?;
            if !(p.sd > 0.0 && p.sd <= 1.0) {
                return Err(bad(format!("sd must be in (0, 1], got {}", p.sd)));
            }
            Ok(Box::new(PggPolicy {
                experiment: p.experiment,
                sd: p.sd,
                fade: p.fade,
            }))
        }
        "classroom" => {
            let p: ClassroomParams =
                serde_json::from_value(parse(params)).map_err(|e| bad(e.to_string()))?;
            if !(0.0..=1.0).contains(&p.cheat_probability) {
                return Err(bad(format!(
                    "cheat_probability must be in [0, 1], got {}",
                    p.cheat_probability
                )));
            }
            Ok(Box::new(ClassroomPolicy {
                cheat_probability: p.cheat_probability,
            }))
        }
        "cart" => {
            let p: CartParams =
                serde_json::from_value(parse(params)).map_err(|e| bad(e.to_string()))?;
            for (name, prob) in [
                ("return_prob", p.return_prob),
                ("return_prob_staked", p.return_prob_staked),
            ] {
                if !(0.0..=1.0).contains(&prob) {
                    return Err(bad(format!("{name} must be in [0, 1], got {prob}")));
                }
            }
            Ok(Box::new(CartPolicy {
                return_prob: p.return_prob,
                return_prob_staked: p.return_prob_staked,
            }))
        }
        "wait" => Ok(Box::new(WaitPolicy)),
        other => Err(PolicyError::UnknownPolicy(other.to_string())),
    }
}

/// Does nothing, forever. Useful for timeout and privacy fixtures.
pub struct WaitPolicy;

impl ScriptedPolicy for WaitPolicy {
    fn reply(&self, request: &BackendRequest, _rng: &mut ChaCha8Rng) -> String {
        match request.kind {
            RequestKind::Importance => "1".into(),
            RequestKind::React => "WAIT".into(),
        }
    }
}

fn dollar_amounts(text: &str) -> Vec<Cents> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"\$\s?\d{1,9}(?:\.\d{1,2})?").expect("valid regex"));
    re.find_iter(text)
        .filter_map(|m| Cents::parse(m.as_str()).ok())
        .collect()
}

fn speaks_by<'a>(view: &'a AgentView, actor: &str) -> impl Iterator<Item = &'a str> + 'a {
    let actor = actor.to_string();
    let prefix = format!("{actor} says: ");
    view.witnessed.iter().filter_map(move |e| {
        (e.kind == EventKind::Speak && e.actor == actor && e.description.starts_with(&prefix))
            .then_some(e.description.as_str())
    })
}

fn game_is_over(view: &AgentView) -> bool {
    view.witnessed
        .iter()
        .any(|e| e.kind == EventKind::Speak && e.description.contains("The game is over."))
}

/// Scripted public goods game play for both the moderator and the players.
/// Players follow the turn-taking protocol in their directives and draw a
/// contribution fraction from the mean table for the configured experiment;
/// the moderator tallies contributions and announces exact payoffs.
pub struct PggPolicy {
    experiment: PggExperiment,
    sd: f64,
    fade: bool,
}

impl PggPolicy {
    fn results_announced(view: &AgentView) -> u32 {
        let prefix = format!("{MODERATOR} says: \"Round ");
        view.witnessed
            .iter()
            .filter(|e| {
                e.kind == EventKind::Speak
                    && e.actor == MODERATOR
                    && e.description.starts_with(&prefix)
                    && e.description.contains(" results: ")
            })
            .count() as u32
    }

    fn total_rounds(view: &AgentView) -> u32 {
        static RE: OnceLock<Regex> = OnceLock::new();
        let re =
            RE.get_or_init(|| Regex::new(r"The game lasts (\d+) rounds\.").expect("valid regex"));
        view.directives
            .iter()
            .find_map(|d| re.captures(d))
            .and_then(|c| c[1].parse().ok())
            .unwrap_or(1)
    }

    fn contributions_spoken(view: &AgentView, actor: &str) -> u32 {
        speaks_by(view, actor)
            .filter(|d| d.contains("I contribute "))
            .count() as u32
    }

    fn transparency(view: &AgentView) -> bool {
        !view
            .directives
            .iter()
            .any(|d| d.contains(MODERATION_ROOM))
    }

    fn predecessor(view: &AgentView) -> Option<String> {
        static RE: OnceLock<Regex> = OnceLock::new();
        let re = RE.get_or_init(|| {
            Regex::new(r"The player before you is (.+)\.").expect("valid regex")
        });
        view.directives
            .iter()
            .find_map(|d| re.captures(d))
            .map(|c| c[1].to_string())
    }

    fn endowment_of(bio: &str) -> Option<Cents> {
        dollar_amounts(bio).into_iter().next()
    }

    /// Player names in turn order, read from the other agents' public bios.
    /// `public_bios` preserves config order, which is the turn order.
    fn players_of(view: &AgentView) -> Vec<(String, Cents)> {
        let mut players: Vec<(String, Cents)> = view
            .public_bios
            .iter()
            .filter(|(_, bio)| bio.contains("initial endowment is"))
            .filter_map(|(name, bio)| Self::endowment_of(bio).map(|e| (name.clone(), e)))
            .collect();
        if view.public_bio.contains("initial endowment is") {
            if let Some(own) = Self::endowment_of(&view.public_bio) {
                players.push((view.name.clone(), own));
            }
        }
        players
    }

    fn mean_for(&self, view: &AgentView, round: u32) -> f64 {
        match self.experiment {
            PggExperiment::Priming => {
                let bio = &view.private_bio;
                let step = (round.saturating_sub(1)) as f64;
                if bio.contains("Teamwork Game") {
                    if self.fade {
                        0.75 - 0.05 * step
                    } else {
                        0.70
                    }
                } else if bio.contains("Taxation Game") {
                    if self.fade {
                        0.30 + 0.0375 * step
                    } else {
                        0.30
                    }
                } else if bio.contains("we are family") {
                    0.65
                } else if bio.contains("I want to profit") {
                    0.30
                } else {
                    0.50
                }
            }
            PggExperiment::Transparency => {
                if Self::transparency(view) {
                    0.60
                } else {
                    0.35
                }
            }
            PggExperiment::Endowment => {
                let players = Self::players_of(view);
                let own = Self::endowment_of(&view.public_bio);
                let equal = players.windows(2).all(|w| w[0].1 == w[1].1);
                match (equal, own.map(|e| e.whole_dollars())) {
                    (true, Some(20)) => 0.39,
                    (true, Some(50)) => 0.48,
                    (true, Some(80)) => 0.63,
                    (false, Some(20)) => 0.35,
                    (false, Some(50)) => 0.42,
                    (false, Some(80)) => 0.44,
                    _ => 0.50,
                }
            }
        }
    }

    fn say_contribution(&self, view: &AgentView, rng: &mut ChaCha8Rng, round: u32) -> String {
        let endowment = Self::endowment_of(&view.public_bio).unwrap_or(Cents::ZERO);
        let mean = self.mean_for(view, round);
        let frac = normal_draw(rng, mean, self.sd).clamp(0.0, 1.0);
        let cap = endowment.whole_dollars();
        let dollars = ((frac * endowment.0 as f64 / 100.0).round() as i64).clamp(0, cap);
        format!("SAY: I contribute ${dollars} to the public pool.")
    }

    fn player_reply(&self, view: &AgentView, rng: &mut ChaCha8Rng) -> String {
        if game_is_over(view) {
            return "WAIT".into();
        }
        let round = Self::results_announced(view) + 1;
        let contributed = Self::contributions_spoken(view, &view.name) >= round;
        if Self::transparency(view) {
            if contributed {
                return "WAIT".into();
            }
            if self.my_turn(view, round) {
                return self.say_contribution(view, rng, round);
            }
            return "WAIT".into();
        }
        if view.location == MODERATION_ROOM {
            if contributed {
                return format!("MOVE: {GAME_ROOM}");
            }
            return self.say_contribution(view, rng, round);
        }
        if contributed {
            return "WAIT".into();
        }
        if self.my_turn(view, round) {
            return format!("MOVE: {MODERATION_ROOM}");
        }
        "WAIT".into()
    }

    /// First player: any round it has not yet contributed to is its turn.
    /// Later players: the predecessor must have finished this round, which
    /// shows up as its round-count of arrivals back in the game room, or of
    /// announcements under transparency.
    fn my_turn(&self, view: &AgentView, round: u32) -> bool {
        let Some(pred) = Self::predecessor(view) else {
            return true;
        };
        if Self::transparency(view) {
            return Self::contributions_spoken(view, &pred) >= round;
        }
        let arrival = format!("{pred} arrives in {GAME_ROOM}.");
        let arrivals = view
            .witnessed
            .iter()
            .filter(|e| e.kind == EventKind::System && e.description == arrival)
            .count() as u32;
        arrivals >= round
    }

    fn multiplier_of(view: &AgentView) -> Multiplier {
        static RE: OnceLock<Regex> = OnceLock::new();
        let re = RE.get_or_init(|| {
            Regex::new(r"share of (\S+) times the public pool").expect("valid regex")
        });
        let parsed = view
            .directives
            .iter()
            .find_map(|d| re.captures(d))
            .and_then(|c| Multiplier::parse(&c[1]).ok());
        match parsed {
            Some(m) => m,
            None => {
                log::warn!("moderator directives carry no readable multiplier; assuming default");
                Multiplier::default()
            }
        }
    }

    fn moderator_reply(&self, view: &AgentView) -> String {
        if game_is_over(view) {
            return "WAIT".into();
        }
        let transparency = Self::transparency(view);
        let announced = Self::results_announced(view);
        let round = announced + 1;
        let rounds = Self::total_rounds(view);
        let players = Self::players_of(view);
        let n = players.len() as u32;
        if n < 3 {
            return "WAIT".into();
        }

        let mut order: Vec<String> = Vec::new();
        let mut amounts: Vec<(String, Cents)> = Vec::new();
        for event in &view.witnessed {
            if event.kind != EventKind::Speak || !event.description.contains("I contribute ") {
                continue;
            }
            let Some((name, _)) = players.iter().find(|(name, _)| &event.actor == name) else {
                continue;
            };
            let Some(amount) = dollar_amounts(&event.description).into_iter().next() else {
                continue;
            };
            if !order.contains(name) {
                order.push(name.clone());
            }
            amounts.push((name.clone(), amount));
        }
        let complete = order.len() as u32 == n
            && order
                .iter()
                .all(|name| amounts.iter().filter(|(a, _)| a == name).count() as u32 >= round);
        if !complete {
            if !transparency && view.location != MODERATION_ROOM {
                return format!("MOVE: {MODERATION_ROOM}");
            }
            return "WAIT".into();
        }
        if !transparency && view.location != GAME_ROOM {
            return format!("MOVE: {GAME_ROOM}");
        }

        let mut endowments: Vec<Cents> = order
            .iter()
            .map(|name| {
                players
                    .iter()
                    .find(|(n, _)| n == name)
                    .map(|(_, e)| *e)
                    .unwrap_or(Cents::ZERO)
            })
            .collect();
        let mut payoffs = Vec::new();
        for r in 0..round {
            let contributions: Vec<Cents> = order
                .iter()
                .map(|name| {
                    amounts
                        .iter()
                        .filter(|(a, _)| a == name)
                        .nth(r as usize)
                        .map(|(_, c)| *c)
                        .unwrap_or(Cents::ZERO)
                })
                .collect();
            match compute_payoffs(&endowments, &contributions, &Self::multiplier_of(view)) {
                Ok(p) => payoffs = p,
                Err(e) => {
                    log::warn!("moderator could not compute payoffs: {e}");
                    return "WAIT".into();
                }
            }
            endowments = payoffs.clone();
        }
        format!(
            "SAY: {}",
            results_announcement(round, rounds, &order, &payoffs, "$")
        )
    }
}

impl ScriptedPolicy for PggPolicy {
    fn reply(&self, request: &BackendRequest, rng: &mut ChaCha8Rng) -> String {
        if request.kind == RequestKind::Importance {
            return "5".into();
        }
        let view = &request.view;
        if view.name == MODERATOR {
            self.moderator_reply(view)
        } else {
            self.player_reply(view, rng)
        }
    }
}

/// Scripted classroom play. The professor announces assignments on the
/// cadence its directives state; students answer each announcement with how
/// late they will be, and the procrastinator may float a copy request in the
/// work room during the second assignment period when the late policy is
/// harsh, the assignment is hard, and the professor cannot overhear.
pub struct ClassroomPolicy {
    cheat_probability: f64,
}

impl ClassroomPolicy {
    fn cadence(view: &AgentView) -> Option<(u64, u32)> {
        static RE: OnceLock<Regex> = OnceLock::new();
        let re = RE.get_or_init(|| {
            Regex::new(r"every (\d+) ticks, (\d+) in total").expect("valid regex")
        });
        view.directives.iter().find_map(|d| {
            re.captures(d)
                .and_then(|c| Some((c[1].parse().ok()?, c[2].parse().ok()?)))
        })
    }

    fn student_interval(view: &AgentView) -> Option<u64> {
        static RE: OnceLock<Regex> = OnceLock::new();
        let re = RE.get_or_init(|| Regex::new(r"every (\d+) ticks").expect("valid regex"));
        view.directives
            .iter()
            .find(|d| d.contains(CLASSROOM))
            .and_then(|d| re.captures(d))
            .and_then(|c| c[1].parse().ok())
    }

    fn professor_name(view: &AgentView) -> String {
        view.public_bios
            .iter()
            .find(|(_, bio)| bio.contains("instructor for this course"))
            .map(|(name, _)| name.clone())
            .unwrap_or_else(|| "Professor".into())
    }

    fn assignments_announced(view: &AgentView, professor: &str) -> u32 {
        speaks_by(view, professor)
            .filter(|d| d.contains(" is now assigned."))
            .count() as u32
    }

    fn professor_reply(&self, view: &AgentView) -> String {
        let Some((interval, total)) = Self::cadence(view) else {
            return "WAIT".into();
        };
        let announced = Self::assignments_announced(view, &view.name);
        let rooms = view.directives.iter().any(|d| d.contains(WORK_ROOM))
            || view
                .directives
                .iter()
                .any(|d| d.contains("never enter the work room"));
        if announced >= total {
            if rooms && view.location == CLASSROOM {
                return format!("MOVE: {OFFICE}");
            }
            return "WAIT".into();
        }
        match view.tick % interval {
            0 => {
                if rooms && view.location != CLASSROOM {
                    return format!("MOVE: {CLASSROOM}");
                }
                "WAIT".into()
            }
            1 => {
                if view.location != CLASSROOM {
                    return "WAIT".into();
                }
                let next = announced + 1;
                let body = format!(
                    "Assignment {next} is now assigned. It is due at the start of the next \
                     assignment period."
                );
                if next == 1 {
                    let policy = view
                        .public_bio
                        .split_once(". ")
                        .map(|(_, rest)| rest)
                        .unwrap_or("");
                    format!("SAY: {policy} {body}")
                } else {
                    format!("SAY: {body}")
                }
            }
            2 => {
                if rooms && view.location != OFFICE {
                    return format!("MOVE: {OFFICE}");
                }
                "WAIT".into()
            }
            _ => "WAIT".into(),
        }
    }

    fn days_late(view: &AgentView, professor_bio: &str, assignment: u32) -> u32 {
        let procrastinator = view.public_bio.contains("procrastinator");
        let hlp = professor_bio.contains("not accepted");
        let mut days = if procrastinator {
            if professor_bio.contains("no penalty") {
                2
            } else if professor_bio.contains("docked 10%") {
                1
            } else {
                0
            }
        } else {
            0
        };
        let midterm = view.private_bio.contains("midterm") && assignment == 3;
        if midterm && !hlp && !view.public_bio.contains("overachiever") {
            days += 1;
        }
        days
    }

    fn status_line(view: &AgentView, professor: &str, assignment: u32) -> String {
        let professor_bio = view
            .public_bios
            .iter()
            .find(|(name, _)| name == professor)
            .map(|(_, bio)| bio.as_str())
            .unwrap_or("");
        match Self::days_late(view, professor_bio, assignment) {
            0 => format!("SAY: I will turn in assignment {assignment} on time."),
            1 => format!("SAY: I will turn in assignment {assignment} one day late."),
            2 => format!("SAY: I will turn in assignment {assignment} two days late."),
            d => format!("SAY: I will turn in assignment {assignment} {d} days late."),
        }
    }

    fn cheat_eligible(view: &AgentView, professor: &str, announced: u32) -> bool {
        let professor_bio = view
            .public_bios
            .iter()
            .find(|(name, _)| name == professor)
            .map(|(_, bio)| bio.as_str())
            .unwrap_or("");
        view.location == WORK_ROOM
            && announced == 2
            && view.public_bio.contains("procrastinator")
            && view.private_bio.contains("especially challenging")
            && professor_bio.contains("not accepted")
            && !view.present.iter().any(|p| p == professor)
            && view
                .present
                .iter()
                .any(|p| p != &view.name && p != professor)
            && !speaks_by(view, &view.name).any(|d| d.contains("copy your assignment"))
    }

    fn student_reply(&self, view: &AgentView, rng: &mut ChaCha8Rng) -> String {
        let professor = Self::professor_name(view);
        let announced = Self::assignments_announced(view, &professor);
        let responded = speaks_by(view, &view.name)
            .filter(|d| d.contains("I will turn in assignment"))
            .count() as u32;
        let pending = announced > responded;
        let Some(interval) = Self::student_interval(view) else {
            if pending {
                return Self::status_line(view, &professor, responded + 1);
            }
            return "WAIT".into();
        };
        match view.tick % interval {
            0 => {
                if view.location != CLASSROOM {
                    return format!("MOVE: {CLASSROOM}");
                }
                "WAIT".into()
            }
            1 => {
                if pending && view.location == CLASSROOM {
                    return Self::status_line(view, &professor, responded + 1);
                }
                "WAIT".into()
            }
            2 => {
                if view.location != WORK_ROOM {
                    return format!("MOVE: {WORK_ROOM}");
                }
                "WAIT".into()
            }
            3 => {
                if Self::cheat_eligible(view, &professor, announced)
                    && rng.gen_range(0.0..1.0) < self.cheat_probability
                {
                    return "SAY: This assignment is really hard. Can I copy your assignment \
                            when you finish it?"
                        .into();
                }
                "WAIT".into()
            }
            _ => "WAIT".into(),
        }
    }
}

impl ScriptedPolicy for ClassroomPolicy {
    fn reply(&self, request: &BackendRequest, rng: &mut ChaCha8Rng) -> String {
        if request.kind == RequestKind::Importance {
            return "5".into();
        }
        let view = &request.view;
        if view.public_bio.contains("instructor for this course") {
            self.professor_reply(view)
        } else {
            self.student_reply(view, rng)
        }
    }
}

/// Scripted shopper. At the first tick the shopper decides once, with
/// probability conditioned on whether its private biography spells out the
/// stakes, and either walks the cart to the receptacle or says it is leaving
/// the cart behind.
pub struct CartPolicy {
    return_prob: f64,
    return_prob_staked: f64,
}

impl ScriptedPolicy for CartPolicy {
    fn reply(&self, request: &BackendRequest, rng: &mut ChaCha8Rng) -> String {
        if request.kind == RequestKind::Importance {
            return "5".into();
        }
        let view = &request.view;
        if view.tick != 1 {
            return "WAIT".into();
        }
        let staked = view.private_bio.contains("parked across the parking lot")
            || view.private_bio.contains("five-month old");
        let p = if staked {
            self.return_prob_staked
        } else {
            self.return_prob
        };
        if rng.gen_range(0.0..1.0) < p {
            format!("MOVE: {RECEPTACLE}")
        } else {
            "SAY: I am leaving the cart next to my car and driving off.".into()
        }
    }
}
