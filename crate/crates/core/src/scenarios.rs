//! Scenario builders for the in-the-wild studies: a classroom crossing late
//! policies with perturbations to student lives, and a parking lot where a
//! shopper decides whether to return their cart.
//!
//! Both builders emit ordinary [`ScenarioConfig`] documents. Prompt wording
//! lives in a versioned string table (`data/scenario_strings.json`) so that
//! every run of the same spec assembles bit-identical prompts.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    AgentConfig, AnalysisSpec, CartAnalysis, ClassroomAnalysis, LocationConfig, PlanConfig,
    ScenarioConfig, SCHEMA_VERSION,
};

pub const CLASSROOM: &str = "Classroom";
pub const OFFICE: &str = "Office";
pub const WORK_ROOM: &str = "Work Room";
pub const PROFESSOR: &str = "Professor";

pub const PARKED_AREA: &str = "Parked Area";
pub const RECEPTACLE: &str = "Receptacle";
pub const SHOPPER: &str = "Shopper";

const STUDENT_NAMES: [&str; 8] = [
    "Alice", "Bob", "Casey", "David", "Emery", "Frank", "Grace", "Henry",
];

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatePolicy {
    Llp,
    Mlp,
    Hlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Perturbation {
    P0,
    P1,
    P2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Personality {
    Overachiever,
    #[serde(alias = "hard_worker")]
    Procrastinator,
    Balanced,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassroomSpec {
    pub late_policy: LatePolicy,
    pub perturbation: Perturbation,
    pub rooms_enabled: bool,
    #[serde(default = "default_n_students")]
    pub n_students: usize,
    #[serde(default = "default_n_assignments")]
    pub n_assignments: u32,
    #[serde(default = "default_personalities")]
    pub personalities: Vec<Personality>,
    #[serde(default = "default_announce_interval")]
    pub announce_interval: u64,
}

fn default_n_students() -> usize {
    3
}

fn default_n_assignments() -> u32 {
    5
}

fn default_personalities() -> Vec<Personality> {
    vec![
        Personality::Overachiever,
        Personality::Procrastinator,
        Personality::Balanced,
    ]
}

fn default_announce_interval() -> u64 {
    6
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CartCondition {
    Ffr,
    Hac,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartSpec {
    pub condition: CartCondition,
    pub stake_prompting: bool,
}

#[derive(Deserialize)]
struct StringTable {
    #[allow(dead_code)]
    schema_version: String,
    late_policies: LatePolicyStrings,
    personalities: PersonalityStrings,
    perturbations: PerturbationStrings,
    stakes: StakeStrings,
}

#[derive(Deserialize)]
struct LatePolicyStrings {
    llp: String,
    mlp: String,
    hlp: String,
}

#[derive(Deserialize)]
struct PersonalityStrings {
    overachiever: String,
    procrastinator: String,
    balanced: String,
}

#[derive(Deserialize)]
struct PerturbationStrings {
    midterm: String,
    challenging: String,
}

#[derive(Deserialize)]
struct StakeStrings {
    ffr: String,
    ffr_staked: String,
    hac: String,
    hac_staked: String,
}

fn strings() -> &'static StringTable {
    static TABLE: OnceLock<StringTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        serde_json::from_str(include_str!("../data/scenario_strings.json"))
            .expect("scenario string table parses")
    })
}

/// The canonical late-policy sentence that goes into the professor's public
/// biography.
pub fn late_policy_text(policy: LatePolicy) -> &'static str {
    let t = strings();
    match policy {
        LatePolicy::Llp => &t.late_policies.llp,
        LatePolicy::Mlp => &t.late_policies.mlp,
        LatePolicy::Hlp => &t.late_policies.hlp,
    }
}

/// The canonical condition sentence for the shopper's private biography. The
/// staked variant of each condition spells out what makes the condition
/// costly instead of merely stating it.
pub fn stake_text(condition: CartCondition, stake_prompting: bool) -> &'static str {
    let t = strings();
    match (condition, stake_prompting) {
        (CartCondition::Ffr, false) => &t.stakes.ffr,
        (CartCondition::Ffr, true) => &t.stakes.ffr_staked,
        (CartCondition::Hac, false) => &t.stakes.hac,
        (CartCondition::Hac, true) => &t.stakes.hac_staked,
    }
}

fn personality_text(personality: Personality, name: &str) -> String {
    let t = strings();
    let template = match personality {
        Personality::Overachiever => &t.personalities.overachiever,
        Personality::Procrastinator => &t.personalities.procrastinator,
        Personality::Balanced => &t.personalities.balanced,
    };
    template.replace("{name}", name)
}

fn perturbation_text(perturbation: Perturbation) -> String {
    let t = strings();
    match perturbation {
        Perturbation::P0 => String::new(),
        Perturbation::P1 => t.perturbations.midterm.clone(),
        Perturbation::P2 => format!("{} {}", t.perturbations.midterm, t.perturbations.challenging),
    }
}

impl ClassroomSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.n_students < 1 {
            return Err(ScenarioError::InvalidSpec(
                "classroom needs at least one student".into(),
            ));
        }
        if self.n_students > STUDENT_NAMES.len() {
            return Err(ScenarioError::InvalidSpec(format!(
                "classroom supports at most {} students",
                STUDENT_NAMES.len()
            )));
        }
        if self.personalities.len() != self.n_students {
            return Err(ScenarioError::InvalidSpec(format!(
                "personalities length {} does not match n_students {}",
                self.personalities.len(),
                self.n_students
            )));
        }
        if self.n_assignments < 1 {
            return Err(ScenarioError::InvalidSpec(
                "classroom needs at least one assignment".into(),
            ));
        }
        let min_interval = if self.rooms_enabled { 4 } else { 2 };
        if self.announce_interval < min_interval {
            return Err(ScenarioError::InvalidSpec(format!(
                "announce_interval {} is too short for this room layout (minimum {})",
                self.announce_interval, min_interval
            )));
        }
        Ok(())
    }
}

/// Builds the classroom scenario: one professor announcing assignments on a
/// fixed cadence and a row of students reacting to them. With
/// `rooms_enabled` the world gains an office and a professor-free work room,
/// which is what gives students a channel the professor cannot overhear.
pub fn build_classroom(spec: &ClassroomSpec, seed: u64) -> Result<ScenarioConfig, ScenarioError> {
    spec.validate()?;
    let interval = spec.announce_interval;
    let students: Vec<&str> = STUDENT_NAMES[..spec.n_students].to_vec();

    let mut locations = vec![LocationConfig {
        name: CLASSROOM.into(),
        description: "The classroom where the course meets and assignments are announced.".into(),
        allowed_agents: vec![],
    }];
    if spec.rooms_enabled {
        locations.push(LocationConfig {
            name: OFFICE.into(),
            description: "The Professor's office, open to students with questions.".into(),
            allowed_agents: vec![],
        });
        locations.push(LocationConfig {
            name: WORK_ROOM.into(),
            description: "A room where students work on assignments.".into(),
            allowed_agents: students.iter().map(|s| s.to_string()).collect(),
        });
    }

    let mut professor_directives = vec![format!(
        "Announce a new assignment every {interval} ticks, {} in total.",
        spec.n_assignments
    )];
    if spec.rooms_enabled {
        professor_directives.push(format!(
            "Announce assignments in the {CLASSROOM}, then return to the {OFFICE}."
        ));
        professor_directives.push(format!(
            "Answer student questions in the {OFFICE}, and never enter the work room."
        ));
    } else {
        professor_directives.push("Answer student questions between announcements.".into());
    }

    let mut agents = vec![AgentConfig {
        name: PROFESSOR.into(),
        public_bio: format!(
            "The {PROFESSOR} is the instructor for this course. {}",
            late_policy_text(spec.late_policy)
        ),
        private_bio: String::new(),
        directives: professor_directives,
        initial_plan: PlanConfig {
            description: "Announce the late policy and the first assignment.".into(),
            location: CLASSROOM.into(),
            stop_condition: "all assignments have been announced".into(),
        },
    }];

    for (i, name) in students.iter().enumerate() {
        let mut directives = Vec::new();
        if spec.rooms_enabled {
            directives.push(format!("Work on assignments in the {WORK_ROOM}."));
            directives.push(format!(
                "Return to the {CLASSROOM} every {interval} ticks to hear new assignment \
                 announcements."
            ));
        } else {
            directives.push("Work on assignments between announcements.".into());
        }
        directives.push(
            "When an assignment is announced, state how many days late you will turn it in."
                .into(),
        );
        if spec.rooms_enabled {
            directives.push(format!(
                "You may use the {OFFICE} to ask the {PROFESSOR} questions."
            ));
        }
        agents.push(AgentConfig {
            name: name.to_string(),
            public_bio: format!(
                "{name} is a student in this course. {}",
                personality_text(spec.personalities[i], name)
            ),
            private_bio: perturbation_text(spec.perturbation),
            directives,
            initial_plan: PlanConfig {
                description: "Listen to the late policy and the first assignment announcement."
                    .into(),
                location: CLASSROOM.into(),
                stop_condition: "the course ends".into(),
            },
        });
    }

    let config = ScenarioConfig {
        schema_version: SCHEMA_VERSION.into(),
        seed,
        max_ticks: interval * spec.n_assignments as u64 + 2,
        locations,
        agents,
        analysis: Some(AnalysisSpec::Classroom(ClassroomAnalysis {
            professor: PROFESSOR.into(),
            students: students.iter().map(|s| s.to_string()).collect(),
        })),
    };
    config
        .validate()
        .map_err(|e| ScenarioError::InvalidSpec(e.to_string()))?;
    Ok(config)
}

/// Builds the parking-lot scenario: a single shopper with a cart, a parked
/// area, and the return receptacle. The condition sentence goes into the
/// private biography; whether it alludes to the stakes is the treatment.
pub fn build_cart(spec: &CartSpec, seed: u64) -> Result<ScenarioConfig, ScenarioError> {
    let config = ScenarioConfig {
        schema_version: SCHEMA_VERSION.into(),
        seed,
        max_ticks: 4,
        locations: vec![
            LocationConfig {
                name: PARKED_AREA.into(),
                description: "The part of the parking lot where the shopper is parked.".into(),
                allowed_agents: vec![],
            },
            LocationConfig {
                name: RECEPTACLE.into(),
                description: "The designated shopping cart return receptacle.".into(),
                allowed_agents: vec![],
            },
        ],
        agents: vec![AgentConfig {
            name: SHOPPER.into(),
            public_bio: String::new(),
            private_bio: stake_text(spec.condition, spec.stake_prompting).to_string(),
            directives: vec![
                "You cannot leave the parking lot with your shopping cart.".into(),
                "Decide what to do with your shopping cart, then act on your decision.".into(),
            ],
            initial_plan: PlanConfig {
                description: "Prepare to leave the parking lot.".into(),
                location: PARKED_AREA.into(),
                stop_condition: "the shopper has left the parking lot".into(),
            },
        }],
        analysis: Some(AnalysisSpec::Cart(CartAnalysis {
            shopper: SHOPPER.into(),
            receptacle: RECEPTACLE.into(),
        })),
    };
    config
        .validate()
        .map_err(|e| ScenarioError::InvalidSpec(e.to_string()))?;
    Ok(config)
}
