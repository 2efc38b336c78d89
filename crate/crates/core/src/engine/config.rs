//! Scenario config document: the JSON schema that describes a world.
//!
//! Schema version "1". Top-level keys: `schema_version`, `seed`, `max_ticks`,
//! `locations[] {name, description, allowed_agents[]}`, `agents[] {name,
//! public_bio, private_bio, directives[], initial_plan {description,
//! location, stop_condition}}`, plus an optional `analysis` extension block
//! that scenario builders emit so the harness knows how to extract results.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::money::{Cents, Multiplier};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: String,
    pub seed: u64,
    pub max_ticks: u64,
    pub locations: Vec<LocationConfig>,
    pub agents: Vec<AgentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<AnalysisSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocationConfig {
    pub name: String,
    pub description: String,
    /// Empty means every agent is allowed.
    #[serde(default)]
    pub allowed_agents: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub name: String,
    pub public_bio: String,
    #[serde(default)]
    pub private_bio: String,
    #[serde(default)]
    pub directives: Vec<String>,
    pub initial_plan: PlanConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub description: String,
    pub location: String,
    pub stop_condition: String,
}

/// Optional extraction metadata emitted by scenario builders. Hand-written
/// configs may omit it; the run still executes, it just produces no
/// scenario-specific extraction records.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisSpec {
    Pgg(PggAnalysis),
    Classroom(ClassroomAnalysis),
    Cart(CartAnalysis),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PggAnalysis {
    pub players: Vec<PggPlayer>,
    pub multiplier: Multiplier,
    pub rounds: u32,
    pub transparency: bool,
    pub contribution_location: String,
    pub moderator: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PggPlayer {
    pub name: String,
    pub endowment: Cents,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassroomAnalysis {
    pub professor: String,
    pub students: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartAnalysis {
    pub shopper: String,
    pub receptacle: String,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<ScenarioConfig, EngineError> {
        let config: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| EngineError::Schema(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }

    /// Schema checks beyond shape: version, name uniqueness, and that every
    /// reference resolves to a defined name.
    pub fn validate(&self) -> Result<(), EngineError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(EngineError::Schema(format!(
                "unsupported schema_version {:?} (expected {SCHEMA_VERSION:?})",
                self.schema_version
            )));
        }
        if self.locations.is_empty() {
            return Err(EngineError::Schema("at least one location required".into()));
        }
        if self.agents.is_empty() {
            return Err(EngineError::Schema("at least one agent required".into()));
        }
        let mut location_names = BTreeSet::new();
        for loc in &self.locations {
            if !location_names.insert(loc.name.as_str()) {
                return Err(EngineError::DuplicateName(loc.name.clone()));
            }
        }
        let mut agent_names = BTreeSet::new();
        for agent in &self.agents {
            if !agent_names.insert(agent.name.as_str()) {
                return Err(EngineError::DuplicateName(agent.name.clone()));
            }
        }
        let known_agent = |context: &str, name: &str| -> Result<(), EngineError> {
            if agent_names.contains(name) {
                Ok(())
            } else {
                Err(EngineError::Reference {
                    context: context.to_string(),
                    name: name.to_string(),
                })
            }
        };
        let known_location = |context: &str, name: &str| -> Result<(), EngineError> {
            if location_names.contains(name) {
                Ok(())
            } else {
                Err(EngineError::Reference {
                    context: context.to_string(),
                    name: name.to_string(),
                })
            }
        };
        for loc in &self.locations {
            for allowed in &loc.allowed_agents {
                known_agent(&format!("location {:?} allowed_agents", loc.name), allowed)?;
            }
        }
        for agent in &self.agents {
            let context = format!("agent {:?} initial_plan", agent.name);
            known_location(&context, &agent.initial_plan.location)?;
            let loc = self
                .locations
                .iter()
                .find(|l| l.name == agent.initial_plan.location)
                .expect("checked above");
            if !loc.allowed_agents.is_empty()
                && !loc.allowed_agents.iter().any(|a| a == &agent.name)
            {
                return Err(EngineError::PlacementNotAllowed {
                    agent: agent.name.clone(),
                    location: loc.name.clone(),
                });
            }
        }
        match &self.analysis {
            None => {}
            Some(AnalysisSpec::Pgg(pgg)) => {
                for p in &pgg.players {
                    known_agent("analysis.players", &p.name)?;
                }
                known_agent("analysis.moderator", &pgg.moderator)?;
                known_location("analysis.contribution_location", &pgg.contribution_location)?;
            }
            Some(AnalysisSpec::Classroom(c)) => {
                known_agent("analysis.professor", &c.professor)?;
                for s in &c.students {
                    known_agent("analysis.students", s)?;
                }
            }
            Some(AnalysisSpec::Cart(c)) => {
                known_agent("analysis.shopper", &c.shopper)?;
                known_location("analysis.receptacle", &c.receptacle)?;
            }
        }
        Ok(())
    }
}
