//! Run directories: everything one simulation run leaves on disk, complete
//! enough to replay it byte for byte and to feed the report phase without
//! touching the engine again.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use agora_core::cognition::{transcript_to_jsonl, HttpChat, Recorder, Replay, Scripted};
use agora_core::engine::{
    load_world, run, AnalysisSpec, Event, EventKind, HaltReason, ScenarioConfig, WorldState,
};
use agora_core::extract::{
    default_cheating_patterns, detect_cart_return, detect_cheating, export_review,
    records_from_jsonl, records_to_jsonl, Evidence, ExtractValue, ExtractionRecord, Method,
};
use agora_core::pgg::{analyze_game, RoundLedger};
use agora_core::policies::build_policy;

use crate::CliError;

pub const CONFIG_FILE: &str = "config.json";
pub const META_FILE: &str = "run_meta.json";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const AGENTS_DIR: &str = "agents";
pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const EXTRACTION_FILE: &str = "extraction.jsonl";
pub const OUTCOME_FILE: &str = "outcome.json";
pub const REVIEW_FILE: &str = "review.md";

/// Backend selection for a single run, with everything needed to build it.
#[derive(Debug, Clone)]
pub enum RunBackend {
    Scripted {
        policy: String,
        params: serde_json::Value,
    },
    Http {
        model: String,
    },
    Replay {
        transcript: PathBuf,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendMeta {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl RunBackend {
    fn meta(&self) -> BackendMeta {
        match self {
            RunBackend::Scripted { policy, params } => BackendMeta {
                kind: "scripted".to_string(),
                policy: Some(policy.clone()),
                params: Some(params.clone()),
                model: None,
            },
            RunBackend::Http { model } => BackendMeta {
                kind: "http".to_string(),
                policy: None,
                params: None,
                model: Some(model.clone()),
            },
            RunBackend::Replay { .. } => BackendMeta {
                kind: "replay".to_string(),
                policy: None,
                params: None,
                model: None,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HaltMeta {
    pub reason: String,
    pub tick: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub schema_version: String,
    pub run_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pack_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replication: Option<u32>,
    pub seed: u64,
    pub scenario: String,
    pub backend: BackendMeta,
    pub max_ticks: u64,
    pub halted: HaltMeta,
}

/// Scenario-level result of one run, as written to `outcome.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outcome {
    Pgg {
        players: Vec<String>,
        ledgers: Vec<RoundLedger>,
    },
    Classroom {
        cheated: bool,
        evidence: Vec<Evidence>,
    },
    Cart {
        returned: bool,
    },
    None,
}

/// Identity of one run within a batch; standalone runs leave the pack
/// fields empty.
#[derive(Debug, Clone, Default)]
pub struct RunIdentity {
    pub run_id: String,
    pub pack_id: Option<String>,
    pub cell: Option<String>,
    pub replication: Option<u32>,
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn events_to_jsonl(log: &[Event]) -> String {
    let mut out = String::new();
    for event in log {
        out.push_str(&serde_json::to_string(event).expect("events serialize"));
        out.push('\n');
    }
    out
}

fn scenario_name(config: &ScenarioConfig) -> &'static str {
    match &config.analysis {
        Some(AnalysisSpec::Pgg(_)) => "pgg",
        Some(AnalysisSpec::Classroom(_)) => "classroom",
        Some(AnalysisSpec::Cart(_)) => "cart",
        None => "none",
    }
}

/// Executes one run and writes its directory. The raw artifacts (config,
/// events, per-agent logs, transcript, meta) are written even when the
/// scenario analysis afterwards fails, so a stalled run stays debuggable.
pub fn execute_run(
    config: &ScenarioConfig,
    backend: &RunBackend,
    identity: &RunIdentity,
    out: &Path,
) -> Result<RunMeta, CliError> {
    config.validate()?;
    let mut world = load_world(config)?;
    let halt = halt_predicate(config);

    let (reason, records) = match backend {
        RunBackend::Scripted { policy, params } => {
            let policy = build_policy(policy, params)?;
            let mut recorder = Recorder::new(Scripted::new(config.seed, policy));
            let reason = run(&mut world, &mut recorder, config.max_ticks, halt.as_ref())?;
            (reason, recorder.into_records())
        }
        RunBackend::Http { model } => {
            let mut recorder = Recorder::new(HttpChat::from_env(model)?);
            let reason = run(&mut world, &mut recorder, config.max_ticks, halt.as_ref())?;
            (reason, recorder.into_records())
        }
        RunBackend::Replay { transcript } => {
            let text = read_file(transcript)?;
            let mut recorder = Recorder::new(Replay::from_jsonl(&text)?);
            let reason = run(&mut world, &mut recorder, config.max_ticks, halt.as_ref())?;
            (reason, recorder.into_records())
        }
    };

    let meta = RunMeta {
        schema_version: agora_core::engine::SCHEMA_VERSION.to_string(),
        run_id: identity.run_id.clone(),
        pack_id: identity.pack_id.clone(),
        cell: identity.cell.clone(),
        replication: identity.replication,
        seed: config.seed,
        scenario: scenario_name(config).to_string(),
        backend: backend.meta(),
        max_ticks: config.max_ticks,
        halted: match reason {
            HaltReason::Halted { tick } => HaltMeta {
                reason: "halted".to_string(),
                tick,
            },
            HaltReason::Timeout { ticks } => HaltMeta {
                reason: "timeout".to_string(),
                tick: ticks,
            },
        },
    };

    std::fs::create_dir_all(out.join(AGENTS_DIR)).map_err(|source| CliError::Io {
        path: out.display().to_string(),
        source,
    })?;
    write_file(&out.join(CONFIG_FILE), &config.to_json_pretty())?;
    write_file(&out.join(EVENTS_FILE), &events_to_jsonl(&world.event_log))?;
    for agent in &world.agents {
        let witnessed = world.witnessed_events(&agent.name);
        write_file(
            &out.join(AGENTS_DIR).join(format!("{}.jsonl", agent.name)),
            &events_to_jsonl(&witnessed),
        )?;
    }
    write_file(&out.join(TRANSCRIPT_FILE), &transcript_to_jsonl(&records))?;
    write_file(
        &out.join(META_FILE),
        &serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )?;

    let (outcome, extraction) = analyze_run(config, &world, &identity.run_id, reason)?;
    write_file(&out.join(EXTRACTION_FILE), &records_to_jsonl(&extraction))?;
    write_file(
        &out.join(OUTCOME_FILE),
        &serde_json::to_string_pretty(&outcome).expect("outcome serializes"),
    )?;
    write_file(
        &out.join(REVIEW_FILE),
        &export_review(&extraction, &world.event_log),
    )?;
    Ok(meta)
}

fn halt_predicate(config: &ScenarioConfig) -> Box<dyn Fn(&WorldState) -> bool> {
    match &config.analysis {
        Some(AnalysisSpec::Pgg(analysis)) => {
            let moderator = analysis.moderator.clone();
            Box::new(move |world: &WorldState| {
                world.event_log.iter().any(|e| {
                    e.kind == EventKind::Speak
                        && e.actor == moderator
                        && e.description.contains("The game is over.")
                })
            })
        }
        _ => Box::new(|_| false),
    }
}

fn analyze_run(
    config: &ScenarioConfig,
    world: &WorldState,
    run_id: &str,
    reason: HaltReason,
) -> Result<(Outcome, Vec<ExtractionRecord>), CliError> {
    match &config.analysis {
        Some(AnalysisSpec::Pgg(analysis)) => {
            let (ledgers, records) = analyze_game(world, analysis, run_id, reason)?;
            let outcome = Outcome::Pgg {
                players: analysis.players.iter().map(|p| p.name.clone()).collect(),
                ledgers,
            };
            Ok((outcome, records))
        }
        Some(AnalysisSpec::Classroom(analysis)) => {
            let (cheated, evidence) = detect_cheating(
                &world.event_log,
                &analysis.students,
                default_cheating_patterns(),
            );
            let records = evidence
                .iter()
                .map(|item| {
                    let actor = world
                        .event_log
                        .iter()
                        .find(|e| e.order_key() == (item.tick, item.seq))
                        .map(|e| e.actor.clone())
                        .unwrap_or_default();
                    ExtractionRecord {
                        run_id: run_id.to_string(),
                        agent: actor,
                        round: 0,
                        value: Some(ExtractValue::Flag(true)),
                        evidence: vec![item.clone()],
                        method: Method::Keyword,
                        needs_review: true,
                    }
                })
                .collect();
            Ok((Outcome::Classroom { cheated, evidence }, records))
        }
        Some(AnalysisSpec::Cart(analysis)) => {
            let returned =
                detect_cart_return(&world.event_log, &analysis.shopper, &analysis.receptacle);
            let suffix = format!("to {}.", analysis.receptacle);
            let evidence: Vec<Evidence> = world
                .event_log
                .iter()
                .filter(|e| {
                    e.kind == EventKind::Move
                        && e.actor == analysis.shopper
                        && e.description.ends_with(&suffix)
                })
                .map(|e| Evidence {
                    tick: e.tick,
                    seq: e.seq,
                    matched: suffix.clone(),
                })
                .collect();
            let record = ExtractionRecord {
                run_id: run_id.to_string(),
                agent: analysis.shopper.clone(),
                round: 0,
                value: Some(ExtractValue::Flag(returned)),
                evidence,
                method: Method::Movement,
                needs_review: false,
            };
            Ok((Outcome::Cart { returned }, vec![record]))
        }
        None => Ok((Outcome::None, Vec::new())),
    }
}

pub fn read_config(dir: &Path) -> Result<ScenarioConfig, CliError> {
    let text = read_file(&dir.join(CONFIG_FILE))?;
    Ok(ScenarioConfig::from_json(&text)?)
}

pub fn read_meta(dir: &Path) -> Result<RunMeta, CliError> {
    let path = dir.join(META_FILE);
    let text = read_file(&path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_outcome(dir: &Path) -> Result<Outcome, CliError> {
    let path = dir.join(OUTCOME_FILE);
    if !path.exists() {
        return Err(CliError::MissingExtraction(format!(
            "run directory {} has no {}",
            dir.display(),
            OUTCOME_FILE
        )));
    }
    let text = read_file(&path)?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_extraction(dir: &Path) -> Result<Vec<ExtractionRecord>, CliError> {
    let path = dir.join(EXTRACTION_FILE);
    if !path.exists() {
        return Err(CliError::MissingExtraction(format!(
            "run directory {} has no {}",
            dir.display(),
            EXTRACTION_FILE
        )));
    }
    Ok(records_from_jsonl(&read_file(&path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use agora_core::engine::PggPlayer;
    use agora_core::money::Cents;
    use agora_core::pgg::{build_pgg_world, GameSpec, Priming};

    fn pgg_config(seed: u64) -> ScenarioConfig {
        let spec = GameSpec {
            players: ["Alice", "Bob", "Casey"]
                .iter()
                .map(|name| PggPlayer {
                    name: name.to_string(),
                    endowment: Cents::from_dollars(20),
                })
                .collect(),
            multiplier: Default::default(),
            rounds: 1,
            transparency: false,
            priming: Priming::None,
            currency_unit: "$".to_string(),
        };
        build_pgg_world(&spec, seed).unwrap()
    }

    fn scripted_backend() -> RunBackend {
        RunBackend::Scripted {
            policy: "pgg".to_string(),
            params: serde_json::Value::Null,
        }
    }

    #[test]
    fn run_directory_contains_every_artifact() {
        let dir = tempfile::tempdir().unwrap();
        let config = pgg_config(5);
        let identity = RunIdentity {
            run_id: "seed-5".to_string(),
            ..Default::default()
        };
        let meta = execute_run(&config, &scripted_backend(), &identity, dir.path()).unwrap();
        assert_eq!(meta.scenario, "pgg");
        assert_eq!(meta.halted.reason, "halted");

        for file in [
            CONFIG_FILE,
            META_FILE,
            EVENTS_FILE,
            TRANSCRIPT_FILE,
            EXTRACTION_FILE,
            OUTCOME_FILE,
            REVIEW_FILE,
        ] {
            assert!(dir.path().join(file).exists(), "{file} missing");
        }
        for name in ["Alice", "Bob", "Casey", "Moderator"] {
            assert!(dir.path().join(AGENTS_DIR).join(format!("{name}.jsonl")).exists());
        }

        match read_outcome(dir.path()).unwrap() {
            Outcome::Pgg { players, ledgers } => {
                assert_eq!(players, vec!["Alice", "Bob", "Casey"]);
                assert_eq!(ledgers.len(), 1);
            }
            other => panic!("unexpected outcome {other:?}"),
        }
        let extraction = read_extraction(dir.path()).unwrap();
        assert_eq!(extraction.len(), 3);
    }

    #[test]
    fn same_seed_runs_write_identical_events() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let identity = RunIdentity {
            run_id: "seed-9".to_string(),
            ..Default::default()
        };
        execute_run(&pgg_config(9), &scripted_backend(), &identity, a.path()).unwrap();
        execute_run(&pgg_config(9), &scripted_backend(), &identity, b.path()).unwrap();
        let ea = std::fs::read(a.path().join(EVENTS_FILE)).unwrap();
        let eb = std::fs::read(b.path().join(EVENTS_FILE)).unwrap();
        assert_eq!(ea, eb);
    }

    #[test]
    fn replayed_transcripts_reproduce_event_logs() {
        let original = tempfile::tempdir().unwrap();
        let replayed = tempfile::tempdir().unwrap();
        let identity = RunIdentity {
            run_id: "seed-13".to_string(),
            ..Default::default()
        };
        execute_run(&pgg_config(13), &scripted_backend(), &identity, original.path()).unwrap();
        let backend = RunBackend::Replay {
            transcript: original.path().join(TRANSCRIPT_FILE),
        };
        execute_run(&pgg_config(13), &backend, &identity, replayed.path()).unwrap();
        let ea = std::fs::read(original.path().join(EVENTS_FILE)).unwrap();
        let eb = std::fs::read(replayed.path().join(EVENTS_FILE)).unwrap();
        assert_eq!(ea, eb);
    }

    #[test]
    fn http_backend_without_key_fails_before_any_tick() {
        std::env::remove_var("AGORA_API_KEY");
        let dir = tempfile::tempdir().unwrap();
        let identity = RunIdentity::default();
        let err = execute_run(
            &pgg_config(1),
            &RunBackend::Http {
                model: "gpt-4".to_string(),
            },
            &identity,
            dir.path(),
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Backend(_)));
        assert!(!dir.path().join(EVENTS_FILE).exists());
    }
}
