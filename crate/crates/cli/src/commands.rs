//! The four CLI verbs as library operations: run one scenario, replicate a
//! pack across seeds, report on a finished batch, and replay a recorded run.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use agora_core::engine::ScenarioConfig;
use agora_core::pgg::build_pgg_world;
use agora_core::scenarios::{build_cart, build_classroom};

use crate::pack::{BackendChoice, ExperimentPack, ParsedSpec};
use crate::report::{
    build_report, render_comparisons_csv, render_groups_csv, render_markdown, Report,
    COMPARISONS_CSV, GROUPS_CSV, REPORT_JSON, REPORT_MD,
};
use crate::rundir::{execute_run, read_config, read_meta, RunBackend, RunIdentity, RunMeta};
use crate::{BatchRun, BatchSummary, CliError, BATCH_FILE, PACK_FILE};

/// Flags for a single `run` invocation.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub backend: Option<String>,
    pub policy: Option<String>,
    pub params: Option<String>,
    pub model: Option<String>,
    pub transcript: Option<PathBuf>,
}

fn scripted_policy_for(config: &ScenarioConfig, requested: Option<&str>) -> String {
    use agora_core::engine::AnalysisSpec;
    if let Some(policy) = requested {
        return policy.to_string();
    }
    match &config.analysis {
        Some(AnalysisSpec::Pgg(_)) => "pgg".to_string(),
        Some(AnalysisSpec::Classroom(_)) => "classroom".to_string(),
        Some(AnalysisSpec::Cart(_)) => "cart".to_string(),
        None => "wait".to_string(),
    }
}

fn resolve_backend(options: &RunOptions, config: &ScenarioConfig) -> Result<RunBackend, CliError> {
    let kind = options.backend.as_deref().unwrap_or("scripted");
    match kind {
        "scripted" => {
            let params = match &options.params {
                Some(text) => {
                    serde_json::from_str(text).map_err(|e| CliError::Config(format!(
                        "--params is not valid JSON: {e}"
                    )))?
                }
                None => serde_json::Value::Null,
            };
            Ok(RunBackend::Scripted {
                policy: scripted_policy_for(config, options.policy.as_deref()),
                params,
            })
        }
        "http" => Ok(RunBackend::Http {
            model: options
                .model
                .clone()
                .unwrap_or_else(|| "gpt-4".to_string()),
        }),
        "replay" => {
            let transcript = options.transcript.clone().ok_or_else(|| {
                CliError::Config("--backend replay needs --transcript".to_string())
            })?;
            Ok(RunBackend::Replay { transcript })
        }
        other => Err(CliError::Config(format!(
            "unknown backend {other:?}; expected http, replay, or scripted"
        ))),
    }
}

/// Runs one scenario config into a fresh run directory.
pub fn cmd_run(options: &RunOptions) -> Result<RunMeta, CliError> {
    let text = std::fs::read_to_string(&options.config).map_err(|source| CliError::Io {
        path: options.config.display().to_string(),
        source,
    })?;
    let mut config = ScenarioConfig::from_json(&text)?;
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    let backend = resolve_backend(options, &config)?;
    let identity = RunIdentity {
        run_id: format!("seed-{}", config.seed),
        ..Default::default()
    };
    execute_run(&config, &backend, &identity, &options.out)
}

/// Re-executes a recorded run from its directory by replaying its
/// transcript against its config snapshot.
pub fn cmd_replay(run_dir: &Path, out: &Path) -> Result<RunMeta, CliError> {
    let config = read_config(run_dir)?;
    let prior = read_meta(run_dir)?;
    let backend = RunBackend::Replay {
        transcript: run_dir.join(crate::rundir::TRANSCRIPT_FILE),
    };
    let identity = RunIdentity {
        run_id: prior.run_id.clone(),
        pack_id: prior.pack_id.clone(),
        cell: prior.cell.clone(),
        replication: prior.replication,
    };
    execute_run(&config, &backend, &identity, out)
}

fn build_cell_config(spec: &ParsedSpec, seed: u64) -> Result<ScenarioConfig, CliError> {
    Ok(match spec {
        ParsedSpec::Pgg(spec) => build_pgg_world(spec, seed)?,
        ParsedSpec::Classroom(spec) => build_classroom(spec, seed)?,
        ParsedSpec::Cart(spec) => build_cart(spec, seed)?,
    })
}

fn backend_for_run(
    pack_backend: &BackendChoice,
    cell: &str,
    replication: u32,
) -> RunBackend {
    match pack_backend {
        BackendChoice::Scripted { policy, params } => RunBackend::Scripted {
            policy: policy.clone(),
            params: params.clone(),
        },
        BackendChoice::Http { model } => RunBackend::Http {
            model: model.clone(),
        },
        BackendChoice::Replay { from } => RunBackend::Replay {
            transcript: from
                .join(cell)
                .join(format!("rep-{replication:03}"))
                .join(crate::rundir::TRANSCRIPT_FILE),
        },
    }
}

struct PlannedRun {
    cell: String,
    replication: u32,
    seed: u64,
    dir: String,
    config: ScenarioConfig,
    backend: RunBackend,
}

/// Flags for a `replicate` invocation.
#[derive(Debug, Clone)]
pub struct ReplicateOptions {
    pub pack: PathBuf,
    pub out: PathBuf,
    pub jobs: usize,
    /// Overrides the pack's master seed; rejected for explicit seed lists.
    pub seed: Option<u64>,
}

/// Runs every (cell, replication) of a pack under the output root. Failing
/// runs are recorded and skipped by the report phase; siblings continue.
pub fn cmd_replicate(options: &ReplicateOptions) -> Result<BatchSummary, CliError> {
    let mut pack = ExperimentPack::from_path(&options.pack)?;
    if let Some(master) = options.seed {
        match &mut pack.seeds {
            crate::pack::SeedSource::Master { master: slot } => *slot = master,
            crate::pack::SeedSource::List { .. } => {
                return Err(CliError::Config(
                    "--seed cannot override an explicit seed list".to_string(),
                ));
            }
        }
    }
    let seeds = pack.resolve_seeds()?;

    let mut planned = Vec::new();
    for (c, cell) in pack.cells.iter().enumerate() {
        let spec = pack.parse_cell(cell)?;
        for r in 0..pack.replications {
            let seed = seeds[c * pack.replications as usize + r as usize];
            planned.push(PlannedRun {
                cell: cell.label.clone(),
                replication: r,
                seed,
                dir: format!("{}/rep-{r:03}", cell.label),
                config: build_cell_config(&spec, seed)?,
                backend: backend_for_run(&pack.backend, &cell.label, r),
            });
        }
    }

    std::fs::create_dir_all(&options.out).map_err(|source| CliError::Io {
        path: options.out.display().to_string(),
        source,
    })?;
    let results: Mutex<Vec<Option<BatchRun>>> = Mutex::new(vec![None; planned.len()]);
    let next = AtomicUsize::new(0);
    let jobs = options.jobs.max(1).min(planned.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let index = next.fetch_add(1, Ordering::SeqCst);
                if index >= planned.len() {
                    break;
                }
                let plan = &planned[index];
                let identity = RunIdentity {
                    run_id: format!("{}-{}-rep-{:03}", pack.pack_id, plan.cell, plan.replication),
                    pack_id: Some(pack.pack_id.clone()),
                    cell: Some(plan.cell.clone()),
                    replication: Some(plan.replication),
                };
                let outcome = execute_run(
                    &plan.config,
                    &plan.backend,
                    &identity,
                    &options.out.join(&plan.dir),
                );
                let record = BatchRun {
                    cell: plan.cell.clone(),
                    replication: plan.replication,
                    seed: plan.seed,
                    dir: plan.dir.clone(),
                    ok: outcome.is_ok(),
                    error: outcome.err().map(|e| e.to_string()),
                };
                results.lock().expect("results lock")[index] = Some(record);
            });
        }
    });

    let runs: Vec<BatchRun> = results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .map(|slot| slot.expect("every planned run reports"))
        .collect();
    let summary = BatchSummary {
        schema_version: agora_core::engine::SCHEMA_VERSION.to_string(),
        pack_id: pack.pack_id.clone(),
        runs,
    };

    let pack_snapshot = serde_json::to_string_pretty(&pack).expect("pack serializes");
    std::fs::write(options.out.join(PACK_FILE), pack_snapshot).map_err(|source| {
        CliError::Io {
            path: options.out.join(PACK_FILE).display().to_string(),
            source,
        }
    })?;
    let batch_text = serde_json::to_string_pretty(&summary).expect("batch serializes");
    std::fs::write(options.out.join(BATCH_FILE), batch_text).map_err(|source| CliError::Io {
        path: options.out.join(BATCH_FILE).display().to_string(),
        source,
    })?;
    Ok(summary)
}

/// Flags for a `report` invocation.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    pub out: PathBuf,
    /// Overrides the pack snapshot stored in the batch root.
    pub pack: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Builds the report for a replicated batch and writes the markdown, CSV,
/// and JSON tables next to it.
pub fn cmd_report(options: &ReportOptions) -> Result<Report, CliError> {
    let pack_path = options
        .pack
        .clone()
        .unwrap_or_else(|| options.out.join(PACK_FILE));
    let pack = ExperimentPack::from_path(&pack_path)?;
    let batch: BatchSummary = read_json(&options.out.join(BATCH_FILE))?;
    let report = build_report(&pack, &options.out, &batch.runs)?;

    let writes = [
        (REPORT_MD, render_markdown(&pack, &report, &batch.runs)),
        (GROUPS_CSV, render_groups_csv(&report)),
        (COMPARISONS_CSV, render_comparisons_csv(&report)),
        (
            REPORT_JSON,
            serde_json::to_string_pretty(&report).expect("report serializes"),
        ),
    ];
    for (name, contents) in writes {
        let path = options.out.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(report)
}
