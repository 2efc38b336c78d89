//! Report generation: pools extraction results across a batch, summarizes
//! every group under both pooling rules, runs the pack's declared
//! comparisons, and renders markdown, CSV, and JSON tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use agora_core::money::Cents;
use agora_core::stats::{
    human_baselines, summarize_experiment, ComparisonRow, ComparisonSpec, GroupRow, Sample, Tail,
    TestKind,
};

use crate::pack::{endowment_group_label, ExperimentPack, Grouping};
use crate::rundir::{read_outcome, Outcome};
use crate::{BatchRun, CliError};

pub const REPORT_MD: &str = "report.md";
pub const REPORT_JSON: &str = "report.json";
pub const GROUPS_CSV: &str = "groups.csv";
pub const COMPARISONS_CSV: &str = "comparisons.csv";

/// One pooled observation: a fraction (of endowment, or a 0/1 outcome)
/// attributed to a report group and the run it came from.
#[derive(Debug, Clone)]
struct Observation {
    group: String,
    run_id: String,
    value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonFailure {
    pub label: String,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PoolingReport {
    pub groups: Vec<GroupRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub failures: Vec<ComparisonFailure>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub pack_id: String,
    pub scenario: String,
    pub default_pooling: String,
    pub agent_run: PoolingReport,
    pub run_mean: PoolingReport,
}

impl Report {
    pub fn group_mean(&self, label: &str) -> Option<f64> {
        self.agent_run
            .groups
            .iter()
            .find(|g| g.label == label)
            .map(|g| g.mean)
    }
}

fn observe_run(
    pack: &ExperimentPack,
    run: &BatchRun,
    outcome: &Outcome,
    observations: &mut Vec<Observation>,
) -> Result<(), CliError> {
    match outcome {
        Outcome::Pgg { players, ledgers } => {
            if ledgers.is_empty() {
                return Err(CliError::MissingExtraction(format!(
                    "run {} produced no ledgers",
                    run.dir
                )));
            }
            let initial = &ledgers[0].endowments;
            let mixed = {
                let distinct: std::collections::BTreeSet<Cents> =
                    initial.iter().copied().collect();
                distinct.len() > 1
            };
            for ledger in ledgers {
                for (i, _) in players.iter().enumerate() {
                    if initial[i].0 <= 0 {
                        continue;
                    }
                    let value = ledger.contributions[i].0 as f64 / initial[i].0 as f64;
                    let group = match pack.grouping {
                        Grouping::Cell => run.cell.clone(),
                        Grouping::CellRound => format!("{}-r{}", run.cell, ledger.round),
                        Grouping::CellEndowment => {
                            if mixed {
                                endowment_group_label(&run.cell, initial[i])
                            } else {
                                run.cell.clone()
                            }
                        }
                    };
                    observations.push(Observation {
                        group,
                        run_id: run.dir.clone(),
                        value,
                    });
                }
            }
        }
        Outcome::Classroom { cheated, .. } => {
            observations.push(Observation {
                group: run.cell.clone(),
                run_id: run.dir.clone(),
                value: if *cheated { 1.0 } else { 0.0 },
            });
        }
        Outcome::Cart { returned } => {
            observations.push(Observation {
                group: run.cell.clone(),
                run_id: run.dir.clone(),
                value: if *returned { 1.0 } else { 0.0 },
            });
        }
        Outcome::None => {
            return Err(CliError::MissingExtraction(format!(
                "run {} has no scenario analysis to report on",
                run.dir
            )));
        }
    }
    Ok(())
}

fn agent_run_samples(observations: &[Observation]) -> BTreeMap<String, Sample> {
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for obs in observations {
        grouped.entry(obs.group.clone()).or_default().push(obs.value);
    }
    grouped
        .into_iter()
        .map(|(label, values)| (label.clone(), Sample::new(label, values)))
        .collect()
}

fn run_mean_samples(observations: &[Observation]) -> BTreeMap<String, Sample> {
    let mut per_run: BTreeMap<(String, String), (f64, usize)> = BTreeMap::new();
    for obs in observations {
        let slot = per_run
            .entry((obs.group.clone(), obs.run_id.clone()))
            .or_insert((0.0, 0));
        slot.0 += obs.value;
        slot.1 += 1;
    }
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((group, _), (sum, count)) in per_run {
        grouped.entry(group).or_default().push(sum / count as f64);
    }
    grouped
        .into_iter()
        .map(|(label, values)| (label.clone(), Sample::new(label, values)))
        .collect()
}

fn summarize_pooling(
    samples: &BTreeMap<String, Sample>,
    comparisons: &[ComparisonSpec],
) -> PoolingReport {
    let baselines = human_baselines();
    let groups = summarize_experiment(samples, baselines, &[])
        .expect("group-only summary cannot fail")
        .groups;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for comparison in comparisons {
        match summarize_experiment(samples, baselines, std::slice::from_ref(comparison)) {
            Ok(summary) => rows.extend(summary.comparisons),
            Err(error) => failures.push(ComparisonFailure {
                label: comparison.label.clone(),
                message: error.to_string(),
            }),
        }
    }
    PoolingReport {
        groups,
        comparisons: rows,
        failures,
    }
}

/// Builds the full report for a batch. Only runs marked ok are read; an ok
/// run without extraction output is an error, and an entirely failed batch
/// has nothing to report on.
pub fn build_report(
    pack: &ExperimentPack,
    root: &Path,
    runs: &[BatchRun],
) -> Result<Report, CliError> {
    let mut observations = Vec::new();
    let mut any_ok = false;
    for run in runs {
        if !run.ok {
            continue;
        }
        any_ok = true;
        let outcome = read_outcome(&root.join(&run.dir))?;
        observe_run(pack, run, &outcome, &mut observations)?;
    }
    if !any_ok {
        return Err(CliError::MissingExtraction(
            "batch contains no completed runs".to_string(),
        ));
    }

    Ok(Report {
        pack_id: pack.pack_id.clone(),
        scenario: pack.scenario.as_str().to_string(),
        default_pooling: "agent_run".to_string(),
        agent_run: summarize_pooling(&agent_run_samples(&observations), &pack.comparisons),
        run_mean: summarize_pooling(&run_mean_samples(&observations), &pack.comparisons),
    })
}

fn percent(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

fn tail_name(tail: Tail) -> &'static str {
    match tail {
        Tail::Two => "two",
        Tail::OneGreater => "one_greater",
        Tail::OneLess => "one_less",
    }
}

fn test_name(test: &TestKind) -> String {
    match test {
        TestKind::Welch { a, b } => format!("welch {a} vs {b}"),
        TestKind::OneSample { group, mu, baseline } => match (mu, baseline) {
            (Some(mu), _) => format!("one-sample {group} vs {:.2}%", mu * 100.0),
            (None, Some(baseline)) => format!("one-sample {group} vs baseline {baseline}"),
            (None, None) => format!("one-sample {group}"),
        },
    }
}

fn group_table(out: &mut String, rows: &[GroupRow]) {
    out.push_str("| group | n | mean % | sd % | reference |\n");
    out.push_str("|---|---|---|---|---|\n");
    for row in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            row.label,
            row.n,
            percent(row.mean),
            percent(row.sd),
            row.baseline.as_deref().unwrap_or("-"),
        ));
    }
}

fn comparison_table(
    out: &mut String,
    pack: &ExperimentPack,
    rows: &[ComparisonRow],
    failures: &[ComparisonFailure],
) {
    if rows.is_empty() && failures.is_empty() {
        out.push_str("No comparisons declared.\n");
        return;
    }
    out.push_str("| comparison | test | tail | t | df | p |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for row in rows {
        let spec = pack.comparisons.iter().find(|c| c.label == row.label);
        out.push_str(&format!(
            "| {} | {} | {} | {:.4} | {:.2} | {:.6} |\n",
            row.label,
            spec.map(|c| test_name(&c.test)).unwrap_or_default(),
            tail_name(row.result.tail),
            row.result.t,
            row.result.df,
            row.result.p,
        ));
    }
    for failure in failures {
        out.push_str(&format!(
            "| {} | - | - | - | - | error: {} |\n",
            failure.label, failure.message,
        ));
    }
}

pub fn render_markdown(pack: &ExperimentPack, report: &Report, runs: &[BatchRun]) -> String {
    let failed: Vec<&BatchRun> = runs.iter().filter(|r| !r.ok).collect();
    let mut out = String::new();
    out.push_str(&format!("# Report: {}\n\n", report.pack_id));
    out.push_str(&format!(
        "Scenario `{}`, {} cells x {} replications ({} runs, {} failed).\n",
        report.scenario,
        pack.cells.len(),
        pack.replications,
        runs.len(),
        failed.len(),
    ));
    out.push_str(
        "Group means are fractions of the round-1 endowment for games, and \
         per-run outcome rates for classroom and cart scenarios, shown as percentages.\n\n",
    );

    out.push_str("## Group means, agent-run pooling (default)\n\n");
    group_table(&mut out, &report.agent_run.groups);
    out.push_str("\n## Group means, run-mean pooling\n\n");
    group_table(&mut out, &report.run_mean.groups);

    out.push_str("\n## Comparisons, agent-run pooling\n\n");
    comparison_table(
        &mut out,
        pack,
        &report.agent_run.comparisons,
        &report.agent_run.failures,
    );
    out.push_str("\n## Comparisons, run-mean pooling\n\n");
    comparison_table(
        &mut out,
        pack,
        &report.run_mean.comparisons,
        &report.run_mean.failures,
    );

    if !failed.is_empty() {
        out.push_str("\n## Failed runs\n\n");
        for run in failed {
            out.push_str(&format!(
                "- {} (seed {}): {}\n",
                run.dir,
                run.seed,
                run.error.as_deref().unwrap_or("unknown error"),
            ));
        }
    }
    out
}

pub fn render_groups_csv(report: &Report) -> String {
    let mut out = String::from("pack_id,pooling,group,n,mean_percent,sd_percent,reference\n");
    for (pooling, rows) in [
        ("agent_run", &report.agent_run.groups),
        ("run_mean", &report.run_mean.groups),
    ] {
        for row in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                report.pack_id,
                pooling,
                row.label,
                row.n,
                percent(row.mean),
                percent(row.sd),
                csv_quote(row.baseline.as_deref().unwrap_or("")),
            ));
        }
    }
    out
}

pub fn render_comparisons_csv(report: &Report) -> String {
    let mut out = String::from("pack_id,pooling,comparison,tail,t,df,p,error\n");
    for (pooling, section) in [
        ("agent_run", &report.agent_run),
        ("run_mean", &report.run_mean),
    ] {
        for row in &section.comparisons {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.4},{:.8},\n",
                report.pack_id,
                pooling,
                row.label,
                tail_name(row.result.tail),
                row.result.t,
                row.result.df,
                row.result.p,
            ));
        }
        for failure in &section.failures {
            out.push_str(&format!(
                "{},{},{},,,,,{}\n",
                report.pack_id,
                pooling,
                failure.label,
                csv_quote(&failure.message),
            ));
        }
    }
    out
}

fn csv_quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use agora_core::money::Cents;
    use agora_core::pgg::RoundLedger;
    use crate::pack::{BackendChoice, Cell, ScenarioKind, SeedSource, PACK_SCHEMA_VERSION};

    fn pack(grouping: Grouping) -> ExperimentPack {
        ExperimentPack {
            schema_version: PACK_SCHEMA_VERSION.to_string(),
            pack_id: "report-test".to_string(),
            scenario: ScenarioKind::Pgg,
            cells: vec![Cell {
                label: "only".to_string(),
                spec: serde_json::json!({"players": []}),
            }],
            replications: 1,
            seeds: SeedSource::Master { master: 1 },
            backend: BackendChoice::Scripted {
                policy: "pgg".to_string(),
                params: serde_json::Value::Null,
            },
            grouping,
            comparisons: Vec::new(),
        }
    }

    fn batch_run(cell: &str, dir: &str) -> BatchRun {
        BatchRun {
            cell: cell.to_string(),
            replication: 0,
            seed: 1,
            dir: dir.to_string(),
            ok: true,
            error: None,
        }
    }

    fn ledger(round: u32, endowments: &[i64], contributions: &[i64]) -> RoundLedger {
        let endowments: Vec<Cents> = endowments.iter().map(|&d| Cents::from_dollars(d)).collect();
        let contributions: Vec<Cents> = contributions
            .iter()
            .map(|&d| Cents::from_dollars(d))
            .collect();
        let pool = contributions.iter().copied().sum();
        RoundLedger {
            round,
            endowments,
            contributions,
            pool,
            payoffs: Vec::new(),
        }
    }

    #[test]
    fn fractions_use_round_one_endowments_across_rounds() {
        let pack = pack(Grouping::CellRound);
        let outcome = Outcome::Pgg {
            players: vec!["A".into(), "B".into(), "C".into()],
            ledgers: vec![
                ledger(1, &[20, 20, 20], &[10, 10, 10]),
                ledger(2, &[26, 26, 26], &[5, 5, 5]),
            ],
        };
        let run = batch_run("fade", "fade/rep-000");
        let mut obs = Vec::new();
        observe_run(&pack, &run, &outcome, &mut obs).unwrap();
        let samples = agent_run_samples(&obs);
        assert!((samples["fade-r1"].mean() - 0.5).abs() < 1e-12);
        assert!((samples["fade-r2"].mean() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn endowment_grouping_splits_mixed_runs_only() {
        let pack = pack(Grouping::CellEndowment);
        let mixed = Outcome::Pgg {
            players: vec!["A".into(), "B".into(), "C".into()],
            ledgers: vec![ledger(1, &[20, 50, 80], &[10, 10, 40])],
        };
        let uniform = Outcome::Pgg {
            players: vec!["A".into(), "B".into(), "C".into()],
            ledgers: vec![ledger(1, &[20, 20, 20], &[10, 10, 10])],
        };
        let mut obs = Vec::new();
        observe_run(&pack, &batch_run("varied", "varied/rep-000"), &mixed, &mut obs).unwrap();
        observe_run(&pack, &batch_run("equal-20", "equal-20/rep-000"), &uniform, &mut obs)
            .unwrap();
        let samples = agent_run_samples(&obs);
        let labels: Vec<&String> = samples.keys().collect();
        assert_eq!(labels, vec!["equal-20", "varied-20", "varied-50", "varied-80"]);
        assert!((samples["varied-80"].mean() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn run_mean_pooling_averages_within_runs_first() {
        let pack = pack(Grouping::Cell);
        let lopsided = Outcome::Pgg {
            players: vec!["A".into(), "B".into(), "C".into()],
            ledgers: vec![ledger(1, &[20, 20, 20], &[20, 0, 0])],
        };
        let even = Outcome::Pgg {
            players: vec!["A".into(), "B".into(), "C".into()],
            ledgers: vec![ledger(1, &[20, 20, 20], &[10, 10, 10])],
        };
        let mut obs = Vec::new();
        observe_run(&pack, &batch_run("cell", "cell/rep-000"), &lopsided, &mut obs).unwrap();
        observe_run(&pack, &batch_run("cell", "cell/rep-001"), &even, &mut obs).unwrap();

        let agent = agent_run_samples(&obs);
        assert_eq!(agent["cell"].n(), 6);
        let run_mean = run_mean_samples(&obs);
        assert_eq!(run_mean["cell"].n(), 2);
        let expected = ((20.0 / 60.0) + 0.5) / 2.0;
        assert!((run_mean["cell"].mean() - expected).abs() < 1e-12);
    }

    #[test]
    fn degenerate_comparisons_become_failures_not_errors() {
        use agora_core::stats::Tail;

        let mut pack = pack(Grouping::Cell);
        pack.comparisons = vec![ComparisonSpec {
            label: "flat".to_string(),
            test: TestKind::Welch {
                a: "a".to_string(),
                b: "b".to_string(),
            },
            tail: Tail::Two,
        }];
        let flat = |cell: &str, rep: &str| {
            (
                batch_run(cell, rep),
                Outcome::Cart { returned: true },
            )
        };
        let mut obs = Vec::new();
        for (run, outcome) in [
            flat("a", "a/rep-000"),
            flat("a", "a/rep-001"),
            flat("b", "b/rep-000"),
            flat("b", "b/rep-001"),
        ] {
            observe_run(&pack, &run, &outcome, &mut obs).unwrap();
        }
        let section = summarize_pooling(&agent_run_samples(&obs), &pack.comparisons);
        assert!(section.comparisons.is_empty());
        assert_eq!(section.failures.len(), 1);
        assert_eq!(section.failures[0].label, "flat");
    }

    #[test]
    fn markdown_and_csv_render_every_group() {
        let pack = pack(Grouping::Cell);
        let mut obs = Vec::new();
        for (i, returned) in [true, false, true].iter().enumerate() {
            observe_run(
                &pack,
                &batch_run("only", &format!("only/rep-{i:03}")),
                &Outcome::Cart { returned: *returned },
                &mut obs,
            )
            .unwrap();
        }
        let report = Report {
            pack_id: pack.pack_id.clone(),
            scenario: "cart".to_string(),
            default_pooling: "agent_run".to_string(),
            agent_run: summarize_pooling(&agent_run_samples(&obs), &pack.comparisons),
            run_mean: summarize_pooling(&run_mean_samples(&obs), &pack.comparisons),
        };
        let runs = vec![
            batch_run("only", "only/rep-000"),
            batch_run("only", "only/rep-001"),
            batch_run("only", "only/rep-002"),
        ];
        let md = render_markdown(&pack, &report, &runs);
        assert!(md.contains("| only | 3 | 66.67 |"));
        let csv = render_groups_csv(&report);
        assert!(csv.contains("report-test,agent_run,only,3,66.67"));
        assert!((report.group_mean("only").unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }
}
