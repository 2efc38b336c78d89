//! Post-hoc log analysis: contribution parsing from contribution-room
//! utterances, cheating triage over classroom logs, cart-return detection,
//! and a human-review export for anything ambiguous.
//!
//! The accepted currency grammar is closed: `$12`, `$12.50`, `12 dollars`,
//! `12.50 dollars`. Percent or word phrasings ("half", "everything") never
//! parse; they surface as `NoContributionFound` so a human reviews them.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Event, EventKind};
use crate::money::Cents;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("no contribution found for {agent} in round {round}")]
    NoContributionFound { agent: String, round: u32 },
    #[error("ambiguous contribution for {agent} in round {round}: {candidates:?}")]
    AmbiguousContribution {
        agent: String,
        round: u32,
        candidates: Vec<Cents>,
        evidence: Vec<Evidence>,
    },
    #[error("malformed extraction record: {0}")]
    MalformedRecord(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Regex,
    Movement,
    Keyword,
}

/// Points at the log event backing a finding; `matched` is always a
/// substring of that event's description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub tick: u64,
    pub seq: u32,
    pub matched: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "amount", rename_all = "snake_case")]
pub enum ExtractValue {
    Money(Cents),
    Flag(bool),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub run_id: String,
    pub agent: String,
    pub round: u32,
    /// None when the value could not be resolved (ambiguous or missing).
    pub value: Option<ExtractValue>,
    pub evidence: Vec<Evidence>,
    pub method: Method,
    pub needs_review: bool,
}

pub fn records_to_jsonl(records: &[ExtractionRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn records_from_jsonl(text: &str) -> Result<Vec<ExtractionRecord>, ExtractError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| ExtractError::MalformedRecord(e.to_string())))
        .collect()
}

/// Half-open `(start, end]` span of `(tick, seq)` order keys for one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundWindow {
    pub round: u32,
    pub start: (u64, u32),
    pub end: (u64, u32),
}

impl RoundWindow {
    pub fn contains(&self, key: (u64, u32)) -> bool {
        key > self.start && key <= self.end
    }
}

fn results_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"Round (\d+) results").expect("pattern compiles"))
}

/// Splits the log into per-round windows bounded by the moderator's results
/// announcements. A round whose announcement never happened stays open-ended.
pub fn round_windows(log: &[Event], moderator: &str, rounds: u32) -> Vec<RoundWindow> {
    let mut boundaries: Vec<(u32, (u64, u32))> = Vec::new();
    for event in log {
        if event.kind != EventKind::Speak || event.actor != moderator {
            continue;
        }
        if let Some(c) = results_pattern().captures(&event.description) {
            if let Ok(round) = c[1].parse::<u32>() {
                boundaries.push((round, event.order_key()));
            }
        }
    }
    let mut windows = Vec::new();
    let mut start = (0u64, 0u32);
    for round in 1..=rounds {
        let end = boundaries
            .iter()
            .find(|(r, _)| *r == round)
            .map(|(_, key)| *key)
            .unwrap_or((u64::MAX, u32::MAX));
        windows.push(RoundWindow { round, start, end });
        start = end;
    }
    windows
}

fn dollar_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\$\s?(\d{1,9})(\.\d{1,2})?").expect("pattern compiles"))
}

fn dollars_word_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\b(\d{1,9})(\.\d{1,2})?\s+dollars?\b").expect("pattern compiles")
    })
}

fn fraction_cents(fraction: Option<&str>) -> i64 {
    match fraction {
        None => 0,
        Some(f) => {
            let digits = &f[1..];
            let value: i64 = digits.parse().expect("regex guarantees digits");
            if digits.len() == 1 {
                value * 10
            } else {
                value
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Candidate {
    amount: Cents,
    byte_offset: usize,
    matched: String,
}

fn currency_candidates(text: &str) -> Vec<Candidate> {
    let mut found: Vec<Candidate> = Vec::new();
    for re in [dollar_pattern(), dollars_word_pattern()] {
        for c in re.captures_iter(text) {
            let whole = c.get(0).expect("capture zero");
            let dollars: i64 = c[1].parse().expect("regex guarantees digits");
            let cents = dollars * 100 + fraction_cents(c.get(2).map(|m| m.as_str()));
            found.push(Candidate {
                amount: Cents(cents),
                byte_offset: whole.start(),
                matched: whole.as_str().to_string(),
            });
        }
    }
    found.sort_by_key(|c| c.byte_offset);
    found
}

fn token_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

fn normalize(token: &str) -> String {
    token
        .chars()
        .filter(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase()
}

fn contribute_verb_indices(text: &str, spans: &[(usize, usize)]) -> Vec<usize> {
    let tokens: Vec<String> = spans.iter().map(|&(s, e)| normalize(&text[s..e])).collect();
    let mut indices = Vec::new();
    for (i, token) in tokens.iter().enumerate() {
        if token.starts_with("contribut") || token.starts_with("donat") {
            indices.push(i);
        } else if matches!(token.as_str(), "put" | "puts" | "putting")
            && tokens.get(i + 1).map(String::as_str) == Some("in")
        {
            indices.push(i);
        }
    }
    indices
}

fn token_index_of(spans: &[(usize, usize)], byte_offset: usize) -> usize {
    spans
        .iter()
        .position(|&(s, e)| byte_offset >= s && byte_offset < e)
        .unwrap_or(spans.len().saturating_sub(1))
}

const VERB_ADJACENCY: usize = 5;

/// Resolves one agent's contribution inside a round window: the first speak
/// event at the contribution location containing a currency amount decides.
/// Amounts within five tokens of a contribute verb win over other amounts in
/// the same utterance (nearest to a verb first, then text order); two
/// leftover candidates with no verb nearby are ambiguous.
pub fn extract_contribution(
    agent_events: &[Event],
    agent: &str,
    contribution_location: &str,
    window: &RoundWindow,
) -> Result<(Cents, Evidence), ExtractError> {
    for event in agent_events {
        if event.kind != EventKind::Speak
            || event.actor != agent
            || event.location != contribution_location
            || !window.contains(event.order_key())
        {
            continue;
        }
        let candidates = currency_candidates(&event.description);
        if candidates.is_empty() {
            continue;
        }
        let spans = token_spans(&event.description);
        let verbs = contribute_verb_indices(&event.description, &spans);
        let preferred: Vec<(&Candidate, usize)> = candidates
            .iter()
            .filter_map(|c| {
                let idx = token_index_of(&spans, c.byte_offset);
                verbs
                    .iter()
                    .map(|&v| idx.abs_diff(v))
                    .min()
                    .filter(|&d| d <= VERB_ADJACENCY)
                    .map(|d| (c, d))
            })
            .collect();
        let nearest = preferred
            .iter()
            .min_by_key(|(_, d)| *d)
            .map(|&(c, _)| c);
        let chosen = match nearest {
            Some(c) => c,
            None if candidates.len() == 1 => &candidates[0],
            None => {
                return Err(ExtractError::AmbiguousContribution {
                    agent: agent.to_string(),
                    round: window.round,
                    candidates: candidates.iter().map(|c| c.amount).collect(),
                    evidence: candidates
                        .iter()
                        .map(|c| Evidence {
                            tick: event.tick,
                            seq: event.seq,
                            matched: c.matched.clone(),
                        })
                        .collect(),
                });
            }
        };
        return Ok((
            chosen.amount,
            Evidence {
                tick: event.tick,
                seq: event.seq,
                matched: chosen.matched.clone(),
            },
        ));
    }
    Err(ExtractError::NoContributionFound {
        agent: agent.to_string(),
        round: window.round,
    })
}

fn default_patterns_data() -> &'static Vec<String> {
    static PATTERNS: OnceLock<Vec<String>> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        serde_json::from_str(include_str!("../data/cheating_patterns.json"))
            .expect("shipped pattern list parses")
    })
}

/// The shipped copy-request pattern list (editable config data).
pub fn default_cheating_patterns() -> &'static [String] {
    default_patterns_data()
}

/// Flags student speak events matching any copy-request pattern, case
/// insensitively. This is triage only: every hit needs human review.
pub fn detect_cheating(
    log: &[Event],
    students: &[String],
    patterns: &[String],
) -> (bool, Vec<Evidence>) {
    let mut evidence = Vec::new();
    for event in log {
        if event.kind != EventKind::Speak || !students.iter().any(|s| *s == event.actor) {
            continue;
        }
        let lowered = event.description.to_lowercase();
        for pattern in patterns {
            if let Some(at) = lowered.find(&pattern.to_lowercase()) {
                evidence.push(Evidence {
                    tick: event.tick,
                    seq: event.seq,
                    matched: event.description[at..at + pattern.len()].to_string(),
                });
                break;
            }
        }
    }
    (!evidence.is_empty(), evidence)
}

/// True iff the shopper ever moved to the receptacle. Plans do not count;
/// only a move event does.
pub fn detect_cart_return(log: &[Event], shopper: &str, receptacle: &str) -> bool {
    let suffix = format!("to {receptacle}.");
    log.iter().any(|e| {
        e.kind == EventKind::Move && e.actor == shopper && e.description.ends_with(&suffix)
    })
}

const REVIEW_CONTEXT: usize = 3;

/// Renders every needs-review record with three events of surrounding
/// context into a human-readable document.
pub fn export_review(records: &[ExtractionRecord], log: &[Event]) -> String {
    let mut out = String::from("# Review queue\n");
    let flagged: Vec<&ExtractionRecord> = records.iter().filter(|r| r.needs_review).collect();
    if flagged.is_empty() {
        return out;
    }
    for record in flagged {
        out.push_str(&format!(
            "\n## {} (run {}, round {}, method {:?})\n",
            record.agent, record.run_id, record.round, record.method
        ));
        match &record.value {
            Some(ExtractValue::Money(c)) => out.push_str(&format!("Value: {c}\n")),
            Some(ExtractValue::Flag(f)) => out.push_str(&format!("Value: {f}\n")),
            None => out.push_str("Value: unresolved\n"),
        }
        if !record.evidence.is_empty() {
            out.push_str("Matched: ");
            let matches: Vec<String> =
                record.evidence.iter().map(|e| format!("{:?}", e.matched)).collect();
            out.push_str(&matches.join(", "));
            out.push('\n');
        }
        if let Some(first) = record.evidence.first() {
            if let Some(center) = log
                .iter()
                .position(|e| e.order_key() == (first.tick, first.seq))
            {
                out.push_str("Context:\n");
                let lo = center.saturating_sub(REVIEW_CONTEXT);
                let hi = (center + REVIEW_CONTEXT + 1).min(log.len());
                for (i, event) in log[lo..hi].iter().enumerate() {
                    let marker = if lo + i == center { ">" } else { " " };
                    out.push_str(&format!(
                        "{marker} [{}.{}] {}\n",
                        event.tick, event.seq, event.description
                    ));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn speak(actor: &str, location: &str, tick: u64, seq: u32, text: &str) -> Event {
        Event {
            tick,
            seq,
            actor: actor.to_string(),
            location: location.to_string(),
            kind: EventKind::Speak,
            description: format!("{actor} says: \"{text}\""),
            witnesses: BTreeSet::from([actor.to_string()]),
        }
    }

    fn window() -> RoundWindow {
        RoundWindow {
            round: 1,
            start: (0, 0),
            end: (u64::MAX, u32::MAX),
        }
    }

    fn resolve(text: &str) -> Result<Cents, ExtractError> {
        let events = vec![speak("Alice", "Moderation Room", 2, 1, text)];
        extract_contribution(&events, "Alice", "Moderation Room", &window()).map(|(c, _)| c)
    }

    #[test]
    fn contribution_fixture_corpus_resolves_as_labeled() {
        let resolved: Vec<(&str, i64)> = vec![
            ("I will contribute $12 to the public pool", 1200),
            ("I contribute $10 to the public pool.", 1000),
            ("Out of my $20, I contribute $8", 800),
            ("I donate 15 dollars", 1500),
            ("I put in $7.50 this round", 750),
            ("Let me contribute $0 this time", 0),
            ("I am contributing $20, my whole endowment", 2000),
            ("My contribution is $5", 500),
            ("I'll donate $3.25 to the pool", 325),
            ("Putting in 6 dollars now", 600),
            ("I contribute 1 dollar", 100),
            ("I contribute $ 9 to the pool", 900),
            ("I have decided: I contribute $11.", 1100),
            ("contribute $4.2 for me", 420),
            ("I keep $15 of my $20 and contribute $5 to the pool", 500),
            ("I donated $18 last time and donate $13 now", 1800),
        ];
        for (text, cents) in resolved {
            match resolve(text) {
                Ok(c) => assert_eq!(c, Cents(cents), "fixture {text:?}"),
                Err(e) => panic!("fixture {text:?} should resolve, got {e}"),
            }
        }
        let unresolved = [
            "I'll give half of my endowment",
            "I contribute everything",
            "Count me in for the usual",
            "I want to keep most of it",
        ];
        for text in unresolved {
            assert!(
                matches!(resolve(text), Err(ExtractError::NoContributionFound { .. })),
                "fixture {text:?} should not parse"
            );
        }
        let ambiguous = ["I have $20 and the pool has $35", "Between $5 and $10, hmm"];
        for text in ambiguous {
            match resolve(text) {
                Err(ExtractError::AmbiguousContribution { candidates, .. }) => {
                    assert_eq!(candidates.len(), 2, "fixture {text:?}")
                }
                other => panic!("fixture {text:?} should be ambiguous, got {other:?}"),
            }
        }
    }

    #[test]
    fn location_filter_applies() {
        let events = vec![speak("Alice", "Game Room", 2, 1, "I contribute $12")];
        assert!(matches!(
            extract_contribution(&events, "Alice", "Moderation Room", &window()),
            Err(ExtractError::NoContributionFound { .. })
        ));
    }

    #[test]
    fn first_amount_bearing_event_decides() {
        let events = vec![
            speak("Alice", "Moderation Room", 2, 1, "Here is my decision"),
            speak("Alice", "Moderation Room", 3, 1, "I contribute $6"),
            speak("Alice", "Moderation Room", 4, 1, "I contribute $9"),
        ];
        let (c, evidence) =
            extract_contribution(&events, "Alice", "Moderation Room", &window()).unwrap();
        assert_eq!(c, Cents(600));
        assert_eq!((evidence.tick, evidence.seq), (3, 1));
    }

    #[test]
    fn round_windows_split_on_moderator_announcements() {
        let mut log = vec![
            speak("Alice", "Moderation Room", 2, 1, "I contribute $10"),
            speak("Moderator", "Game Room", 4, 1, "Round 1 results: payoffs are Alice $26.00. Round 2 begins; each player's endowment is now their payoff."),
            speak("Alice", "Moderation Room", 6, 1, "I contribute $4"),
            speak("Moderator", "Game Room", 8, 1, "Round 2 results: payoffs are Alice $24.00. The game is over."),
        ];
        log.push(speak("Alice", "Moderation Room", 9, 1, "I contribute $99"));
        let windows = round_windows(&log, "Moderator", 2);
        assert_eq!(windows.len(), 2);
        assert_eq!(windows[0].end, (4, 1));
        assert_eq!(windows[1].start, (4, 1));
        assert_eq!(windows[1].end, (8, 1));
        let (c1, _) =
            extract_contribution(&log, "Alice", "Moderation Room", &windows[0]).unwrap();
        let (c2, _) =
            extract_contribution(&log, "Alice", "Moderation Room", &windows[1]).unwrap();
        assert_eq!((c1, c2), (Cents(1000), Cents(400)));
    }

    #[test]
    fn missing_announcement_leaves_window_open() {
        let log = vec![speak("Alice", "Moderation Room", 2, 1, "I contribute $10")];
        let windows = round_windows(&log, "Moderator", 1);
        assert_eq!(windows[0].end, (u64::MAX, u32::MAX));
        assert!(extract_contribution(&log, "Alice", "Moderation Room", &windows[0]).is_ok());
    }

    fn students() -> Vec<String> {
        vec!["Alice".into(), "Bob".into(), "Casey".into()]
    }

    #[test]
    fn cheat_corpus_triage_matches_labels() {
        let planted = [
            "This one is really hard. Can I copy your assignment?",
            "Would you let me copy your answers for problem two?",
            "Can I see your answers before class?",
            "Please share your solution with me tonight",
            "Could you send me your solution file?",
            "I am stuck, can I just copy what you wrote?",
            "Mind if I look at your answers real quick?",
            "Let me see your work for the second assignment",
            "can i COPY your second assignment?",
            "If the professor is away, share your answers with me",
            "I'll copy yours and change a few words",
            "Just let me use your work as mine",
            "Can I see your answers? I won't tell anyone",
            "Copy your solution, you mean? Yes please",
            "It would help to see your work on question 3",
            "Share your solution and I'll owe you one",
            "Send me your solution when it's done",
            "Could I look at your answers for the hard part?",
            "I might copy your approach word for word",
            "Use your work, submit it as mine, done",
        ];
        let clean = [
            "Let's work together on the approach",
            "This assignment is really challenging",
            "I plan to start early tomorrow",
            "The midterm is coming up fast",
            "Could you explain how recursion works?",
            "What did the professor say about late days?",
            "I'll ask a question during office hours",
            "We could study together in the classroom",
            "My draft is almost finished",
            "I turned mine in a day late",
            "The second assignment took me all weekend",
            "Want to compare notes after we both submit?",
            "I find the reading list helpful",
            "The work room is quiet today",
            "I should manage my time better",
            "Good luck on the midterm everyone",
            "I asked the professor for an extension",
            "That lecture clarified a lot for me",
            "I will review the rubric before submitting",
            "Independent work builds understanding",
            "I love this class",
            "See you at the study session",
            "My answer to question one was wrong at first",
            "How do you plan to start the essay?",
            "The deadline is on Friday",
        ];
        assert_eq!(planted.len() + clean.len(), 45);
        let patterns = default_cheating_patterns();
        for (i, text) in planted.iter().enumerate() {
            let log = vec![speak("Bob", "Work Room", i as u64 + 1, 1, text)];
            let (flag, evidence) = detect_cheating(&log, &students(), patterns);
            assert!(flag, "planted fixture should flag: {text:?}");
            assert_eq!(evidence.len(), 1);
        }
        for text in clean {
            let log = vec![speak("Bob", "Work Room", 1, 1, text)];
            let (flag, evidence) = detect_cheating(&log, &students(), patterns);
            assert!(!flag, "clean fixture flagged: {text:?} ({evidence:?})");
        }
    }

    #[test]
    fn cheating_ignores_non_students() {
        let log = vec![speak(
            "Professor",
            "Classroom",
            1,
            1,
            "Do not copy your classmates' work.",
        )];
        let (flag, _) = detect_cheating(&log, &students(), default_cheating_patterns());
        assert!(!flag);
    }

    #[test]
    fn cheating_evidence_is_substring_of_event() {
        let log = vec![speak("Casey", "Work Room", 3, 2, "CAN I COPY YOUR ASSIGNMENT?")];
        let (flag, evidence) = detect_cheating(&log, &students(), default_cheating_patterns());
        assert!(flag);
        assert!(log[0].description.contains(&evidence[0].matched));
        assert_eq!((evidence[0].tick, evidence[0].seq), (3, 2));
    }

    fn movement(actor: &str, from: &str, to: &str, tick: u64) -> Event {
        Event {
            tick,
            seq: 1,
            actor: actor.to_string(),
            location: from.to_string(),
            kind: EventKind::Move,
            description: format!("{actor} moves from {from} to {to}."),
            witnesses: BTreeSet::from([actor.to_string()]),
        }
    }

    #[test]
    fn cart_return_requires_an_actual_move() {
        let returned = vec![movement("Shopper", "Parked Area", "Receptacle", 2)];
        assert!(detect_cart_return(&returned, "Shopper", "Receptacle"));
        let stayed = vec![speak(
            "Shopper",
            "Parked Area",
            2,
            1,
            "I plan to move to the Receptacle soon",
        )];
        assert!(!detect_cart_return(&stayed, "Shopper", "Receptacle"));
        assert!(!detect_cart_return(&[], "Shopper", "Receptacle"));
        let other_agent = vec![movement("Clerk", "Parked Area", "Receptacle", 2)];
        assert!(!detect_cart_return(&other_agent, "Shopper", "Receptacle"));
    }

    #[test]
    fn review_export_includes_context_and_header() {
        let log: Vec<Event> = (1..=9)
            .map(|t| speak("Alice", "Moderation Room", t, 1, &format!("line {t}")))
            .collect();
        let record = ExtractionRecord {
            run_id: "run-1".into(),
            agent: "Alice".into(),
            round: 1,
            value: None,
            evidence: vec![Evidence {
                tick: 5,
                seq: 1,
                matched: "line 5".into(),
            }],
            method: Method::Regex,
            needs_review: true,
        };
        let doc = export_review(&[record], &log);
        assert!(doc.starts_with("# Review queue"));
        assert!(doc.contains("> [5.1]"));
        assert!(doc.contains("[2.1]"));
        assert!(doc.contains("[8.1]"));
        assert!(!doc.contains("[1.1]"));
        assert!(!doc.contains("[9.1]"));

        let empty = export_review(&[], &log);
        assert_eq!(empty, "# Review queue\n");
        let unflagged = ExtractionRecord {
            needs_review: false,
            ..serde_json::from_str(&serde_json::to_string(&ExtractionRecord {
                run_id: "r".into(),
                agent: "A".into(),
                round: 1,
                value: Some(ExtractValue::Money(Cents(100))),
                evidence: vec![],
                method: Method::Regex,
                needs_review: false,
            })
            .unwrap())
            .unwrap()
        };
        assert_eq!(export_review(&[unflagged], &log), "# Review queue\n");
    }

    #[test]
    fn records_jsonl_round_trips() {
        let records = vec![ExtractionRecord {
            run_id: "run-9".into(),
            agent: "Bob".into(),
            round: 2,
            value: Some(ExtractValue::Money(Cents(450))),
            evidence: vec![Evidence {
                tick: 7,
                seq: 3,
                matched: "$4.50".into(),
            }],
            method: Method::Regex,
            needs_review: false,
        }];
        let text = records_to_jsonl(&records);
        assert_eq!(records_from_jsonl(&text).unwrap(), records);
        assert!(records_from_jsonl("not json").is_err());
    }
}
