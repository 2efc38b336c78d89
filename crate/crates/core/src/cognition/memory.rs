//! Memory importance scoring and relevance retrieval.
//!
//! Retrieval scores `w_i * (importance/10) + w_r * 0.99^(now - created) +
//! w_q * jaccard(query, description)` with defaults (0.4, 0.3, 0.3). Ties
//! break toward the newer memory, then insertion order.

use std::collections::BTreeSet;

use crate::engine::Memory;

use super::{BackendError, BackendRequest, CognitionBackend, SamplingParams};

#[derive(Debug, Clone, Copy)]
pub struct RetrievalWeights {
    pub importance: f64,
    pub recency: f64,
    pub overlap: f64,
}

impl Default for RetrievalWeights {
    fn default() -> Self {
        RetrievalWeights {
            importance: 0.4,
            recency: 0.3,
            overlap: 0.3,
        }
    }
}

fn word_set(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
        .collect()
}

/// Jaccard similarity over lowercased word sets; 0 when either side is empty.
fn lexical_overlap(query: &BTreeSet<String>, description: &str) -> f64 {
    let words = word_set(description);
    if query.is_empty() || words.is_empty() {
        return 0.0;
    }
    let intersection = query.intersection(&words).count() as f64;
    let union = (query.len() + words.len()) as f64 - intersection;
    intersection / union
}

fn score(memory: &Memory, query: &BTreeSet<String>, now_tick: u64, w: &RetrievalWeights) -> f64 {
    let age = now_tick.saturating_sub(memory.created_tick);
    let recency = 0.99_f64.powi(age.min(i32::MAX as u64) as i32);
    w.importance * (memory.importance as f64 / 10.0)
        + w.recency * recency
        + w.overlap * lexical_overlap(query, &memory.description)
}

/// Returns the top-`k` memories by relevance score. The ordering is total:
/// score, then newer `created_tick`, then earlier insertion.
pub fn retrieve_relevant(
    memories: &[Memory],
    query: &str,
    k: usize,
    now_tick: u64,
    weights: &RetrievalWeights,
) -> Vec<Memory> {
    debug_assert!(k >= 1);
    let query = word_set(query);
    let mut scored: Vec<(f64, &Memory, usize)> = memories
        .iter()
        .enumerate()
        .map(|(idx, m)| (score(m, &query, now_tick, weights), m, idx))
        .collect();
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(b.1.created_tick.cmp(&a.1.created_tick))
            .then(a.2.cmp(&b.2))
    });
    scored.into_iter().take(k).map(|(_, m, _)| m.clone()).collect()
}

/// Asks the backend to rate a memory 1-10 and parses the first integer from
/// the reply, clamped to [1, 10]. Unparseable replies fall back to 5 with a
/// warning; only transport failures surface as errors.
pub fn score_importance(
    backend: &mut dyn CognitionBackend,
    request: &BackendRequest,
) -> Result<u8, BackendError> {
    let reply = backend.complete(request, &SamplingParams::default())?;
    Ok(match first_integer(&reply) {
        Some(value) => value.clamp(1, 10) as u8,
        None => {
            log::warn!(
                "importance reply for {} had no integer ({reply:?}); using 5",
                request.agent
            );
            5
        }
    })
}

/// First integer in the text, honoring an immediately preceding minus sign.
fn first_integer(text: &str) -> Option<i64> {
    let bytes = text.as_bytes();
    let start = bytes.iter().position(|b| b.is_ascii_digit())?;
    let end = bytes[start..]
        .iter()
        .position(|b| !b.is_ascii_digit())
        .map(|off| start + off)
        .unwrap_or(bytes.len());
    let negative = start > 0 && bytes[start - 1] == b'-';
    let digits = &text[start..end.min(start + 9)];
    let value: i64 = digits.parse().ok()?;
    Some(if negative { -value } else { value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::RequestKind;
    use crate::cognition::PromptBundle;

    fn memory(description: &str, created_tick: u64, importance: u8) -> Memory {
        Memory {
            description: description.into(),
            created_tick,
            importance,
        }
    }

    #[test]
    fn empty_store_returns_empty() {
        let out = retrieve_relevant(&[], "anything", 3, 5, &RetrievalWeights::default());
        assert!(out.is_empty());
    }

    #[test]
    fn importance_dominates_when_all_else_equal() {
        let store = vec![memory("same words", 2, 3), memory("same words", 2, 9)];
        let out = retrieve_relevant(&store, "query", 2, 5, &RetrievalWeights::default());
        assert_eq!(out[0].importance, 9);
        assert_eq!(out[1].importance, 3);
    }

    #[test]
    fn five_memory_ranking_matches_hand_computed_oracle() {
        // Scores evaluated by hand with weights (0.4, 0.3, 0.3), now_tick 10,
        // query "alice contribution in the game room":
        //   m0 0.6674, m3 0.6302, m2 0.5853, m1 0.5270, m4 0.3775
        let store = vec![
            memory("alice contributed ten dollars", 1, 9),
            memory("bob waited in the game room", 9, 2),
            memory("alice moved to the moderation room", 5, 5),
            memory("the moderator announced payoffs", 2, 8),
            memory("alice said hello", 10, 1),
        ];
        let out = retrieve_relevant(
            &store,
            "alice contribution in the game room",
            5,
            10,
            &RetrievalWeights::default(),
        );
        let order: Vec<&str> = out.iter().map(|m| m.description.as_str()).collect();
        assert_eq!(
            order,
            vec![
                "alice contributed ten dollars",
                "the moderator announced payoffs",
                "alice moved to the moderation room",
                "bob waited in the game room",
                "alice said hello",
            ]
        );
    }

    #[test]
    fn ties_break_to_newer_then_insertion() {
        let store = vec![
            memory("twin", 3, 5),
            memory("twin", 7, 5),
            memory("twin", 7, 5),
        ];
        let out = retrieve_relevant(&store, "", 3, 10, &RetrievalWeights::default());
        assert_eq!(out[0].created_tick, 7);
        assert_eq!(out[2].created_tick, 3);
        // Within the (7, 7) tie, insertion order is preserved; equality of
        // content makes that unobservable here, which is exactly the point:
        // the order is total and stable.
    }

    #[test]
    fn returns_fewer_than_k_when_store_is_small() {
        let store = vec![memory("only", 1, 5)];
        let out = retrieve_relevant(&store, "only", 10, 2, &RetrievalWeights::default());
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn permuting_distinct_memories_preserves_ranking() {
        let store = vec![
            memory("alpha beta", 1, 9),
            memory("gamma delta", 4, 4),
            memory("epsilon zeta", 8, 2),
        ];
        let forward = retrieve_relevant(&store, "alpha", 3, 9, &RetrievalWeights::default());
        let mut reversed_store = store.clone();
        reversed_store.reverse();
        let reversed = retrieve_relevant(&reversed_store, "alpha", 3, 9, &RetrievalWeights::default());
        let names = |v: &[Memory]| v.iter().map(|m| m.description.clone()).collect::<Vec<_>>();
        assert_eq!(names(&forward), names(&reversed));
    }

    struct CannedBackend(String);
    impl CognitionBackend for CannedBackend {
        fn complete(
            &mut self,
            _request: &BackendRequest,
            _sampling: &SamplingParams,
        ) -> Result<String, BackendError> {
            Ok(self.0.clone())
        }
    }

    fn dummy_request() -> BackendRequest {
        BackendRequest {
            agent: "Alice".into(),
            kind: RequestKind::Importance,
            bundle: PromptBundle {
                system_text: String::new(),
                context_text: String::new(),
                request_text: String::new(),
                token_budget: 128,
            },
            view: dummy_view(),
        }
    }

    fn dummy_view() -> crate::cognition::AgentView {
        crate::cognition::AgentView {
            tick: 0,
            name: "Alice".into(),
            public_bio: String::new(),
            private_bio: String::new(),
            directives: vec![],
            location: "Nowhere".into(),
            location_description: String::new(),
            present: vec![],
            public_bios: vec![],
            witnessed: vec![],
            memories: vec![],
            current_plan_description: String::new(),
        }
    }

    #[test]
    fn importance_parses_clamps_and_falls_back() {
        let cases = [
            ("8", 8),
            ("importance: 42 obviously", 10),
            ("very important", 5),
            ("-3 sounds right", 1),
            ("0", 1),
            ("I'd say 7.5", 7),
        ];
        for (reply, expected) in cases {
            let mut backend = CannedBackend(reply.into());
            let got = score_importance(&mut backend, &dummy_request()).unwrap();
            assert_eq!(got, expected, "reply {reply:?}");
        }
    }
}
