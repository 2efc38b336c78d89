//! The thinking half of the agent loop: prompt assembly, memory scoring and
//! retrieval, the react decision grammar, and pluggable completion backends
//! (live HTTP endpoint, transcript replay, deterministic scripted policies).

mod backend;
mod memory;
mod prompt;
mod react;
mod scripted;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    transcript_from_jsonl, transcript_to_jsonl, HttpChat, Recorder, Replay, TranscriptRecord,
};
pub use memory::{retrieve_relevant, score_importance, RetrievalWeights};
pub use prompt::{
    agent_view, assemble_prompt, importance_prompt, react_request_text, AgentView,
    DEFAULT_TOKEN_BUDGET, TRUNCATION_MARKER,
};
pub use react::{parse_reply, react, Action, Decision, RETRIEVAL_K};
pub use scripted::{normal_draw, rng_for, Scripted, ScriptedPolicy};

/// The three prompt sections sent to a backend, in canonical order:
/// identity + directives (system), observable context, and the request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub context_text: String,
    pub request_text: String,
    pub token_budget: usize,
}

impl PromptBundle {
    /// Whitespace-token count over all three sections.
    pub fn token_count(&self) -> usize {
        [&self.system_text, &self.context_text, &self.request_text]
            .iter()
            .map(|s| s.split_whitespace().count())
            .sum()
    }

    /// Stable hex digest used to key transcripts and replay.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.system_text.as_bytes());
        hasher.update([0x1e]);
        hasher.update(self.context_text.as_bytes());
        hasher.update([0x1e]);
        hasher.update(self.request_text.as_bytes());
        let bytes = hasher.finalize();
        bytes.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplingParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            temperature: 1.0,
            max_tokens: 256,
        }
    }
}

/// What kind of reply the engine is asking for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    React,
    Importance,
}

/// One completion request: the rendered prompt plus the structured
/// agent-observable view that scripted policies read. Both are built from
/// the same agent-visible information, so neither leaks private state.
#[derive(Debug, Clone)]
pub struct BackendRequest {
    pub agent: String,
    pub kind: RequestKind,
    pub bundle: PromptBundle,
    pub view: AgentView,
}

/// Synchronous completion contract shared by all backends. Within one world
/// calls are strictly sequential; independent replications may each own an
/// instance concurrently.
pub trait CognitionBackend {
    fn complete(
        &mut self,
        request: &BackendRequest,
        sampling: &SamplingParams,
    ) -> Result<String, BackendError>;
}

impl CognitionBackend for Box<dyn CognitionBackend> {
    fn complete(
        &mut self,
        request: &BackendRequest,
        sampling: &SamplingParams,
    ) -> Result<String, BackendError> {
        (**self).complete(request, sampling)
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("AGORA_API_KEY is not set")]
    MissingApiKey,
    #[error("transport failure after {attempts} attempts: {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned status {status}: {message}")]
    Http { status: u16, message: String },
    #[error("malformed completion response: {0}")]
    MalformedResponse(String),
    #[error("replay transcript has no reply for prompt digest {digest}")]
    ReplayMiss { digest: String },
    #[error("malformed transcript: {0}")]
    MalformedTranscript(String),
    #[error("unknown scripted policy {0:?}")]
    UnknownPolicy(String),
    #[error("bad policy params: {0}")]
    BadPolicyParams(String),
}
