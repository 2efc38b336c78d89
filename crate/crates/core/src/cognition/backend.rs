//! Cognition backends: a live chat-completions HTTP client, a deterministic
//! replay backend fed from recorded transcripts, and a recorder wrapper that
//! captures every exchange for later replay.

use std::collections::BTreeMap;
use std::collections::VecDeque;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, BackendRequest, CognitionBackend, RequestKind, SamplingParams};

/// One recorded backend exchange. The digest keys replay lookup; the full
/// prompt text is kept so transcripts stay auditable on their own.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct TranscriptRecord {
    pub agent: String,
    pub kind: RequestKind,
    pub digest: String,
    pub system: String,
    pub context: String,
    pub request: String,
    pub reply: String,
}

/// Serializes records as JSON Lines, one record per line.
pub fn transcript_to_jsonl(records: &[TranscriptRecord]) -> String {
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("transcript record serializes"));
        out.push('\n');
    }
    out
}

/// Parses JSON Lines transcripts; blank lines are skipped.
pub fn transcript_from_jsonl(text: &str) -> Result<Vec<TranscriptRecord>, BackendError> {
    let mut records = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let record = serde_json::from_str(line)
            .map_err(|e| BackendError::MalformedTranscript(e.to_string()))?;
        records.push(record);
    }
    Ok(records)
}

/// Wraps another backend and records every completed exchange.
pub struct Recorder<B> {
    inner: B,
    records: Vec<TranscriptRecord>,
}

impl<B> Recorder<B> {
    pub fn new(inner: B) -> Self {
        Recorder {
            inner,
            records: Vec::new(),
        }
    }

    pub fn records(&self) -> &[TranscriptRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TranscriptRecord> {
        self.records
    }
}

impl<B: CognitionBackend> CognitionBackend for Recorder<B> {
    fn complete(
        &mut self,
        request: &BackendRequest,
        sampling: &SamplingParams,
    ) -> Result<String, BackendError> {
        let reply = self.inner.complete(request, sampling)?;
        self.records.push(TranscriptRecord {
            agent: request.agent.clone(),
            kind: request.kind,
            digest: request.bundle.digest(),
            system: request.bundle.system_text.clone(),
            context: request.bundle.context_text.clone(),
            request: request.bundle.request_text.clone(),
            reply: reply.clone(),
        });
        Ok(reply)
    }
}

/// Replays recorded replies keyed by prompt digest. Identical prompts replay
/// in recorded order; a prompt with no remaining reply is a replay miss.
pub struct Replay {
    replies: BTreeMap<String, VecDeque<String>>,
}

impl Replay {
    pub fn new(records: Vec<TranscriptRecord>) -> Self {
        let mut replies: BTreeMap<String, VecDeque<String>> = BTreeMap::new();
        for record in records {
            replies.entry(record.digest).or_default().push_back(record.reply);
        }
        Replay { replies }
    }

    pub fn from_jsonl(text: &str) -> Result<Self, BackendError> {
        Ok(Replay::new(transcript_from_jsonl(text)?))
    }
}

impl CognitionBackend for Replay {
    fn complete(
        &mut self,
        request: &BackendRequest,
        _sampling: &SamplingParams,
    ) -> Result<String, BackendError> {
        let digest = request.bundle.digest();
        match self.replies.get_mut(&digest).and_then(VecDeque::pop_front) {
            Some(reply) => Ok(reply),
            None => Err(BackendError::ReplayMiss { digest }),
        }
    }
}

const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";
const MAX_ATTEMPTS: u32 = 3;
const BACKOFF_BASE_MS: u64 = 500;
const BACKOFF_CAP_MS: u64 = 4000;

/// Live backend speaking the chat-completions wire format.
pub struct HttpChat {
    client: reqwest::blocking::Client,
    base_url: String,
    api_key: String,
    pub model: String,
}

impl HttpChat {
    /// Reads `AGORA_API_KEY` (required) and `AGORA_BASE_URL` (optional) from
    /// the environment.
    pub fn from_env(model: &str) -> Result<Self, BackendError> {
        let api_key = std::env::var("AGORA_API_KEY").map_err(|_| BackendError::MissingApiKey)?;
        let base_url =
            std::env::var("AGORA_BASE_URL").unwrap_or_else(|_| DEFAULT_BASE_URL.to_string());
        Ok(HttpChat::new(&base_url, &api_key, model))
    }

    pub fn new(base_url: &str, api_key: &str, model: &str) -> Self {
        HttpChat {
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client builds"),
            base_url: base_url.trim_end_matches('/').to_string(),
            api_key: api_key.to_string(),
            model: model.to_string(),
        }
    }

    /// Builds the JSON request body sent to `{base_url}/chat/completions`.
    pub fn request_body(
        model: &str,
        request: &BackendRequest,
        sampling: &SamplingParams,
    ) -> serde_json::Value {
        let user = format!(
            "{}\n\n{}",
            request.bundle.context_text, request.bundle.request_text
        );
        serde_json::json!({
            "model": model,
            "messages": [
                {"role": "system", "content": request.bundle.system_text},
                {"role": "user", "content": user},
            ],
            "temperature": sampling.temperature,
            "max_tokens": sampling.max_tokens,
        })
    }

    /// Extracts the assistant text from a chat-completions response body.
    pub fn parse_response(body: &serde_json::Value) -> Result<String, BackendError> {
        body.get("choices")
            .and_then(|c| c.get(0))
            .and_then(|c| c.get("message"))
            .and_then(|m| m.get("content"))
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| {
                BackendError::MalformedResponse("no choices[0].message.content".to_string())
            })
    }

    fn backoff_ms(attempt: u32) -> u64 {
        (BACKOFF_BASE_MS << attempt).min(BACKOFF_CAP_MS)
    }

    fn attempt(
        &self,
        body: &serde_json::Value,
    ) -> Result<Result<String, BackendError>, String> {
        let url = format!("{}/chat/completions", self.base_url);
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| e.to_string())?;
        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(format!("status {status}"));
        }
        if status >= 400 {
            let message = response.text().unwrap_or_default();
            return Ok(Err(BackendError::Http { status, message }));
        }
        let body: serde_json::Value = response.json().map_err(|e| e.to_string())?;
        Ok(Self::parse_response(&body))
    }
}

impl CognitionBackend for HttpChat {
    fn complete(
        &mut self,
        request: &BackendRequest,
        sampling: &SamplingParams,
    ) -> Result<String, BackendError> {
        let body = Self::request_body(&self.model, request, sampling);
        let mut last_error = String::new();
        for attempt in 0..MAX_ATTEMPTS {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(Self::backoff_ms(attempt - 1)));
            }
            match self.attempt(&body) {
                Ok(outcome) => return outcome,
                Err(message) => {
                    log::warn!("backend attempt {} failed: {message}", attempt + 1);
                    last_error = message;
                }
            }
        }
        Err(BackendError::Transport {
            attempts: MAX_ATTEMPTS,
            message: last_error,
        })
    }
}
