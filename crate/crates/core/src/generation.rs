//! Grounded answer generation over retrieved context.
//!
//! [`HttpChatClient`] talks to any OpenAI-compatible chat-completions
//! endpoint. [`StubClient`] answers deterministically from ground truth so the
//! whole evaluation path runs offline.

use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::corpus::{Chunk, Dataset, SpatialQuery};
use crate::geo::METERS_PER_MILE;
use crate::retrieval::RankedResult;

pub const DEFAULT_TEMPERATURE: f64 = 0.1;
pub const DEFAULT_MAX_PARALLEL: usize = 4;
pub const DEFAULT_API_KEY_ENV: &str = "PAS_GENERATION_API_KEY";
pub const NO_CONTEXT: &str = "(no documents retrieved)";
pub const NO_EVIDENCE: &str = "no supporting evidence";

pub const SYSTEM_PROMPT: &str = "You are a careful RAG answering assistant.
Answer the user's query using ONLY the retrieved context.
Do not use outside knowledge.
If the evidence is weak or partially mismatched, say so briefly.
Prefer concise answers that directly name the best matching places.
Only cite documents that actually support your answer.
Return STRICT JSON with exactly these keys:
{
  \"answer\": string,
  \"citations\": [{\"title\": string, \"doc_id\": string}],
  \"faithfulness_notes\": [string]
}
Do not include markdown fences.";

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("endpoint returned {status}: {body}")]
    Status { status: u16, body: String },
    #[error("unexpected response shape: {0}")]
    Shape(String),
    #[error("environment variable {0} is not set")]
    MissingKey(String),
    #[error("{0} does not support free-form completion")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Citation {
    pub title: String,
    pub doc_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Content {
    answer: String,
    citations: Vec<Citation>,
    faithfulness_notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub answer: String,
    pub citations: Vec<Citation>,
    pub faithfulness_notes: Vec<String>,
    pub model_tag: String,
    pub raw: String,
    pub parse_error: Option<String>,
    pub fence_stripped: bool,
}

impl GenerationRecord {
    pub fn failed(model_tag: &str, raw: &str, error: String) -> Self {
        Self {
            answer: String::new(),
            citations: Vec::new(),
            faithfulness_notes: Vec::new(),
            model_tag: model_tag.to_string(),
            raw: raw.to_string(),
            parse_error: Some(error),
            fence_stripped: false,
        }
    }

    pub fn cited_ids(&self) -> Vec<String> {
        self.citations.iter().map(|c| c.doc_id.clone()).collect()
    }

    /// The three content keys as the JSON object the prompt asks for.
    pub fn content_json(&self) -> String {
        let c = Content {
            answer: self.answer.clone(),
            citations: self.citations.clone(),
            faithfulness_notes: self.faithfulness_notes.clone(),
        };
        serde_json::to_string(&c).expect("plain data serializes")
    }
}

fn strip_fence(text: &str) -> Option<&str> {
    let t = text.trim();
    let rest = t.strip_prefix("```")?;
    let rest = rest.strip_suffix("```")?;
    // drop an info string such as `json`
    let body = match rest.find('\n') {
        Some(i) if rest[..i].trim().chars().all(|c| c.is_ascii_alphanumeric()) => &rest[i + 1..],
        _ => rest,
    };
    Some(body.trim())
}

/// Parses a strict-JSON answer. Failures come back as a record with an empty
/// answer and `parse_error` set.
pub fn parse_response(text: &str, model_tag: &str) -> GenerationRecord {
    let (body, fence_stripped) = match strip_fence(text) {
        Some(b) => {
            debug!("stripped markdown fence from {model_tag} response");
            (b, true)
        }
        None => (text.trim(), false),
    };
    match serde_json::from_str::<Content>(body) {
        Ok(c) => GenerationRecord {
            answer: c.answer,
            citations: c.citations,
            faithfulness_notes: c.faithfulness_notes,
            model_tag: model_tag.to_string(),
            raw: text.to_string(),
            parse_error: None,
            fence_stripped,
        },
        Err(e) => {
            let mut r = GenerationRecord::failed(model_tag, text, e.to_string());
            r.fence_stripped = fence_stripped;
            r
        }
    }
}

/// Chunks of `result` in rank order. Unknown ids are skipped.
pub fn context_chunks<'a>(result: &RankedResult, dataset: &'a Dataset) -> Vec<&'a Chunk> {
    result
        .entries
        .iter()
        .filter_map(|e| dataset.chunks.iter().find(|c| c.doc_id == e.doc_id))
        .collect()
}

pub fn context_text(context: &[&Chunk]) -> String {
    if context.is_empty() {
        return NO_CONTEXT.to_string();
    }
    context
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}. [{}] {} — {}", i + 1, c.doc_id, c.name, c.description))
        .collect::<Vec<_>>()
        .join("\n")
}

/// System and user prompt for one query. Byte-stable for identical input.
pub fn build_prompt(query: &SpatialQuery, context: &[&Chunk]) -> (String, String) {
    let tags = if query.must_have_tags.is_empty() {
        "(none)".to_string()
    } else {
        query.must_have_tags.join(", ")
    };
    let user = format!(
        "User query: {raw}

Semantic target:
- entity_type: {entity}
- must_have_tags: {tags}

Spatial intent:
- direction_constraint: {dir}
- radius_miles: {miles:.2}

Retrieved context:
{ctx}

Instructions:
1. Write a grounded answer that directly answers the user query.
2. Mention strongest matching places first.
3. Exclude unsupported claims.
4. Mention uncertainty for weak spatial matches.
5. Cite only docs used in the answer.
6. Output STRICT JSON only.",
        raw = query.raw_query,
        entity = query.entity_category,
        dir = query.direction_constraint,
        miles = query.radius_m / METERS_PER_MILE,
        ctx = context_text(context),
    );
    (SYSTEM_PROMPT.to_string(), user)
}

/// The reference answer F1 is scored against: ground-truth names in id order.
pub fn reference_answer(query: &SpatialQuery, dataset: &Dataset) -> String {
    query
        .ground_truth
        .iter()
        .filter_map(|id| dataset.chunks.iter().find(|c| &c.doc_id == id))
        .map(|c| c.name.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

pub trait GenerationClient: Send + Sync {
    fn model_tag(&self) -> String;

    fn complete(
        &self,
        system: &str,
        user: &str,
        temperature: f64,
    ) -> Result<String, GenerationError>;

    /// Answers `query` from `context`. Transport failures become error records.
    fn generate(
        &self,
        query: &SpatialQuery,
        context: &[&Chunk],
        temperature: f64,
    ) -> GenerationRecord {
        let (system, user) = build_prompt(query, context);
        let tag = self.model_tag();
        match self.complete(&system, &user, temperature) {
            Ok(text) => parse_response(&text, &tag),
            Err(e) => {
                warn!("generation failed for {}: {e}", query.query_id);
                GenerationRecord::failed(&tag, "", e.to_string())
            }
        }
    }
}

/// Names the retrieved documents that are in the ground truth and cites them.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubClient;

impl GenerationClient for StubClient {
    fn model_tag(&self) -> String {
        "stub".into()
    }

    fn complete(
        &self,
        _system: &str,
        _user: &str,
        _temperature: f64,
    ) -> Result<String, GenerationError> {
        Err(GenerationError::Unsupported(self.model_tag()))
    }

    fn generate(
        &self,
        query: &SpatialQuery,
        context: &[&Chunk],
        _temperature: f64,
    ) -> GenerationRecord {
        let hits: Vec<&Chunk> = context
            .iter()
            .copied()
            .filter(|c| query.ground_truth.contains(&c.doc_id))
            .collect();
        let content = if hits.is_empty() {
            Content {
                answer: NO_EVIDENCE.into(),
                citations: Vec::new(),
                faithfulness_notes: vec!["no retrieved document matches the request".into()],
            }
        } else {
            Content {
                answer: hits
                    .iter()
                    .map(|c| c.name.as_str())
                    .collect::<Vec<_>>()
                    .join(", "),
                citations: hits
                    .iter()
                    .map(|c| Citation {
                        title: c.name.clone(),
                        doc_id: c.doc_id.clone(),
                    })
                    .collect(),
                faithfulness_notes: Vec::new(),
            }
        };
        let raw = serde_json::to_string(&content).expect("plain data serializes");
        parse_response(&raw, &self.model_tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpClientConfig {
    /// Full chat-completions URL.
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub timeout_s: u64,
    pub retries: u32,
}

impl Default for HttpClientConfig {
    fn default() -> Self {
        Self {
            endpoint: "http://localhost:8000/v1/chat/completions".into(),
            model: "gpt-4o-mini".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_s: 60,
            retries: 3,
        }
    }
}

pub struct HttpChatClient {
    cfg: HttpClientConfig,
    api_key: Option<String>,
    http: reqwest::blocking::Client,
}

impl HttpChatClient {
    /// Reads the API key from `cfg.api_key_env`; endpoints without auth may
    /// leave it unset.
    pub fn new(cfg: HttpClientConfig) -> Result<Self, GenerationError> {
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        if api_key.is_none() {
            warn!(
                "{} is not set; sending requests without authorization",
                cfg.api_key_env
            );
        }
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_s))
            .build()
            .map_err(|e| GenerationError::Transport(e.to_string()))?;
        Ok(Self { cfg, api_key, http })
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, (bool, GenerationError)> {
        let mut req = self.http.post(&self.cfg.endpoint).json(body);
        if let Some(k) = &self.api_key {
            req = req.bearer_auth(k);
        }
        let resp = req
            .send()
            .map_err(|e| (true, GenerationError::Transport(e.to_string())))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| (true, GenerationError::Transport(e.to_string())))?;
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429;
            return Err((
                retry,
                GenerationError::Status {
                    status: status.as_u16(),
                    body: text,
                },
            ));
        }
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| (false, GenerationError::Shape(e.to_string())))?;
        v.pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| {
                (
                    false,
                    GenerationError::Shape("missing choices[0].message.content".into()),
                )
            })
    }
}

impl GenerationClient for HttpChatClient {
    fn model_tag(&self) -> String {
        self.cfg.model.clone()
    }

    fn complete(
        &self,
        system: &str,
        user: &str,
        temperature: f64,
    ) -> Result<String, GenerationError> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        });
        let mut delay = Duration::from_millis(500);
        let mut attempt = 0;
        loop {
            match self.attempt(&body) {
                Ok(s) => return Ok(s),
                Err((true, e)) if attempt < self.cfg.retries => {
                    attempt += 1;
                    warn!("generation attempt {attempt} failed: {e}; retrying in {delay:?}");
                    thread::sleep(delay);
                    delay *= 2;
                }
                Err((_, e)) => return Err(e),
            }
        }
    }
}
