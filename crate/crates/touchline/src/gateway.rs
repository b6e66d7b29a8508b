//! Uniform client for language/vision model endpoints.
//!
//! Three interchangeable backends sit behind [`Gateway`]: a remote HTTP
//! chat-completion client, a deterministic scripted backend driven by an
//! ordered pattern table, and a replay backend serving a record/replay
//! cache. Scripted and replay backends are pure functions of their table
//! or cache, which is what the reproducible test suites build on.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
}

/// One model call. `tag` is a free-text provenance label ("planner",
/// "tool:Choice Selection", …) used for logging and trace attribution; it
/// does not participate in cache keys or scripted matching.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub tag: String,
}

impl ChatRequest {
    /// Single user-message request at temperature 0.
    pub fn user(tag: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            messages: vec![ChatMessage { role: Role::User, text: text.into() }],
            temperature: 0.0,
            max_tokens: 4096,
            tag: tag.into(),
        }
    }

    /// Appends an assistant turn plus a follow-up user turn (repair loop).
    pub fn with_followup(mut self, assistant: impl Into<String>, user: impl Into<String>) -> Self {
        self.messages.push(ChatMessage { role: Role::Assistant, text: assistant.into() });
        self.messages.push(ChatMessage { role: Role::User, text: user.into() });
        self
    }

    /// The request's textual surface: all message texts joined by newlines.
    /// Scripted pattern matching runs over this string.
    pub fn flat_text(&self) -> String {
        let parts: Vec<&str> = self.messages.iter().map(|m| m.text.as_str()).collect();
        parts.join("\n")
    }

    /// Content hash used as the record/replay cache key. Covers messages,
    /// temperature and max_tokens; the provenance tag is excluded so that
    /// relabelling calls does not invalidate a cache.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for m in &self.messages {
            hasher.update(m.role.as_str().as_bytes());
            hasher.update([0x1f]);
            hasher.update(m.text.as_bytes());
            hasher.update([0x1e]);
        }
        hasher.update(format!("t={};m={}", self.temperature, self.max_tokens).as_bytes());
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatResponse {
    pub text: String,
    pub usage: Option<TokenUsage>,
    pub latency: Duration,
}

impl ChatResponse {
    fn canned(text: String) -> Self {
        Self { text, usage: None, latency: Duration::ZERO }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("model call timed out after {0:?}")]
    Timeout(Duration),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("scripted table has no rule matching request tagged {tag:?}")]
    FixtureMiss { tag: String },
    #[error("replay cache miss for key {key} (request tagged {tag:?})")]
    CacheMiss { key: String, tag: String },
    #[error("malformed model response: {0}")]
    MalformedResponse(String),
    #[error("gateway configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError>;
}

// ---------------------------------------------------------------------------
// Scripted backend
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Exact,
    Substring,
}

/// One row of the ordered pattern table; the first matching row wins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptedRule {
    pub pattern: String,
    pub match_kind: MatchKind,
    pub response_text: String,
}

impl ScriptedRule {
    pub fn substring(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self { pattern: pattern.into(), match_kind: MatchKind::Substring, response_text: response.into() }
    }

    pub fn exact(pattern: impl Into<String>, response: impl Into<String>) -> Self {
        Self { pattern: pattern.into(), match_kind: MatchKind::Exact, response_text: response.into() }
    }
}

/// Deterministic backend: matches the request text against an ordered rule
/// table and returns the canned response of the first hit.
pub struct ScriptedBackend {
    rules: Vec<ScriptedRule>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptedRule>) -> Self {
        Self { rules }
    }

    /// Loads a JSON rule file: an ordered array of
    /// `{pattern, match_kind: "exact"|"substring", response_text}` records.
    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let raw = fs::read_to_string(path)?;
        let rules: Vec<ScriptedRule> = serde_json::from_str(&raw)
            .map_err(|e| GatewayError::Config(format!("scripted table {}: {e}", path.display())))?;
        Ok(Self { rules })
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let text = request.flat_text();
        for rule in &self.rules {
            let hit = match rule.match_kind {
                MatchKind::Exact => text == rule.pattern,
                MatchKind::Substring => text.contains(&rule.pattern),
            };
            if hit {
                return Ok(ChatResponse::canned(rule.response_text.clone()));
            }
        }
        Err(GatewayError::FixtureMiss { tag: request.tag.clone() })
    }
}

// ---------------------------------------------------------------------------
// Record / replay cache
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: u64,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    key: String,
    tag: String,
    request_text: String,
    response_text: String,
}

/// On-disk response cache, one JSON file per entry keyed by request hash.
/// Writes are atomic (temp file + rename) and the cache is append-only.
pub struct ResponseCache {
    dir: PathBuf,
    counters: Mutex<(u64, u64)>,
}

impl ResponseCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, counters: Mutex::new((0, 0)) })
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn lookup(&self, request: &ChatRequest) -> Option<String> {
        let path = self.entry_path(&request.content_hash());
        let found = fs::read_to_string(path)
            .ok()
            .and_then(|raw| serde_json::from_str::<CacheEntry>(&raw).ok())
            .map(|entry| entry.response_text);
        let mut counters = self.counters.lock().unwrap();
        match found {
            Some(text) => {
                counters.0 += 1;
                Some(text)
            }
            None => {
                counters.1 += 1;
                None
            }
        }
    }

    pub fn record(&self, request: &ChatRequest, response_text: &str) -> Result<(), GatewayError> {
        let key = request.content_hash();
        let path = self.entry_path(&key);
        if path.exists() {
            return Ok(());
        }
        let entry = CacheEntry {
            key: key.clone(),
            tag: request.tag.clone(),
            request_text: request.flat_text(),
            response_text: response_text.to_string(),
        };
        let tmp = self.dir.join(format!("{key}.tmp"));
        fs::write(&tmp, serde_json::to_vec_pretty(&entry).expect("serializable"))?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    pub fn stats(&self) -> CacheStats {
        let (hits, misses) = *self.counters.lock().unwrap();
        let entries = fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(|e| e.ok())
                    .filter(|e| e.path().extension().is_some_and(|ext| ext == "json"))
                    .count() as u64
            })
            .unwrap_or(0);
        CacheStats { hits, misses, entries }
    }
}

/// Strict replay: serves only cached responses, failing loudly on a miss.
pub struct ReplayBackend {
    cache: Arc<ResponseCache>,
}

impl ReplayBackend {
    pub fn new(cache: Arc<ResponseCache>) -> Self {
        Self { cache }
    }

    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, GatewayError> {
        Ok(Self::new(Arc::new(ResponseCache::open(dir)?)))
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }
}

impl Backend for ReplayBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        match self.cache.lookup(request) {
            Some(text) => Ok(ChatResponse::canned(text)),
            None => Err(GatewayError::CacheMiss {
                key: request.content_hash(),
                tag: request.tag.clone(),
            }),
        }
    }
}

/// Pass-through backend that records every response into the cache and
/// serves already-recorded requests from it.
pub struct RecordingBackend {
    inner: Arc<dyn Backend>,
    cache: Arc<ResponseCache>,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn Backend>, cache: Arc<ResponseCache>) -> Self {
        Self { inner, cache }
    }

    pub fn cache(&self) -> &ResponseCache {
        &self.cache
    }
}

impl Backend for RecordingBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if let Some(text) = self.cache.lookup(request) {
            return Ok(ChatResponse::canned(text));
        }
        let response = self.inner.complete(request)?;
        self.cache.record(request, &response.text)?;
        Ok(response)
    }
}

// ---------------------------------------------------------------------------
// Remote backend
// ---------------------------------------------------------------------------

/// Remote endpoint settings; `from_env` reads MODEL_ENDPOINT, MODEL_API_KEY
/// and MODEL_NAME.
#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    pub max_retries: u32,
}

impl RemoteConfig {
    pub fn from_env() -> Result<Self, GatewayError> {
        let endpoint = std::env::var("MODEL_ENDPOINT")
            .map_err(|_| GatewayError::Config("MODEL_ENDPOINT is not set".into()))?;
        let model = std::env::var("MODEL_NAME").unwrap_or_else(|_| "default".into());
        Ok(Self {
            endpoint,
            api_key: std::env::var("MODEL_API_KEY").ok(),
            model,
            timeout: Duration::from_secs(120),
            max_retries: 3,
        })
    }
}

/// HTTP chat-completion client with bounded retries, exponential backoff
/// and jitter.
pub struct RemoteBackend {
    config: RemoteConfig,
    client: reqwest::blocking::Client,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, GatewayError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GatewayError::Config(e.to_string()))?;
        Ok(Self { config, client })
    }

    fn backoff(attempt: u32) -> Duration {
        use rand::Rng;
        let base = Duration::from_millis(250) * 2u32.saturating_pow(attempt);
        let jitter = Duration::from_millis(rand::thread_rng().gen_range(0..100));
        base + jitter
    }

    fn try_once(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let messages: Vec<serde_json::Value> = request
            .messages
            .iter()
            .map(|m| serde_json::json!({"role": m.role.as_str(), "content": m.text}))
            .collect();
        let payload = serde_json::json!({
            "model": self.config.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut builder = self.client.post(&self.config.endpoint).json(&payload);
        if let Some(key) = &self.config.api_key {
            builder = builder.bearer_auth(key);
        }
        let started = Instant::now();
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                GatewayError::Timeout(self.config.timeout)
            } else {
                GatewayError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        if status.as_u16() == 429 {
            return Err(GatewayError::RateLimited { attempts: 1 });
        }
        if !status.is_success() {
            return Err(GatewayError::Transport(format!("HTTP {status}")));
        }
        let body: serde_json::Value = response
            .json()
            .map_err(|e| GatewayError::MalformedResponse(e.to_string()))?;
        let text = body["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| GatewayError::MalformedResponse("no choices[0].message.content".into()))?
            .to_string();
        let usage = body.get("usage").map(|u| TokenUsage {
            prompt_tokens: u["prompt_tokens"].as_u64().unwrap_or(0) as u32,
            completion_tokens: u["completion_tokens"].as_u64().unwrap_or(0) as u32,
        });
        Ok(ChatResponse { text, usage, latency: started.elapsed() })
    }
}

impl Backend for RemoteBackend {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        let mut last_err = None;
        for attempt in 0..=self.config.max_retries {
            match self.try_once(request) {
                Ok(response) => return Ok(response),
                Err(err @ (GatewayError::MalformedResponse(_) | GatewayError::Config(_))) => {
                    return Err(err);
                }
                Err(err) => {
                    last_err = Some(err);
                    if attempt < self.config.max_retries {
                        std::thread::sleep(Self::backoff(attempt));
                    }
                }
            }
        }
        match last_err {
            Some(GatewayError::RateLimited { .. }) => Err(GatewayError::RateLimited {
                attempts: self.config.max_retries + 1,
            }),
            Some(err) => Err(err),
            None => Err(GatewayError::Transport("no attempt made".into())),
        }
    }
}

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

/// Counting semaphore bounding in-flight backend calls.
struct Limiter {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(width: usize) -> Self {
        Self { permits: Mutex::new(width.max(1)), cv: Condvar::new() }
    }

    fn acquire(&self) -> LimiterGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cv.wait(permits).unwrap();
        }
        *permits -= 1;
        LimiterGuard { limiter: self }
    }
}

struct LimiterGuard<'a> {
    limiter: &'a Limiter,
}

impl Drop for LimiterGuard<'_> {
    fn drop(&mut self) {
        *self.limiter.permits.lock().unwrap() += 1;
        self.limiter.cv.notify_one();
    }
}

#[derive(Debug, Clone)]
pub struct TranscriptEntry {
    pub tag: String,
    pub text: String,
}

/// Shared front door for all model calls: applies the concurrency bound,
/// logs per-tag, and optionally records outbound prompts for assertions.
pub struct Gateway {
    backend: Arc<dyn Backend>,
    limiter: Limiter,
    transcript: Option<Mutex<Vec<TranscriptEntry>>>,
}

impl Gateway {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Self::with_width(backend, 8)
    }

    pub fn with_width(backend: Arc<dyn Backend>, width: usize) -> Self {
        Self { backend, limiter: Limiter::new(width), transcript: None }
    }

    pub fn scripted(rules: Vec<ScriptedRule>) -> Self {
        Self::new(Arc::new(ScriptedBackend::new(rules)))
    }

    /// Enables prompt recording; see [`Gateway::transcript`].
    pub fn recording_transcript(mut self) -> Self {
        self.transcript = Some(Mutex::new(Vec::new()));
        self
    }

    pub fn transcript(&self) -> Vec<TranscriptEntry> {
        self.transcript
            .as_ref()
            .map(|t| t.lock().unwrap().clone())
            .unwrap_or_default()
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
        if let Some(transcript) = &self.transcript {
            transcript.lock().unwrap().push(TranscriptEntry {
                tag: request.tag.clone(),
                text: request.flat_text(),
            });
        }
        let _permit = self.limiter.acquire();
        let result = self.backend.complete(request);
        match &result {
            Ok(response) => log::debug!(
                "gateway call tag={} ok ({} bytes, {:?})",
                request.tag,
                response.text.len(),
                response.latency
            ),
            Err(err) => log::warn!("gateway call tag={} failed: {err}", request.tag),
        }
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn req(text: &str) -> ChatRequest {
        ChatRequest::user("test", text)
    }

    #[test]
    fn scripted_first_match_wins() {
        let backend = ScriptedBackend::new(vec![
            ScriptedRule::substring("final score", "first"),
            ScriptedRule::substring("score", "second"),
        ]);
        assert_eq!(backend.complete(&req("what is the final score?")).unwrap().text, "first");
        assert_eq!(backend.complete(&req("the score please")).unwrap().text, "second");
    }

    #[test]
    fn scripted_exact_and_miss() {
        let backend = ScriptedBackend::new(vec![ScriptedRule::exact("ping", "pong")]);
        assert_eq!(backend.complete(&req("ping")).unwrap().text, "pong");
        let err = backend.complete(&req("ping!")).unwrap_err();
        assert!(matches!(err, GatewayError::FixtureMiss { tag } if tag == "test"));
    }

    #[test]
    fn cache_round_trip_and_restart() {
        let dir = tempfile::tempdir().unwrap();
        let request = req("hello");
        {
            let cache = ResponseCache::open(dir.path()).unwrap();
            cache.record(&request, "world").unwrap();
            assert_eq!(cache.lookup(&request), Some("world".to_string()));
            assert_eq!(cache.stats().hits, 1);
            assert_eq!(cache.stats().entries, 1);
        }
        // fresh handle over the same directory sees the entry
        let cache = ResponseCache::open(dir.path()).unwrap();
        assert_eq!(cache.lookup(&request), Some("world".to_string()));
        assert_eq!(cache.lookup(&req("other")), None);
        let stats = cache.stats();
        assert_eq!((stats.hits, stats.misses, stats.entries), (1, 1, 1));
    }

    #[test]
    fn replay_is_strict_on_miss() {
        let dir = tempfile::tempdir().unwrap();
        let replay = ReplayBackend::open(dir.path()).unwrap();
        let err = replay.complete(&req("never recorded")).unwrap_err();
        assert!(matches!(err, GatewayError::CacheMiss { .. }));
    }

    #[test]
    fn recording_then_replay_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let scripted: Arc<dyn Backend> =
            Arc::new(ScriptedBackend::new(vec![ScriptedRule::substring("q1", "a1")]));
        let cache = Arc::new(ResponseCache::open(dir.path()).unwrap());
        let recorder = RecordingBackend::new(scripted, cache.clone());
        let first = recorder.complete(&req("q1 please")).unwrap().text;

        let replay = ReplayBackend::new(cache);
        let second = replay.complete(&req("q1 please")).unwrap().text;
        assert_eq!(first, second);
        // two distinct requests make two entries
        recorder.complete(&req("q1 again")).unwrap();
        assert_eq!(recorder.cache().stats().entries, 2);
    }

    #[test]
    fn hash_ignores_tag_but_not_content() {
        let a = ChatRequest::user("planner", "same text");
        let b = ChatRequest::user("executor", "same text");
        let c = ChatRequest::user("planner", "other text");
        assert_eq!(a.content_hash(), b.content_hash());
        assert_ne!(a.content_hash(), c.content_hash());
    }

    #[test]
    fn limiter_bounds_in_flight_calls() {
        struct Probe {
            current: AtomicUsize,
            peak: AtomicUsize,
        }
        impl Backend for Probe {
            fn complete(&self, _request: &ChatRequest) -> Result<ChatResponse, GatewayError> {
                let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
                self.peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(15));
                self.current.fetch_sub(1, Ordering::SeqCst);
                Ok(ChatResponse::canned("ok".into()))
            }
        }
        let probe = Arc::new(Probe { current: AtomicUsize::new(0), peak: AtomicUsize::new(0) });
        let gateway = Arc::new(Gateway::with_width(probe.clone(), 2));
        std::thread::scope(|scope| {
            for i in 0..8 {
                let gateway = gateway.clone();
                scope.spawn(move || gateway.complete(&req(&format!("r{i}"))).unwrap());
            }
        });
        assert!(probe.peak.load(Ordering::SeqCst) <= 2);
    }

    /// Minimal HTTP responder: answers each connection with the next canned
    /// status/body pair.
    fn spawn_http(responses: Vec<(u16, String)>) -> (String, std::thread::JoinHandle<()>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
                let mut buf = [0u8; 65536];
                // read until end of headers + body (best effort for tests)
                let mut total = 0;
                loop {
                    match stream.read(&mut buf[total..]) {
                        Ok(0) => break,
                        Ok(n) => {
                            total += n;
                            let text = String::from_utf8_lossy(&buf[..total]);
                            if let Some(head_end) = text.find("\r\n\r\n") {
                                let content_len = text
                                    .lines()
                                    .find(|l| l.to_ascii_lowercase().starts_with("content-length:"))
                                    .and_then(|l| l.split(':').nth(1))
                                    .and_then(|v| v.trim().parse::<usize>().ok())
                                    .unwrap_or(0);
                                if total >= head_end + 4 + content_len {
                                    break;
                                }
                            }
                        }
                        Err(_) => break,
                    }
                }
                let reason = if status == 200 { "OK" } else { "Too Many Requests" };
                let reply = format!(
                    "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                stream.write_all(reply.as_bytes()).unwrap();
            }
        });
        (format!("http://{addr}/v1/chat/completions"), handle)
    }

    #[test]
    fn remote_backend_retries_rate_limit_then_succeeds() {
        let ok_body = serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": "remote says hi"}}],
            "usage": {"prompt_tokens": 5, "completion_tokens": 3}
        })
        .to_string();
        let (endpoint, handle) = spawn_http(vec![(429, "{}".into()), (200, ok_body)]);
        let backend = RemoteBackend::new(RemoteConfig {
            endpoint,
            api_key: Some("k".into()),
            model: "m".into(),
            timeout: Duration::from_secs(5),
            max_retries: 2,
        })
        .unwrap();
        let response = backend.complete(&req("hello remote")).unwrap();
        assert_eq!(response.text, "remote says hi");
        assert_eq!(response.usage.unwrap().completion_tokens, 3);
        handle.join().unwrap();
    }

    #[test]
    fn remote_backend_exhausts_rate_limit_retries() {
        let (endpoint, handle) =
            spawn_http(vec![(429, "{}".into()), (429, "{}".into()), (429, "{}".into())]);
        let backend = RemoteBackend::new(RemoteConfig {
            endpoint,
            api_key: None,
            model: "m".into(),
            timeout: Duration::from_secs(5),
            max_retries: 2,
        })
        .unwrap();
        let err = backend.complete(&req("hello")).unwrap_err();
        assert!(matches!(err, GatewayError::RateLimited { attempts: 3 }));
        handle.join().unwrap();
    }
}
