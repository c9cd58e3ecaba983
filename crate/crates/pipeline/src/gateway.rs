//! Model gateway: live HTTP completions with retries, and a cassette that
//! records or replays them.
//!
//! Cassettes are append-only JSONL keyed by [`CompletionRequest::content_hash`],
//! so a replay run makes no network calls and is byte-for-byte repeatable.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use mmm_core::prompt::{CompletionRequest, DecodingParams};
use serde::{Deserialize, Serialize};
use serde_json::json;

pub const ENDPOINT_VAR: &str = "MMM_LLM_ENDPOINT";
pub const API_KEY_VAR: &str = "MMM_LLM_API_KEY";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    /// Worth another attempt: network trouble, timeouts, 429 and 5xx.
    #[error("{0}")]
    Transient(String),
    #[error("{0}")]
    Fatal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportReply {
    pub text: String,
    pub model: String,
}

pub trait Transport: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<TransportReply, TransportError>;
}

/// OpenAI-style chat completions over HTTPS.
pub struct HttpTransport {
    endpoint: String,
    api_key: Option<String>,
    client: reqwest::blocking::Client,
}

impl HttpTransport {
    pub fn new(
        endpoint: impl Into<String>,
        api_key: Option<String>,
        timeout: Duration,
    ) -> Result<Self, TransportError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| TransportError::Fatal(e.to_string()))?;
        Ok(HttpTransport {
            endpoint: endpoint.into(),
            api_key,
            client,
        })
    }

    /// Reads the endpoint and key from the environment.
    pub fn from_env(timeout: Duration) -> Result<Self, TransportError> {
        let endpoint =
            std::env::var(ENDPOINT_VAR).map_err(|_| TransportError::Fatal(format!("{ENDPOINT_VAR} is not set")))?;
        Self::new(endpoint, std::env::var(API_KEY_VAR).ok(), timeout)
    }
}

impl Transport for HttpTransport {
    fn complete(&self, request: &CompletionRequest) -> Result<TransportReply, TransportError> {
        let body = json!({
            "model": request.params.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(TransportError::Transient(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(TransportError::Fatal(format!("HTTP {status}: {}", text.trim())));
        }
        let value: serde_json::Value = resp.json().map_err(|e| TransportError::Fatal(e.to_string()))?;
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| TransportError::Fatal("response has no choices[0].message.content".into()))?;
        let model = value["model"].as_str().unwrap_or(&request.params.model);
        Ok(TransportReply {
            text: text.to_owned(),
            model: model.to_owned(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    /// Delay before the second attempt; doubles after that.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    pub fn delay_before(&self, attempt: u32) -> Duration {
        self.base_delay.saturating_mul(1 << attempt.saturating_sub(2).min(16))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub hash: String,
    pub prompt: String,
    pub params: DecodingParams,
    pub reply: String,
    pub model: String,
    pub recorded_at: String,
}

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("cassette miss for request {hash}")]
    CassetteMiss { hash: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("{0}")]
    Fatal(String),
    #[error("cassette {path}: {message}")]
    Cassette { path: PathBuf, message: String },
}

pub struct Cassette {
    path: PathBuf,
    entries: HashMap<String, CassetteEntry>,
    writer: Mutex<Option<File>>,
}

impl Cassette {
    /// Loads `path`; a missing file is an empty cassette. When the same hash
    /// appears twice the first entry wins.
    pub fn open(path: &Path) -> Result<Self, GatewayError> {
        let err = |message: String| GatewayError::Cassette {
            path: path.to_path_buf(),
            message,
        };
        let mut entries = HashMap::new();
        match File::open(path) {
            Ok(file) => {
                for (i, line) in BufReader::new(file).lines().enumerate() {
                    let line = line.map_err(|e| err(e.to_string()))?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let entry: CassetteEntry =
                        serde_json::from_str(&line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
                    entries.entry(entry.hash.clone()).or_insert(entry);
                }
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(err(e.to_string())),
        }
        Ok(Cassette {
            path: path.to_path_buf(),
            entries,
            writer: Mutex::new(None),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, hash: &str) -> Option<&CassetteEntry> {
        self.entries.get(hash)
    }

    /// Appends one entry to the file. Concurrent callers are serialized.
    pub fn append(&self, entry: &CassetteEntry) -> Result<(), GatewayError> {
        let err = |e: io::Error| GatewayError::Cassette {
            path: self.path.clone(),
            message: e.to_string(),
        };
        let mut guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(err)?;
            }
            *guard = Some(
                OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&self.path)
                    .map_err(err)?,
            );
        }
        let file = guard.as_mut().expect("writer opened above");
        let mut line = serde_json::to_string(entry).expect("entry serializes");
        line.push('\n');
        file.write_all(line.as_bytes()).map_err(err)?;
        file.flush().map_err(err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Live,
    Record,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionReply {
    pub text: String,
    pub model: String,
    pub latency_ms: u64,
    pub attempts: u32,
}

pub struct Provider {
    mode: Mode,
    transport: Option<Box<dyn Transport>>,
    cassette: Option<Cassette>,
    retry: RetryPolicy,
}

impl Provider {
    pub fn live(transport: Box<dyn Transport>, retry: RetryPolicy) -> Self {
        Provider {
            mode: Mode::Live,
            transport: Some(transport),
            cassette: None,
            retry,
        }
    }

    pub fn record(transport: Box<dyn Transport>, cassette: Cassette, retry: RetryPolicy) -> Self {
        Provider {
            mode: Mode::Record,
            transport: Some(transport),
            cassette: Some(cassette),
            retry,
        }
    }

    pub fn replay(cassette: Cassette) -> Self {
        Provider {
            mode: Mode::Replay,
            transport: None,
            cassette: Some(cassette),
            retry: RetryPolicy::default(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionReply, GatewayError> {
        if self.mode == Mode::Replay {
            let hash = request.content_hash();
            let entry = self
                .cassette
                .as_ref()
                .and_then(|c| c.get(&hash))
                .ok_or(GatewayError::CassetteMiss { hash })?;
            return Ok(CompletionReply {
                text: entry.reply.clone(),
                model: entry.model.clone(),
                latency_ms: 0,
                attempts: 0,
            });
        }
        let transport = self.transport.as_ref().expect("live modes carry a transport");
        let started = Instant::now();
        let mut attempt = 0;
        let reply = loop {
            attempt += 1;
            if attempt > 1 {
                thread::sleep(self.retry.delay_before(attempt));
            }
            match transport.complete(request) {
                Ok(reply) => break reply,
                Err(TransportError::Fatal(msg)) => return Err(GatewayError::Fatal(msg)),
                Err(TransportError::Transient(msg)) if attempt >= self.retry.max_attempts => {
                    return Err(GatewayError::Exhausted {
                        attempts: attempt,
                        last: msg,
                    })
                }
                Err(TransportError::Transient(msg)) => {
                    tracing::warn!(attempt, error = %msg, "completion failed, retrying");
                }
            }
        };
        let latency_ms = u64::try_from(started.elapsed().as_millis()).unwrap_or(u64::MAX);
        tracing::debug!(attempts = attempt, latency_ms, model = %reply.model, "completion");
        if let Some(cassette) = &self.cassette {
            cassette.append(&CassetteEntry {
                hash: request.content_hash(),
                prompt: request.prompt.clone(),
                params: request.params.clone(),
                reply: reply.text.clone(),
                model: reply.model.clone(),
                recorded_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            })?;
        }
        Ok(CompletionReply {
            text: reply.text,
            model: reply.model,
            latency_ms,
            attempts: attempt,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Scripted {
        script: Mutex<Vec<Result<TransportReply, TransportError>>>,
        calls: AtomicUsize,
    }

    impl Scripted {
        fn new(mut script: Vec<Result<TransportReply, TransportError>>) -> Self {
            script.reverse();
            Scripted {
                script: Mutex::new(script),
                calls: AtomicUsize::new(0),
            }
        }
    }

    impl Transport for &'static Scripted {
        fn complete(&self, _: &CompletionRequest) -> Result<TransportReply, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.script.lock().unwrap().pop().expect("script exhausted")
        }
    }

    fn ok(text: &str) -> Result<TransportReply, TransportError> {
        Ok(TransportReply {
            text: text.into(),
            model: "m-1".into(),
        })
    }

    fn request(prompt: &str) -> CompletionRequest {
        CompletionRequest::new(prompt.into(), DecodingParams::for_source("m", 10))
    }

    const FAST: RetryPolicy = RetryPolicy {
        max_attempts: 3,
        base_delay: Duration::from_millis(1),
    };

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy::default();
        assert_eq!(p.delay_before(2), Duration::from_millis(500));
        assert_eq!(p.delay_before(3), Duration::from_millis(1000));
    }

    #[test]
    fn retries_transient_failures() {
        let t: &'static Scripted = Box::leak(Box::new(Scripted::new(vec![
            Err(TransportError::Transient("HTTP 503".into())),
            Err(TransportError::Transient("HTTP 502".into())),
            ok("hello"),
        ])));
        let p = Provider::live(Box::new(t), FAST);
        let r = p.complete(&request("x")).unwrap();
        assert_eq!((r.text.as_str(), r.attempts), ("hello", 3));
    }

    #[test]
    fn gives_up_after_max_attempts_and_on_fatal() {
        let t: &'static Scripted = Box::leak(Box::new(Scripted::new(vec![
            Err(TransportError::Transient("a".into())),
            Err(TransportError::Transient("b".into())),
            Err(TransportError::Transient("c".into())),
        ])));
        let err = Provider::live(Box::new(t), FAST).complete(&request("x")).unwrap_err();
        assert!(matches!(err, GatewayError::Exhausted { attempts: 3, ref last } if last == "c"));

        let t: &'static Scripted = Box::leak(Box::new(Scripted::new(vec![Err(TransportError::Fatal(
            "HTTP 401".into(),
        ))])));
        let err = Provider::live(Box::new(t), FAST).complete(&request("x")).unwrap_err();
        assert!(matches!(err, GatewayError::Fatal(_)));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let t: &'static Scripted = Box::leak(Box::new(Scripted::new(vec![ok("one"), ok("two")])));
        let rec = Provider::record(Box::new(t), Cassette::open(&path).unwrap(), FAST);
        rec.complete(&request("a")).unwrap();
        rec.complete(&request("b")).unwrap();
        drop(rec);

        let cassette = Cassette::open(&path).unwrap();
        assert_eq!(cassette.len(), 2);
        let replay = Provider::replay(cassette);
        let r = replay.complete(&request("b")).unwrap();
        assert_eq!((r.text.as_str(), r.model.as_str(), r.attempts), ("two", "m-1", 0));
        let miss = replay.complete(&request("c")).unwrap_err();
        assert!(matches!(miss, GatewayError::CassetteMiss { ref hash } if *hash == request("c").content_hash()));
    }

    #[test]
    fn corrupt_cassette_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(&path, "\n{not json}\n").unwrap();
        let err = Cassette::open(&path).err().unwrap().to_string();
        assert!(err.contains("line 2"), "{err}");
    }
}
