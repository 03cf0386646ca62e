//! The remote token-logprob provider client: wire protocol, transports,
//! content-addressed replay cache, and the `Predictor` implementation that
//! chains token log-probabilities into outcome distributions.
//!
//! Wire protocol (line-delimited JSON over TCP, or HTTP POST):
//!
//! ```json
//! {"id": "…", "prompt": "…", "continuations": [" heads", " tails"],
//!  "chat": null}
//! ```
//!
//! response:
//!
//! ```json
//! {"id": "…", "continuations": [{"text": " heads", "tokens": ["_heads"],
//!  "token_logprobs": [-0.1]}]}
//! ```
//!
//! In instruct mode `chat` carries `{"user": …, "assistant_prefix": …}`;
//! applying the chat template **without** an end-of-turn token after the
//! assistant prefix is the provider's obligation (the prefix always ends
//! mid-sentence so the next tokens are the outcome continuation).

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use coinfer_core::dist::DiscreteDistribution;
use coinfer_core::normalization::{renormalize_linear, TokenizedOutcome, UnnormalizedSupport};
use coinfer_core::predictors::{PredictError, Predictor, PredictorContext};
use coinfer_core::prompt::{default_continuation, render_prompt, PromptCorpus};
use coinfer_core::trajectory::OutcomeSpace;

use crate::CliError;

/// Chat wrapper mirrored from the rendered prompt.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChatWire {
    pub user: String,
    pub assistant_prefix: String,
}

/// A log-probability request for one prompt and one continuation per
/// outcome.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LogProbRequest {
    pub id: String,
    pub prompt: String,
    pub continuations: Vec<String>,
    pub chat: Option<ChatWire>,
}

/// Token-level log-probabilities for one requested continuation.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ContinuationWire {
    pub text: String,
    pub tokens: Vec<String>,
    pub token_logprobs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LogProbResponse {
    pub id: String,
    pub continuations: Vec<ContinuationWire>,
}

/// Provider failures, kept distinct so run records can tell transport
/// problems from contract violations from degenerate model output.
#[derive(Debug, thiserror::Error)]
pub enum ProviderError {
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("model assigns no mass to any outcome")]
    AllZeroSupport,
    #[error("replay cache miss for key {0}")]
    CacheMiss(String),
}

/// Content hash identifying a request independent of its transport id.
pub fn request_key(prompt: &str, continuations: &[String], chat: &Option<ChatWire>) -> String {
    #[derive(Serialize)]
    struct KeyContent<'a> {
        prompt: &'a str,
        continuations: &'a [String],
        chat: &'a Option<ChatWire>,
    }
    let canonical = serde_json::to_vec(&KeyContent {
        prompt,
        continuations,
        chat,
    })
    .expect("key content serializes");
    hex::encode(Sha256::digest(&canonical))
}

/// Blocking request/response transport.
pub trait Transport: Send + Sync {
    fn roundtrip(&self, request: &LogProbRequest) -> Result<LogProbResponse, ProviderError>;
}

/// Line-delimited JSON over a TCP socket: one connection per request, one
/// request line out, one response line back.
pub struct TcpTransport {
    addr: String,
    timeout: Duration,
}

impl TcpTransport {
    pub fn new(addr: impl Into<String>) -> Self {
        Self {
            addr: addr.into(),
            timeout: Duration::from_secs(120),
        }
    }
}

impl Transport for TcpTransport {
    fn roundtrip(&self, request: &LogProbRequest) -> Result<LogProbResponse, ProviderError> {
        let err = |e: std::io::Error| ProviderError::Transport(format!("{}: {e}", self.addr));
        let mut stream = TcpStream::connect(&self.addr).map_err(err)?;
        stream.set_read_timeout(Some(self.timeout)).map_err(err)?;
        stream.set_write_timeout(Some(self.timeout)).map_err(err)?;
        let mut line = serde_json::to_string(request)
            .map_err(|e| ProviderError::Transport(format!("serialize request: {e}")))?;
        line.push('\n');
        stream.write_all(line.as_bytes()).map_err(err)?;
        stream.flush().map_err(err)?;
        let mut reader = BufReader::new(stream);
        let mut response_line = String::new();
        reader.read_line(&mut response_line).map_err(err)?;
        if response_line.trim().is_empty() {
            return Err(ProviderError::Transport(format!(
                "{}: provider closed the connection without a response",
                self.addr
            )));
        }
        serde_json::from_str(&response_line)
            .map_err(|e| ProviderError::Malformed(format!("unparseable response JSON: {e}")))
    }
}

/// HTTP POST transport (plain http; local inference servers).
pub struct HttpTransport {
    url: String,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>) -> Self {
        Self { url: url.into() }
    }
}

impl Transport for HttpTransport {
    fn roundtrip(&self, request: &LogProbRequest) -> Result<LogProbResponse, ProviderError> {
        let mut response = ureq::post(&self.url)
            .send_json(request)
            .map_err(|e| ProviderError::Transport(format!("{}: {e}", self.url)))?;
        response
            .body_mut()
            .read_json::<LogProbResponse>()
            .map_err(|e| ProviderError::Malformed(format!("unparseable response JSON: {e}")))
    }
}

/// Content-addressed replay cache: JSON lines of {key, request, response}.
/// Lookups come from memory; writes append to the file under a lock, so
/// reruns never re-query an unchanged prompt.
pub struct ReplayCache {
    path: PathBuf,
    entries: Mutex<HashMap<String, LogProbResponse>>,
    file: Mutex<File>,
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    request: LogProbRequest,
    response: LogProbResponse,
}

impl ReplayCache {
    pub fn open(path: &Path) -> Result<Self, CliError> {
        let mut entries = HashMap::new();
        if path.exists() {
            let file = File::open(path)?;
            for (lineno, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: CacheLine = serde_json::from_str(&line).map_err(|e| {
                    CliError::Config(format!(
                        "replay cache {} line {}: {e}",
                        path.display(),
                        lineno + 1
                    ))
                })?;
                entries.insert(parsed.key, parsed.response);
            }
        } else if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: path.to_path_buf(),
            entries: Mutex::new(entries),
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &str) -> Option<LogProbResponse> {
        self.entries.lock().unwrap().get(key).cloned()
    }

    pub fn put(
        &self,
        key: String,
        request: &LogProbRequest,
        response: &LogProbResponse,
    ) -> Result<(), CliError> {
        let line = serde_json::to_string(&CacheLine {
            key: key.clone(),
            request: request.clone(),
            response: response.clone(),
        })
        .map_err(|e| CliError::Run(format!("serialize cache line: {e}")))?;
        {
            let mut file = self.file.lock().unwrap();
            writeln!(file, "{line}")?;
        }
        self.entries.lock().unwrap().insert(key, response.clone());
        Ok(())
    }
}

/// Counting semaphore bounding concurrent in-flight provider requests.
struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Self {
        Self {
            permits: Mutex::new(permits.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.cv.wait(permits).unwrap();
        }
        *permits -= 1;
        SemaphoreGuard { sem: self }
    }
}

struct SemaphoreGuard<'a> {
    sem: &'a Semaphore,
}

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.sem.permits.lock().unwrap() += 1;
        self.sem.cv.notify_one();
    }
}

/// How to reach (or replay) a provider.
#[derive(Debug, Clone, Default)]
pub struct ProviderSettings {
    pub endpoint: Option<String>,
    pub cache: Option<PathBuf>,
    pub replay_only: bool,
    pub concurrency: usize,
    pub instruct: bool,
    /// Per-outcome continuation strings; defaults to " <label>".
    pub continuations: Option<Vec<String>>,
}

/// Build a transport from an endpoint string.
pub fn make_transport(endpoint: &str) -> Result<Box<dyn Transport>, CliError> {
    if let Some(addr) = endpoint.strip_prefix("tcp://") {
        Ok(Box::new(TcpTransport::new(addr)))
    } else if endpoint.starts_with("http://") {
        Ok(Box::new(HttpTransport::new(endpoint)))
    } else {
        Err(CliError::Config(format!(
            "unsupported provider endpoint {endpoint:?} (expected tcp://host:port or http://…)"
        )))
    }
}

/// A predictor backed by a remote token-logprob provider.
///
/// For each prediction it renders the prompt, requests log-probabilities for
/// every outcome's continuation, chains them by the product rule, and
/// renormalizes linearly over the support. Every request/response pair is
/// persisted to the replay cache, keyed by content hash, so reruns are
/// bit-deterministic and never re-query unchanged prompts.
pub struct RemotePredictor {
    id: String,
    corpus: PromptCorpus,
    continuations: Vec<String>,
    transport: Option<Box<dyn Transport>>,
    cache: Option<Arc<ReplayCache>>,
    semaphore: Semaphore,
    request_counter: AtomicU64,
    clamped: AtomicU64,
}

impl RemotePredictor {
    pub fn build(
        settings: ProviderSettings,
        space: &OutcomeSpace,
        corpus: PromptCorpus,
    ) -> Result<Self, CliError> {
        let continuations = match settings.continuations {
            Some(c) => {
                if c.len() != space.len() {
                    return Err(CliError::Config(format!(
                        "{} continuation overrides for a {}-outcome space",
                        c.len(),
                        space.len()
                    )));
                }
                c
            }
            None => space
                .labels()
                .iter()
                .map(|l| default_continuation(l))
                .collect(),
        };
        let transport = match (&settings.endpoint, settings.replay_only) {
            (_, true) | (None, _) => None,
            (Some(endpoint), false) => Some(make_transport(endpoint)?),
        };
        let cache = settings
            .cache
            .as_deref()
            .map(ReplayCache::open)
            .transpose()?
            .map(Arc::new);
        if transport.is_none() && cache.is_none() {
            return Err(CliError::Config(
                "remote predictor needs a provider endpoint, a replay cache, or both".into(),
            ));
        }
        Ok(Self {
            id: "remote".to_string(),
            corpus,
            continuations,
            transport,
            cache,
            semaphore: Semaphore::new(settings.concurrency),
            request_counter: AtomicU64::new(0),
            clamped: AtomicU64::new(0),
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Number of outcome probabilities clamped at the probability floor so
    /// far (surfaced into run warnings).
    pub fn clamped_count(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    fn fetch(&self, request: &LogProbRequest, key: &str) -> Result<LogProbResponse, ProviderError> {
        if let Some(cache) = &self.cache {
            if let Some(hit) = cache.get(key) {
                return Ok(hit);
            }
        }
        let transport = self
            .transport
            .as_ref()
            .ok_or_else(|| ProviderError::CacheMiss(key.to_string()))?;
        let response = {
            let _permit = self.semaphore.acquire();
            transport.roundtrip(request)?
        };
        validate_response(request, &response)?;
        if let Some(cache) = &self.cache {
            cache
                .put(key.to_string(), request, &response)
                .map_err(|e| ProviderError::Transport(format!("cache write: {e}")))?;
        }
        Ok(response)
    }
}

/// Enforce the response contract; violations are malformed-response errors.
pub fn validate_response(
    request: &LogProbRequest,
    response: &LogProbResponse,
) -> Result<(), ProviderError> {
    if response.id != request.id {
        return Err(ProviderError::Malformed(format!(
            "response id {:?} does not match request id {:?}",
            response.id, request.id
        )));
    }
    if response.continuations.len() != request.continuations.len() {
        return Err(ProviderError::Malformed(format!(
            "{} continuations returned, {} requested",
            response.continuations.len(),
            request.continuations.len()
        )));
    }
    for (i, (got, want)) in response
        .continuations
        .iter()
        .zip(&request.continuations)
        .enumerate()
    {
        if &got.text != want {
            return Err(ProviderError::Malformed(format!(
                "continuation {i} is {:?}, requested {want:?}",
                got.text
            )));
        }
        if got.token_logprobs.is_empty() {
            return Err(ProviderError::Malformed(format!(
                "continuation {i} has no token log-probabilities"
            )));
        }
        if got.tokens.len() != got.token_logprobs.len() {
            return Err(ProviderError::Malformed(format!(
                "continuation {i} has {} tokens but {} log-probabilities",
                got.tokens.len(),
                got.token_logprobs.len()
            )));
        }
        for &lp in &got.token_logprobs {
            if lp.is_nan() || lp > 0.0 {
                return Err(ProviderError::Malformed(format!(
                    "continuation {i} carries invalid log-probability {lp}"
                )));
            }
        }
    }
    Ok(())
}

impl Predictor for RemotePredictor {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, ctx: &PredictorContext<'_>) -> Result<DiscreteDistribution, PredictError> {
        let provider_err = |detail: String| PredictError::Provider {
            predictor: self.id.clone(),
            detail,
        };

        let rendered = render_prompt(ctx, &self.corpus)
            .map_err(|e| provider_err(format!("render: {e}")))?;
        let chat = rendered.chat.as_ref().map(|c| ChatWire {
            user: c.user.clone(),
            assistant_prefix: c.assistant_prefix.clone(),
        });
        let key = request_key(&rendered.text, &self.continuations, &chat);
        let request = LogProbRequest {
            id: format!(
                "req-{}-{}",
                self.request_counter.fetch_add(1, Ordering::Relaxed),
                &key[..12]
            ),
            prompt: rendered.text.clone(),
            continuations: self.continuations.clone(),
            chat,
        };

        let response = self.fetch(&request, &key).map_err(|e| {
            provider_err(format!("{e} (prompt: {:?})", truncate(&rendered.text, 120)))
        })?;

        let mut tokenized = Vec::with_capacity(response.continuations.len());
        for (outcome, cont) in response.continuations.iter().enumerate() {
            tokenized.push(
                TokenizedOutcome::new(outcome, cont.token_logprobs.clone())
                    .map_err(|e| provider_err(format!("malformed response: {e}")))?,
            );
        }
        let (support, clamped) = UnnormalizedSupport::from_token_logprobs(&tokenized)
            .map_err(|e| provider_err(format!("malformed response: {e}")))?;
        self.clamped.fetch_add(clamped as u64, Ordering::Relaxed);
        renormalize_linear(&support).map_err(|e| provider_err(e.to_string()))
    }
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((idx, _)) => &s[..idx],
        None => s,
    }
}
