//! Executes prompt jobs against a live, replayed or scripted backend.

mod cache;
mod http;
mod limiter;
pub mod mock;
mod replay;

use std::fmt;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::CacheHandle;
pub use http::{extract_content, HttpBackend};
pub use limiter::{InFlightGauge, RateLimiter};
pub use replay::{write_fixture, FixtureRecord, ReplayFixture};

use crate::prompt::PromptJob;

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("job {job_id}: transport failed after {attempts} attempt(s): {message}")]
    Transport {
        job_id: String,
        attempts: u32,
        message: String,
    },
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("job {0} not present in replay fixture")]
    FixtureMiss(String),
    #[error("unexpected backend response: {0}")]
    Protocol(String),
    #[error("API key environment variable {0} is not set")]
    MissingApiKey(String),
    #[error("invalid backend configuration: {0}")]
    InvalidConfig(String),
    #[error("replay fixture: {0}")]
    Fixture(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("batch aborted after {completed} completed job(s): {cause}")]
    BatchAborted {
        completed: usize,
        cause: Box<GatewayError>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseSource {
    Live,
    Cache,
    Fixture,
    Script,
}

impl fmt::Display for ResponseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResponseSource::Live => "live",
            ResponseSource::Cache => "cache",
            ResponseSource::Fixture => "fixture",
            ResponseSource::Script => "script",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub job_id: String,
    pub entity: String,
    pub item_code: String,
    /// Exactly as received from the backend.
    pub raw_text: String,
    pub model_id: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
    pub source: ResponseSource,
}

/// What a scripted backend does for one attempt.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptReply {
    Text(String),
    /// A retryable failure (transport error, 429, 5xx).
    Transient(String),
    AuthFailure,
}

type ScriptFn = dyn Fn(&PromptJob, u32) -> ScriptReply + Send + Sync;

/// Deterministic in-process backend. The closure receives the job and the
/// 1-based attempt number.
#[derive(Clone)]
pub struct Script {
    reply: Arc<ScriptFn>,
    delay: Duration,
}

impl Script {
    pub fn new<F>(reply: F) -> Self
    where
        F: Fn(&PromptJob, u32) -> ScriptReply + Send + Sync + 'static,
    {
        Script {
            reply: Arc::new(reply),
            delay: Duration::ZERO,
        }
    }

    pub fn constant(text: &str) -> Self {
        let text = text.to_string();
        Script::new(move |_, _| ScriptReply::Text(text.clone()))
    }

    /// Simulated service time per attempt.
    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

impl fmt::Debug for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Script").field("delay", &self.delay).finish()
    }
}

#[derive(Debug, Clone)]
pub enum BackendKind {
    HttpChat {
        endpoint: String,
        model: String,
        /// Environment variable holding the bearer token. `None` sends no token.
        api_key_env: Option<String>,
        timeout: Duration,
    },
    Replay(Arc<ReplayFixture>),
    Scripted(Script),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff: Duration,
    pub max_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// Wait before attempt `next` (2-based): base * 2^(next-2), capped.
    pub fn backoff(&self, next: u32) -> Duration {
        let exp = next.saturating_sub(2).min(30);
        self.base_backoff
            .saturating_mul(1u32 << exp)
            .min(self.max_backoff)
    }
}

#[derive(Debug, Clone)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub retry: RetryPolicy,
    /// Maximum request starts per second; `None` is unlimited.
    pub rate_limit: Option<f64>,
    pub parallelism: usize,
}

impl BackendConfig {
    pub fn new(kind: BackendKind) -> Self {
        BackendConfig {
            kind,
            retry: RetryPolicy::default(),
            rate_limit: None,
            parallelism: 1,
        }
    }

    pub fn replay(fixture: ReplayFixture) -> Self {
        Self::new(BackendKind::Replay(Arc::new(fixture)))
    }

    pub fn scripted(script: Script) -> Self {
        Self::new(BackendKind::Scripted(script))
    }

    pub fn http(endpoint: &str, model: &str, api_key_env: Option<&str>) -> Self {
        Self::new(BackendKind::HttpChat {
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key_env: api_key_env.map(str::to_string),
            timeout: Duration::from_secs(120),
        })
    }

    pub fn with_parallelism(mut self, parallelism: usize) -> Self {
        self.parallelism = parallelism;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_rate_limit(mut self, per_second: Option<f64>) -> Self {
        self.rate_limit = per_second;
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.parallelism < 1 {
            return Err(GatewayError::InvalidConfig("parallelism must be at least 1".into()));
        }
        if self.retry.max_attempts < 1 {
            return Err(GatewayError::InvalidConfig("max attempts must be at least 1".into()));
        }
        if let Some(r) = self.rate_limit {
            if !(r.is_finite() && r > 0.0) {
                return Err(GatewayError::InvalidConfig(format!("rate limit {r} is not positive")));
            }
        }
        Ok(())
    }
}

pub(crate) enum Attempt {
    Success { raw_text: String, latency_ms: u64 },
    Retryable(String),
    Fatal(GatewayError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailureMode {
    /// Record per-job errors and keep going.
    #[default]
    Continue,
    /// Stop scheduling new jobs after the first error.
    FailFast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BatchStats {
    /// Requests sent to an HTTP or scripted backend, retries included.
    pub backend_calls: usize,
    pub cache_hits: usize,
    pub max_in_flight: usize,
}

#[derive(Debug)]
pub struct BatchOutcome {
    /// One entry per input job, in input order.
    pub responses: Vec<Result<RawResponse, GatewayError>>,
    pub stats: BatchStats,
}

impl BatchOutcome {
    pub fn successes(&self) -> impl Iterator<Item = &RawResponse> {
        self.responses.iter().filter_map(|r| r.as_ref().ok())
    }

    pub fn failures(&self) -> impl Iterator<Item = (usize, &GatewayError)> {
        self.responses
            .iter()
            .enumerate()
            .filter_map(|(i, r)| r.as_ref().err().map(|e| (i, e)))
    }
}

enum Live {
    Http(HttpBackend),
    Replay(Arc<ReplayFixture>),
    Scripted(Script),
}

/// A configured backend plus its cache, rate limiter and call counters.
pub struct Gateway<'c> {
    live: Live,
    retry: RetryPolicy,
    parallelism: usize,
    cache: &'c CacheHandle,
    limiter: RateLimiter,
    gauge: InFlightGauge,
    backend_calls: AtomicUsize,
    cache_hits: AtomicUsize,
}

impl<'c> Gateway<'c> {
    pub fn new(config: &BackendConfig, cache: &'c CacheHandle) -> Result<Self, GatewayError> {
        config.validate()?;
        let live = match &config.kind {
            BackendKind::HttpChat {
                endpoint,
                model,
                api_key_env,
                timeout,
            } => Live::Http(HttpBackend::new(
                endpoint,
                model,
                api_key_env.as_deref(),
                *timeout,
            )?),
            BackendKind::Replay(f) => Live::Replay(f.clone()),
            BackendKind::Scripted(s) => Live::Scripted(s.clone()),
        };
        Ok(Gateway {
            live,
            retry: config.retry,
            parallelism: config.parallelism,
            cache,
            limiter: RateLimiter::new(config.rate_limit),
            gauge: InFlightGauge::default(),
            backend_calls: AtomicUsize::new(0),
            cache_hits: AtomicUsize::new(0),
        })
    }

    pub fn stats(&self) -> BatchStats {
        BatchStats {
            backend_calls: self.backend_calls.load(Ordering::SeqCst),
            cache_hits: self.cache_hits.load(Ordering::SeqCst),
            max_in_flight: self.gauge.peak(),
        }
    }

    fn response(job: &PromptJob, raw_text: String, latency_ms: u64, attempts: u32, source: ResponseSource) -> RawResponse {
        RawResponse {
            job_id: job.job_id.clone(),
            entity: job.entity.clone(),
            item_code: job.item_code.clone(),
            raw_text,
            model_id: job.model_id.clone(),
            latency_ms,
            attempt_count: attempts,
            source,
        }
    }

    pub fn execute(&self, job: &PromptJob) -> Result<RawResponse, GatewayError> {
        if let Some(mut hit) = self.cache.get(&job.job_id)? {
            self.cache_hits.fetch_add(1, Ordering::SeqCst);
            hit.source = ResponseSource::Cache;
            return Ok(hit);
        }
        match &self.live {
            Live::Replay(fixture) => fixture
                .get(&job.job_id)
                .map(|text| Self::response(job, text.to_string(), 0, 1, ResponseSource::Fixture))
                .ok_or_else(|| GatewayError::FixtureMiss(job.job_id.clone())),
            Live::Scripted(script) => self
                .with_retries(job, |attempt| {
                    if !script.delay.is_zero() {
                        std::thread::sleep(script.delay);
                    }
                    match (script.reply)(job, attempt) {
                        ScriptReply::Text(t) => Attempt::Success {
                            raw_text: t,
                            latency_ms: 0,
                        },
                        ScriptReply::Transient(m) => Attempt::Retryable(m),
                        ScriptReply::AuthFailure => {
                            Attempt::Fatal(GatewayError::Auth("scripted auth failure".into()))
                        }
                    }
                })
                .map(|(text, latency, attempts)| {
                    Self::response(job, text, latency, attempts, ResponseSource::Script)
                }),
            Live::Http(http) => {
                let (text, latency, attempts) =
                    self.with_retries(job, |_| http.attempt(job))?;
                let response = Self::response(job, text, latency, attempts, ResponseSource::Live);
                self.cache.put(&response)?;
                Ok(response)
            }
        }
    }

    fn with_retries(
        &self,
        job: &PromptJob,
        mut call: impl FnMut(u32) -> Attempt,
    ) -> Result<(String, u64, u32), GatewayError> {
        let mut last = String::new();
        for attempt in 1..=self.retry.max_attempts {
            if attempt > 1 {
                let wait = self.retry.backoff(attempt);
                log::debug!("job {} retry {attempt} after {wait:?}: {last}", job.job_id);
                std::thread::sleep(wait);
            }
            self.limiter.acquire();
            let outcome = {
                let _in_flight = self.gauge.enter();
                self.backend_calls.fetch_add(1, Ordering::SeqCst);
                call(attempt)
            };
            match outcome {
                Attempt::Success {
                    raw_text,
                    latency_ms,
                } => return Ok((raw_text, latency_ms, attempt)),
                Attempt::Retryable(message) => last = message,
                Attempt::Fatal(e) => return Err(e),
            }
        }
        Err(GatewayError::Transport {
            job_id: job.job_id.clone(),
            attempts: self.retry.max_attempts,
            message: last,
        })
    }

    /// Runs jobs on up to `parallelism` worker threads. Results come back in
    /// input order. In fail-fast mode the first error stops scheduling and is
    /// returned as `BatchAborted` with the number of leading successes.
    pub fn execute_batch(
        &self,
        jobs: &[PromptJob],
        mode: FailureMode,
    ) -> Result<BatchOutcome, GatewayError> {
        let slots: Vec<Mutex<Option<Result<RawResponse, GatewayError>>>> =
            jobs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let workers = self.parallelism.min(jobs.len()).max(1);

        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if abort.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(job) = jobs.get(i) else { break };
                    let result = self.execute(job);
                    if result.is_err() && mode == FailureMode::FailFast {
                        abort.store(true, Ordering::SeqCst);
                    }
                    *slots[i].lock().unwrap_or_else(|p| p.into_inner()) = Some(result);
                });
            }
        });

        let results: Vec<Option<Result<RawResponse, GatewayError>>> = slots
            .into_iter()
            .map(|m| m.into_inner().unwrap_or_else(|p| p.into_inner()))
            .collect();

        if mode == FailureMode::FailFast && abort.load(Ordering::SeqCst) {
            let completed = results
                .iter()
                .take_while(|r| matches!(r, Some(Ok(_))))
                .count();
            let cause = results
                .into_iter()
                .flatten()
                .find_map(Result::err)
                .unwrap_or_else(|| GatewayError::Protocol("unknown failure".into()));
            return Err(GatewayError::BatchAborted {
                completed,
                cause: Box::new(cause),
            });
        }

        let responses = results
            .into_iter()
            .map(|r| r.expect("every job is executed when the batch is not aborted"))
            .collect();
        Ok(BatchOutcome {
            responses,
            stats: self.stats(),
        })
    }
}

pub fn execute(
    job: &PromptJob,
    backend: &BackendConfig,
    cache: &CacheHandle,
) -> Result<RawResponse, GatewayError> {
    Gateway::new(backend, cache)?.execute(job)
}

pub fn execute_batch(
    jobs: &[PromptJob],
    backend: &BackendConfig,
    cache: &CacheHandle,
    mode: FailureMode,
) -> Result<BatchOutcome, GatewayError> {
    Gateway::new(backend, cache)?.execute_batch(jobs, mode)
}
