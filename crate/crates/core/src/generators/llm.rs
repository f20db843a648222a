//! Chat-completions client used as the language-model step generator.

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use rand::Rng;
use serde_json::{json, Value};
use tracing::warn;

use super::GeneratorError;
use crate::graph::SceneGraph;
use crate::plan::{GeneratorReply, GeneratorRequest, StepGenerator};

pub const DEFAULT_API_KEY_ENV: &str = "SHARP_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct LlmEndpointConfig {
    pub base_url: String,
    pub model_name: String,
    pub api_key_env: String,
    pub timeout: Duration,
    pub max_retries: u32,
    pub temperature: f64,
    /// First retry delay; doubles on every further retry.
    pub backoff_base: Duration,
    pub max_in_flight: usize,
}

impl Default for LlmEndpointConfig {
    fn default() -> Self {
        LlmEndpointConfig {
            base_url: "http://localhost:8000/v1".into(),
            model_name: "gpt-4o".into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout: Duration::from_secs(60),
            max_retries: 3,
            temperature: 0.0,
            backoff_base: Duration::from_millis(500),
            max_in_flight: 4,
        }
    }
}

impl LlmEndpointConfig {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.timeout.is_zero() {
            return Err(GeneratorError::Config("timeout must be positive".into()));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GeneratorError::Config("temperature must lie in [0, 2]".into()));
        }
        if self.max_retries > 10 {
            return Err(GeneratorError::Config("max_retries must be at most 10".into()));
        }
        if self.max_in_flight == 0 {
            return Err(GeneratorError::Config("max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

/// Counting gate for concurrent requests.
#[derive(Debug)]
struct InFlight {
    limit: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

struct Permit<'a>(&'a InFlight);

impl InFlight {
    fn acquire(&self) -> Permit<'_> {
        let mut active = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *active >= self.limit {
            active = self.freed.wait(active).unwrap_or_else(|e| e.into_inner());
        }
        *active += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut active = self.0.active.lock().unwrap_or_else(|e| e.into_inner());
        *active -= 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Done(Result<GeneratorReply, GeneratorError>),
    Transient { timeout: bool, reason: String },
}

/// Blocking chat-completions client. Clones share the in-flight limit.
#[derive(Clone)]
pub struct LlmClient {
    config: LlmEndpointConfig,
    api_key: String,
    http: reqwest::blocking::Client,
    gate: Arc<InFlight>,
}

impl LlmClient {
    /// Reads the API key from the configured environment variable.
    pub fn new(config: LlmEndpointConfig) -> Result<Self, GeneratorError> {
        let key = std::env::var(&config.api_key_env)
            .map_err(|_| GeneratorError::MissingApiKey(config.api_key_env.clone()))?;
        Self::with_api_key(config, key)
    }

    pub fn with_api_key(config: LlmEndpointConfig, api_key: impl Into<String>) -> Result<Self, GeneratorError> {
        config.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| GeneratorError::Config(e.to_string()))?;
        let gate = Arc::new(InFlight {
            limit: config.max_in_flight,
            active: Mutex::new(0),
            freed: Condvar::new(),
        });
        Ok(LlmClient {
            config,
            api_key: api_key.into(),
            http,
            gate,
        })
    }

    pub fn config(&self) -> &LlmEndpointConfig {
        &self.config
    }

    /// JSON body for a request; identical across retries.
    pub fn request_body(&self, request: &GeneratorRequest) -> String {
        json!({
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "messages": [
                {"role": "system", "content": request.system_context},
                {"role": "user", "content": request.user_prompt},
            ],
        })
        .to_string()
    }

    fn backoff(&self, retry: u32) -> Duration {
        let base = self.config.backoff_base.as_secs_f64() * 2f64.powi(retry as i32);
        let jitter: f64 = rand::thread_rng().gen_range(0.5..=1.0);
        Duration::from_secs_f64(base * jitter)
    }

    /// Sends one completion request, retrying transport failures, 429 and
    /// 5xx responses with jittered exponential backoff.
    pub fn complete(&self, request: &GeneratorRequest) -> Result<GeneratorReply, GeneratorError> {
        let body = self.request_body(request);
        let attempts = self.config.max_retries + 1;
        let mut last_timeout = false;
        let mut last_reason = String::new();
        for attempt in 0..attempts {
            if attempt > 0 {
                thread::sleep(self.backoff(attempt - 1));
            }
            match self.attempt(&body) {
                Attempt::Done(result) => return result,
                Attempt::Transient { timeout, reason } => {
                    warn!(attempt = attempt + 1, %reason, "transient completion failure");
                    last_timeout = timeout;
                    last_reason = reason;
                }
            }
        }
        if last_timeout {
            Err(GeneratorError::Timeout { attempts })
        } else {
            Err(GeneratorError::RetriesExhausted {
                attempts,
                last: last_reason,
            })
        }
    }

    fn attempt(&self, body: &str) -> Attempt {
        let _permit = self.gate.acquire();
        let sent = self
            .http
            .post(self.config.endpoint())
            .bearer_auth(&self.api_key)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string())
            .send();
        let response = match sent {
            Ok(r) => r,
            Err(e) => {
                return Attempt::Transient {
                    timeout: e.is_timeout(),
                    reason: e.to_string(),
                }
            }
        };
        let status = response.status().as_u16();
        let text = match response.text() {
            Ok(t) => t,
            Err(e) => {
                return Attempt::Transient {
                    timeout: e.is_timeout(),
                    reason: e.to_string(),
                }
            }
        };
        match status {
            200..=299 => Attempt::Done(parse_completion(&text)),
            401 | 403 => Attempt::Done(Err(GeneratorError::Auth(status))),
            429 | 500..=599 => Attempt::Transient {
                timeout: false,
                reason: format!("HTTP {status}"),
            },
            _ => Attempt::Done(Err(GeneratorError::Http { status, body: text })),
        }
    }
}

fn parse_completion(body: &str) -> Result<GeneratorReply, GeneratorError> {
    let value: Value = serde_json::from_str(body).map_err(|e| GeneratorError::MalformedResponse(e.to_string()))?;
    let content = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or_else(|| GeneratorError::MalformedResponse("missing choices[0].message.content".into()))?;
    Ok(GeneratorReply::from_raw(content))
}

impl StepGenerator for LlmClient {
    fn generate(&mut self, request: &GeneratorRequest, _graph: &SceneGraph) -> Result<GeneratorReply, GeneratorError> {
        self.complete(request)
    }
}
