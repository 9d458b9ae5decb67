//! Generic HTTP generator: one POST per sample, retried with exponential
//! backoff. The request id depends only on the seed and sample index, so a
//! retried request is recognizable as the same sample.

use std::time::Duration;

use serde::Serialize;

use super::{BackendError, GeneratorBackend};
use crate::trace::{parse_trace, ParseMode, ReasoningTrace};

pub const URL_ENV: &str = "SCV_GEN_URL";
pub const TOKEN_ENV: &str = "SCV_GEN_TOKEN";

#[derive(Serialize)]
struct GenerateRequest<'a> {
    query: &'a str,
    sample_index: usize,
    request_id: String,
}

#[derive(Debug, Clone)]
pub struct HttpBackend {
    url: String,
    token: Option<String>,
    seed: u64,
    attempts: usize,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, token: Option<String>, seed: u64) -> Self {
        HttpBackend {
            url: url.into(),
            token,
            seed,
            attempts: 3,
            backoff: Duration::from_millis(200),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("default HTTP client"),
        }
    }

    /// Reads the endpoint and token from `SCV_GEN_URL` and `SCV_GEN_TOKEN`.
    pub fn from_env(seed: u64) -> Option<Self> {
        let url = std::env::var(URL_ENV).ok()?;
        Some(Self::new(url, std::env::var(TOKEN_ENV).ok(), seed))
    }

    pub fn with_retry(mut self, attempts: usize, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    pub fn request_id(&self, index: usize) -> String {
        format!("scv-{:016x}-{index}", self.seed)
    }

    fn attempt(&self, body: &GenerateRequest<'_>) -> Result<Vec<u8>, (bool, String)> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.is_server_error() || status.as_u16() == 429 || status.as_u16() == 408;
            return Err((retry, format!("HTTP {status}")));
        }
        resp.bytes().map(|b| b.to_vec()).map_err(|e| (true, e.to_string()))
    }
}

impl GeneratorBackend for HttpBackend {
    fn name(&self) -> &'static str {
        "http"
    }

    fn generate(&self, query: &str, index: usize) -> Result<ReasoningTrace, BackendError> {
        let body = GenerateRequest {
            query,
            sample_index: index,
            request_id: self.request_id(index),
        };
        let mut last = String::new();
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * (1 << (attempt - 1)));
            }
            match self.attempt(&body) {
                Ok(bytes) => {
                    return parse_trace(&bytes, ParseMode::Lenient).map_err(|e| BackendError::Malformed {
                        index,
                        message: e.to_string(),
                    })
                }
                Err((retry, msg)) => {
                    log::warn!("sample {index} attempt {}: {msg}", attempt + 1);
                    last = msg;
                    if !retry {
                        return Err(BackendError::Http {
                            index,
                            attempts: attempt + 1,
                            message: last,
                        });
                    }
                }
            }
        }
        Err(BackendError::Http {
            index,
            attempts: self.attempts,
            message: last,
        })
    }
}
