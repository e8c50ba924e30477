//! Blocking JSON-over-HTTP with retries, shared by the embedding and chat clients.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HttpError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("invalid response body: {0}")]
    Decode(String),
}

impl HttpError {
    fn retryable(&self) -> bool {
        match self {
            HttpError::Transport(_) => true,
            HttpError::Status { status, .. } => *status == 429 || *status >= 500,
            HttpError::Decode(_) => false,
        }
    }
}

/// Exponential backoff: attempt `i` waits `base_delay * 2^i`, capped at `max_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    #[serde(with = "millis")]
    pub base_delay: Duration,
    #[serde(with = "millis")]
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn no_delay(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 1u32.checked_shl(attempt.min(16)).unwrap_or(u32::MAX);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

/// A JSON POST client bound to one endpoint.
#[derive(Clone)]
pub struct JsonClient {
    agent: ureq::Agent,
    endpoint: String,
    bearer: Option<String>,
    retry: RetryPolicy,
}

impl std::fmt::Debug for JsonClient {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JsonClient")
            .field("endpoint", &self.endpoint)
            .field("retry", &self.retry)
            .finish_non_exhaustive()
    }
}

impl JsonClient {
    pub fn new(endpoint: impl Into<String>, bearer: Option<String>, retry: RetryPolicy) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        JsonClient {
            agent: config.into(),
            endpoint: endpoint.into(),
            bearer,
            retry,
        }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// POSTs `body`, retrying transport errors, 429 and 5xx. A `Retry-After`
    /// header (in seconds) overrides the backoff delay, capped at `max_delay`.
    pub fn post(&self, body: &Value) -> Result<Value, HttpError> {
        let mut attempt = 0;
        loop {
            let (result, retry_after) = self.post_once(body);
            match result {
                Ok(v) => return Ok(v),
                Err(e) if e.retryable() && attempt < self.retry.max_retries => {
                    let wait = retry_after
                        .map(|d| d.min(self.retry.max_delay))
                        .unwrap_or_else(|| self.retry.delay(attempt));
                    log::warn!("{}: {e}; retrying in {:?}", self.endpoint, wait);
                    std::thread::sleep(wait);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn post_once(&self, body: &Value) -> (Result<Value, HttpError>, Option<Duration>) {
        let mut req = self
            .agent
            .post(&self.endpoint)
            .header("Content-Type", "application/json");
        if let Some(token) = &self.bearer {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = match req.send_json(body) {
            Ok(r) => r,
            Err(e) => return (Err(HttpError::Transport(e.to_string())), None),
        };
        let status = resp.status().as_u16();
        let retry_after = resp
            .headers()
            .get("retry-after")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse::<f64>().ok())
            .filter(|s| s.is_finite() && *s >= 0.0)
            .map(Duration::from_secs_f64);
        let text = match resp.body_mut().read_to_string() {
            Ok(t) => t,
            Err(e) => return (Err(HttpError::Transport(e.to_string())), retry_after),
        };
        if !(200..300).contains(&status) {
            return (Err(HttpError::Status { status, body: text }), retry_after);
        }
        (
            serde_json::from_str(&text).map_err(|e| HttpError::Decode(e.to_string())),
            None,
        )
    }
}
