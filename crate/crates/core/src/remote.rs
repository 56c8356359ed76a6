//! Blocking JSON-over-HTTP client shared by the remote tagger, the remote
//! scorer and the sentence-search client.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RemoteError {
    #[error("{endpoint}: transport error: {message}")]
    Transport { endpoint: String, message: String },
    #[error("{endpoint}: request timed out")]
    Timeout { endpoint: String },
    #[error("{endpoint}: protocol violation: {message}")]
    ProtocolViolation { endpoint: String, message: String },
    #[error("{endpoint}: rate limited (retry after {retry_after:?})")]
    RateLimited { endpoint: String, retry_after: Option<Duration> },
}

#[derive(Debug, Clone)]
pub struct HttpClient {
    agent: ureq::Agent,
    endpoint: String,
}

impl HttpClient {
    /// `endpoint` is a base URL such as `http://127.0.0.1:8000`.
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        let agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        HttpClient { agent, endpoint: endpoint.trim_end_matches('/').to_string() }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn protocol_violation(&self, message: impl Into<String>) -> RemoteError {
        RemoteError::ProtocolViolation { endpoint: self.endpoint.clone(), message: message.into() }
    }

    fn transport(&self, err: ureq::Error) -> RemoteError {
        match err {
            ureq::Error::Timeout(_) => RemoteError::Timeout { endpoint: self.endpoint.clone() },
            ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => {
                RemoteError::Timeout { endpoint: self.endpoint.clone() }
            }
            other => RemoteError::Transport { endpoint: self.endpoint.clone(), message: other.to_string() },
        }
    }

    fn decode<R: DeserializeOwned>(&self, mut resp: ureq::http::Response<ureq::Body>) -> Result<R, RemoteError> {
        let status = resp.status().as_u16();
        if status == 429 {
            let retry_after = resp
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            return Err(RemoteError::RateLimited { endpoint: self.endpoint.clone(), retry_after });
        }
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            let message = format!("HTTP {status}: {}", body.chars().take(200).collect::<String>());
            return Err(if status >= 500 {
                RemoteError::Transport { endpoint: self.endpoint.clone(), message }
            } else {
                self.protocol_violation(message)
            });
        }
        let body = resp.body_mut().read_to_string().map_err(|e| self.transport(e))?;
        serde_json::from_str(&body).map_err(|e| self.protocol_violation(format!("bad JSON body: {e}")))
    }

    pub fn post_json<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, RemoteError> {
        let url = format!("{}{path}", self.endpoint);
        let resp = self.agent.post(&url).send_json(body).map_err(|e| self.transport(e))?;
        self.decode(resp)
    }

    pub fn get_json<R: DeserializeOwned>(&self, path: &str, query: &[(&str, &str)]) -> Result<R, RemoteError> {
        let url = format!("{}{path}", self.endpoint);
        let mut req = self.agent.get(&url);
        for (k, v) in query {
            req = req.query(*k, *v);
        }
        let resp = req.call().map_err(|e| self.transport(e))?;
        self.decode(resp)
    }
}
