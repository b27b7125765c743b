//! Blocking JSON-over-HTTP plumbing shared by every external backend adapter.

use std::fmt;
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;
use ureq::http::Uri;

const MAX_RESPONSE_BYTES: u64 = 256 * 1024 * 1024;

/// Failure modes common to every backend, local or remote.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch { expected: (u32, u32), actual: (u32, u32) },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// A remote service URL plus per-call timeout.
#[derive(Clone)]
pub struct Endpoint {
    url: String,
    timeout: Duration,
    api_key_env: Option<String>,
    agent: ureq::Agent,
}

impl fmt::Debug for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Endpoint")
            .field("url", &self.url)
            .field("timeout", &self.timeout)
            .field("api_key_env", &self.api_key_env)
            .finish()
    }
}

impl Endpoint {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .new_agent();
        Self { url: url.into(), timeout, api_key_env: None, agent }
    }

    /// Sends `Authorization: Bearer $VAR` when the named variable is set.
    pub fn with_api_key_env(mut self, var: impl Into<String>) -> Self {
        self.api_key_env = Some(var.into());
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn post_json<Req, Resp>(&self, body: &Req) -> Result<Resp, BackendError>
    where
        Req: Serialize,
        Resp: DeserializeOwned,
    {
        let mut request = self.agent.post(&self.url);
        if let Some(key) = self.api_key_env.as_deref().and_then(|v| std::env::var(v).ok()) {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request.send_json(body).map_err(|e| self.classify(e))?;
        response
            .body_mut()
            .with_config()
            .limit(MAX_RESPONSE_BYTES)
            .read_json::<Resp>()
            .map_err(|e| match e {
                ureq::Error::Json(e) => BackendError::Malformed(e.to_string()),
                other => self.classify(other),
            })
    }

    fn classify(&self, err: ureq::Error) -> BackendError {
        match err {
            ureq::Error::Json(e) => BackendError::Malformed(e.to_string()),
            ureq::Error::StatusCode(code) => {
                BackendError::Unavailable(format!("{} answered HTTP {code}", self.url))
            }
            ureq::Error::Timeout(_) => {
                BackendError::Unavailable(format!("{} timed out after {:?}", self.url, self.timeout))
            }
            other => BackendError::Unavailable(format!("{}: {other}", self.url)),
        }
    }

    /// Cheap reachability check: can a TCP connection be opened?
    pub fn probe(&self) -> bool {
        let Ok(uri) = self.url.parse::<Uri>() else {
            return false;
        };
        let Some(host) = uri.host() else {
            return false;
        };
        let port = uri.port_u16().unwrap_or(if uri.scheme_str() == Some("https") { 443 } else { 80 });
        let Ok(addrs) = (host, port).to_socket_addrs() else {
            return false;
        };
        let limit = self.timeout.min(Duration::from_secs(2));
        addrs.into_iter().any(|addr| TcpStream::connect_timeout(&addr, limit).is_ok())
    }
}
