use std::time::Duration;

use serde_json::Value;

pub struct HttpRequest<'a> {
    pub url: &'a str,
    pub bearer: Option<&'a str>,
    pub body: &'a Value,
    pub timeout: Duration,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransportFailure {
    Timeout(String),
    /// Refused, reset or otherwise broken connection.
    Connection(String),
    Other(String),
}

impl TransportFailure {
    pub fn is_retryable(&self) -> bool {
        matches!(self, Self::Timeout(_) | Self::Connection(_))
    }
}

impl std::fmt::Display for TransportFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Timeout(m) => write!(f, "timeout: {m}"),
            Self::Connection(m) => write!(f, "connection: {m}"),
            Self::Other(m) => f.write_str(m),
        }
    }
}

/// A JSON-over-HTTP POST. Swappable so tests can observe requests offline.
pub trait Transport: Send + Sync {
    fn post_json(&self, request: &HttpRequest<'_>) -> Result<HttpReply, TransportFailure>;
}

/// Blocking HTTPS transport.
#[derive(Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn post_json(&self, request: &HttpRequest<'_>) -> Result<HttpReply, TransportFailure> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(request.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut req = agent.post(request.url).header("Content-Type", "application/json");
        if let Some(token) = request.bearer {
            req = req.header("Authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send_json(request.body).map_err(classify)?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| TransportFailure::Connection(e.to_string()))?;
        Ok(HttpReply { status, body })
    }
}

fn classify(err: ureq::Error) -> TransportFailure {
    match err {
        ureq::Error::Timeout(_) => TransportFailure::Timeout(err.to_string()),
        ureq::Error::Io(_) | ureq::Error::ConnectionFailed | ureq::Error::HostNotFound => {
            TransportFailure::Connection(err.to_string())
        }
        other => TransportFailure::Other(other.to_string()),
    }
}
