use thiserror::Error;

use crate::providers::WireRequest;

/// Raw reply of a successful HTTP exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportResponse {
    pub body: Vec<u8>,
    /// Version string from response metadata, when the service sends one.
    pub model_version: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    /// Worth retrying: timeouts, connection resets, 429 and 5xx.
    #[error("transient failure: {0}")]
    Transient(String),
    /// 401/403; retrying will not help.
    #[error("authentication failed: {0}")]
    Auth(String),
    /// Any other rejection.
    #[error("request rejected: {0}")]
    Permanent(String),
}

impl TransportError {
    pub fn is_transient(&self) -> bool {
        matches!(self, TransportError::Transient(_))
    }

    /// Classifies a non-success HTTP status.
    pub fn from_status(status: u16, body: &[u8]) -> Self {
        let snippet: String = String::from_utf8_lossy(body).chars().take(200).collect();
        let msg = format!("HTTP {status}: {snippet}");
        match status {
            401 | 403 => TransportError::Auth(msg),
            408 | 429 | 500..=599 => TransportError::Transient(msg),
            _ => TransportError::Permanent(msg),
        }
    }
}

/// Executes one wire request. Implementations must be shareable across the
/// worker threads of a job.
pub trait Transport: Send + Sync {
    fn send(&self, req: &WireRequest) -> Result<TransportResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for &T {
    fn send(&self, req: &WireRequest) -> Result<TransportResponse, TransportError> {
        (**self).send(req)
    }
}

/// Blocking HTTPS transport.
#[cfg(feature = "http")]
#[derive(Debug)]
pub struct HttpTransport {
    agent: ureq::Agent,
}

#[cfg(feature = "http")]
impl HttpTransport {
    pub fn new(timeout: std::time::Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        Self {
            agent: config.into(),
        }
    }
}

#[cfg(feature = "http")]
impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(std::time::Duration::from_secs(30))
    }
}

#[cfg(feature = "http")]
impl Transport for HttpTransport {
    fn send(&self, req: &WireRequest) -> Result<TransportResponse, TransportError> {
        log::debug!("{}", req.loggable());
        let mut builder = self.agent.post(&req.url);
        for (k, v) in req.all_headers() {
            builder = builder.header(k, v);
        }
        let mut resp = builder
            .send(&req.body[..])
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        let status = resp.status().as_u16();
        let model_version = resp
            .headers()
            .get("x-model-version")
            .and_then(|v| v.to_str().ok())
            .map(str::to_string);
        let body = resp
            .body_mut()
            .read_to_vec()
            .map_err(|e| TransportError::Transient(e.to_string()))?;
        if (200..300).contains(&status) {
            Ok(TransportResponse {
                body,
                model_version,
            })
        } else {
            Err(TransportError::from_status(status, &body))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_classification() {
        assert!(TransportError::from_status(429, b"slow down").is_transient());
        assert!(TransportError::from_status(503, b"").is_transient());
        assert!(matches!(TransportError::from_status(401, b""), TransportError::Auth(_)));
        assert!(matches!(TransportError::from_status(400, b""), TransportError::Permanent(_)));
    }
}
