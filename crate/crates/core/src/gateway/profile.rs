use serde::{Deserialize, Serialize};

use super::GatewayError;
use crate::corpus_model::LangCode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    ChatLlm,
    Seq2seqMt,
    Mock,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_backoff_ms: 250,
        }
    }
}

/// How to reach one generation or translation backend.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackendProfile {
    pub backend_id: String,
    pub kind: BackendKind,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    pub model_name: String,
    /// Name of the environment variable holding the bearer token. Empty
    /// means requests are sent without an `Authorization` header.
    #[serde(default)]
    pub auth_env_var: String,
    #[serde(default = "default_parallel")]
    pub max_parallel_requests: usize,
    #[serde(default)]
    pub retry_policy: RetryPolicy,
    #[serde(default = "default_timeout")]
    pub request_timeout_ms: u64,
    /// Segments per translation request.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Languages the backend can translate between; empty means any.
    #[serde(default)]
    pub supported_languages: Vec<LangCode>,
    /// Mock only: return this text for every completion.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_response: Option<String>,
}

fn default_parallel() -> usize {
    4
}
fn default_timeout() -> u64 {
    60_000
}
fn default_batch() -> usize {
    16
}

impl BackendProfile {
    /// An offline profile backed by the deterministic mock.
    pub fn mock(backend_id: impl Into<String>) -> Self {
        let backend_id = backend_id.into();
        Self {
            model_name: backend_id.clone(),
            backend_id,
            kind: BackendKind::Mock,
            endpoint_url: None,
            auth_env_var: String::new(),
            max_parallel_requests: default_parallel(),
            retry_policy: RetryPolicy::default(),
            request_timeout_ms: default_timeout(),
            batch_size: default_batch(),
            supported_languages: Vec::new(),
            mock_response: None,
        }
    }

    pub fn remote(
        backend_id: impl Into<String>,
        kind: BackendKind,
        endpoint_url: impl Into<String>,
        model_name: impl Into<String>,
    ) -> Self {
        Self {
            kind,
            endpoint_url: Some(endpoint_url.into()),
            model_name: model_name.into(),
            ..Self::mock(backend_id)
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        let fail = |m: String| Err(GatewayError::Configuration(format!("{}: {m}", self.backend_id)));
        if self.kind != BackendKind::Mock && self.endpoint_url.as_deref().unwrap_or("").is_empty() {
            return fail("endpoint_url is required for non-mock backends".into());
        }
        if self.max_parallel_requests == 0 {
            return fail("max_parallel_requests must be at least 1".into());
        }
        if self.retry_policy.max_attempts == 0 {
            return fail("retry_policy.max_attempts must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        Ok(())
    }

    pub fn supports(&self, lang: &LangCode) -> bool {
        self.supported_languages.is_empty() || self.supported_languages.contains(lang)
    }
}

/// Decoding settings for one request.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub beam_size: u32,
    pub max_new_tokens: u32,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self::sampling(1.0)
    }
}

impl DecodeParams {
    pub fn sampling(temperature: f64) -> Self {
        Self {
            temperature,
            beam_size: 1,
            max_new_tokens: 512,
            seed: None,
        }
    }

    pub fn greedy() -> Self {
        Self::sampling(0.0)
    }

    pub fn beam(beam_size: u32) -> Self {
        Self {
            beam_size,
            ..Self::greedy()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self {
            seed: Some(seed),
            ..self
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidParams(format!(
                "temperature {} must be >= 0",
                self.temperature
            )));
        }
        if self.beam_size == 0 || self.max_new_tokens == 0 {
            return Err(GatewayError::InvalidParams(
                "beam_size and max_new_tokens must be >= 1".into(),
            ));
        }
        if self.beam_size > 1 && self.temperature != 0.0 {
            return Err(GatewayError::InvalidParams(format!(
                "beam search (beam_size {}) requires temperature 0",
                self.beam_size
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beam_requires_zero_temperature() {
        DecodeParams::beam(5).validate().unwrap();
        let bad = DecodeParams {
            temperature: 1.0,
            ..DecodeParams::beam(5)
        };
        assert!(bad.validate().is_err());
        assert!(DecodeParams::sampling(-0.1).validate().is_err());
    }

    #[test]
    fn remote_profiles_need_an_endpoint() {
        BackendProfile::mock("m").validate().unwrap();
        let mut p = BackendProfile::remote("g", BackendKind::ChatLlm, "", "model");
        assert!(p.validate().is_err());
        p.endpoint_url = Some("http://localhost:9".into());
        p.validate().unwrap();
        p.max_parallel_requests = 0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn profile_defaults_from_toml() {
        let p: BackendProfile = toml::from_str(
            r#"
            backend_id = "nllb"
            kind = "seq2seq_mt"
            endpoint_url = "https://mt.example/translate"
            model_name = "nllb-200-3.3B"
            retry_policy = { max_attempts = 5, base_backoff_ms = 100 }
            "#,
        )
        .unwrap();
        assert_eq!(p.kind, BackendKind::Seq2seqMt);
        assert_eq!(p.max_parallel_requests, 4);
        assert_eq!(p.retry_policy.max_attempts, 5);
        p.validate().unwrap();
    }
}
