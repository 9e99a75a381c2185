//! Access to generation and translation backends.
//!
//! [`Gateway`] is shared across threads. It enforces each profile's
//! in-flight request bound, retries transient failures with exponential
//! backoff and serves `mock` profiles locally without any network use.

mod limiter;
pub mod mock;
mod profile;
mod transport;

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus_model::{Direction, LangCode};
pub use limiter::Limiter;
pub use profile::{BackendKind, BackendProfile, DecodeParams, RetryPolicy};
pub use transport::{HttpReply, HttpRequest, HttpTransport, Transport, TransportFailure};

#[derive(Debug, Clone, thiserror::Error)]
pub enum GatewayError {
    #[error("{backend_id}: transport failed after {attempts} attempt(s): {message}")]
    Transport {
        backend_id: String,
        attempts: u32,
        message: String,
    },
    #[error("configuration error: {0}")]
    Configuration(String),
    #[error("{backend_id}: backend returned an empty completion")]
    EmptyOutput { backend_id: String },
    #[error("{backend_id}: unsupported direction(s): {}", fmt_dirs(.unsupported))]
    Capability {
        backend_id: String,
        unsupported: Vec<Direction>,
    },
    #[error("{backend_id}: {kind:?} backends cannot serve {operation}")]
    WrongKind {
        backend_id: String,
        kind: BackendKind,
        operation: &'static str,
    },
    #[error("invalid decode parameters: {0}")]
    InvalidParams(String),
    #[error("{backend_id}: malformed response: {message}")]
    Protocol { backend_id: String, message: String },
}

fn fmt_dirs(dirs: &[Direction]) -> String {
    dirs.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompletionResult {
    pub text: String,
    pub backend_id: String,
    pub latency_ms: u64,
    pub attempt_count: u32,
}

pub struct Gateway {
    transport: Arc<dyn Transport>,
    limiters: Mutex<HashMap<String, Arc<Limiter>>>,
    calls: AtomicU64,
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new()
    }
}

impl Gateway {
    pub fn new() -> Self {
        Self::with_transport(Arc::new(HttpTransport))
    }

    pub fn with_transport(transport: Arc<dyn Transport>) -> Self {
        Self {
            transport,
            limiters: Mutex::new(HashMap::new()),
            calls: AtomicU64::new(0),
        }
    }

    /// Number of backend invocations served so far, mock ones included.
    pub fn call_count(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    fn limiter(&self, profile: &BackendProfile) -> Arc<Limiter> {
        let mut map = self.limiters.lock().expect("limiter map");
        map.entry(profile.backend_id.clone())
            .or_insert_with(|| Arc::new(Limiter::new(profile.max_parallel_requests)))
            .clone()
    }

    /// Single-prompt text completion.
    pub fn complete(
        &self,
        profile: &BackendProfile,
        prompt: &str,
        params: &DecodeParams,
    ) -> Result<CompletionResult, GatewayError> {
        profile.validate()?;
        params.validate()?;
        if !matches!(profile.kind, BackendKind::ChatLlm | BackendKind::Mock) {
            return Err(GatewayError::WrongKind {
                backend_id: profile.backend_id.clone(),
                kind: profile.kind,
                operation: "complete",
            });
        }
        self.calls.fetch_add(1, Ordering::SeqCst);
        let started = Instant::now();

        let (text, attempt_count) = if profile.kind == BackendKind::Mock {
            (mock::complete(profile, prompt, params), 1)
        } else {
            let mut body = json!({
                "model": profile.model_name,
                "messages": [{"role": "user", "content": prompt}],
                "temperature": params.temperature,
                "max_tokens": params.max_new_tokens,
            });
            if let Some(seed) = params.seed {
                body["seed"] = json!(seed);
            }
            let (reply, attempts) = self.post_with_retry(profile, &body)?;
            (parse_chat_reply(profile, &reply)?, attempts)
        };

        if text.trim().is_empty() {
            return Err(GatewayError::EmptyOutput {
                backend_id: profile.backend_id.clone(),
            });
        }
        Ok(CompletionResult {
            text,
            backend_id: profile.backend_id.clone(),
            latency_ms: started.elapsed().as_millis() as u64,
            attempt_count,
        })
    }

    /// Translates every segment; the output has the input's length and order.
    ///
    /// A failing request only fails the segments it carried. Errors that
    /// concern the whole call (wrong backend kind, unsupported direction)
    /// are returned as the outer error.
    pub fn translate_batch(
        &self,
        profile: &BackendProfile,
        segments: &[String],
        direction: &Direction,
        params: &DecodeParams,
    ) -> Result<Vec<Result<String, GatewayError>>, GatewayError> {
        profile.validate()?;
        params.validate()?;
        if !matches!(profile.kind, BackendKind::Seq2seqMt | BackendKind::Mock) {
            return Err(GatewayError::WrongKind {
                backend_id: profile.backend_id.clone(),
                kind: profile.kind,
                operation: "translate_batch",
            });
        }
        if segments.is_empty() {
            return Err(GatewayError::InvalidParams("no segments to translate".into()));
        }
        let unsupported: Vec<&LangCode> = [direction.source(), direction.target()]
            .into_iter()
            .filter(|l| !profile.supports(l))
            .collect();
        if !unsupported.is_empty() {
            return Err(GatewayError::Capability {
                backend_id: profile.backend_id.clone(),
                unsupported: vec![direction.clone()],
            });
        }

        if profile.kind == BackendKind::Mock {
            self.calls.fetch_add(1, Ordering::SeqCst);
            let tag = format!("{}:{}", profile.model_name, direction.target());
            return Ok(segments
                .iter()
                .map(|s| Ok(mock::translate_text(s, &tag)))
                .collect());
        }

        let chunks: Vec<&[String]> = segments.chunks(profile.batch_size).collect();
        let next = AtomicUsize::new(0);
        let workers = profile.max_parallel_requests.min(chunks.len());
        let mut slots: Vec<Option<Vec<Result<String, GatewayError>>>> = vec![None; chunks.len()];
        let done: Vec<(usize, Vec<Result<String, GatewayError>>)> = std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|_| {
                    s.spawn(|| {
                        let mut out = Vec::new();
                        loop {
                            let i = next.fetch_add(1, Ordering::SeqCst);
                            let Some(chunk) = chunks.get(i) else { break };
                            out.push((i, self.translate_chunk(profile, chunk, direction, params)));
                        }
                        out
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("translation worker panicked"))
                .collect()
        });
        for (i, results) in done {
            slots[i] = Some(results);
        }
        Ok(slots.into_iter().flat_map(|s| s.expect("every chunk processed")).collect())
    }

    fn translate_chunk(
        &self,
        profile: &BackendProfile,
        chunk: &[String],
        direction: &Direction,
        params: &DecodeParams,
    ) -> Vec<Result<String, GatewayError>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let body = json!({
            "model": profile.model_name,
            "source_lang": direction.source(),
            "target_lang": direction.target(),
            "texts": chunk,
            "beam_size": params.beam_size,
        });
        let reply = match self.post_with_retry(profile, &body) {
            Ok((reply, _)) => reply,
            Err(e) => return vec![Err(e); chunk.len()],
        };
        let protocol = |message: String| GatewayError::Protocol {
            backend_id: profile.backend_id.clone(),
            message,
        };
        let translations: Vec<Value> = match serde_json::from_str::<Value>(&reply.body)
            .ok()
            .and_then(|v| v.get("translations").and_then(Value::as_array).cloned())
        {
            Some(t) => t,
            None => return vec![Err(protocol("missing `translations` array".into())); chunk.len()],
        };
        (0..chunk.len())
            .map(|i| match translations.get(i).and_then(Value::as_str) {
                Some(t) if !t.trim().is_empty() => Ok(t.to_owned()),
                Some(_) => Err(GatewayError::EmptyOutput {
                    backend_id: profile.backend_id.clone(),
                }),
                None => Err(protocol(format!("no translation for segment {i}"))),
            })
            .collect()
    }

    fn post_with_retry(
        &self,
        profile: &BackendProfile,
        body: &Value,
    ) -> Result<(HttpReply, u32), GatewayError> {
        let url = profile.endpoint_url.as_deref().unwrap_or_default();
        let token = if profile.auth_env_var.is_empty() {
            None
        } else {
            std::env::var(&profile.auth_env_var).ok()
        };
        let limiter = self.limiter(profile);
        let policy = profile.retry_policy;
        let mut last = String::new();
        for attempt in 1..=policy.max_attempts {
            if attempt > 1 {
                let backoff = policy.base_backoff_ms.saturating_mul(1 << (attempt - 2).min(16));
                std::thread::sleep(Duration::from_millis(backoff));
            }
            let result = {
                let _permit = limiter.acquire();
                self.transport.post_json(&HttpRequest {
                    url,
                    bearer: token.as_deref(),
                    body,
                    timeout: Duration::from_millis(profile.request_timeout_ms),
                })
            };
            match result {
                Ok(reply) if (200..300).contains(&reply.status) => return Ok((reply, attempt)),
                Ok(reply) if (400..500).contains(&reply.status) => {
                    return Err(GatewayError::Configuration(format!(
                        "{}: HTTP {}: {}",
                        profile.backend_id,
                        reply.status,
                        truncate(&reply.body, 200)
                    )))
                }
                Ok(reply) if reply.status >= 500 => {
                    last = format!("HTTP {}", reply.status);
                }
                Ok(reply) => {
                    return Err(GatewayError::Protocol {
                        backend_id: profile.backend_id.clone(),
                        message: format!("unexpected HTTP status {}", reply.status),
                    })
                }
                Err(f) if f.is_retryable() => last = f.to_string(),
                Err(f) => {
                    return Err(GatewayError::Transport {
                        backend_id: profile.backend_id.clone(),
                        attempts: attempt,
                        message: f.to_string(),
                    })
                }
            }
            tracing::warn!(backend = %profile.backend_id, attempt, error = %last, "request failed");
        }
        Err(GatewayError::Transport {
            backend_id: profile.backend_id.clone(),
            attempts: policy.max_attempts,
            message: last,
        })
    }
}

fn parse_chat_reply(profile: &BackendProfile, reply: &HttpReply) -> Result<String, GatewayError> {
    serde_json::from_str::<Value>(&reply.body)
        .ok()
        .and_then(|v| {
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_owned)
        })
        .ok_or_else(|| GatewayError::Protocol {
            backend_id: profile.backend_id.clone(),
            message: "missing choices[0].message.content".into(),
        })
}

fn truncate(s: &str, max: usize) -> &str {
    match s.char_indices().nth(max) {
        Some((i, _)) => &s[..i],
        None => s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Replies from a fixed script and records every request body.
    struct Scripted {
        replies: Mutex<Vec<Result<HttpReply, TransportFailure>>>,
        seen: Mutex<Vec<(Value, Option<String>)>>,
    }

    impl Scripted {
        fn new(replies: Vec<Result<HttpReply, TransportFailure>>) -> Arc<Self> {
            Arc::new(Self {
                replies: Mutex::new(replies.into_iter().rev().collect()),
                seen: Mutex::new(Vec::new()),
            })
        }
    }

    impl Transport for Scripted {
        fn post_json(&self, r: &HttpRequest<'_>) -> Result<HttpReply, TransportFailure> {
            self.seen
                .lock()
                .unwrap()
                .push((r.body.clone(), r.bearer.map(str::to_owned)));
            self.replies.lock().unwrap().pop().expect("script exhausted")
        }
    }

    fn ok(body: Value) -> Result<HttpReply, TransportFailure> {
        Ok(HttpReply {
            status: 200,
            body: body.to_string(),
        })
    }

    fn status(code: u16) -> Result<HttpReply, TransportFailure> {
        Ok(HttpReply {
            status: code,
            body: "{}".into(),
        })
    }

    fn chat_profile() -> BackendProfile {
        let mut p = BackendProfile::remote("gen", BackendKind::ChatLlm, "http://fake", "gemma");
        p.retry_policy = RetryPolicy {
            max_attempts: 3,
            base_backoff_ms: 1,
        };
        p
    }

    fn chat_reply(text: &str) -> Result<HttpReply, TransportFailure> {
        ok(json!({"choices": [{"message": {"role": "assistant", "content": text}}]}))
    }

    #[test]
    fn mock_completion_is_deterministic() {
        let g = Gateway::new();
        let p = BackendProfile::mock("mock");
        let params = DecodeParams::sampling(1.0).with_seed(7);
        let first = g.complete(&p, "Write in Hausa (hau_Latn).", &params).unwrap();
        for _ in 0..4 {
            assert_eq!(g.complete(&p, "Write in Hausa (hau_Latn).", &params).unwrap().text, first.text);
        }
        assert_eq!(first.attempt_count, 1);
        assert_eq!(g.call_count(), 5);
    }

    #[test]
    fn retries_5xx_then_succeeds() {
        let t = Scripted::new(vec![status(503), Err(TransportFailure::Timeout("t".into())), chat_reply("hi")]);
        let g = Gateway::with_transport(t.clone());
        let r = g.complete(&chat_profile(), "p", &DecodeParams::default()).unwrap();
        assert_eq!(r.text, "hi");
        assert_eq!(r.attempt_count, 3);
    }

    #[test]
    fn exhausted_retries_are_a_transport_error() {
        let t = Scripted::new(vec![status(500), status(502), status(503)]);
        let g = Gateway::with_transport(t);
        let err = g.complete(&chat_profile(), "p", &DecodeParams::default()).unwrap_err();
        assert!(matches!(err, GatewayError::Transport { attempts: 3, .. }), "{err}");
    }

    #[test]
    fn client_errors_are_not_retried() {
        let t = Scripted::new(vec![status(401), chat_reply("never")]);
        let g = Gateway::with_transport(t.clone());
        let err = g.complete(&chat_profile(), "p", &DecodeParams::default()).unwrap_err();
        assert!(matches!(err, GatewayError::Configuration(_)));
        assert_eq!(t.seen.lock().unwrap().len(), 1);
    }

    #[test]
    fn empty_completion_is_an_error() {
        let g = Gateway::with_transport(Scripted::new(vec![chat_reply("  ")]));
        let err = g.complete(&chat_profile(), "p", &DecodeParams::default()).unwrap_err();
        assert!(matches!(err, GatewayError::EmptyOutput { .. }));
    }

    #[test]
    fn chat_wire_format() {
        let t = Scripted::new(vec![chat_reply("ok")]);
        let g = Gateway::with_transport(t.clone());
        g.complete(&chat_profile(), "hello", &DecodeParams::sampling(1.0).with_seed(3))
            .unwrap();
        let (body, _) = t.seen.lock().unwrap()[0].clone();
        assert_eq!(
            body,
            json!({
                "model": "gemma",
                "messages": [{"role": "user", "content": "hello"}],
                "temperature": 1.0,
                "max_tokens": 512,
                "seed": 3
            })
        );
    }

    #[test]
    fn bearer_token_comes_from_the_named_variable() {
        let t = Scripted::new(vec![chat_reply("a"), chat_reply("b")]);
        let g = Gateway::with_transport(t.clone());
        let mut p = chat_profile();
        p.auth_env_var = "PARASYNTH_TEST_TOKEN_GATEWAY".into();
        std::env::set_var("PARASYNTH_TEST_TOKEN_GATEWAY", "s3cret");
        g.complete(&p, "x", &DecodeParams::default()).unwrap();
        p.auth_env_var.clear();
        g.complete(&p, "x", &DecodeParams::default()).unwrap();
        let seen = t.seen.lock().unwrap();
        assert_eq!(seen[0].1.as_deref(), Some("s3cret"));
        assert_eq!(seen[1].1, None);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let g = Gateway::new();
        let mt = BackendProfile::remote("mt", BackendKind::Seq2seqMt, "http://x", "nllb");
        assert!(matches!(
            g.complete(&mt, "p", &DecodeParams::default()),
            Err(GatewayError::WrongKind { .. })
        ));
        let d = Direction::new("hau_Latn".parse().unwrap(), "eng_Latn".parse().unwrap()).unwrap();
        assert!(matches!(
            g.translate_batch(&chat_profile(), &["a".into()], &d, &DecodeParams::beam(5)),
            Err(GatewayError::WrongKind { .. })
        ));
    }

    #[test]
    fn mt_failures_are_per_segment() {
        let t = Scripted::new(vec![
            ok(json!({"translations": ["one", "two"]})),
            status(400),
        ]);
        let g = Gateway::with_transport(t.clone());
        let mut p = BackendProfile::remote("mt", BackendKind::Seq2seqMt, "http://x", "nllb");
        p.batch_size = 2;
        p.max_parallel_requests = 1;
        let d = Direction::new("hau_Latn".parse().unwrap(), "eng_Latn".parse().unwrap()).unwrap();
        let segs: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let out = g.translate_batch(&p, &segs, &d, &DecodeParams::beam(5)).unwrap();
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].as_deref().unwrap(), "one");
        assert_eq!(out[1].as_deref().unwrap(), "two");
        assert!(out[2].is_err());
        let (body, _) = t.seen.lock().unwrap()[0].clone();
        assert_eq!(
            body,
            json!({"model": "nllb", "source_lang": "hau_Latn", "target_lang": "eng_Latn",
                   "texts": ["a", "b"], "beam_size": 5})
        );
    }

    #[test]
    fn unsupported_direction_lists_the_pair() {
        let g = Gateway::new();
        let mut p = BackendProfile::mock("mt");
        p.supported_languages = vec!["eng_Latn".parse().unwrap(), "hau_Latn".parse().unwrap()];
        let d = Direction::new("som_Latn".parse().unwrap(), "eng_Latn".parse().unwrap()).unwrap();
        let err = g
            .translate_batch(&p, &["x".into()], &d, &DecodeParams::beam(5))
            .unwrap_err();
        assert!(err.to_string().contains("som_Latn->eng_Latn"), "{err}");
    }
}
