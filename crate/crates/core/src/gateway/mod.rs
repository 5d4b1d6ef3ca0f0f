//! Uniform client for chat-completion backends.
//!
//! One gateway serves every model role (target, reference pool, judge,
//! translator, generator) behind a single `complete` call with
//! disk-backed caching, bounded-concurrency batching, retry with
//! exponential backoff on transport-class failures, and a scripted
//! mock backend for fully offline runs.
//!
//! Credentials are never stored: a [`ModelSpec`] carries only the
//! *name* of the environment variable holding the key, and the value
//! is read at call time.

mod cache;
mod http;
mod mock;

pub use mock::{MockRule, MockScript, MockStatsSnapshot, DEFAULT_CENSORED_RESPONSE};

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{parallel_map, sha256_hex};

use cache::CompletionCache;
use http::HttpBackend;
use mock::MockRegistry;

/// What a model is used *for*; audits wire stages to roles, not ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Reference,
    Judge,
    Translator,
    Generator,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationParams {
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_max_tokens() -> u32 {
    4096
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 0.0,
            max_tokens: default_max_tokens(),
            seed: None,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        if self.temperature < 0.0 {
            return Err(Error::Config("temperature must be >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }

    fn fingerprint(&self) -> String {
        format!(
            "{:x}|{}|{}",
            self.temperature.to_bits(),
            self.max_tokens,
            self.seed.map_or("none".to_string(), |s| s.to_string())
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    pub role: Role,
    /// HTTP endpoint URL, or `mock:<script-id>` for the scripted
    /// backend.
    pub endpoint: String,
    /// Name of the environment variable holding the credential. The
    /// secret itself never appears in configs or reports.
    #[serde(default)]
    pub auth_ref: Option<String>,
    #[serde(default)]
    pub default_params: GenerationParams,
}

impl ModelSpec {
    pub fn mock(id: &str, role: Role, script_id: &str) -> Self {
        ModelSpec {
            id: id.to_string(),
            role,
            endpoint: format!("mock:{script_id}"),
            auth_ref: None,
            default_params: GenerationParams::default(),
        }
    }

    pub fn mock_script_id(&self) -> Option<&str> {
        self.endpoint.strip_prefix("mock:")
    }
}

/// System + user message pair, the provider-agnostic request shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatInput {
    pub system: Option<String>,
    pub user: String,
}

impl ChatInput {
    pub fn user(text: impl Into<String>) -> Self {
        ChatInput {
            system: None,
            user: text.into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawCompletion {
    /// Exactly what the backend returned, byte-preserved.
    pub text: String,
    pub model_id: String,
    pub latency_ms: u64,
    pub from_cache: bool,
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        // 3 attempts, 1s/2s backoff, transport-class failures only.
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

pub const DEFAULT_CONCURRENCY_LIMIT: usize = 8;

pub struct GatewaySettings {
    pub retry: RetryPolicy,
    pub request_timeout: Duration,
    pub concurrency_limit: usize,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        GatewaySettings {
            retry: RetryPolicy::default(),
            request_timeout: Duration::from_secs(120),
            concurrency_limit: DEFAULT_CONCURRENCY_LIMIT,
        }
    }
}

pub struct Gateway {
    cache: Option<CompletionCache>,
    mocks: MockRegistry,
    http: HttpBackend,
    retry: RetryPolicy,
    concurrency_limit: usize,
    network_calls: AtomicU64,
    cache_hits: AtomicU64,
}

impl Gateway {
    pub fn new(settings: GatewaySettings) -> Self {
        Gateway {
            cache: None,
            mocks: MockRegistry::new(),
            http: HttpBackend::new(settings.request_timeout),
            retry: settings.retry,
            concurrency_limit: settings.concurrency_limit.max(1),
            network_calls: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    pub fn with_cache_dir(mut self, dir: &Path) -> Result<Self> {
        self.cache = Some(CompletionCache::open(dir)?);
        Ok(self)
    }

    pub fn register_mock_script(&self, id: &str, script: MockScript) {
        self.mocks.register(id, script);
    }

    pub fn mock_stats(&self, script_id: &str) -> Option<MockStatsSnapshot> {
        self.mocks.snapshot(script_id)
    }

    /// Count of live HTTP requests issued. Zero in mock mode, by
    /// construction; asserted by tests.
    pub fn network_call_count(&self) -> u64 {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn cache_hit_count(&self) -> u64 {
        self.cache_hits.load(Ordering::SeqCst)
    }

    pub fn concurrency_limit(&self) -> usize {
        self.concurrency_limit
    }

    fn cache_key(model: &ModelSpec, input: &ChatInput, params: &GenerationParams) -> String {
        let mut material = String::new();
        material.push_str(&model.id);
        material.push('\0');
        if let Some(system) = &input.system {
            material.push_str(system);
        }
        material.push('\0');
        material.push_str(&input.user);
        material.push('\0');
        material.push_str(&params.fingerprint());
        sha256_hex(material.as_bytes())
    }

    /// Resolve a completion, serving from cache when available.
    pub fn complete(
        &self,
        model: &ModelSpec,
        input: &ChatInput,
        params: &GenerationParams,
    ) -> Result<RawCompletion> {
        self.complete_inner(model, input, params, false)
    }

    /// Resolve a completion, bypassing (and overwriting) the cache.
    /// Used for re-asks after non-conforming judge output, where a
    /// cached reply would just repeat the bad bytes.
    pub fn complete_fresh(
        &self,
        model: &ModelSpec,
        input: &ChatInput,
        params: &GenerationParams,
    ) -> Result<RawCompletion> {
        self.complete_inner(model, input, params, true)
    }

    fn complete_inner(
        &self,
        model: &ModelSpec,
        input: &ChatInput,
        params: &GenerationParams,
        skip_cache: bool,
    ) -> Result<RawCompletion> {
        params.validate()?;
        let key = Self::cache_key(model, input, params);
        if !skip_cache {
            if let Some(cache) = &self.cache {
                if let Some(text) = cache.get(&key) {
                    self.cache_hits.fetch_add(1, Ordering::SeqCst);
                    return Ok(RawCompletion {
                        text,
                        model_id: model.id.clone(),
                        latency_ms: 0,
                        from_cache: true,
                    });
                }
            }
        }

        let started = Instant::now();
        let text = self.dispatch_with_retry(model, input, params)?;
        let latency_ms = started.elapsed().as_millis() as u64;
        if let Some(cache) = &self.cache {
            cache.put(&key, &model.id, &text)?;
        }
        Ok(RawCompletion {
            text,
            model_id: model.id.clone(),
            latency_ms,
            from_cache: false,
        })
    }

    fn dispatch_with_retry(
        &self,
        model: &ModelSpec,
        input: &ChatInput,
        params: &GenerationParams,
    ) -> Result<String> {
        let mut delay = self.retry.base_delay;
        let attempts = self.retry.attempts.max(1);
        for attempt in 1..=attempts {
            match self.dispatch(model, input, params) {
                Ok(text) => return Ok(text),
                Err(e) if e.is_retriable() && attempt < attempts => {
                    std::thread::sleep(delay);
                    delay *= 2;
                }
                Err(e) => return Err(e),
            }
        }
        unreachable!("retry loop always returns");
    }

    fn dispatch(
        &self,
        model: &ModelSpec,
        input: &ChatInput,
        params: &GenerationParams,
    ) -> Result<String> {
        if let Some(script_id) = model.mock_script_id() {
            return self.mocks.run(script_id, input.system.as_deref(), &input.user);
        }
        let api_key = match &model.auth_ref {
            Some(var) => {
                Some(std::env::var(var).map_err(|_| Error::MissingCredential(var.clone()))?)
            }
            None => None,
        };
        self.network_calls.fetch_add(1, Ordering::SeqCst);
        self.http.complete(
            &model.endpoint,
            api_key.as_deref(),
            &model.id,
            input,
            params,
        )
    }

    /// Complete a batch with at most `concurrency_limit` requests in
    /// flight. Results align positionally with the inputs; slot-level
    /// failures never abort the batch.
    pub fn complete_batch(
        &self,
        model: &ModelSpec,
        inputs: &[ChatInput],
        params: &GenerationParams,
        concurrency_limit: usize,
    ) -> Vec<Result<RawCompletion>> {
        assert!(concurrency_limit >= 1, "concurrency_limit must be >= 1");
        parallel_map(inputs, concurrency_limit, |_, input| {
            self.complete(model, input, params)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_gateway() -> Gateway {
        Gateway::new(GatewaySettings {
            retry: RetryPolicy {
                attempts: 3,
                base_delay: Duration::from_millis(1),
            },
            ..GatewaySettings::default()
        })
    }

    #[test]
    fn echo_then_cache_hit() {
        let dir = tempfile::tempdir().unwrap();
        let gw = test_gateway().with_cache_dir(dir.path()).unwrap();
        gw.register_mock_script("echo", MockScript::echo());
        let model = ModelSpec::mock("m-echo", Role::Target, "echo");
        let params = GenerationParams::default();

        let first = gw.complete(&model, &ChatInput::user("hello"), &params).unwrap();
        assert_eq!(first.text, "hello");
        assert!(!first.from_cache);

        let second = gw.complete(&model, &ChatInput::user("hello"), &params).unwrap();
        assert!(second.from_cache);
        assert_eq!(second.text, first.text);
        assert_eq!(gw.network_call_count(), 0);
    }

    #[test]
    fn censor_script_emits_type2_shape() {
        let gw = test_gateway();
        gw.register_mock_script(
            "censor",
            MockScript::censor_unless_trigger("TRIGGER", 2, "<think>reasoning</think>ok"),
        );
        let model = ModelSpec::mock("m", Role::Target, "censor");
        let out = gw
            .complete(&model, &ChatInput::user("plain prompt"), &GenerationParams::default())
            .unwrap();
        assert_eq!(out.text, "<think> </think>I am sorry, I cannot answer that question.");
    }

    #[test]
    fn batch_alignment_and_error_slots() {
        let gw = test_gateway();
        gw.register_mock_script(
            "mixed",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![
                    MockRule {
                        pattern: Some("boom".into()),
                        fail: true,
                        ..MockRule::default()
                    },
                    MockRule {
                        response: Some("{prompt}".into()),
                        ..MockRule::default()
                    },
                ],
            },
        );
        let model = ModelSpec::mock("m", Role::Target, "mixed");
        let inputs: Vec<ChatInput> = ["a", "boom", "c"]
            .iter()
            .map(|s| ChatInput::user(*s))
            .collect();
        let results = gw.complete_batch(&model, &inputs, &GenerationParams::default(), 2);
        assert_eq!(results.len(), 3);
        assert_eq!(results[0].as_ref().unwrap().text, "a");
        assert!(results[1].is_err());
        assert_eq!(results[2].as_ref().unwrap().text, "c");
    }

    #[test]
    fn empty_batch() {
        let gw = test_gateway();
        gw.register_mock_script("echo", MockScript::echo());
        let model = ModelSpec::mock("m", Role::Target, "echo");
        let results = gw.complete_batch(&model, &[], &GenerationParams::default(), 8);
        assert!(results.is_empty());
    }

    #[test]
    fn concurrency_bound_observed_by_mock() {
        let gw = test_gateway();
        gw.register_mock_script(
            "slow",
            MockScript {
                latency_ms: 2,
                ..MockScript::echo()
            },
        );
        let model = ModelSpec::mock("m", Role::Target, "slow");
        let inputs: Vec<ChatInput> = (0..100).map(|i| ChatInput::user(format!("p{i}"))).collect();
        let results = gw.complete_batch(&model, &inputs, &GenerationParams::default(), 8);
        assert!(results.iter().all(|r| r.is_ok()));
        let stats = gw.mock_stats("slow").unwrap();
        assert_eq!(stats.calls, 100);
        assert!(stats.peak_in_flight <= 8, "peak {}", stats.peak_in_flight);
        assert!(stats.peak_in_flight >= 2, "expected some overlap");
    }

    #[test]
    fn retry_recovers_from_transient_failures() {
        let gw = test_gateway();
        gw.register_mock_script(
            "flaky",
            MockScript {
                trigger: None,
                censored_response: None,
                latency_ms: 0,
                rules: vec![MockRule {
                    response: Some("ok".into()),
                    fail: true,
                    fail_times: Some(2),
                    ..MockRule::default()
                }],
            },
        );
        let model = ModelSpec::mock("m", Role::Target, "flaky");
        let out = gw
            .complete(&model, &ChatInput::user("x"), &GenerationParams::default())
            .unwrap();
        assert_eq!(out.text, "ok");
        let stats = gw.mock_stats("flaky").unwrap();
        assert_eq!(stats.calls, 3);
    }

    #[test]
    fn missing_credential_is_config_class() {
        let gw = test_gateway();
        let model = ModelSpec {
            id: "live".into(),
            role: Role::Target,
            endpoint: "https://api.example.invalid/v1/chat/completions".into(),
            auth_ref: Some("BLINDSPOT_TEST_UNSET_VAR".into()),
            default_params: GenerationParams::default(),
        };
        let err = gw
            .complete(&model, &ChatInput::user("x"), &GenerationParams::default())
            .unwrap_err();
        assert!(matches!(err, Error::MissingCredential(v) if v == "BLINDSPOT_TEST_UNSET_VAR"));
        assert_eq!(gw.network_call_count(), 0);
    }

    #[test]
    fn temperature_zero_cache_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let gw = test_gateway().with_cache_dir(dir.path()).unwrap();
        gw.register_mock_script("echo", MockScript::echo());
        let model = ModelSpec::mock("m", Role::Target, "echo");
        let params = GenerationParams {
            temperature: 0.0,
            ..GenerationParams::default()
        };
        let a = gw.complete(&model, &ChatInput::user("same"), &params).unwrap();
        let b = gw.complete(&model, &ChatInput::user("same"), &params).unwrap();
        assert_eq!(a.text, b.text);
        assert!(b.from_cache);
    }
}
