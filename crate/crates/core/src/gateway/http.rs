//! Provider-agnostic chat-completion adapter (OpenAI-compatible wire
//! shape, which DeepSeek, vLLM, and most hosted gateways also speak).

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::gateway::{ChatInput, GenerationParams};

pub struct HttpBackend {
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(timeout: std::time::Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build();
        HttpBackend {
            agent: config.new_agent(),
        }
    }

    pub fn complete(
        &self,
        endpoint: &str,
        api_key: Option<&str>,
        model_id: &str,
        input: &ChatInput,
        params: &GenerationParams,
    ) -> Result<String> {
        let mut messages = Vec::new();
        if let Some(system) = &input.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        messages.push(json!({"role": "user", "content": input.user}));

        let mut body = json!({
            "model": model_id,
            "messages": messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }

        let mut request = self.agent.post(endpoint);
        if let Some(key) = api_key {
            request = request.header("Authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|e| match e {
            ureq::Error::StatusCode(status) if (400..500).contains(&status) => Error::Api {
                model: model_id.to_string(),
                status,
                detail: "request rejected".into(),
            },
            other => Error::Transport {
                model: model_id.to_string(),
                reason: other.to_string(),
            },
        })?;

        let value: Value = response.body_mut().read_json().map_err(|e| Error::Transport {
            model: model_id.to_string(),
            reason: format!("unreadable response body: {e}"),
        })?;
        value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| Error::Api {
                model: model_id.to_string(),
                status: 200,
                detail: "response missing choices[0].message.content".into(),
            })
    }
}
