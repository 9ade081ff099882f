//! OpenAI-compatible chat-completions client.

use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{Attempt, GatewayError};
use crate::prompt::PromptJob;

#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub fn new(
        endpoint: &str,
        model: &str,
        api_key_env: Option<&str>,
        timeout: Duration,
    ) -> Result<Self, GatewayError> {
        let api_key = match api_key_env {
            Some(var) => match std::env::var(var) {
                Ok(key) if !key.trim().is_empty() => Some(key),
                _ => return Err(GatewayError::MissingApiKey(var.to_string())),
            },
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| GatewayError::Transport {
                job_id: String::new(),
                attempts: 0,
                message: e.to_string(),
            })?;
        Ok(HttpBackend {
            client,
            endpoint: endpoint.to_string(),
            model: model.to_string(),
            api_key,
        })
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn request_body(&self, job: &PromptJob) -> Value {
        let mut body = json!({
            "model": self.model,
            "messages": [
                {"role": "system", "content": job.system_prompt},
                {"role": "user", "content": job.user_prompt},
            ],
            "temperature": job.sampling.temperature,
            "max_tokens": job.sampling.max_tokens,
        });
        if let Some(seed) = job.sampling.seed {
            body["seed"] = json!(seed);
        }
        body
    }

    /// One request, no retries.
    pub(crate) fn attempt(&self, job: &PromptJob) -> Attempt {
        let started = Instant::now();
        let mut request = self.client.post(&self.endpoint).json(&self.request_body(job));
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = match request.send() {
            Ok(r) => r,
            Err(e) => return Attempt::Retryable(e.to_string()),
        };
        let status = response.status();
        let text = match response.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retryable(e.to_string()),
        };
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Attempt::Fatal(GatewayError::Auth(format!("{status}: {}", snippet(&text))));
        }
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retryable(format!("{status}: {}", snippet(&text)));
        }
        if !status.is_success() {
            return Attempt::Fatal(GatewayError::Protocol(format!(
                "{status}: {}",
                snippet(&text)
            )));
        }
        match extract_content(&text) {
            Ok(content) => Attempt::Success {
                raw_text: content,
                latency_ms: started.elapsed().as_millis() as u64,
            },
            Err(message) => Attempt::Fatal(GatewayError::Protocol(message)),
        }
    }
}

fn snippet(text: &str) -> &str {
    let end = text
        .char_indices()
        .nth(200)
        .map_or(text.len(), |(i, _)| i);
    &text[..end]
}

/// Pulls `choices[0].message.content` out of a completion body, unmodified.
pub fn extract_content(body: &str) -> Result<String, String> {
    let value: Value =
        serde_json::from_str(body).map_err(|e| format!("invalid completion JSON: {e}"))?;
    value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| "completion has no choices[0].message.content".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn content_extraction_keeps_bytes() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"  7 \n(seven)"}}]}"#;
        assert_eq!(extract_content(body).unwrap(), "  7 \n(seven)");
        assert!(extract_content(r#"{"choices":[]}"#).is_err());
        assert!(extract_content("not json").is_err());
    }

    #[test]
    fn missing_key_is_reported() {
        let err = HttpBackend::new(
            "http://127.0.0.1:9/v1/chat/completions",
            "gpt-4",
            Some("VALUEMAP_TEST_KEY_THAT_IS_NOT_SET"),
            Duration::from_secs(1),
        )
        .unwrap_err();
        assert!(matches!(err, GatewayError::MissingApiKey(_)));
    }
}
