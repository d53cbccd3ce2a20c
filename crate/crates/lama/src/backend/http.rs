//! Live OpenAI-compatible chat-completions client.
//!
//! Speaks the standard `/chat/completions` JSON wire format with a
//! `[system, user]` message pair. The API key is read from the environment
//! variable named in [`BackendConfig`]; it never comes from files or flags.
//! Transport failures and retryable statuses (429, 5xx) are retried with
//! exponential backoff up to `max_retries`; well-formed responses are never
//! retried here — deliberate re-prompts are a pipeline concern.

use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;

use super::{BackendConfig, BackendError, ChatBackend, ChatRequest, ChatResponse};

pub struct HttpBackend {
    client: reqwest::Client,
    config: BackendConfig,
    api_key: String,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| BackendError::MissingApiKey(config.api_key_env.clone()))?;
        let client = reqwest::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| BackendError::InvalidConfig(e.to_string()))?;
        Ok(HttpBackend {
            client,
            config,
            api_key,
        })
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }
}

#[derive(Deserialize)]
struct CompletionBody {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Message,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

fn retryable_status(status: reqwest::StatusCode) -> bool {
    status.as_u16() == 429 || status.is_server_error()
}

#[async_trait]
impl ChatBackend for HttpBackend {
    async fn send_chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let body = json!({
            "model": req.model_id,
            "messages": [
                { "role": "system", "content": req.system_prompt },
                { "role": "user", "content": req.user_prompt },
            ],
            "temperature": req.temperature,
        });

        let attempts = self.config.max_retries + 1;
        let started = Instant::now();
        let mut last_error: Option<BackendError> = None;

        for attempt in 0..attempts {
            if attempt > 0 {
                let backoff = Duration::from_millis(250) * 2u32.pow(attempt - 1);
                tokio::time::sleep(backoff.min(Duration::from_secs(4))).await;
            }
            let result = self
                .client
                .post(self.endpoint())
                .bearer_auth(&self.api_key)
                .json(&body)
                .send()
                .await;
            let response = match result {
                Ok(r) => r,
                Err(e) => {
                    last_error = Some(BackendError::Transport {
                        attempts: attempt + 1,
                        message: e.to_string(),
                    });
                    continue;
                }
            };
            let status = response.status();
            if !status.is_success() {
                let text = response.text().await.unwrap_or_default();
                let err = BackendError::Http {
                    status: status.as_u16(),
                    body: truncate(&text, 500),
                };
                if retryable_status(status) {
                    last_error = Some(err);
                    continue;
                }
                return Err(err);
            }
            let parsed: CompletionBody = response
                .json()
                .await
                .map_err(|e| BackendError::BadPayload(e.to_string()))?;
            let content = parsed
                .choices
                .into_iter()
                .next()
                .and_then(|c| c.message.content)
                .ok_or_else(|| {
                    BackendError::BadPayload("response carries no message content".into())
                })?;
            return Ok(ChatResponse {
                text: content,
                latency: started.elapsed(),
                from_cache: false,
            });
        }

        Err(match last_error {
            Some(BackendError::Transport { message, .. }) => {
                BackendError::Transport { attempts, message }
            }
            Some(other) => other,
            None => BackendError::Transport {
                attempts,
                message: "no attempt executed".into(),
            },
        })
    }
}

fn truncate(text: &str, limit: usize) -> String {
    if text.len() <= limit {
        text.to_string()
    } else {
        let mut cut = limit;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        format!("{}…", &text[..cut])
    }
}
