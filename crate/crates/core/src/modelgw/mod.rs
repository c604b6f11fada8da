//! Model gateway: prompt rendering, provider registry, retries, and reply
//! parsing.
//!
//! Stages never talk to providers directly. They build a [`GenRequest`]
//! against a named template, and the gateway renders it, dispatches it to a
//! configured provider profile, and retries transient failures with
//! exponential backoff. Decoding defaults are deterministic: temperature 0,
//! single completion.

pub mod parse;
pub mod provider;
pub mod templates;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
pub use parse::{extract_code_block, parse_best_option, parse_score, ScoreReply};
pub use provider::{MockEntry, MockProvider, Provider, ProviderReply, TokenUsage, MODEL_KEY_ENV};
pub use templates::{format_options, placeholders, render, TemplateId, ALL_TEMPLATES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub template_id: TemplateId,
    pub slots: BTreeMap<String, String>,
    pub temperature: f64,
    pub n: u32,
}

impl GenRequest {
    /// Request with the pipeline's deterministic decoding defaults.
    pub fn new(template_id: TemplateId, slots: BTreeMap<String, String>) -> Self {
        GenRequest {
            template_id,
            slots,
            temperature: 0.0,
            n: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenResponse {
    pub texts: Vec<String>,
    pub provider: String,
    pub usage: Option<TokenUsage>,
}

impl GenResponse {
    /// The single completion of an `n = 1` request.
    pub fn text(&self) -> &str {
        self.texts.first().map(String::as_str).unwrap_or("")
    }
}

/// Stable fingerprint of a request: template, slots in key order, and
/// decoding parameters.
pub fn request_hash(req: &GenRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(req.template_id.as_str().as_bytes());
    for (key, value) in &req.slots {
        hasher.update([0u8]);
        hasher.update(key.as_bytes());
        hasher.update([1u8]);
        hasher.update(value.as_bytes());
    }
    hasher.update(req.temperature.to_le_bytes());
    hasher.update(req.n.to_le_bytes());
    hex::encode(&hasher.finalize()[..8])
}

#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub backoff_base: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            backoff_base: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    /// Policy for tests and offline mocks: same retry count, no sleeping.
    pub fn immediate() -> Self {
        RetryPolicy {
            max_retries: 3,
            backoff_base: Duration::ZERO,
        }
    }
}

/// Registry of provider profiles plus retry handling.
pub struct Gateway {
    providers: BTreeMap<String, Arc<dyn Provider>>,
    retry: RetryPolicy,
}

impl Gateway {
    pub fn new(retry: RetryPolicy) -> Self {
        Gateway {
            providers: BTreeMap::new(),
            retry,
        }
    }

    pub fn register(&mut self, profile: impl Into<String>, provider: Arc<dyn Provider>) {
        self.providers.insert(profile.into(), provider);
    }

    pub fn profiles(&self) -> impl Iterator<Item = &str> {
        self.providers.keys().map(String::as_str)
    }

    fn provider(&self, profile: &str) -> Result<&Arc<dyn Provider>> {
        self.providers.get(profile).ok_or_else(|| {
            Error::config(format!("no provider registered for profile '{profile}'"))
        })
    }

    /// Renders the request's template and dispatches it to `profile`.
    pub fn complete(&self, req: &GenRequest, profile: &str) -> Result<GenResponse> {
        let prompt = templates::render(req.template_id, &req.slots)?;
        self.dispatch(&prompt, profile, req.temperature, req.n)
    }

    /// Sends a raw prompt with no template, e.g. zero-shot benchmark tasks.
    pub fn complete_raw(
        &self,
        prompt: &str,
        profile: &str,
        temperature: f64,
        n: u32,
    ) -> Result<GenResponse> {
        self.dispatch(prompt, profile, temperature, n)
    }

    fn dispatch(&self, prompt: &str, profile: &str, temperature: f64, n: u32) -> Result<GenResponse> {
        let provider = self.provider(profile)?;
        let mut attempt = 0u32;
        loop {
            match provider.chat(prompt, temperature, n) {
                Ok(reply) => {
                    if reply.texts.len() != n as usize {
                        return Err(Error::Provider {
                            provider: provider.name().to_string(),
                            detail: format!(
                                "expected {n} completions, got {}",
                                reply.texts.len()
                            ),
                        });
                    }
                    return Ok(GenResponse {
                        texts: reply.texts,
                        provider: provider.name().to_string(),
                        usage: reply.usage,
                    });
                }
                Err(err) if err.is_transient() && attempt < self.retry.max_retries => {
                    let wait = self
                        .retry
                        .backoff_base
                        .saturating_mul(1u32 << attempt.min(16));
                    if !wait.is_zero() {
                        std::thread::sleep(wait);
                    }
                    attempt += 1;
                }
                Err(err) => return Err(err),
            }
        }
    }
}
