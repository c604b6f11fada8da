//! Model providers: an OpenAI-compatible HTTP client and a deterministic
//! transcript-backed mock for tests and offline runs.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::RateLimiter;
use crate::modelgw::templates::{TemplateId, ALL_TEMPLATES};

pub const MODEL_KEY_ENV: &str = "LEGACYFORGE_MODEL_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProviderReply {
    pub texts: Vec<String>,
    pub usage: Option<TokenUsage>,
}

/// A chat-completion backend. `n` asks for that many alternatives; the
/// reply must carry exactly `n` texts.
pub trait Provider: Send + Sync {
    fn name(&self) -> &str;
    fn chat(&self, prompt: &str, temperature: f64, n: u32) -> Result<ProviderReply>;
}

// ---------------------------------------------------------------------------
// HTTP provider (OpenAI-compatible chat completions)
// ---------------------------------------------------------------------------

pub struct HttpProvider {
    name: String,
    base_url: String,
    model: String,
    api_key_env: String,
    client: reqwest::blocking::Client,
    limiter: RateLimiter,
}

impl HttpProvider {
    pub fn new(
        name: impl Into<String>,
        base_url: impl Into<String>,
        model: impl Into<String>,
        api_key_env: Option<String>,
        rate_per_sec: f64,
    ) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()?;
        Ok(HttpProvider {
            name: name.into(),
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: api_key_env.unwrap_or_else(|| MODEL_KEY_ENV.to_string()),
            client,
            limiter: RateLimiter::new(rate_per_sec, 1.0),
        })
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: Vec<ChatMessage<'a>>,
    temperature: f64,
    n: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
    usage: Option<ChatUsage>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

#[derive(Deserialize)]
struct ChatUsage {
    prompt_tokens: u64,
    completion_tokens: u64,
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn chat(&self, prompt: &str, temperature: f64, n: u32) -> Result<ProviderReply> {
        self.limiter.acquire();
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let body = ChatRequest {
            model: &self.model,
            messages: vec![ChatMessage {
                role: "user",
                content: prompt,
            }],
            temperature,
            n,
        };
        let mut req = self.client.post(&url).json(&body);
        if let Ok(key) = std::env::var(&self.api_key_env) {
            req = req.bearer_auth(key);
        }
        let resp = req.send()?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(Error::ProviderTransient {
                provider: self.name.clone(),
                detail: format!("status {status}"),
            });
        }
        if !status.is_success() {
            return Err(Error::Provider {
                provider: self.name.clone(),
                detail: format!("status {status}"),
            });
        }
        let parsed: ChatResponse = resp.json()?;
        Ok(ProviderReply {
            texts: parsed.choices.into_iter().map(|c| c.message.content).collect(),
            usage: parsed.usage.map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            }),
        })
    }
}

// ---------------------------------------------------------------------------
// Transcript-backed mock provider
// ---------------------------------------------------------------------------

/// One transcript entry. Entries are scanned in file order; the first match
/// wins. An entry matches when all of its set conditions hold:
/// `prompt_hash` pins an exact prompt, `template` requires the prompt to
/// come from that template, `when_contains` requires a substring. An entry
/// with no conditions matches everything (a default).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct MockEntry {
    pub template: Option<String>,
    pub when_contains: Option<String>,
    pub prompt_hash: Option<String>,
    pub text: Option<String>,
    pub texts: Option<Vec<String>>,
}

/// Deterministic provider that replays a canned transcript. The same prompt
/// always maps to the same entry, so pipeline runs using it are repeatable
/// byte for byte.
pub struct MockProvider {
    name: String,
    entries: Vec<MockEntry>,
}

/// Hash used by `prompt_hash` matching: first 16 hex chars of SHA-256 over
/// the prompt text.
pub fn prompt_hash(prompt: &str) -> String {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(prompt.as_bytes());
    hex::encode(&digest[..8])
}

impl MockProvider {
    pub fn new(name: impl Into<String>, entries: Vec<MockEntry>) -> Self {
        MockProvider {
            name: name.into(),
            entries,
        }
    }

    /// Loads a JSONL transcript, one entry per line.
    pub fn from_file(path: &Path) -> Result<Self> {
        let entries: Vec<MockEntry> = crate::jsonl::read_all(path)?;
        Ok(MockProvider::new("mock", entries))
    }

    fn entry_matches(entry: &MockEntry, prompt: &str) -> bool {
        if let Some(hash) = &entry.prompt_hash {
            if hash != &prompt_hash(prompt) {
                return false;
            }
        }
        if let Some(template_tag) = &entry.template {
            let matches_template = ALL_TEMPLATES
                .iter()
                .find(|t| t.as_str() == template_tag)
                .map(|t: &TemplateId| {
                    t.signature_lines().iter().all(|line| prompt.contains(line))
                })
                .unwrap_or(false);
            if !matches_template {
                return false;
            }
        }
        if let Some(needle) = &entry.when_contains {
            if !prompt.contains(needle.as_str()) {
                return false;
            }
        }
        true
    }
}

impl Provider for MockProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn chat(&self, prompt: &str, _temperature: f64, n: u32) -> Result<ProviderReply> {
        for entry in &self.entries {
            if !Self::entry_matches(entry, prompt) {
                continue;
            }
            let texts: Vec<String> = match (&entry.texts, &entry.text) {
                (Some(texts), _) => texts.clone(),
                (None, Some(text)) => vec![text.clone(); n as usize],
                (None, None) => vec![String::new(); n as usize],
            };
            if texts.len() != n as usize {
                return Err(Error::Provider {
                    provider: self.name.clone(),
                    detail: format!("transcript entry has {} texts, request wants {n}", texts.len()),
                });
            }
            return Ok(ProviderReply { texts, usage: None });
        }
        Err(Error::Provider {
            provider: self.name.clone(),
            detail: format!(
                "no transcript entry matched prompt (hash {}): {}",
                prompt_hash(prompt),
                prompt.chars().take(120).collect::<String>()
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modelgw::templates;
    use std::collections::BTreeMap;

    fn rendered_repair(marker: &str) -> String {
        let slots = BTreeMap::from([
            ("cobol_code".to_string(), marker.to_string()),
            ("error_log".to_string(), "prog.cbl:1: error: x".to_string()),
        ]);
        templates::render(TemplateId::Repair, &slots).unwrap()
    }

    #[test]
    fn matches_by_template_and_substring_in_file_order() {
        let provider = MockProvider::new(
            "mock",
            vec![
                MockEntry {
                    template: Some("repair".into()),
                    when_contains: Some("SPECIFIC-MARKER".into()),
                    text: Some("specific".into()),
                    ..MockEntry::default()
                },
                MockEntry {
                    template: Some("repair".into()),
                    text: Some("default-repair".into()),
                    ..MockEntry::default()
                },
            ],
        );
        let specific = provider
            .chat(&rendered_repair("HAS SPECIFIC-MARKER"), 0.0, 1)
            .unwrap();
        assert_eq!(specific.texts, vec!["specific"]);
        let fallback = provider.chat(&rendered_repair("OTHER"), 0.0, 1).unwrap();
        assert_eq!(fallback.texts, vec!["default-repair"]);
    }

    #[test]
    fn template_condition_rejects_other_templates() {
        let provider = MockProvider::new(
            "mock",
            vec![MockEntry {
                template: Some("pair_score".into()),
                text: Some("Score: 0.9".into()),
                ..MockEntry::default()
            }],
        );
        let err = provider.chat(&rendered_repair("X"), 0.0, 1).unwrap_err();
        assert!(err.to_string().contains("no transcript entry"));
    }

    #[test]
    fn prompt_hash_pins_exact_prompts() {
        let prompt = rendered_repair("PINNED");
        let provider = MockProvider::new(
            "mock",
            vec![
                MockEntry {
                    prompt_hash: Some(prompt_hash(&prompt)),
                    text: Some("pinned-reply".into()),
                    ..MockEntry::default()
                },
                MockEntry {
                    text: Some("catch-all".into()),
                    ..MockEntry::default()
                },
            ],
        );
        assert_eq!(provider.chat(&prompt, 0.0, 1).unwrap().texts, vec!["pinned-reply"]);
        assert_eq!(
            provider.chat("anything else", 0.0, 1).unwrap().texts,
            vec!["catch-all"]
        );
    }

    #[test]
    fn raw_prompts_match_entries_without_template() {
        let provider = MockProvider::new(
            "mock",
            vec![MockEntry {
                when_contains: Some("Write a COBOL program".into()),
                text: Some("```cobol\nDISPLAY \"OK\".\n```".into()),
                ..MockEntry::default()
            }],
        );
        let reply = provider
            .chat("Write a COBOL program that prints OK", 0.0, 1)
            .unwrap();
        assert!(reply.texts[0].contains("DISPLAY"));
    }

    #[test]
    fn single_text_replicates_to_n() {
        let provider = MockProvider::new(
            "mock",
            vec![MockEntry {
                text: Some("same".into()),
                ..MockEntry::default()
            }],
        );
        let reply = provider.chat("whatever", 0.0, 3).unwrap();
        assert_eq!(reply.texts.len(), 3);

        let fixed = MockProvider::new(
            "mock",
            vec![MockEntry {
                texts: Some(vec!["a".into(), "b".into()]),
                ..MockEntry::default()
            }],
        );
        assert!(fixed.chat("whatever", 0.0, 3).is_err());
        assert_eq!(fixed.chat("whatever", 0.0, 2).unwrap().texts.len(), 2);
    }
}
