//! Deterministic knowledge-base backend for offline runs.
//!
//! The mock recognizes which of the four production prompts it received by
//! matching the fixed system-prompt openings, so tests exercise the exact
//! prompts the live pipeline sends rather than a parallel path. Responses are
//! a pure function of (request, knowledge base): identical requests always
//! yield identical text.
//!
//! Recall answers come from `person_domain` / `media_domain`, keyed by
//! lowercase name (full name first, then individual tokens). Direct
//! predictions come from `direct_answers`; completion requests are answered
//! from the same `direct_answers` entry for the name — the pipeline-side
//! parser drops the confirmed rank 1 and truncates, so one ordered list per
//! name covers both calls.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{BackendError, ChatBackend, ChatRequest, ChatResponse};
use crate::taxonomy::LabelSpace;

/// Fixture data backing the mock: name keys map to the people (or labels)
/// the simulated model "remembers".
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockKnowledgeBase {
    /// Lowercase name token -> (full name, label) pairs for the general agent.
    #[serde(default)]
    pub person_domain: BTreeMap<String, Vec<(String, String)>>,
    /// Same shape, for the sports/entertainment agent.
    #[serde(default)]
    pub media_domain: BTreeMap<String, Vec<(String, String)>>,
    /// Input name -> ordered label list for direct prediction and completion.
    #[serde(default)]
    pub direct_answers: BTreeMap<String, Vec<String>>,
}

impl MockKnowledgeBase {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| BackendError::Cache {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| BackendError::MockKb(format!("{}: {e}", path.display())))
    }

    /// Every label string in the fixture must normalize into `space`.
    pub fn validate(&self, space: &LabelSpace) -> Result<(), BackendError> {
        let check = |label: &str, where_: &str| {
            if space.normalize(label).is_none() {
                return Err(BackendError::MockKb(format!(
                    "label {label:?} in {where_} is not in the active label set"
                )));
            }
            Ok(())
        };
        for (key, entries) in self.person_domain.iter().chain(self.media_domain.iter()) {
            for (_, label) in entries {
                check(label, &format!("recall entry for {key:?}"))?;
            }
        }
        for (name, labels) in &self.direct_answers {
            for label in labels {
                check(label, &format!("direct answer for {name:?}"))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PromptKind {
    PersonRecall,
    MediaRecall,
    Completion,
    Direct,
}

/// The mock backend proper. Construct with the label space of the run so the
/// fixture is validated up front and responses use the matching JSON field.
pub struct MockBackend {
    kb: MockKnowledgeBase,
    attr_key: &'static str,
}

impl MockBackend {
    pub fn new(kb: MockKnowledgeBase, space: &LabelSpace) -> Result<Self, BackendError> {
        kb.validate(space)?;
        Ok(MockBackend {
            kb,
            attr_key: space.granularity().noun(),
        })
    }

    fn classify(system_prompt: &str) -> Result<PromptKind, BackendError> {
        if system_prompt.starts_with("You are recalling real people") {
            Ok(PromptKind::PersonRecall)
        } else if system_prompt.starts_with("You are recalling athletes and entertainers") {
            Ok(PromptKind::MediaRecall)
        } else if system_prompt.starts_with("Given a name and the most likely") {
            Ok(PromptKind::Completion)
        } else if system_prompt.starts_with("You are an expert in identifying") {
            Ok(PromptKind::Direct)
        } else {
            Err(BackendError::MockKb(
                "unrecognized system prompt; mock only answers the four production prompts".into(),
            ))
        }
    }

    fn input_name(user_prompt: &str) -> Result<&str, BackendError> {
        user_prompt
            .lines()
            .next()
            .and_then(|line| line.strip_prefix("Name: "))
            .ok_or_else(|| BackendError::MockKb("user prompt does not start with `Name: `".into()))
    }

    /// Full lowercase name first, then each whitespace token left to right;
    /// the first key present wins.
    fn lookup<'a>(
        domain: &'a BTreeMap<String, Vec<(String, String)>>,
        name: &str,
    ) -> &'a [(String, String)] {
        let full = name.to_lowercase();
        if let Some(entries) = domain.get(&full) {
            return entries;
        }
        for token in full.split_whitespace() {
            if let Some(entries) = domain.get(token) {
                return entries;
            }
        }
        &[]
    }

    fn recall_payload(&self, entries: &[(String, String)]) -> String {
        let items: Vec<serde_json::Value> = entries
            .iter()
            .map(|(person, label)| {
                let mut obj = serde_json::Map::new();
                obj.insert("name".to_string(), json!(person));
                obj.insert(self.attr_key.to_string(), json!(label));
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(items).to_string()
    }

    fn label_payload(&self, name: &str) -> String {
        let labels = self
            .kb
            .direct_answers
            .get(name)
            .cloned()
            .unwrap_or_default();
        serde_json::Value::from(labels).to_string()
    }
}

#[async_trait]
impl ChatBackend for MockBackend {
    async fn send_chat(&self, req: &ChatRequest) -> Result<ChatResponse, BackendError> {
        let kind = Self::classify(&req.system_prompt)?;
        let name = Self::input_name(&req.user_prompt)?;
        let text = match kind {
            PromptKind::PersonRecall => {
                self.recall_payload(Self::lookup(&self.kb.person_domain, name))
            }
            PromptKind::MediaRecall => {
                self.recall_payload(Self::lookup(&self.kb.media_domain, name))
            }
            PromptKind::Completion | PromptKind::Direct => self.label_payload(name),
        };
        Ok(ChatResponse {
            text,
            latency: Duration::ZERO,
            from_cache: false,
        })
    }
}
