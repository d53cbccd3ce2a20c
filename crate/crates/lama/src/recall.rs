//! The two associative-recall agents.
//!
//! Each agent is one chat call that asks the model for up to M real people
//! sharing the input name, as a JSON array of (full name, label) objects.
//! Parsing validates every entry against the active label set, drops invalid
//! ones, and truncates to the first M valid entries in emitted order. A
//! response with no JSON array at all earns exactly one re-prompt of the same
//! request; after that the agent degrades to an empty recall, exactly as if
//! the model had recalled nobody.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{extract_json_array, ChatBackend, ChatRequest};
use crate::prompts;
use crate::taxonomy::{Label, LabelSpace};

/// Which recall agent produced an entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Person,
    Media,
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AgentKind::Person => f.write_str("person"),
            AgentKind::Media => f.write_str("media"),
        }
    }
}

/// One recalled individual: full name plus validated label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecallEntry {
    pub person: String,
    pub label: Label,
    pub source: AgentKind,
    /// Position within the agent's raw output array, before invalid entries
    /// were dropped. Preserves the model's own ordering.
    pub emit_index: usize,
}

/// The validated, truncated output of one agent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentRecall {
    pub agent: AgentKind,
    pub entries: Vec<RecallEntry>,
}

impl AgentRecall {
    pub fn empty(agent: AgentKind) -> Self {
        AgentRecall {
            agent,
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum RecallError {
    #[error("input name is empty")]
    EmptyName,
    #[error("max recall count must be >= 1")]
    BadLimit,
}

/// Build the chat request for one agent: the agent's fixed system prompt with
/// the label list substituted, and the shared two-line user prompt.
pub fn build_recall_prompt(
    agent: AgentKind,
    name: &str,
    space: &LabelSpace,
    max_recall: usize,
    model_id: &str,
) -> Result<ChatRequest, RecallError> {
    if name.trim().is_empty() {
        return Err(RecallError::EmptyName);
    }
    if max_recall == 0 {
        return Err(RecallError::BadLimit);
    }
    let system = match agent {
        AgentKind::Person => prompts::person_recall_system(space, max_recall),
        AgentKind::Media => prompts::media_recall_system(space, max_recall),
    };
    Ok(ChatRequest::new(
        system,
        prompts::recall_user(name),
        model_id,
    ))
}

/// Parse a raw model response into an [`AgentRecall`].
///
/// Entries missing a non-empty `name`, or whose attribute field does not
/// normalize into the label set, are excluded. At most the first `max_recall`
/// valid entries are kept, in emitted order. An absent or invalid array
/// yields an empty recall — failure degrades, it never errors.
pub fn parse_recall_response(
    text: &str,
    agent: AgentKind,
    space: &LabelSpace,
    max_recall: usize,
) -> AgentRecall {
    let Some(items) = extract_json_array(text) else {
        return AgentRecall::empty(agent);
    };
    let attr_key = space.granularity().noun();
    let mut entries = Vec::new();
    for (emit_index, item) in items.iter().enumerate() {
        if entries.len() >= max_recall {
            break;
        }
        let Some(obj) = item.as_object() else {
            continue;
        };
        let Some(person) = obj.get("name").and_then(|v| v.as_str()) else {
            continue;
        };
        if person.trim().is_empty() {
            continue;
        }
        let Some(raw_label) = obj.get(attr_key).and_then(|v| v.as_str()) else {
            continue;
        };
        let Some(label) = space.normalize(raw_label) else {
            continue;
        };
        entries.push(RecallEntry {
            person: person.to_string(),
            label,
            source: agent,
            emit_index,
        });
    }
    AgentRecall { agent, entries }
}

/// Outcome of one agent run, with the call counts the accounting needs.
#[derive(Debug, Clone)]
pub struct AgentRunOutcome {
    pub recall: AgentRecall,
    pub calls: u32,
    pub reprompts: u32,
}

/// Issue one agent's request and parse the result. Backend errors degrade to
/// an empty recall; a response without any JSON array is re-prompted once.
pub async fn run_agent_recall(
    agent: AgentKind,
    name: &str,
    backend: &dyn ChatBackend,
    space: &LabelSpace,
    max_recall: usize,
    model_id: &str,
) -> Result<AgentRunOutcome, RecallError> {
    let request = build_recall_prompt(agent, name, space, max_recall, model_id)?;
    let calls = 1;
    let mut reprompts = 0;
    let mut text = match backend.send_chat(&request).await {
        Ok(resp) => resp.text,
        Err(_) => {
            return Ok(AgentRunOutcome {
                recall: AgentRecall::empty(agent),
                calls,
                reprompts,
            })
        }
    };
    if extract_json_array(&text).is_none() {
        reprompts = 1;
        match backend.send_chat(&request.reprompt()).await {
            Ok(resp) => text = resp.text,
            Err(_) => {
                return Ok(AgentRunOutcome {
                    recall: AgentRecall::empty(agent),
                    calls,
                    reprompts,
                })
            }
        }
    }
    let recall = parse_recall_response(&text, agent, space, max_recall);
    Ok(AgentRunOutcome {
        recall,
        calls,
        reprompts,
    })
}

/// Run both agents concurrently. The result does not depend on which request
/// completes first; an agent whose transport fails contributes an empty
/// recall.
pub async fn run_dual_recall(
    name: &str,
    backend: &dyn ChatBackend,
    space: &LabelSpace,
    max_recall: usize,
    model_id: &str,
) -> Result<(AgentRunOutcome, AgentRunOutcome), RecallError> {
    let person = run_agent_recall(
        AgentKind::Person,
        name,
        backend,
        space,
        max_recall,
        model_id,
    );
    let media = run_agent_recall(AgentKind::Media, name, backend, space, max_recall, model_id);
    let (person, media) = tokio::join!(person, media);
    Ok((person?, media?))
}
