//! Conditional prediction and Top-K assembly.
//!
//! One prediction runs four phases: concurrent dual recall, vote tallying,
//! a conditional branch on the empty-recall case (vote fixes rank 1, or a
//! two-stage direct prediction does), and rank-2..K completion merged by
//! order-preserving deduplication. Positive-evidence labels always outrank
//! completion suggestions; padding from a global frequency order guarantees a
//! full, duplicate-free Top-K for every input. On the recall path a
//! prediction costs 3 chat calls, on the fallback path 4 — deliberate
//! re-prompts after malformed output are tracked separately.

use std::sync::Arc;
use std::time::Duration;

use futures::stream::{self, StreamExt, TryStreamExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::{merge_recalls, positive_labels, select_top1, tally_votes, RecallSet};
use crate::backend::{extract_json_array, BackendError, ChatBackend, ChatRequest};
use crate::prompts;
use crate::recall::{run_agent_recall, AgentKind, AgentRecall, AgentRunOutcome, RecallError};
use crate::taxonomy::{Label, LabelSpace};

/// Where a ranked label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Rank 1 fixed by the vote over recalled individuals.
    Vote,
    /// Positive-evidence label that lost the vote but was recalled.
    RecallResidual,
    /// Suggested by the rank-2..K completion call.
    Completion,
    /// Produced by the direct-prediction fallback.
    Direct,
    /// Filled from the global frequency order to reach length K.
    Pad,
}

/// One rank of the final prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedLabel {
    pub label: Label,
    pub provenance: Provenance,
}

/// Ordered, duplicate-free Top-K prediction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRanking {
    pub ranks: Vec<RankedLabel>,
    /// True iff both agents recalled nobody and the direct fallback ran.
    pub used_fallback: bool,
}

impl PredictionRanking {
    pub fn labels(&self) -> Vec<Label> {
        self.ranks.iter().map(|r| r.label.clone()).collect()
    }

    pub fn top1(&self) -> &Label {
        &self.ranks[0].label
    }
}

/// Chat-call accounting for one prediction. `total` covers the calls the
/// per-sample cost model counts; re-prompts after malformed output are
/// tracked separately.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallAccounting {
    pub recall_calls: u32,
    pub direct_calls: u32,
    pub completion_calls: u32,
    pub reprompts: u32,
}

impl CallAccounting {
    pub fn total(&self) -> u32 {
        self.recall_calls + self.direct_calls + self.completion_calls
    }
}

/// Ablation switches. Dropping recall is equivalent to dropping both agents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationFlags {
    pub drop_person_agent: bool,
    pub drop_media_agent: bool,
    pub drop_completion: bool,
    pub drop_recall: bool,
}

impl AblationFlags {
    pub fn person_enabled(&self) -> bool {
        !(self.drop_person_agent || self.drop_recall)
    }

    pub fn media_enabled(&self) -> bool {
        !(self.drop_media_agent || self.drop_recall)
    }
}

/// Everything `predict` needs besides the backend and label space.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub model_id: String,
    /// Per-agent recall cap (M).
    pub max_recall: usize,
    /// Ranking depth (K).
    pub top_k: usize,
    pub ablation: AblationFlags,
    /// Total order over the label set used for padding. Defaults to the
    /// label-space order when no training frequency order is available.
    pub frequency_order: Option<Vec<Label>>,
}

impl PipelineConfig {
    pub fn new(model_id: impl Into<String>) -> Self {
        PipelineConfig {
            model_id: model_id.into(),
            max_recall: 4,
            top_k: 5,
            ablation: AblationFlags::default(),
            frequency_order: None,
        }
    }

    fn pad_order<'a>(&'a self, space: &'a LabelSpace) -> &'a [Label] {
        match &self.frequency_order {
            Some(order) => order,
            None => space.labels(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error(transparent)]
    Recall(#[from] RecallError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("cannot pad to K={top_k}: only {available} distinct labels exist")]
    PadExhausted { top_k: usize, available: usize },
    #[error("K must be >= 1")]
    BadTopK,
}

/// One finished prediction with its evidence and cost.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub name: String,
    pub ranking: PredictionRanking,
    pub recall: RecallSet,
    pub calls: CallAccounting,
    /// Sum of backend-reported latencies, so cached and mock runs replay
    /// byte-identically.
    pub latency: Duration,
}

/// Two-stage direct prediction, stage one: ask for the Top-K outright.
///
/// Parses a JSON array of label strings, normalizes, deduplicates preserving
/// order, and truncates to K. If fewer than K valid labels result the same
/// request is re-asked once; any remaining shortfall is padded from the
/// frequency order. Returns the K labels, how many of them came from the
/// model, and the re-ask count.
pub async fn direct_predict(
    name: &str,
    backend: &dyn ChatBackend,
    space: &LabelSpace,
    top_k: usize,
    model_id: &str,
    pad_order: &[Label],
) -> Result<(Vec<Label>, usize, u32), PredictionError> {
    if top_k == 0 {
        return Err(PredictionError::BadTopK);
    }
    let request = ChatRequest::new(
        prompts::direct_system(space, top_k),
        prompts::direct_user(name),
        model_id,
    );
    let mut reprompts = 0;
    let mut labels = parse_label_array(&backend.send_chat(&request).await?.text, space, top_k);
    if labels.len() < top_k {
        reprompts = 1;
        let retry = backend.send_chat(&request.reprompt()).await?;
        let retry_labels = parse_label_array(&retry.text, space, top_k);
        if retry_labels.len() > labels.len() {
            labels = retry_labels;
        }
    }
    let from_model = labels.len();
    let labels = pad_ranking(&labels, top_k, pad_order)?;
    Ok((labels, from_model, reprompts))
}

/// Rank-2..K completion call. Uses the recall-evidence user prompt when the
/// recall set is non-empty, otherwise the simplified confirmed-rank-1 form.
/// Invalid labels and the confirmed rank 1 are dropped; the result is
/// deduplicated in order and truncated to K-1. Backend failures yield an
/// empty list — assembly pads.
pub async fn complete_ranks(
    name: &str,
    recall: &RecallSet,
    top1: &Label,
    backend: &dyn ChatBackend,
    space: &LabelSpace,
    top_k: usize,
    model_id: &str,
) -> Vec<Label> {
    let user_prompt = if recall.is_empty() {
        prompts::completion_user_fallback(name, top1.as_str(), space, top_k)
    } else {
        prompts::completion_user_with_recall(
            name,
            &recalled_people_json(recall, space),
            top1.as_str(),
            space,
            top_k,
        )
    };
    let request = ChatRequest::new(
        prompts::completion_system(space, top_k),
        user_prompt,
        model_id,
    );
    let text = match backend.send_chat(&request).await {
        Ok(resp) => resp.text,
        Err(_) => return Vec::new(),
    };
    let mut labels: Vec<Label> = parse_label_array(&text, space, usize::MAX)
        .into_iter()
        .filter(|label| label != top1)
        .collect();
    labels.truncate(top_k.saturating_sub(1));
    labels
}

/// Serialize recalled people the way the completion prompt embeds them.
pub fn recalled_people_json(recall: &RecallSet, space: &LabelSpace) -> String {
    let attr_key = space.granularity().noun();
    let items: Vec<serde_json::Value> = recall
        .entries
        .iter()
        .map(|entry| {
            let mut obj = serde_json::Map::new();
            obj.insert("name".to_string(), entry.person.clone().into());
            obj.insert(attr_key.to_string(), entry.label.as_str().into());
            serde_json::Value::Object(obj)
        })
        .collect();
    serde_json::Value::Array(items).to_string()
}

/// Normalize a JSON array of label strings: invalid entries dropped,
/// duplicates removed preserving order, truncated to `limit`.
fn parse_label_array(text: &str, space: &LabelSpace, limit: usize) -> Vec<Label> {
    let Some(items) = extract_json_array(text) else {
        return Vec::new();
    };
    let mut labels: Vec<Label> = Vec::new();
    for item in items {
        if labels.len() >= limit {
            break;
        }
        let Some(raw) = item.as_str() else { continue };
        let Some(label) = space.normalize(raw) else {
            continue;
        };
        if !labels.contains(&label) {
            labels.push(label);
        }
    }
    labels
}

/// Append labels from `frequency_order`, skipping ones already present,
/// until the list reaches length K.
pub fn pad_ranking(
    existing: &[Label],
    top_k: usize,
    frequency_order: &[Label],
) -> Result<Vec<Label>, PredictionError> {
    let mut out: Vec<Label> = existing.to_vec();
    let mut candidates = frequency_order.iter();
    while out.len() < top_k {
        match candidates.next() {
            Some(label) if out.contains(label) => continue,
            Some(label) => out.push(label.clone()),
            None => {
                let mut distinct = existing.to_vec();
                for label in frequency_order {
                    if !distinct.contains(label) {
                        distinct.push(label.clone());
                    }
                }
                return Err(PredictionError::PadExhausted {
                    top_k,
                    available: distinct.len(),
                });
            }
        }
    }
    Ok(out)
}

/// Order-preserving merge of rank 1, the positive-evidence residual, and the
/// completion list, truncated to K and padded from the frequency order.
/// Residual labels always precede completion labels.
pub fn assemble_ranking(
    top1: RankedLabel,
    residual: &[Label],
    completion: &[Label],
    top_k: usize,
    frequency_order: &[Label],
) -> Result<Vec<RankedLabel>, PredictionError> {
    let candidates = residual
        .iter()
        .map(|l| RankedLabel {
            label: l.clone(),
            provenance: Provenance::RecallResidual,
        })
        .chain(completion.iter().map(|l| RankedLabel {
            label: l.clone(),
            provenance: Provenance::Completion,
        }));
    assemble(top1, candidates, top_k, frequency_order)
}

fn assemble(
    top1: RankedLabel,
    candidates: impl IntoIterator<Item = RankedLabel>,
    top_k: usize,
    frequency_order: &[Label],
) -> Result<Vec<RankedLabel>, PredictionError> {
    if top_k == 0 {
        return Err(PredictionError::BadTopK);
    }
    let mut ranks = vec![top1];
    for candidate in candidates {
        if ranks.len() >= top_k {
            break;
        }
        if ranks.iter().any(|r| r.label == candidate.label) {
            continue;
        }
        ranks.push(candidate);
    }
    if ranks.len() < top_k {
        let existing: Vec<Label> = ranks.iter().map(|r| r.label.clone()).collect();
        let padded = pad_ranking(&existing, top_k, frequency_order)?;
        for label in padded.into_iter().skip(ranks.len()) {
            ranks.push(RankedLabel {
                label,
                provenance: Provenance::Pad,
            });
        }
    }
    Ok(ranks)
}

/// Accumulates backend-reported latencies across one prediction's calls.
struct TimedBackend<'a> {
    inner: &'a dyn ChatBackend,
    elapsed: std::sync::Mutex<Duration>,
}

impl<'a> TimedBackend<'a> {
    fn new(inner: &'a dyn ChatBackend) -> Self {
        TimedBackend {
            inner,
            elapsed: std::sync::Mutex::new(Duration::ZERO),
        }
    }

    fn elapsed(&self) -> Duration {
        *self.elapsed.lock().expect("latency lock")
    }
}

#[async_trait::async_trait]
impl ChatBackend for TimedBackend<'_> {
    async fn send_chat(
        &self,
        req: &ChatRequest,
    ) -> Result<crate::backend::ChatResponse, BackendError> {
        let resp = self.inner.send_chat(req).await?;
        *self.elapsed.lock().expect("latency lock") += resp.latency;
        Ok(resp)
    }
}

/// Run the full pipeline for one name.
pub async fn predict(
    name: &str,
    config: &PipelineConfig,
    backend: &dyn ChatBackend,
    space: &LabelSpace,
) -> Result<Prediction, PredictionError> {
    if config.top_k == 0 {
        return Err(PredictionError::BadTopK);
    }
    let backend = TimedBackend::new(backend);
    let backend = &backend;
    let mut calls = CallAccounting::default();
    let pad_order = config.pad_order(space).to_vec();

    // Phase 1: associative recall, both agents concurrent.
    let empty = |agent| AgentRunOutcome {
        recall: AgentRecall::empty(agent),
        calls: 0,
        reprompts: 0,
    };
    let (person, media) = match (
        config.ablation.person_enabled(),
        config.ablation.media_enabled(),
    ) {
        (true, true) => {
            crate::recall::run_dual_recall(
                name,
                backend,
                space,
                config.max_recall,
                &config.model_id,
            )
            .await?
        }
        (true, false) => (
            run_agent_recall(
                AgentKind::Person,
                name,
                backend,
                space,
                config.max_recall,
                &config.model_id,
            )
            .await?,
            empty(AgentKind::Media),
        ),
        (false, true) => (
            empty(AgentKind::Person),
            run_agent_recall(
                AgentKind::Media,
                name,
                backend,
                space,
                config.max_recall,
                &config.model_id,
            )
            .await?,
        ),
        (false, false) => (empty(AgentKind::Person), empty(AgentKind::Media)),
    };
    calls.recall_calls = person.calls + media.calls;
    calls.reprompts = person.reprompts + media.reprompts;
    let recall = merge_recalls(person.recall, media.recall);

    // Phase 2: vote tally.
    let tally = tally_votes(&recall);

    // Phase 3: conditional rank-1 choice.
    let used_fallback = recall.is_empty();
    let (top1, direct_tail) = if used_fallback {
        let (labels, from_model, reprompts) = direct_predict(
            name,
            backend,
            space,
            config.top_k,
            &config.model_id,
            &pad_order,
        )
        .await?;
        calls.direct_calls = 1;
        calls.reprompts += reprompts;
        let mut ranked: Vec<RankedLabel> = labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| RankedLabel {
                label,
                provenance: if i < from_model {
                    Provenance::Direct
                } else {
                    Provenance::Pad
                },
            })
            .collect();
        let first = ranked.remove(0);
        (first, ranked)
    } else {
        let label = select_top1(&tally).expect("non-empty tally has a top-1");
        (
            RankedLabel {
                label,
                provenance: Provenance::Vote,
            },
            Vec::new(),
        )
    };

    // Phase 4: completion and assembly.
    let residual: Vec<Label> = positive_labels(&tally)
        .into_iter()
        .filter(|label| *label != top1.label)
        .collect();
    let run_completion = !config.ablation.drop_completion && config.top_k > 1;
    let completion = if run_completion {
        calls.completion_calls = 1;
        complete_ranks(
            name,
            &recall,
            &top1.label,
            backend,
            space,
            config.top_k,
            &config.model_id,
        )
        .await
    } else {
        Vec::new()
    };

    let ranks = if run_completion || !used_fallback {
        assemble_ranking(top1, &residual, &completion, config.top_k, &pad_order)?
    } else {
        // Fallback without completion: the direct list already carries the
        // remaining ranks.
        assemble(top1, direct_tail, config.top_k, &pad_order)?
    };

    Ok(Prediction {
        name: name.to_string(),
        ranking: PredictionRanking {
            ranks,
            used_fallback,
        },
        recall,
        calls,
        latency: backend.elapsed(),
    })
}

/// Run many predictions concurrently under an in-flight cap, preserving the
/// input order of results.
pub async fn predict_batch(
    names: &[String],
    config: &PipelineConfig,
    backend: Arc<dyn ChatBackend>,
    space: &LabelSpace,
    concurrency: usize,
) -> Result<Vec<Prediction>, PredictionError> {
    let concurrency = concurrency.max(1);
    stream::iter(names.iter().cloned().map(|name| {
        let backend = Arc::clone(&backend);
        let config = config.clone();
        let space = space.clone();
        async move { predict(&name, &config, backend.as_ref(), &space).await }
    }))
    .buffered(concurrency)
    .try_collect()
    .await
}
