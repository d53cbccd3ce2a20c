//! Memory aggregation: union of the two agents' recalls, vote counting, and
//! the voting-based ordering used for rank 1 and the positive-evidence set.
//!
//! The merged recall set is canonical and deterministic: person-agent entries
//! first in emit order, then media-agent entries in emit order. Cross-agent
//! duplicates of the same individual are retained on purpose — redundant
//! recall is a fame signal and counts twice in the vote. Tie-breaks follow
//! recall order via the first occurrence of each label in the merged set.

use std::collections::HashMap;

use crate::recall::{AgentRecall, RecallEntry};
use crate::taxonomy::Label;

/// The union of both agents' recalls in canonical order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecallSet {
    pub entries: Vec<RecallEntry>,
}

impl RecallSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Concatenate person-then-media, preserving each agent's emit order.
/// Duplicates across agents are kept.
pub fn merge_recalls(person: AgentRecall, media: AgentRecall) -> RecallSet {
    let mut entries = person.entries;
    entries.extend(media.entries);
    RecallSet { entries }
}

/// Occurrence counts per label, plus the index of each label's first
/// occurrence in recall order (for tie-breaking).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VoteTally {
    counts: HashMap<Label, usize>,
    first_seen: HashMap<Label, usize>,
    total: usize,
}

impl VoteTally {
    pub fn count(&self, label: &Label) -> usize {
        self.counts.get(label).copied().unwrap_or(0)
    }

    pub fn first_seen(&self, label: &Label) -> Option<usize> {
        self.first_seen.get(label).copied()
    }

    /// Sum of all counts; equals the size of the source recall set.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

/// Count label occurrences over the merged recall set.
pub fn tally_votes(recall: &RecallSet) -> VoteTally {
    let mut counts = HashMap::new();
    let mut first_seen = HashMap::new();
    for (index, entry) in recall.entries.iter().enumerate() {
        *counts.entry(entry.label.clone()).or_insert(0) += 1;
        first_seen.entry(entry.label.clone()).or_insert(index);
    }
    VoteTally {
        counts,
        first_seen,
        total: recall.len(),
    }
}

/// The most frequent label; ties resolved by earliest first occurrence in
/// recall order. `None` iff the tally is empty.
pub fn select_top1(tally: &VoteTally) -> Option<Label> {
    tally
        .counts
        .iter()
        .map(|(label, &count)| (label, count, tally.first_seen[label]))
        .min_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)))
        .map(|(label, _, _)| label.clone())
}

/// All labels with positive count, ordered by count descending and first
/// occurrence ascending. This is the positive-evidence set consumed as a
/// sequence by ranking assembly.
pub fn positive_labels(tally: &VoteTally) -> Vec<Label> {
    let mut labels: Vec<(Label, usize, usize)> = tally
        .counts
        .iter()
        .filter(|(_, &count)| count > 0)
        .map(|(label, &count)| (label.clone(), count, tally.first_seen[label]))
        .collect();
    labels.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    labels.into_iter().map(|(label, _, _)| label).collect()
}
