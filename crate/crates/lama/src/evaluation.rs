//! Metrics and analysis over prediction sets.
//!
//! Top-1 accuracy, macro-averaged F1 (zero-division convention: a class with
//! no precision and no recall contributes 0), Precision@K, frequency-bin
//! robustness with the head-to-tail relative drop, top confusion pairs with
//! the region match rate, and the region-level decomposition of nationality
//! errors. All metrics are pure functions of the prediction set and are
//! order-independent.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backend::ChatBackend;
use crate::dataset::{Bin, FrequencyBins, LabeledName};
use crate::prediction::{predict_batch, CallAccounting, PipelineConfig, Prediction};
use crate::taxonomy::{Granularity, Label, LabelSpace, Taxonomy};

/// The minimal evaluable view of one prediction: gold label plus ranked
/// labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePrediction {
    pub gold: Label,
    pub ranks: Vec<Label>,
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty prediction set")]
    Empty,
    #[error("empty label set")]
    EmptyLabelSet,
    #[error("sample {index} has a ranking of length {len}, shorter than K={k}")]
    RankingTooShort { index: usize, len: usize, k: usize },
    #[error("gold label {label:?} is not assigned to any frequency bin")]
    UnbinnedGold { label: String },
    #[error("label {label:?} has no region mapping")]
    UnmappedLabel { label: String },
    #[error("prediction record {index} carries no gold label")]
    MissingGold { index: usize },
}

/// Fraction of samples whose rank-1 label equals gold.
pub fn accuracy(preds: &[SamplePrediction]) -> Result<f64, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let hits = preds.iter().filter(|p| p.ranks[0] == p.gold).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Unweighted mean of per-class F1 over every class in `label_set`, computed
/// from Top-1 predictions. F1 is 0 whenever precision + recall is 0, which
/// also covers classes absent from both gold and predictions.
pub fn macro_f1(preds: &[SamplePrediction], label_set: &[Label]) -> Result<f64, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    if label_set.is_empty() {
        return Err(EvalError::EmptyLabelSet);
    }
    let mut tp: HashMap<&Label, usize> = HashMap::new();
    let mut fp: HashMap<&Label, usize> = HashMap::new();
    let mut fn_: HashMap<&Label, usize> = HashMap::new();
    for p in preds {
        let predicted = &p.ranks[0];
        if *predicted == p.gold {
            *tp.entry(&p.gold).or_default() += 1;
        } else {
            *fp.entry(predicted).or_default() += 1;
            *fn_.entry(&p.gold).or_default() += 1;
        }
    }
    let mut sum = 0.0;
    for label in label_set {
        let tp = tp.get(label).copied().unwrap_or(0) as f64;
        let fp = fp.get(label).copied().unwrap_or(0) as f64;
        let fn_ = fn_.get(label).copied().unwrap_or(0) as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(sum / label_set.len() as f64)
}

/// Fraction of samples whose gold label appears among the first K ranks.
pub fn precision_at_k(preds: &[SamplePrediction], k: usize) -> Result<f64, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    for (index, p) in preds.iter().enumerate() {
        if p.ranks.len() < k {
            return Err(EvalError::RankingTooShort {
                index,
                len: p.ranks.len(),
                k,
            });
        }
    }
    let hits = preds
        .iter()
        .filter(|p| p.ranks[..k].contains(&p.gold))
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Per-bin accuracy and macro-F1. A bin with no test samples is reported as
/// absent, never as zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMetrics {
    pub samples: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinBreakdown {
    pub head: Option<BinMetrics>,
    pub mid: Option<BinMetrics>,
    pub tail: Option<BinMetrics>,
    /// (head accuracy - tail accuracy) / head accuracy; absent when either
    /// bin is empty.
    pub relative_drop: Option<f64>,
}

/// Partition samples by the gold label's frequency bin and evaluate each bin.
pub fn bin_stratified_eval(
    preds: &[SamplePrediction],
    bins: &FrequencyBins,
    label_set: &[Label],
) -> Result<BinBreakdown, EvalError> {
    let mut by_bin: HashMap<Bin, Vec<SamplePrediction>> = HashMap::new();
    for p in preds {
        let bin = bins
            .bin_of(&p.gold)
            .ok_or_else(|| EvalError::UnbinnedGold {
                label: p.gold.as_str().to_string(),
            })?;
        by_bin.entry(bin).or_default().push(p.clone());
    }
    let eval_bin = |bin: Bin| -> Result<Option<BinMetrics>, EvalError> {
        match by_bin.get(&bin) {
            None => Ok(None),
            Some(samples) => Ok(Some(BinMetrics {
                samples: samples.len(),
                accuracy: accuracy(samples)?,
                macro_f1: macro_f1(samples, label_set)?,
            })),
        }
    };
    let head = eval_bin(Bin::Head)?;
    let mid = eval_bin(Bin::Mid)?;
    let tail = eval_bin(Bin::Tail)?;
    let relative_drop = match (&head, &tail) {
        (Some(h), Some(t)) if h.accuracy > 0.0 => Some((h.accuracy - t.accuracy) / h.accuracy),
        _ => None,
    };
    Ok(BinBreakdown {
        head,
        mid,
        tail,
        relative_drop,
    })
}

/// One frequent (gold, predicted) error pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionPair {
    pub true_label: Label,
    pub predicted_label: Label,
    pub count: usize,
    /// Whether the two labels share a region. Absent when the run is not at
    /// nationality granularity.
    pub same_region: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionSummary {
    pub pairs: Vec<ConfusionPair>,
    /// Fraction of the returned pairs that stay within one region. Absent
    /// when there are no error pairs or no region mapping.
    pub region_match_rate: Option<f64>,
}

/// Count (gold, predicted) pairs with gold != predicted, sorted by count
/// descending (ties: gold then predicted, lexicographic) and truncated to
/// `top_n`. When a taxonomy is supplied, each pair is annotated with the
/// same-region flag and the region match rate over the returned pairs.
pub fn confusion_pairs(
    preds: &[SamplePrediction],
    taxonomy: Option<&Taxonomy>,
    top_n: usize,
) -> ConfusionSummary {
    let mut counts: BTreeMap<(Label, Label), usize> = BTreeMap::new();
    for p in preds {
        let predicted = &p.ranks[0];
        if *predicted != p.gold {
            *counts
                .entry((p.gold.clone(), predicted.clone()))
                .or_default() += 1;
        }
    }
    let mut ordered: Vec<((Label, Label), usize)> = counts.into_iter().collect();
    ordered.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ordered.truncate(top_n);

    let pairs: Vec<ConfusionPair> = ordered
        .into_iter()
        .map(|((true_label, predicted_label), count)| {
            let same_region = taxonomy.map(|t| {
                t.region_of(&true_label).is_some()
                    && t.region_of(&true_label) == t.region_of(&predicted_label)
            });
            ConfusionPair {
                true_label,
                predicted_label,
                count,
                same_region,
            }
        })
        .collect();
    let region_match_rate = if pairs.is_empty() || taxonomy.is_none() {
        None
    } else {
        let same = pairs.iter().filter(|p| p.same_region == Some(true)).count();
        Some(same as f64 / pairs.len() as f64)
    };
    ConfusionSummary {
        pairs,
        region_match_rate,
    }
}

/// Fractions of samples by (nationality correct), (nationality wrong but
/// same region), (both wrong). The three components partition the set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionDecomposition {
    pub nat_correct: f64,
    pub nat_wrong_region_correct: f64,
    pub nat_wrong_region_wrong: f64,
    /// nat_correct + nat_wrong_region_correct.
    pub region_accuracy: f64,
}

pub fn region_level_breakdown(
    preds: &[SamplePrediction],
    taxonomy: &Taxonomy,
) -> Result<RegionDecomposition, EvalError> {
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let region = |label: &Label| -> Result<Label, EvalError> {
        taxonomy
            .region_of(label)
            .cloned()
            .ok_or_else(|| EvalError::UnmappedLabel {
                label: label.as_str().to_string(),
            })
    };
    let mut correct = 0usize;
    let mut wrong_same_region = 0usize;
    let mut wrong_wrong_region = 0usize;
    for p in preds {
        let predicted = &p.ranks[0];
        if *predicted == p.gold {
            correct += 1;
        } else if region(predicted)? == region(&p.gold)? {
            wrong_same_region += 1;
        } else {
            wrong_wrong_region += 1;
        }
    }
    let n = preds.len() as f64;
    Ok(RegionDecomposition {
        nat_correct: correct as f64 / n,
        nat_wrong_region_correct: wrong_same_region as f64 / n,
        nat_wrong_region_wrong: wrong_wrong_region as f64 / n,
        // From the integer counts, so it equals a direct region-match
        // computation bit for bit.
        region_accuracy: (correct + wrong_same_region) as f64 / n,
    })
}

/// Map a nationality-level sample to a coarser granularity through the
/// taxonomy. Rank duplicates are retained so Precision@K keeps its position
/// semantics: rank k still answers "is the gold region among the regions of
/// my top-k guesses".
pub fn map_sample_to_granularity(
    sample: &SamplePrediction,
    taxonomy: &Taxonomy,
    granularity: Granularity,
) -> Result<SamplePrediction, EvalError> {
    let map = |label: &Label| -> Result<Label, EvalError> {
        let mapped = match granularity {
            Granularity::Nationality => Some(label.clone()),
            Granularity::Region14 => taxonomy.region_of(label).cloned(),
            Granularity::Continent6 => taxonomy.continent_of(label).cloned(),
        };
        mapped.ok_or_else(|| EvalError::UnmappedLabel {
            label: label.as_str().to_string(),
        })
    };
    Ok(SamplePrediction {
        gold: map(&sample.gold)?,
        ranks: sample.ranks.iter().map(map).collect::<Result<_, _>>()?,
    })
}

/// Aggregate call accounting over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CallSummary {
    pub recall_calls: u64,
    pub direct_calls: u64,
    pub completion_calls: u64,
    pub reprompts: u64,
    pub total: u64,
    pub mean_per_sample: f64,
}

impl CallSummary {
    pub fn from_accounting<'a>(calls: impl IntoIterator<Item = &'a CallAccounting>) -> Self {
        let mut summary = CallSummary::default();
        let mut n = 0u64;
        for c in calls {
            summary.recall_calls += u64::from(c.recall_calls);
            summary.direct_calls += u64::from(c.direct_calls);
            summary.completion_calls += u64::from(c.completion_calls);
            summary.reprompts += u64::from(c.reprompts);
            summary.total += u64::from(c.total());
            n += 1;
        }
        summary.mean_per_sample = if n > 0 {
            summary.total as f64 / n as f64
        } else {
            0.0
        };
        summary
    }
}

/// The full evaluation report for one run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub precision_at: BTreeMap<usize, f64>,
    pub per_bin: Option<BinBreakdown>,
    pub confusion: ConfusionSummary,
    pub region_decomposition: Option<RegionDecomposition>,
    pub calls: CallSummary,
    pub config_fingerprint: String,
}

/// Build a fingerprint tying a report to the configuration that produced it.
pub fn config_fingerprint(
    model_id: &str,
    config: &PipelineConfig,
    granularity: Granularity,
    seed: u64,
    taxonomy_labels: &[Label],
) -> String {
    let mut hasher = Sha256::new();
    hasher.update(model_id.as_bytes());
    hasher.update([0]);
    hasher.update(config.max_recall.to_le_bytes());
    hasher.update(config.top_k.to_le_bytes());
    hasher.update([
        config.ablation.drop_person_agent as u8,
        config.ablation.drop_media_agent as u8,
        config.ablation.drop_completion as u8,
        config.ablation.drop_recall as u8,
    ]);
    hasher.update(granularity.noun().as_bytes());
    hasher.update(seed.to_le_bytes());
    for label in taxonomy_labels {
        hasher.update(label.as_str().as_bytes());
        hasher.update([0]);
    }
    hex::encode(&hasher.finalize()[..16])
}

/// Inputs to report assembly beyond the prediction set itself.
pub struct EvalContext<'a> {
    pub label_set: &'a [Label],
    pub taxonomy: Option<&'a Taxonomy>,
    pub bins: Option<&'a FrequencyBins>,
    pub precision_ks: &'a [usize],
    pub top_confusions: usize,
    pub fingerprint: String,
}

/// Assemble the full report for one prediction set.
pub fn evaluate(
    preds: &[SamplePrediction],
    calls: CallSummary,
    ctx: &EvalContext<'_>,
) -> Result<EvalReport, EvalError> {
    let accuracy = accuracy(preds)?;
    let macro_f1 = macro_f1(preds, ctx.label_set)?;
    let mut precision_at = BTreeMap::new();
    for &k in ctx.precision_ks {
        precision_at.insert(k, precision_at_k(preds, k)?);
    }
    let per_bin = match ctx.bins {
        Some(bins) => Some(bin_stratified_eval(preds, bins, ctx.label_set)?),
        None => None,
    };
    let confusion = confusion_pairs(preds, ctx.taxonomy, ctx.top_confusions);
    let region_decomposition = match ctx.taxonomy {
        Some(taxonomy) => Some(region_level_breakdown(preds, taxonomy)?),
        None => None,
    };
    Ok(EvalReport {
        n_samples: preds.len(),
        accuracy,
        macro_f1,
        precision_at,
        per_bin,
        confusion,
        region_decomposition,
        calls,
        config_fingerprint: ctx.fingerprint.clone(),
    })
}

/// The five standard run configurations of the ablation study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationConfig {
    Full,
    WithoutPerson,
    WithoutMedia,
    WithoutCompletion,
    WithoutRecall,
}

impl AblationConfig {
    pub const ALL: [AblationConfig; 5] = [
        AblationConfig::Full,
        AblationConfig::WithoutPerson,
        AblationConfig::WithoutMedia,
        AblationConfig::WithoutCompletion,
        AblationConfig::WithoutRecall,
    ];

    pub fn parse(name: &str) -> Option<AblationConfig> {
        match name {
            "full" => Some(AblationConfig::Full),
            "wo-person" => Some(AblationConfig::WithoutPerson),
            "wo-media" => Some(AblationConfig::WithoutMedia),
            "wo-completion" => Some(AblationConfig::WithoutCompletion),
            "wo-recall" => Some(AblationConfig::WithoutRecall),
            _ => None,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            AblationConfig::Full => "full",
            AblationConfig::WithoutPerson => "wo-person",
            AblationConfig::WithoutMedia => "wo-media",
            AblationConfig::WithoutCompletion => "wo-completion",
            AblationConfig::WithoutRecall => "wo-recall",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            AblationConfig::Full => "Full",
            AblationConfig::WithoutPerson => "w/o Person Agent",
            AblationConfig::WithoutMedia => "w/o Media Agent",
            AblationConfig::WithoutCompletion => "w/o Completion",
            AblationConfig::WithoutRecall => "w/o Recall",
        }
    }

    pub fn apply(self, base: &PipelineConfig) -> PipelineConfig {
        let mut config = base.clone();
        config.ablation = Default::default();
        match self {
            AblationConfig::Full => {}
            AblationConfig::WithoutPerson => config.ablation.drop_person_agent = true,
            AblationConfig::WithoutMedia => config.ablation.drop_media_agent = true,
            AblationConfig::WithoutCompletion => config.ablation.drop_completion = true,
            AblationConfig::WithoutRecall => config.ablation.drop_recall = true,
        }
        config
    }
}

/// Result of one ablation configuration: its report, its raw predictions,
/// and the accuracy delta relative to the full configuration.
pub struct AblationOutcome {
    pub config: AblationConfig,
    pub report: EvalReport,
    pub predictions: Vec<Prediction>,
    pub delta_accuracy: Option<f64>,
}

/// Run the pipeline once per configuration over identical inputs. Passing a
/// shared cached backend lets configurations reuse responses wherever their
/// prompts coincide.
#[allow(clippy::too_many_arguments)]
pub async fn run_ablation(
    test_set: &[LabeledName],
    configs: &[AblationConfig],
    base: &PipelineConfig,
    backend: Arc<dyn ChatBackend>,
    space: &LabelSpace,
    ctx_taxonomy: Option<&Taxonomy>,
    bins: Option<&FrequencyBins>,
    precision_ks: &[usize],
    concurrency: usize,
    seed: u64,
) -> Result<Vec<AblationOutcome>, crate::prediction::PredictionError> {
    let names: Vec<String> = test_set.iter().map(|r| r.name.clone()).collect();
    let mut outcomes = Vec::new();
    let mut full_accuracy: Option<f64> = None;
    for &config_kind in configs {
        let config = config_kind.apply(base);
        let predictions =
            predict_batch(&names, &config, Arc::clone(&backend), space, concurrency).await?;
        let preds: Vec<SamplePrediction> = predictions
            .iter()
            .zip(test_set)
            .map(|(p, gold)| SamplePrediction {
                gold: gold.label.clone(),
                ranks: p.ranking.labels(),
            })
            .collect();
        let calls = CallSummary::from_accounting(predictions.iter().map(|p| &p.calls));
        let ctx = EvalContext {
            label_set: space.labels(),
            taxonomy: ctx_taxonomy,
            bins,
            precision_ks,
            top_confusions: 10,
            fingerprint: config_fingerprint(
                &config.model_id,
                &config,
                space.granularity(),
                seed,
                space.labels(),
            ),
        };
        let report = evaluate(&preds, calls, &ctx).expect("non-empty ablation evaluation");
        if config_kind == AblationConfig::Full {
            full_accuracy = Some(report.accuracy);
        }
        outcomes.push(AblationOutcome {
            config: config_kind,
            report,
            predictions,
            delta_accuracy: None,
        });
    }
    if let Some(full) = full_accuracy {
        for outcome in &mut outcomes {
            if outcome.config != AblationConfig::Full {
                outcome.delta_accuracy = Some(outcome.report.accuracy - full);
            }
        }
    }
    Ok(outcomes)
}

pub mod render;
