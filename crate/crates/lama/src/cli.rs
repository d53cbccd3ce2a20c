//! Command-line surface: data preparation, prediction, evaluation, ablation,
//! and report rendering, all reproducible from one config file plus flag
//! overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::config::{RegionMode, RunConfig};
use crate::dataset::{
    assign_frequency_bins, load_raw_tsv, preprocess, stratified_split, FrequencyBins, LabeledName,
    SplitManifest,
};
use crate::evaluation::{
    self, config_fingerprint, evaluate, map_sample_to_granularity, render, AblationConfig,
    CallSummary, EvalContext, SamplePrediction,
};
use crate::prediction::predict_batch;
use crate::records::{read_records, write_records, PredictionRecord};
use crate::taxonomy::{Granularity, Label, LabelSpace, Taxonomy};

/// Process exit codes: 0 success, 2 configuration/usage error, 3 I/O or data
/// error, 4 backend error.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Backend(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Backend(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<crate::taxonomy::TaxonomyError> for CliError {
    fn from(e: crate::taxonomy::TaxonomyError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<crate::dataset::DatasetError> for CliError {
    fn from(e: crate::dataset::DatasetError) -> Self {
        match e {
            crate::dataset::DatasetError::BadRatios(_) => CliError::Config(e.to_string()),
            _ => CliError::Io(e.to_string()),
        }
    }
}

impl From<crate::records::RecordError> for CliError {
    fn from(e: crate::records::RecordError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<crate::backend::BackendError> for CliError {
    fn from(e: crate::backend::BackendError) -> Self {
        match e {
            crate::backend::BackendError::InvalidConfig(_)
            | crate::backend::BackendError::MissingApiKey(_) => CliError::Config(e.to_string()),
            crate::backend::BackendError::MockKb(_)
            | crate::backend::BackendError::Cache { .. } => CliError::Io(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<crate::prediction::PredictionError> for CliError {
    fn from(e: crate::prediction::PredictionError) -> Self {
        match e {
            crate::prediction::PredictionError::Backend(inner) => inner.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<crate::evaluation::EvalError> for CliError {
    fn from(e: crate::evaluation::EvalError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(
    name = "lama",
    about = "Nationality prediction from names via associative recall agents"
)]
pub struct Cli {
    /// TOML config file; flags below override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct Overrides {
    /// Taxonomy file path.
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,
    /// Mock knowledge-base file; switches the backend to offline mock mode.
    #[arg(long, global = true)]
    pub mock_kb: Option<PathBuf>,
    /// Response cache file for replayable runs.
    #[arg(long, global = true)]
    pub cache: Option<PathBuf>,
    /// Chat model identifier.
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Chat-completions base URL.
    #[arg(long, global = true)]
    pub base_url: Option<String>,
    /// Per-agent recall cap (M).
    #[arg(long, short = 'M', global = true)]
    pub max_recall: Option<usize>,
    /// Ranking depth (K).
    #[arg(long, short = 'K', global = true)]
    pub top_k: Option<usize>,
    /// Prediction granularity: nationality, region14, or continent6.
    #[arg(long, global = true)]
    pub granularity: Option<String>,
    /// region14/continent6 mode: native-prompt or mapped.
    #[arg(long, global = true)]
    pub region_mode: Option<String>,
    /// In-flight request limit for batch runs.
    #[arg(long, global = true)]
    pub concurrency: Option<usize>,
    /// Random seed for data preparation.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Split manifest providing the frequency order and bins.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[arg(long, global = true)]
    pub drop_person: bool,
    #[arg(long, global = true)]
    pub drop_media: bool,
    #[arg(long, global = true)]
    pub drop_completion: bool,
    #[arg(long, global = true)]
    pub drop_recall: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Filter, cap, and split a raw name<TAB>nationality corpus.
    PrepareData {
        /// Raw corpus file.
        #[arg(long)]
        raw: PathBuf,
        /// Output directory for split files and the manifest.
        #[arg(long)]
        out_dir: PathBuf,
        /// Minimum samples per class.
        #[arg(long, default_value_t = 500)]
        min_count: usize,
        /// Maximum samples per class (uniform subsample above this).
        #[arg(long, default_value_t = 800)]
        max_count: usize,
    },
    /// Run the pipeline over names and write prediction records.
    Predict {
        /// Names file: one name per line, optionally name<TAB>gold.
        #[arg(long, conflicts_with = "name")]
        names: Option<PathBuf>,
        /// Predict a single name and print the record to standard output.
        #[arg(long)]
        name: Option<String>,
        /// Output records file (JSON lines). Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute metrics over a prediction records file.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        /// Output report path (JSON). Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated Precision@K depths, e.g. "1,3,5".
        #[arg(long)]
        pk: Option<String>,
        /// Also print the report as a text table.
        #[arg(long)]
        render: bool,
        /// Dump mispredicted samples (name, gold, prediction, region match)
        /// as tab-separated rows to this path.
        #[arg(long)]
        errors: Option<PathBuf>,
    },
    /// Run the standard ablation configurations over one name set.
    Ablate {
        #[arg(long)]
        names: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Comma-separated configs out of: full, wo-person, wo-media,
        /// wo-completion, wo-recall. Defaults to all five.
        #[arg(long)]
        configs: Option<String>,
    },
    /// Render stored report JSON as text tables. With several reports,
    /// prints mean and standard deviation across runs instead.
    RenderReport {
        #[arg(long, required = true, num_args = 1..)]
        report: Vec<PathBuf>,
    },
}

/// Resolve config file + overrides into the effective run configuration.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let o = &cli.overrides;
    if let Some(path) = &o.taxonomy {
        config.data.taxonomy_path = path.clone();
    }
    if let Some(path) = &o.mock_kb {
        config.data.mock_kb_path = Some(path.clone());
    }
    if let Some(path) = &o.cache {
        config.backend.cache_path = Some(path.clone());
    }
    if let Some(model) = &o.model {
        config.backend.model_id = model.clone();
    }
    if let Some(url) = &o.base_url {
        config.backend.base_url = url.clone();
    }
    if let Some(m) = o.max_recall {
        config.pipeline.max_recall = m;
    }
    if let Some(k) = o.top_k {
        config.pipeline.top_k = Some(k);
    }
    if let Some(g) = &o.granularity {
        config.pipeline.granularity = match g.as_str() {
            "nationality" => Granularity::Nationality,
            "region14" => Granularity::Region14,
            "continent6" => Granularity::Continent6,
            other => {
                return Err(CliError::Config(format!(
                    "unknown granularity {other:?}; expected nationality, region14, or continent6"
                )))
            }
        };
    }
    if let Some(mode) = &o.region_mode {
        config.pipeline.region_mode = match mode.as_str() {
            "native-prompt" | "native" => RegionMode::NativePrompt,
            "mapped" | "mapped-from-nationality" => RegionMode::MappedFromNationality,
            other => {
                return Err(CliError::Config(format!(
                    "unknown region mode {other:?}; expected native-prompt or mapped"
                )))
            }
        };
    }
    if let Some(c) = o.concurrency {
        config.pipeline.concurrency_limit = c;
    }
    if let Some(seed) = o.seed {
        config.run.seed = seed;
    }
    if let Some(path) = &o.manifest {
        config.data.manifest_path = Some(path.clone());
    }
    config.pipeline.ablation.drop_person_agent |= o.drop_person;
    config.pipeline.ablation.drop_media_agent |= o.drop_media;
    config.pipeline.ablation.drop_completion |= o.drop_completion;
    config.pipeline.ablation.drop_recall |= o.drop_recall;
    config.validate()?;
    Ok(config)
}

pub async fn run(cli: Cli) -> Result<(), CliError> {
    let config = resolve_config(&cli)?;
    match &cli.command {
        Command::PrepareData {
            raw,
            out_dir,
            min_count,
            max_count,
        } => cmd_prepare_data(&config, raw, out_dir, *min_count, *max_count),
        Command::Predict { names, name, out } => {
            cmd_predict(&config, names.as_deref(), name.as_deref(), out.as_deref()).await
        }
        Command::Evaluate {
            predictions,
            out,
            pk,
            render,
            errors,
        } => cmd_evaluate(
            &config,
            predictions,
            out.as_deref(),
            pk.as_deref(),
            *render,
            errors.as_deref(),
        ),
        Command::Ablate {
            names,
            out_dir,
            configs,
        } => cmd_ablate(&config, names, out_dir, configs.as_deref()).await,
        Command::RenderReport { report } => cmd_render_report(report),
    }
}

fn cmd_render_report(report_paths: &[PathBuf]) -> Result<(), CliError> {
    let mut reports = Vec::new();
    for path in report_paths {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let report: crate::evaluation::EvalReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        reports.push(report);
    }
    if reports.len() == 1 {
        println!("{}", render::render_report(&reports[0]));
    } else {
        println!("{}", render::render_mean_std(&reports));
    }
    Ok(())
}

fn load_manifest(path: &Path) -> Result<SplitManifest, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Frequency order and bins from the manifest, normalized into the space.
fn manifest_artifacts(
    config: &RunConfig,
    space: &LabelSpace,
) -> Result<(Option<Vec<Label>>, Option<FrequencyBins>), CliError> {
    let Some(path) = &config.data.manifest_path else {
        return Ok((None, None));
    };
    let manifest = load_manifest(path)?;
    let normalize = |raw: &str| -> Result<Label, CliError> {
        space.normalize(raw).ok_or_else(|| {
            CliError::Io(format!(
                "manifest label {raw:?} is not in the active label set"
            ))
        })
    };
    let order: Vec<Label> = manifest
        .frequency_order
        .iter()
        .map(|raw| normalize(raw))
        .collect::<Result<_, _>>()?;
    let collect = |names: &[String]| -> Result<std::collections::BTreeSet<Label>, CliError> {
        names.iter().map(|raw| normalize(raw)).collect()
    };
    let bins = FrequencyBins {
        head: collect(&manifest.bins.head)?,
        mid: collect(&manifest.bins.mid)?,
        tail: collect(&manifest.bins.tail)?,
        frequency_order: order.clone(),
    };
    Ok((Some(order), Some(bins)))
}

fn cmd_prepare_data(
    config: &RunConfig,
    raw_path: &Path,
    out_dir: &Path,
    min_count: usize,
    max_count: usize,
) -> Result<(), CliError> {
    let taxonomy = config.load_taxonomy()?;
    let space = taxonomy.label_space(Granularity::Nationality);
    let raw = load_raw_tsv(raw_path)?;
    let seed = config.run.seed;
    let data = preprocess(&raw, &space, min_count, max_count, seed)?;
    let ratios = (0.8, 0.1, 0.1);
    let split = stratified_split(&data, ratios, seed)?;
    let bins = assign_frequency_bins(&split.train, &space)?;
    let manifest = SplitManifest::build(&split, &bins, ratios);

    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let write_split = |file: &str, records: &[LabeledName]| -> Result<(), CliError> {
        let path = out_dir.join(file);
        let mut text = String::new();
        for record in records {
            text.push_str(&format!("{}\t{}\n", record.name, record.label));
        }
        std::fs::write(&path, text).map_err(|e| io_err(&path, e))
    };
    write_split("train.tsv", &split.train)?;
    write_split("validation.tsv", &split.validation)?;
    write_split("test.tsv", &split.test)?;
    let manifest_path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&manifest_path, json).map_err(|e| io_err(&manifest_path, e))?;

    println!(
        "prepared {} samples across {} classes: {} train / {} validation / {} test",
        manifest.totals.train + manifest.totals.validation + manifest.totals.test,
        manifest.class_counts.len(),
        manifest.totals.train,
        manifest.totals.validation,
        manifest.totals.test,
    );
    println!("wrote {}", manifest_path.display());
    Ok(())
}

/// Parse a names file: `name` or `name<TAB>gold` per line.
fn load_names(path: &Path) -> Result<Vec<(String, Option<String>)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut names = Vec::new();
    for raw in text.lines() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        match line.split_once('\t') {
            Some((name, gold)) => {
                names.push((name.trim().to_string(), Some(gold.trim().to_string())))
            }
            None => names.push((line.trim().to_string(), None)),
        }
    }
    if names.is_empty() {
        return Err(CliError::Io(format!("{}: no names found", path.display())));
    }
    Ok(names)
}

/// Normalize an optional gold string. Golds are nationality labels in the
/// corpus format; for native coarse-grained runs a label of the prompt space
/// is also accepted.
fn normalize_gold(raw: &str, taxonomy: &Taxonomy, space: &LabelSpace) -> Result<Label, CliError> {
    taxonomy
        .normalize_nationality(raw)
        .or_else(|| space.normalize(raw))
        .ok_or_else(|| CliError::Io(format!("gold label {raw:?} is not a known label")))
}

async fn cmd_predict(
    config: &RunConfig,
    names_path: Option<&Path>,
    single_name: Option<&str>,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let taxonomy = config.load_taxonomy()?;
    let space = config.prompt_space(&taxonomy)?;
    let backend = config.build_backend(&space)?;
    let (frequency_order, _) = manifest_artifacts(config, &space)?;
    let pipeline = config.pipeline_config(frequency_order);

    let inputs: Vec<(String, Option<String>)> = match (names_path, single_name) {
        (Some(path), None) => load_names(path)?,
        (None, Some(name)) => vec![(name.to_string(), None)],
        _ => {
            return Err(CliError::Config(
                "predict needs exactly one of --names or --name".into(),
            ))
        }
    };
    let golds: Vec<Option<Label>> = inputs
        .iter()
        .map(|(_, gold)| match gold {
            Some(raw) => normalize_gold(raw, &taxonomy, &space).map(Some),
            None => Ok(None),
        })
        .collect::<Result<_, _>>()?;
    let names: Vec<String> = inputs.iter().map(|(n, _)| n.clone()).collect();

    let predictions = predict_batch(
        &names,
        &pipeline,
        Arc::clone(&backend),
        &space,
        config.pipeline.concurrency_limit,
    )
    .await?;

    let records: Vec<PredictionRecord> = predictions
        .iter()
        .zip(golds)
        .map(|(p, gold)| PredictionRecord::from_prediction(p, gold))
        .collect();

    match out {
        Some(path) => {
            write_records(path, &records)?;
            println!("wrote {} records to {}", records.len(), path.display());
        }
        None => {
            for record in &records {
                println!(
                    "{}",
                    serde_json::to_string(record).expect("record serializes")
                );
            }
        }
    }
    Ok(())
}

fn parse_pk(pk: Option<&str>, max_k: usize) -> Result<Vec<usize>, CliError> {
    match pk {
        Some(text) => {
            let mut ks = Vec::new();
            for part in text.split(',') {
                let k: usize = part
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad Precision@K depth {part:?}")))?;
                if k == 0 {
                    return Err(CliError::Config("Precision@K depth must be >= 1".into()));
                }
                if k > max_k {
                    return Err(CliError::Config(format!(
                        "requested Precision@{k} but rankings only carry {max_k} labels"
                    )));
                }
                ks.push(k);
            }
            ks.sort_unstable();
            ks.dedup();
            Ok(ks)
        }
        None => Ok([1usize, 2, 3, 5]
            .into_iter()
            .filter(|&k| k <= max_k)
            .collect()),
    }
}

fn cmd_evaluate(
    config: &RunConfig,
    predictions_path: &Path,
    out: Option<&Path>,
    pk: Option<&str>,
    render_table: bool,
    errors_out: Option<&Path>,
) -> Result<(), CliError> {
    let taxonomy = config.load_taxonomy()?;
    let prompt_space = config.prompt_space(&taxonomy)?;
    let eval_granularity = config.pipeline.granularity;
    let eval_space = taxonomy.label_space(eval_granularity);

    let records = read_records(predictions_path)?;
    if records.is_empty() {
        return Err(CliError::Io(format!(
            "{}: no prediction records",
            predictions_path.display()
        )));
    }

    let mut samples = Vec::new();
    for (index, record) in records.iter().enumerate() {
        let gold = record
            .gold
            .clone()
            .ok_or(evaluation::EvalError::MissingGold { index })?;
        samples.push(SamplePrediction {
            gold,
            ranks: record.rank_labels(),
        });
    }

    // Under the mapped mode, records hold nationality predictions that are
    // projected through the taxonomy for coarse-grained evaluation.
    let mapped = eval_granularity != Granularity::Nationality
        && config.pipeline.region_mode == RegionMode::MappedFromNationality;
    if mapped {
        samples = samples
            .iter()
            .map(|s| map_sample_to_granularity(s, &taxonomy, eval_granularity))
            .collect::<Result<_, _>>()?;
    } else if eval_granularity != Granularity::Nationality {
        // Native coarse-grained records predict region labels but the gold
        // column is still a nationality; map golds only.
        samples = samples
            .into_iter()
            .map(|s| {
                let gold = if eval_space.contains(&s.gold) {
                    Ok(s.gold.clone())
                } else {
                    map_sample_to_granularity(
                        &SamplePrediction {
                            gold: s.gold.clone(),
                            ranks: vec![],
                        },
                        &taxonomy,
                        eval_granularity,
                    )
                    .map(|m| m.gold)
                };
                gold.map(|gold| SamplePrediction {
                    gold,
                    ranks: s.ranks,
                })
            })
            .collect::<Result<_, _>>()?;
    }

    let min_rank_len = samples.iter().map(|s| s.ranks.len()).min().unwrap_or(0);
    let ks = parse_pk(pk, min_rank_len)?;

    let (_, bins) = if eval_granularity == Granularity::Nationality {
        manifest_artifacts(config, &eval_space)?
    } else {
        (None, None)
    };

    let calls = CallSummary::from_accounting(
        records
            .iter()
            .map(|r| crate::prediction::CallAccounting {
                recall_calls: r.calls.recall,
                direct_calls: r.calls.direct,
                completion_calls: r.calls.completion,
                reprompts: r.calls.reprompts,
            })
            .collect::<Vec<_>>()
            .iter(),
    );

    let pipeline = config.pipeline_config(None);
    let ctx = EvalContext {
        label_set: eval_space.labels(),
        taxonomy: (eval_granularity == Granularity::Nationality).then_some(&taxonomy),
        bins: bins.as_ref(),
        precision_ks: &ks,
        top_confusions: 10,
        fingerprint: config_fingerprint(
            &config.backend.model_id,
            &pipeline,
            eval_granularity,
            config.run.seed,
            prompt_space.labels(),
        ),
    };
    let report = evaluate(&samples, calls, &ctx)?;

    if let Some(path) = errors_out {
        let mut dump = String::from("name\tgold\tpredicted\tregion_match\n");
        for (record, sample) in records.iter().zip(&samples) {
            if sample.ranks[0] == sample.gold {
                continue;
            }
            let region_match = if eval_granularity == Granularity::Nationality {
                match (taxonomy.region_of(&sample.gold), taxonomy.region_of(&sample.ranks[0])) {
                    (Some(a), Some(b)) => {
                        if a == b {
                            "true"
                        } else {
                            "false"
                        }
                    }
                    _ => "-",
                }
            } else {
                "-"
            };
            dump.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                record.name, sample.gold, sample.ranks[0], region_match
            ));
        }
        std::fs::write(path, dump).map_err(|e| io_err(path, e))?;
        println!("wrote error dump to {}", path.display());
    }

    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    match out {
        Some(path) => {
            std::fs::write(path, &json).map_err(|e| io_err(path, e))?;
            println!("wrote report to {}", path.display());
        }
        None => println!("{json}"),
    }
    if render_table {
        println!("\n{}", render::render_report(&report));
    }
    Ok(())
}

async fn cmd_ablate(
    config: &RunConfig,
    names_path: &Path,
    out_dir: &Path,
    configs: Option<&str>,
) -> Result<(), CliError> {
    let config_list: Vec<AblationConfig> = match configs {
        None => AblationConfig::ALL.to_vec(),
        Some(text) => text
            .split(',')
            .map(|name| {
                AblationConfig::parse(name.trim()).ok_or_else(|| {
                    CliError::Config(format!(
                        "unknown ablation config {:?}; valid configs: full, wo-person, wo-media, wo-completion, wo-recall",
                        name.trim()
                    ))
                })
            })
            .collect::<Result<_, _>>()?,
    };

    let taxonomy = config.load_taxonomy()?;
    let space = config.prompt_space(&taxonomy)?;
    let backend = config.build_backend(&space)?;
    let (frequency_order, bins) = manifest_artifacts(config, &space)?;
    let pipeline = config.pipeline_config(frequency_order);

    let inputs = load_names(names_path)?;
    let test_set: Vec<LabeledName> = inputs
        .iter()
        .map(|(name, gold)| {
            let raw = gold.as_ref().ok_or_else(|| {
                CliError::Config(format!("ablation requires gold labels; {name:?} has none"))
            })?;
            Ok(LabeledName {
                name: name.clone(),
                label: normalize_gold(raw, &taxonomy, &space)?,
            })
        })
        .collect::<Result<_, CliError>>()?;

    let ks: Vec<usize> = [1usize, 2, 3, 5]
        .into_iter()
        .filter(|&k| k <= config.effective_top_k())
        .collect();
    let outcomes = evaluation::run_ablation(
        &test_set,
        &config_list,
        &pipeline,
        backend,
        &space,
        (space.granularity() == Granularity::Nationality).then_some(&taxonomy),
        bins.as_ref(),
        &ks,
        config.pipeline.concurrency_limit,
        config.run.seed,
    )
    .await?;

    std::fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut deltas: BTreeMap<String, Option<f64>> = BTreeMap::new();
    for outcome in &outcomes {
        let report_path = out_dir.join(format!("report-{}.json", outcome.config.key()));
        let json = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
        std::fs::write(&report_path, json).map_err(|e| io_err(&report_path, e))?;
        let records: Vec<PredictionRecord> = outcome
            .predictions
            .iter()
            .zip(&test_set)
            .map(|(p, gold)| PredictionRecord::from_prediction(p, Some(gold.label.clone())))
            .collect();
        write_records(
            out_dir.join(format!("records-{}.jsonl", outcome.config.key())),
            &records,
        )?;
        deltas.insert(outcome.config.key().to_string(), outcome.delta_accuracy);
    }

    let rows: Vec<(AblationConfig, &crate::evaluation::EvalReport, Option<f64>)> = outcomes
        .iter()
        .map(|o| (o.config, &o.report, o.delta_accuracy))
        .collect();
    let table = render::render_ablation_table(&rows);
    let table_path = out_dir.join("ablation.txt");
    std::fs::write(&table_path, &table).map_err(|e| io_err(&table_path, e))?;
    let delta_path = out_dir.join("delta.json");
    std::fs::write(
        &delta_path,
        serde_json::to_string_pretty(&deltas).expect("deltas serialize"),
    )
    .map_err(|e| io_err(&delta_path, e))?;
    println!("{table}");
    Ok(())
}
