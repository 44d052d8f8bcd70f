//! End-to-end experiment: generate the obfuscated batch, search, count
//! relevant snippets, click, watch ads, and attack the queries.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attack::{
    cross_validate, ingest_query_log, AccuracyReport, AttackDataset, Classifier, FoldPlan, LabeledText, LogFormat,
    LABEL_DUMMY, LABEL_REAL,
};
use crate::data;
use crate::harness::metrics::{median, precision, recall};
use crate::lexicon::Lexicon;
use crate::obfuscator::{
    generate_batch, parse_pattern_set, AssembleOptions, BatchOptions, IntentQuery, ObfuscatedQuery,
    STANDARD_PATTERNS,
};
use crate::searchsim::{AdInventory, Corpus, ResultPage};
use crate::session::{run_session, ClickPolicy, ExposureReport, LogRecord, PseudoProfile, Session, SessionSchedule};
use crate::textmine::{relevance_count, PipelineConfig, RelevanceMode, RelevanceRule};

#[derive(Debug, Error)]
#[error("{stage} failed: {source}")]
pub struct ExperimentError {
    pub stage: &'static str,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

fn at<E: std::error::Error + Send + Sync + 'static>(stage: &'static str) -> impl FnOnce(E) -> ExperimentError {
    move |e| ExperimentError {
        stage,
        source: Box::new(e),
    }
}

fn invalid(stage: &'static str, msg: String) -> ExperimentError {
    ExperimentError {
        stage,
        source: msg.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub intent: String,
    /// Comma-separated category patterns, e.g. `I,IT,NITP`.
    pub patterns: String,
    pub per_pattern: usize,
    pub include_original: bool,
    pub verb_substitution: bool,
    pub top_k: usize,
    pub policy: ClickPolicy,
    pub days: usize,
    pub ads_per_day: usize,
    pub seed: u64,
    pub corpus: PathBuf,
    pub ads: PathBuf,
    pub lexicon: PathBuf,
    pub real_queries: PathBuf,
    pub stopwords: Option<PathBuf>,
    pub relevance: RelevanceMode,
    pub classifiers: Vec<Classifier>,
    pub folds: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            intent: "buy a toyota 2014".into(),
            patterns: STANDARD_PATTERNS.into(),
            per_pattern: 8,
            include_original: true,
            verb_substitution: true,
            top_k: 100,
            policy: ClickPolicy::default(),
            days: 7,
            ads_per_day: 42,
            seed: 2014,
            corpus: data::corpus_path(),
            ads: data::ads_path(),
            lexicon: data::lexicon_path(),
            real_queries: data::real_queries_path(),
            stopwords: None,
            relevance: RelevanceMode::TokensAll,
            classifiers: vec![Classifier::Knn { k: 3 }, Classifier::NaiveBayes],
            folds: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let stage = "config";
        if self.top_k == 0 {
            return Err(invalid(stage, "top_k must be at least 1".into()));
        }
        if self.per_pattern == 0 {
            return Err(invalid(stage, "per_pattern must be at least 1".into()));
        }
        if self.days == 0 || self.ads_per_day == 0 {
            return Err(invalid(stage, "days and ads_per_day must be at least 1".into()));
        }
        self.policy.validate().map_err(at(stage))?;
        let mut paths: Vec<&Path> = vec![&self.corpus, &self.ads, &self.lexicon, &self.real_queries];
        if let Some(p) = &self.stopwords {
            paths.push(p);
        }
        for p in paths {
            if !p.exists() {
                return Err(invalid(stage, format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn pipeline(&self) -> Result<PipelineConfig, ExperimentError> {
        let base = PipelineConfig::default();
        match &self.stopwords {
            Some(p) => base.load_stopwords(p).map_err(at("config")),
            None => Ok(base),
        }
    }
}

/// Loaded input files, reusable across runs with different seeds.
#[derive(Debug, Clone)]
pub struct ExperimentInputs {
    pub corpus: Corpus,
    pub inventory: AdInventory,
    pub lexicon: Lexicon,
    pub real_queries: Vec<LabeledText>,
    pub skipped_real_rows: usize,
}

impl ExperimentInputs {
    pub fn load(config: &ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        let pipeline = config.pipeline()?;
        let corpus = Corpus::load(&config.corpus, pipeline).map_err(at("load corpus"))?;
        let inventory = AdInventory::load(&config.ads).map_err(at("load ads"))?;
        let lexicon = Lexicon::load(&config.lexicon).map_err(at("load lexicon"))?;
        let real = ingest_query_log(&config.real_queries, LABEL_REAL, LogFormat::TsvQueries)
            .map_err(at("ingest real queries"))?;
        Ok(Self {
            corpus,
            inventory,
            lexicon,
            real_queries: real.records,
            skipped_real_rows: real.skipped,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRow {
    pub query_id: String,
    pub pattern: String,
    pub pattern_len: usize,
    pub query: String,
    pub retrieved: usize,
    pub relevant: usize,
    /// `None` when nothing was retrieved.
    pub precision: Option<f64>,
    /// `None` when the corpus holds no relevant documents.
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub queries: usize,
    pub retrieved_total: usize,
    pub relevant_total: usize,
    pub corpus_relevant: usize,
    pub distinct_relevant_retrieved: usize,
    pub recall: Option<f64>,
    pub mean_precision: Option<f64>,
    pub median_precision_by_pattern_len: BTreeMap<usize, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSummary {
    pub obfuscated_queries: usize,
    pub real_queries: usize,
    pub skipped_real_rows: usize,
    pub vocabulary: usize,
    pub reports: Vec<AccuracyReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub result_clicks: usize,
    pub ad_clicks: usize,
    pub ad_impressions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub seed: u64,
    pub batch_seed: u64,
    pub session_seed: u64,
    pub fold_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub intent: String,
    pub patterns: Vec<String>,
    pub top_k: usize,
    pub relevance: RelevanceMode,
    pub policy: ClickPolicy,
    pub queries: Vec<QueryRow>,
    pub batch: BatchSummary,
    pub attack: AttackSummary,
    pub exposure: ExposureReport,
    pub profile: PseudoProfile,
    pub session: SessionSummary,
    pub metadata: RunMetadata,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Report plus the artifacts that are too large for it.
#[derive(Debug, Clone)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub batch: Vec<ObfuscatedQuery>,
    pub pages: Vec<ResultPage>,
    pub session: Session,
}

impl ExperimentRun {
    pub fn session_log(&self) -> &[LogRecord] {
        self.session.log()
    }
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let inputs = ExperimentInputs::load(config)?;
    run_with_inputs(config, &inputs).map(|r| r.report)
}

/// Runs every stage against already-loaded inputs. Output depends only on
/// the config (including its seed) and the inputs.
pub fn run_with_inputs(config: &ExperimentConfig, inputs: &ExperimentInputs) -> Result<ExperimentRun, ExperimentError> {
    if config.top_k == 0 || config.per_pattern == 0 || config.days == 0 || config.ads_per_day == 0 {
        return Err(invalid("config", "top_k, per_pattern, days and ads_per_day must be >= 1".into()));
    }
    let mut seeds = ChaCha8Rng::seed_from_u64(config.seed);
    let metadata = RunMetadata {
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        batch_seed: seeds.gen(),
        session_seed: seeds.gen(),
        fold_seed: seeds.gen(),
    };
    let corpus = &inputs.corpus;
    let pipeline = corpus.config();

    let patterns = parse_pattern_set(&config.patterns).map_err(at("parse patterns"))?;
    let intent = IntentQuery::new(&config.intent, &inputs.lexicon).map_err(at("generate"))?;
    let options = BatchOptions {
        per_pattern: config.per_pattern,
        include_original: config.include_original,
        assemble: AssembleOptions {
            verb_substitution: config.verb_substitution,
            ..AssembleOptions::default()
        },
    };
    let mut batch_rng = ChaCha8Rng::seed_from_u64(metadata.batch_seed);
    let batch =
        generate_batch(&intent, &patterns, &inputs.lexicon, &options, &mut batch_rng).map_err(at("generate"))?;

    let pages = batch
        .iter()
        .map(|q| corpus.execute(q, config.top_k))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at("search"))?;

    let counts = relevance_count(&pages, corpus, &config.intent, pipeline, config.relevance).map_err(at("mine"))?;
    let rule = RelevanceRule::new(&config.intent, config.relevance, pipeline).map_err(at("mine"))?;
    let relevant_docs: BTreeSet<&str> = corpus
        .docs()
        .iter()
        .filter(|d| rule.matches(&d.text()))
        .map(|d| d.id.as_str())
        .collect();

    let mut rows = Vec::with_capacity(batch.len());
    let mut retrieved_relevant: BTreeSet<&str> = BTreeSet::new();
    for (query, page) in batch.iter().zip(&pages) {
        let c = counts[&query.id];
        for hit in &page.hits {
            if relevant_docs.contains(hit.doc_id.as_str()) {
                retrieved_relevant.insert(hit.doc_id.as_str());
            }
        }
        rows.push(QueryRow {
            query_id: query.id.clone(),
            pattern: query.pattern.to_string(),
            pattern_len: query.pattern.len(),
            query: query.render(),
            retrieved: c.retrieved,
            relevant: c.relevant,
            precision: precision(c.relevant, c.retrieved).ok(),
            recall: recall(c.relevant, relevant_docs.len()).ok(),
        });
    }
    let mut by_len: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for row in &rows {
        if let Some(p) = row.precision {
            by_len.entry(row.pattern_len).or_default().push(p);
        }
    }
    let precisions: Vec<f64> = rows.iter().filter_map(|r| r.precision).collect();
    let batch_summary = BatchSummary {
        queries: rows.len(),
        retrieved_total: rows.iter().map(|r| r.retrieved).sum(),
        relevant_total: rows.iter().map(|r| r.relevant).sum(),
        corpus_relevant: relevant_docs.len(),
        distinct_relevant_retrieved: retrieved_relevant.len(),
        recall: recall(retrieved_relevant.len(), relevant_docs.len()).ok(),
        mean_precision: (!precisions.is_empty()).then(|| precisions.iter().sum::<f64>() / precisions.len() as f64),
        median_precision_by_pattern_len: by_len
            .into_iter()
            .filter_map(|(len, v)| median(&v).map(|m| (len, m)))
            .collect(),
    };

    let mut session_rng = ChaCha8Rng::seed_from_u64(metadata.session_seed);
    let outcome = run_session(
        "experiment",
        &config.intent,
        &batch,
        corpus,
        &inputs.inventory,
        &rule,
        &config.policy,
        &SessionSchedule {
            top_k: config.top_k,
            days: config.days,
            ads_per_day: config.ads_per_day,
        },
        &mut session_rng,
    )
    .map_err(at("session"))?;

    let mut texts: Vec<LabeledText> = batch
        .iter()
        .map(|q| LabeledText {
            query_id: q.id.clone(),
            text: q.render(),
            label: LABEL_DUMMY,
        })
        .collect();
    texts.extend(inputs.real_queries.iter().cloned());
    let dataset = AttackDataset::from_texts(&texts, pipeline).map_err(at("attack"))?;
    let plan = FoldPlan::stratified(&dataset, config.folds, metadata.fold_seed).map_err(at("attack"))?;
    let reports = config
        .classifiers
        .iter()
        .map(|c| cross_validate(&dataset, c, &plan))
        .collect::<Result<Vec<_>, _>>()
        .map_err(at("attack"))?;
    let (dummy, real) = dataset.label_counts();

    let mut session_summary = SessionSummary {
        result_clicks: 0,
        ad_clicks: 0,
        ad_impressions: 0,
    };
    for record in outcome.log() {
        match record {
            LogRecord::Click(c) if c.target_kind == crate::session::TargetKind::Result => {
                session_summary.result_clicks += 1
            }
            LogRecord::Click(_) => session_summary.ad_clicks += 1,
            LogRecord::AdImpression(_) => session_summary.ad_impressions += 1,
        }
    }

    let report = ExperimentReport {
        intent: config.intent.clone(),
        patterns: patterns.iter().map(ToString::to_string).collect(),
        top_k: config.top_k,
        relevance: config.relevance,
        policy: config.policy,
        queries: rows,
        batch: batch_summary,
        attack: AttackSummary {
            obfuscated_queries: dummy,
            real_queries: real,
            skipped_real_rows: inputs.skipped_real_rows,
            vocabulary: dataset.vocabulary.len(),
            reports,
        },
        exposure: outcome.exposure.clone(),
        profile: outcome.profile().clone(),
        session: session_summary,
        metadata,
    };
    Ok(ExperimentRun {
        report,
        batch,
        pages,
        session: outcome.session,
    })
}
