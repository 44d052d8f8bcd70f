use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use distortion_core::attack::{
    cross_validate, ingest_query_log, AttackDataset, Classifier, FoldPlan, LogFormat, LABEL_DUMMY, LABEL_REAL,
};
use distortion_core::data;
use distortion_core::harness::{emit_report, run_with_inputs, ExperimentConfig, ExperimentInputs, ExperimentReport};
use distortion_core::lexicon::Lexicon;
use distortion_core::obfuscator::{
    generate_batch, parse_pattern_set, AssembleOptions, BatchOptions, IntentQuery, ObfuscatedQuery,
    STANDARD_PATTERNS,
};
use distortion_core::searchsim::{AdInventory, Corpus, ResultPage};
use distortion_core::session::{run_session, ClickPolicy, SessionSchedule};
use distortion_core::textmine::{build_matrix, relevance_count, PipelineConfig, RelevanceMode, RelevanceRule};
use distortion_server::{AppState, ServerConfig};

const SESSION_LOG: &str = "session_log.jsonl";
const BATCH_JSONL: &str = "batch.jsonl";

#[derive(Parser)]
#[command(name = "distort", version, about = "Distortion search experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an obfuscated query batch as JSON lines.
    Generate(GenerateArgs),
    /// Run queries against the corpus and write result pages as JSON lines.
    Search(SearchArgs),
    /// Count retrieved and relevant snippets per result page.
    Mine(MineArgs),
    /// Cross-validate classifiers that separate obfuscated from real queries.
    Attack(AttackArgs),
    /// Simulate clicks and ads for a batch and report ad exposure.
    Session(SessionArgs),
    /// Full pipeline: generate, search, mine, session, attack, report.
    Run(RunArgs),
    /// Re-render charts and tables from a report.json.
    Report(ReportArgs),
    /// Serve the interactive HTTP API.
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
struct BatchFlags {
    #[arg(long, default_value = "buy a toyota 2014")]
    intent: String,
    #[arg(long, default_value = STANDARD_PATTERNS)]
    patterns: String,
    #[arg(long, default_value_t = 8)]
    per_pattern: usize,
    /// Leave out the bare intent query normally appended to the batch.
    #[arg(long)]
    no_original: bool,
    #[arg(long)]
    no_verb_substitution: bool,
    #[arg(long, default_value_t = 2014)]
    seed: u64,
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

impl BatchFlags {
    fn lexicon_path(&self) -> PathBuf {
        self.lexicon.clone().unwrap_or_else(data::lexicon_path)
    }

    fn generate(&self) -> Result<Vec<ObfuscatedQuery>> {
        let lexicon = Lexicon::load(self.lexicon_path())?;
        let intent = IntentQuery::new(&self.intent, &lexicon)?;
        let patterns = parse_pattern_set(&self.patterns)?;
        let options = BatchOptions {
            per_pattern: self.per_pattern,
            include_original: !self.no_original,
            assemble: AssembleOptions {
                verb_substitution: !self.no_verb_substitution,
                ..AssembleOptions::default()
            },
        };
        Ok(generate_batch(&intent, &patterns, &lexicon, &options, &mut ChaCha8Rng::seed_from_u64(self.seed))?)
    }
}

#[derive(Args, Clone)]
struct CorpusFlags {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    top_k: usize,
}

impl CorpusFlags {
    fn load(&self) -> Result<Corpus> {
        let path = self.corpus.clone().unwrap_or_else(data::corpus_path);
        Corpus::load(&path, PipelineConfig::default()).with_context(|| format!("loading {}", path.display()))
    }
}

#[derive(Args, Clone)]
struct PolicyFlags {
    #[arg(long, default_value_t = 4)]
    k_clicks: usize,
    #[arg(long, default_value_t = 0.5)]
    decoy_fraction: f64,
    /// Don't let served ads feed back into the profile.
    #[arg(long)]
    no_ad_feedback: bool,
    #[arg(long, default_value_t = 7)]
    days: usize,
    #[arg(long, default_value_t = 42)]
    ads_per_day: usize,
    #[arg(long)]
    ads: Option<PathBuf>,
}

impl PolicyFlags {
    fn policy(&self) -> Result<ClickPolicy> {
        Ok(ClickPolicy::new(self.k_clicks, self.decoy_fraction, !self.no_ad_feedback)?)
    }

    fn ads_path(&self) -> PathBuf {
        self.ads.clone().unwrap_or_else(data::ads_path)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    batch: BatchFlags,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Batch JSONL from `generate`.
    #[arg(long, conflicts_with = "query")]
    batch: Option<PathBuf>,
    /// A single free-text query.
    #[arg(long)]
    query: Option<String>,
    #[command(flatten)]
    corpus: CorpusFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MineArgs {
    /// Result pages JSONL from `search`.
    #[arg(long)]
    pages: PathBuf,
    #[arg(long, default_value = "buy a toyota 2014")]
    intent: String,
    #[arg(long, default_value = "tokens-all")]
    relevance: RelevanceMode,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Also write the TF-IDF matrix of all retrieved snippets as CSV.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    /// Obfuscated queries (batch JSONL).
    #[arg(long)]
    obfuscated: PathBuf,
    /// Real queries (AOL-style TSV).
    #[arg(long)]
    real: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "knn:3,nb")]
    classifiers: Vec<Classifier>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 2014)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SessionArgs {
    /// Batch JSONL; generated from the batch flags when omitted.
    #[arg(long = "from-batch")]
    from_batch: Option<PathBuf>,
    #[command(flatten)]
    batch: BatchFlags,
    #[command(flatten)]
    corpus: CorpusFlags,
    #[command(flatten)]
    policy: PolicyFlags,
    #[arg(long, default_value = "tokens-all")]
    relevance: RelevanceMode,
    /// Directory for session_log.jsonl.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    batch: BatchFlags,
    #[command(flatten)]
    corpus: CorpusFlags,
    #[command(flatten)]
    policy: PolicyFlags,
    #[arg(long, default_value = "tokens-all")]
    relevance: RelevanceMode,
    #[arg(long)]
    real_queries: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "knn:3,nb")]
    classifiers: Vec<Classifier>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// JSON experiment config; when given it replaces the experiment flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "from", default_value = "out/report.json")]
    from: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    ads: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    top_k: usize,
    #[arg(long, default_value_t = 3)]
    ads_per_query: usize,
    #[arg(long, default_value_t = 2014)]
    seed: u64,
    /// Session logs are flushed here on shutdown.
    #[arg(long, default_value = "out/sessions")]
    log_dir: PathBuf,
    /// Report served at /report/latest, if it exists.
    #[arg(long, default_value = "out/report.json")]
    report: PathBuf,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(out)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let batch = args.batch.generate()?;
    let mut out = output(args.out.as_deref())?;
    for q in &batch {
        writeln!(out, "{}", q.to_json_line())?;
    }
    out.flush()?;
    Ok(())
}

fn search(args: SearchArgs) -> Result<()> {
    let corpus = args.corpus.load()?;
    let pages: Vec<ResultPage> = match (&args.batch, &args.query) {
        (Some(path), _) => read_jsonl::<ObfuscatedQuery>(path)?
            .iter()
            .map(|q| corpus.execute(q, args.corpus.top_k))
            .collect::<Result<_, _>>()?,
        (None, Some(text)) => vec![corpus.search_text("Q1", text, args.corpus.top_k)?],
        (None, None) => bail!("pass --batch or --query"),
    };
    let mut out = output(args.out.as_deref())?;
    for p in &pages {
        writeln!(out, "{}", serde_json::to_string(p)?)?;
    }
    out.flush()?;
    Ok(())
}

fn mine(args: MineArgs) -> Result<()> {
    let corpus = CorpusFlags {
        corpus: args.corpus.clone(),
        top_k: 1,
    }
    .load()?;
    let pages: Vec<ResultPage> = read_jsonl(&args.pages)?;
    let counts = relevance_count(&pages, &corpus, &args.intent, corpus.config(), args.relevance)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "query_id,retrieved,relevant,precision")?;
    for p in &pages {
        let c = counts[&p.query_id];
        let precision = distortion_core::harness::precision(c.relevant, c.retrieved)
            .map(|v| format!("{v:.6}"))
            .unwrap_or_default();
        writeln!(out, "{},{},{},{}", p.query_id, c.retrieved, c.relevant, precision)?;
    }
    out.flush()?;
    if let Some(path) = &args.matrix {
        let mut docs: Vec<(String, String)> = Vec::new();
        for p in &pages {
            for h in &p.hits {
                if !docs.iter().any(|(id, _)| id == &h.doc_id) {
                    if let Some(d) = corpus.get(&h.doc_id) {
                        docs.push((d.id.clone(), d.text()));
                    }
                }
            }
        }
        let matrix = build_matrix(&docs, corpus.config())?;
        let mut w = output(Some(path))?;
        matrix.write_csv(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn attack(args: AttackArgs) -> Result<()> {
    let dummy = ingest_query_log(&args.obfuscated, LABEL_DUMMY, LogFormat::JsonlObfuscated)?;
    let real_path = args.real.clone().unwrap_or_else(data::real_queries_path);
    let real = ingest_query_log(&real_path, LABEL_REAL, LogFormat::TsvQueries)?;
    for w in dummy.warnings.iter().chain(&real.warnings) {
        log::warn!("{w}");
    }
    let mut texts = dummy.records;
    texts.extend(real.records);
    let dataset = AttackDataset::from_texts(&texts, &PipelineConfig::default())?;
    let plan = FoldPlan::stratified(&dataset, args.folds, args.seed)?;
    let reports = args
        .classifiers
        .iter()
        .map(|c| cross_validate(&dataset, c, &plan))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "{}", serde_json::to_string_pretty(&reports)?)?;
    out.flush()?;
    Ok(())
}

fn session(args: SessionArgs) -> Result<()> {
    let batch = match &args.from_batch {
        Some(path) => read_jsonl(path)?,
        None => args.batch.generate()?,
    };
    let corpus = args.corpus.load()?;
    let inventory = AdInventory::load(args.policy.ads_path())?;
    let rule = RelevanceRule::new(&args.batch.intent, args.relevance, corpus.config())?;
    let schedule = SessionSchedule {
        top_k: args.corpus.top_k,
        days: args.policy.days,
        ads_per_day: args.policy.ads_per_day,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.batch.seed);
    let outcome = run_session(
        "cli",
        &args.batch.intent,
        &batch,
        &corpus,
        &inventory,
        &rule,
        &args.policy.policy()?,
        &schedule,
        &mut rng,
    )?;
    if let Some(dir) = &args.out {
        let mut w = output(Some(&dir.join(SESSION_LOG)))?;
        outcome.session.write_log_jsonl(&mut w)?;
        w.flush()?;
    }
    let summary = serde_json::json!({ "exposure": outcome.exposure, "profile": outcome.profile() });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let config = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?,
        None => {
            let defaults = ExperimentConfig::default();
            ExperimentConfig {
                intent: args.batch.intent.clone(),
                patterns: args.batch.patterns.clone(),
                per_pattern: args.batch.per_pattern,
                include_original: !args.batch.no_original,
                verb_substitution: !args.batch.no_verb_substitution,
                top_k: args.corpus.top_k,
                policy: args.policy.policy()?,
                days: args.policy.days,
                ads_per_day: args.policy.ads_per_day,
                seed: args.batch.seed,
                corpus: args.corpus.corpus.clone().unwrap_or(defaults.corpus),
                ads: args.policy.ads_path(),
                lexicon: args.batch.lexicon_path(),
                real_queries: args.real_queries.clone().unwrap_or(defaults.real_queries),
                stopwords: None,
                relevance: args.relevance,
                classifiers: args.classifiers.clone(),
                folds: args.folds,
            }
        }
    };
    let inputs = ExperimentInputs::load(&config)?;
    let run = run_with_inputs(&config, &inputs)?;
    let mut written = emit_report(&run.report, &args.out)?;
    let log_path = args.out.join(SESSION_LOG);
    let mut w = output(Some(&log_path))?;
    run.session.write_log_jsonl(&mut w)?;
    w.flush()?;
    written.push(log_path);
    let batch_path = args.out.join(BATCH_JSONL);
    let mut w = output(Some(&batch_path))?;
    for q in &run.batch {
        writeln!(w, "{}", q.to_json_line())?;
    }
    w.flush()?;
    written.push(batch_path);

    let r = &run.report;
    println!(
        "{} queries, {} retrieved, {} relevant; exposure {:.4} ({} of {} ads)",
        r.batch.queries, r.batch.retrieved_total, r.batch.relevant_total, r.exposure.exposure, r.exposure.specific_ads,
        r.exposure.total_ads
    );
    for a in &r.attack.reports {
        println!("{}: accuracy {:.4}", a.classifier, a.overall_accuracy);
    }
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let text = fs::read_to_string(&args.from).with_context(|| format!("reading {}", args.from.display()))?;
    let report: ExperimentReport = serde_json::from_str(&text)?;
    for p in emit_report(&report, &args.out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let corpus = CorpusFlags {
        corpus: args.corpus.clone(),
        top_k: args.top_k,
    }
    .load()?;
    let inventory = AdInventory::load(args.ads.clone().unwrap_or_else(data::ads_path))?;
    let lexicon = Lexicon::load(args.lexicon.clone().unwrap_or_else(data::lexicon_path))?;
    let config = ServerConfig {
        top_k: args.top_k,
        ads_per_query: args.ads_per_query,
        seed: args.seed,
        log_dir: Some(args.log_dir.clone()),
        ..ServerConfig::default()
    };
    let state = Arc::new(AppState::new(corpus, inventory, lexicon, config));
    if args.report.exists() {
        let report: ExperimentReport = serde_json::from_str(&fs::read_to_string(&args.report)?)?;
        state.set_report(report);
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(distortion_server::serve(state, args.bind))?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Generate(a) => generate(a),
        Command::Search(a) => search(a),
        Command::Mine(a) => mine(a),
        Command::Attack(a) => attack(a),
        Command::Session(a) => session(a),
        Command::Run(a) => run(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
    }
}
