//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use distortion_core::attack::{
    cross_validate, euclidean, AttackDataset, Classifier, FoldPlan, LabeledQueryVector, LabeledText, LABEL_DUMMY,
    LABEL_REAL,
};
use distortion_core::data;
use distortion_core::harness::{
    emit_report, precision, recall, run_experiment, run_with_inputs, ExperimentConfig, ExperimentInputs,
};
use distortion_core::lexicon::{Lexicon, QueryCategory};
use distortion_core::obfuscator::{
    count_permutations, enumerate_arrangements, generate_batch, parse_pattern_set, BatchOptions, IntentQuery,
    ObfuscatedQuery, PermutationArity, STANDARD_PATTERNS,
};
use distortion_core::searchsim::Corpus;
use distortion_core::session::{run_session, ClickPolicy, SessionSchedule};
use distortion_core::synthetic::synthetic_corpus;
use distortion_core::textmine::{build_matrix, relevance_count, PipelineConfig, RelevanceMode, RelevanceRule};

const INTENT: &str = "buy a toyota 2014";

/// KNN(3) accuracy on the frozen attack fixture, recorded when the fixture
/// was generated.
const FROZEN_FIXTURE_ACCURACY: f64 = 1.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

fn permutation_identity() -> Outcome {
    let t = Instant::now();
    let count = count_permutations(PermutationArity::new(5, 5).unwrap());
    let all: std::collections::BTreeSet<QueryCategory> = QueryCategory::ALL.into_iter().collect();
    let arrangements = enumerate_arrangements(&all, 5).unwrap();
    let distinct: std::collections::BTreeSet<String> = arrangements.iter().map(ToString::to_string).collect();
    let elapsed = t.elapsed();
    check(
        count == 120 && arrangements.len() == 120 && distinct.len() == 120 && within(elapsed, 1),
        format!("count={count} arrangements={} distinct={} in {elapsed:?}", arrangements.len(), distinct.len()),
    )
}

fn pattern_set_fidelity() -> Outcome {
    let t = Instant::now();
    let lexicon = Lexicon::load(data::lexicon_path()).unwrap();
    let patterns = parse_pattern_set(STANDARD_PATTERNS).unwrap();
    let intent = IntentQuery::new(INTENT, &lexicon).unwrap();
    let options = BatchOptions {
        per_pattern: 8,
        include_original: true,
        ..BatchOptions::default()
    };
    let batch = generate_batch(&intent, &patterns, &lexicon, &options, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let ids: std::collections::BTreeSet<&str> = batch.iter().map(|q| q.id.as_str()).collect();
    let elapsed = t.elapsed();
    check(
        patterns.len() == 15 && batch.len() == 121 && ids.len() == 121 && within(elapsed, 1),
        format!("patterns={} queries={} unique_ids={} in {elapsed:?}", patterns.len(), batch.len(), ids.len()),
    )
}

fn q17_precision() -> Outcome {
    let fixtures = data::fixtures_dir();
    let corpus = Corpus::load(fixtures.join("q17_corpus.jsonl"), PipelineConfig::default()).unwrap();
    let line = std::fs::read_to_string(fixtures.join("q17_query.jsonl")).unwrap();
    let query: ObfuscatedQuery = serde_json::from_str(line.trim()).unwrap();
    let page = corpus.execute(&query, 200).unwrap();
    let counts = relevance_count(&[page], &corpus, INTENT, corpus.config(), RelevanceMode::TokensAll).unwrap();
    let c = counts["Q17"];
    let p = precision(c.relevant, c.retrieved).unwrap();
    check(
        query.pattern.to_string() == "NITP" && c.retrieved == 106 && c.relevant == 53 && p == 0.5,
        format!("pattern={} retrieved={} relevant={} precision={p}", query.pattern, c.retrieved, c.relevant),
    )
}

fn tension() -> Outcome {
    let t = Instant::now();
    let config = ExperimentConfig::default();
    let inputs = ExperimentInputs::load(&config).unwrap();
    let mut holds = 0;
    let mut pairs = Vec::new();
    for seed in 1..=10 {
        let cfg = ExperimentConfig { seed, ..config.clone() };
        let run = run_with_inputs(&cfg, &inputs).unwrap();
        let medians = &run.report.batch.median_precision_by_pattern_len;
        let (m5, m2) = (medians.get(&5).copied(), medians.get(&2).copied());
        if let (Some(m5), Some(m2)) = (m5, m2) {
            if m5 <= m2 {
                holds += 1;
            }
            pairs.push(format!("{m5:.3}/{m2:.3}"));
        }
    }
    let elapsed = t.elapsed();
    check(
        inputs.corpus.len() == 1000 && holds >= 8 && within(elapsed, 30),
        format!("len5<=len2 in {holds}/10 seeds (median len5/len2: {}) in {elapsed:?}", pairs.join(" ")),
    )
}

fn tfidf_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cells = 0usize;
    let mut shapes_ok = true;
    for (seed, per_topic, ngram) in [(1, 40, 1), (2, 40, 2), (3, 7, 1), (4, 1, 3), (5, 25, 2)] {
        let docs = synthetic_corpus(per_topic, seed);
        let config = PipelineConfig {
            ngram_max: ngram,
            ..PipelineConfig::default()
        };
        let pairs: Vec<(String, String)> = docs.iter().map(|d| (d.id.clone(), d.text())).collect();
        let matrix = build_matrix(&pairs, &config).unwrap();
        let texts: Vec<&str> = pairs.iter().map(|p| p.1.as_str()).collect();
        let (terms, rows) = common::brute_tfidf(&texts, &config);
        shapes_ok &= matrix.terms == terms && matrix.rows.len() == rows.len();
        for (a, b) in matrix.rows.iter().zip(&rows) {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
                cells += 1;
            }
        }
    }
    check(shapes_ok && worst <= 1e-9, format!("max |delta|={worst:e} over {cells} cells"))
}

/// Two clusters of 50 points in 4-d space: unit-box jitter around the
/// origin and around (10, 10, 10, 10).
fn separable_dataset(seed: u64) -> AttackDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocabulary: Vec<String> = (0..4).map(|i| format!("x{i}")).collect();
    let items = (0..100)
        .map(|i| {
            let label = if i < 50 { LABEL_DUMMY } else { LABEL_REAL };
            let centre = if label == LABEL_REAL { 10.0 } else { 0.0 };
            LabeledQueryVector {
                query_id: format!("S{i:03}"),
                vector: (0..4).map(|_| centre + rng.gen_range(-1.0..1.0)).collect(),
                label,
            }
        })
        .collect();
    AttackDataset::new(vocabulary, items).unwrap()
}

fn attack_separable() -> Outcome {
    let dataset = separable_dataset(1);
    let plan = FoldPlan::stratified(&dataset, 10, 1).unwrap();
    let report = cross_validate(&dataset, &Classifier::Knn { k: 3 }, &plan).unwrap();
    check(
        report.overall_accuracy >= 0.95,
        format!("knn(k=3) 10-fold accuracy={:.4} on {} points", report.overall_accuracy, dataset.items.len()),
    )
}

fn attack_shuffled() -> Outcome {
    let mut accs = Vec::new();
    for seed in 0..20u64 {
        let mut dataset = separable_dataset(1);
        let mut labels: Vec<u8> = dataset.items.iter().map(|t| t.label).collect();
        labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        for (item, label) in dataset.items.iter_mut().zip(labels) {
            item.label = label;
        }
        let plan = FoldPlan::stratified(&dataset, 10, seed).unwrap();
        accs.push(cross_validate(&dataset, &Classifier::Knn { k: 3 }, &plan).unwrap().overall_accuracy);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let (lo, hi) = accs.iter().fold((1.0f64, 0.0f64), |(l, h), &a| (l.min(a), h.max(a)));
    check(
        (mean - 0.5).abs() <= 0.1,
        format!("mean accuracy={mean:.4} over 20 seeds (range {lo:.3}..{hi:.3})"),
    )
}

fn attack_fixture() -> Outcome {
    let dir = data::fixtures_dir().join("distortion-vs-real-v1");
    let config = PipelineConfig::default();
    let items = common::read_attack_fixture(&dir);
    let expected = common::oracle_knn_accuracy(&items, 3, 10, 0, &config);

    let texts: Vec<LabeledText> = items
        .iter()
        .map(|(id, text, label)| LabeledText {
            query_id: id.clone(),
            text: text.clone(),
            label: *label,
        })
        .collect();
    let dataset = AttackDataset::from_texts(&texts, &config).unwrap();
    let plan = FoldPlan::stratified(&dataset, 10, 0).unwrap();
    let got = cross_validate(&dataset, &Classifier::Knn { k: 3 }, &plan).unwrap().overall_accuracy;
    let (dummy, real) = dataset.label_counts();
    check(
        dummy == 122 && real == 248 && (got - expected).abs() <= 1e-9 && (got - FROZEN_FIXTURE_ACCURACY).abs() <= 1e-9,
        format!("items={dummy}+{real} accuracy={got:.12} oracle={expected:.12} frozen={FROZEN_FIXTURE_ACCURACY}"),
    )
}

fn exposure() -> Outcome {
    let t = Instant::now();
    let config = PipelineConfig::default();
    let corpus = Corpus::load(data::corpus_path(), config.clone()).unwrap();
    let inventory = distortion_core::searchsim::AdInventory::load(data::ads_path()).unwrap();
    let lexicon = Lexicon::load(data::lexicon_path()).unwrap();
    let intent = IntentQuery::new(INTENT, &lexicon).unwrap();
    let patterns = parse_pattern_set(STANDARD_PATTERNS).unwrap();
    let rule = RelevanceRule::new(INTENT, RelevanceMode::TokensAll, &config).unwrap();
    let schedule = SessionSchedule {
        top_k: 100,
        days: 7,
        ads_per_day: 42,
    };
    let options = BatchOptions {
        per_pattern: 8,
        include_original: true,
        ..BatchOptions::default()
    };
    let obfuscated_policy = ClickPolicy::new(4, 0.5, true).unwrap();
    let baseline_policy = ClickPolicy::new(4, 0.0, true).unwrap();
    let baseline_queries = [ObfuscatedQuery::original("Q1", &intent)];

    let mut below = 0;
    let mut max_obf: f64 = 0.0;
    let mut rows = Vec::new();
    let mut impressions = 0;
    for seed in 1..=10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch = generate_batch(&intent, &patterns, &lexicon, &options, &mut rng).unwrap();
        let obf = run_session(
            "obf", INTENT, &batch, &corpus, &inventory, &rule, &obfuscated_policy, &schedule, &mut rng,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = run_session(
            "base", INTENT, &baseline_queries, &corpus, &inventory, &rule, &baseline_policy, &schedule, &mut rng,
        )
        .unwrap();
        impressions = obf.exposure.total_ads;
        if obf.exposure.exposure < base.exposure.exposure {
            below += 1;
        }
        max_obf = max_obf.max(obf.exposure.exposure);
        rows.push(format!("{:.3}/{:.3}", obf.exposure.exposure, base.exposure.exposure));
    }
    let elapsed = t.elapsed();
    check(
        below >= 8 && max_obf <= 0.15 && within(elapsed, 60),
        format!(
            "obfuscated<baseline in {below}/10 seeds, max obfuscated={max_obf:.3}, {impressions} ads/session (obf/base: {}) in {elapsed:?}",
            rows.join(" ")
        ),
    )
}

fn determinism() -> Outcome {
    let config = ExperimentConfig::default();
    let a = run_experiment(&config).unwrap();
    let b = run_experiment(&config).unwrap();
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&a, da.path()).unwrap();
    emit_report(&b, db.path()).unwrap();
    let ja = std::fs::read(da.path().join("report.json")).unwrap();
    let jb = std::fs::read(db.path().join("report.json")).unwrap();
    check(!ja.is_empty() && ja == jb, format!("report.json {} bytes, identical={}", ja.len(), ja == jb))
}

fn metric_units() -> Outcome {
    let ok = precision(53, 106) == Ok(0.5)
        && precision(7, 7) == Ok(1.0)
        && precision(17, 68) == Ok(0.25)
        && precision(0, 0).is_err()
        && recall(0, 40) == Ok(0.0)
        && recall(40, 40) == Ok(1.0)
        && (recall(53, 60).unwrap() - 53.0 / 60.0).abs() < 1e-15
        && recall(0, 0).is_err()
        && euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap() == 5.0
        && euclidean(&[1.5, 2.5], &[1.5, 2.5]).unwrap() == 0.0
        && euclidean(&[1.0], &[1.0, 2.0]).is_err();
    check(ok, "precision, recall and euclidean examples")
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("permutation identity", permutation_identity),
        ("pattern-set fidelity", pattern_set_fidelity),
        ("Q17 precision", q17_precision),
        ("privacy/usability tension", tension),
        ("text-mining oracle equivalence", tfidf_oracle),
        ("attack: separable set", attack_separable),
        ("attack: shuffled labels", attack_shuffled),
        ("attack: frozen fixture", attack_fixture),
        ("exposure reduction", exposure),
        ("determinism", determinism),
        ("metric unit examples", metric_units),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = f();
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        if !outcome.pass {
            failed += 1;
        }
        println!("{tag} {name}: {}", outcome.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
