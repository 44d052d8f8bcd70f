//! Distinguishability attack: can a classifier tell obfuscated queries
//! (label 0) from real ones (label 1)?
//!
//! Queries are TF-IDF vectors over a shared vocabulary. Two classifiers are
//! built in: Euclidean k-nearest-neighbours and multinomial Naive Bayes.
//! Accuracy is estimated with stratified k-fold cross-validation whose fold
//! assignment depends only on query ids and the seed.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obfuscator::ObfuscatedQuery;
use crate::textmine::{build_matrix, PipelineConfig, TextError};

/// Dummy / obfuscated query.
pub const LABEL_DUMMY: u8 = 0;
/// Real user query.
pub const LABEL_REAL: u8 = 1;

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("training set is empty")]
    EmptyTraining,
    #[error("k = {k} exceeds training size {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("k must be a positive odd number, got {0}")]
    BadK(usize),
    #[error("training data must contain both labels")]
    SingleClass,
    #[error("need at least 2 folds and no more folds than items ({items}), got {folds}")]
    BadFolds { folds: usize, items: usize },
    #[error("fold {0}'s training split lacks a class; dataset too small to stratify")]
    UnstratifiableFold(usize),
    #[error("duplicate query id {0:?}")]
    DuplicateId(String),
    #[error("classifier {0} is reserved but not implemented")]
    Unsupported(&'static str),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Text(#[from] TextError),
}

pub fn euclidean(x: &[f64], y: &[f64]) -> Result<f64, AttackError> {
    if x.len() != y.len() {
        return Err(AttackError::LengthMismatch(x.len(), y.len()));
    }
    Ok(x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledQueryVector {
    pub query_id: String,
    pub vector: Vec<f64>,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackDataset {
    pub vocabulary: Vec<String>,
    pub items: Vec<LabeledQueryVector>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub query_id: String,
    pub text: String,
    pub label: u8,
}

impl AttackDataset {
    pub fn new(vocabulary: Vec<String>, items: Vec<LabeledQueryVector>) -> Result<Self, AttackError> {
        let mut ids = HashSet::new();
        for item in &items {
            if item.vector.len() != vocabulary.len() {
                return Err(AttackError::LengthMismatch(item.vector.len(), vocabulary.len()));
            }
            if !ids.insert(item.query_id.as_str()) {
                return Err(AttackError::DuplicateId(item.query_id.clone()));
            }
        }
        Ok(Self { vocabulary, items })
    }

    /// Vectorizes queries as micro-documents with one shared TF-IDF
    /// vocabulary.
    pub fn from_texts(texts: &[LabeledText], config: &PipelineConfig) -> Result<Self, AttackError> {
        let docs: Vec<(&str, &str)> = texts
            .iter()
            .map(|t| (t.query_id.as_str(), t.text.as_str()))
            .collect();
        let matrix = build_matrix(&docs, config)?;
        let items = texts
            .iter()
            .zip(matrix.rows)
            .map(|(t, vector)| LabeledQueryVector {
                query_id: t.query_id.clone(),
                vector,
                label: t.label,
            })
            .collect();
        Self::new(matrix.terms, items)
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let real = self.items.iter().filter(|i| i.label == LABEL_REAL).count();
        (self.items.len() - real, real)
    }
}

/// Majority label among the `k` nearest training vectors; distance ties are
/// broken by query id.
pub fn knn_classify(train: &[&LabeledQueryVector], probe: &[f64], k: usize) -> Result<u8, AttackError> {
    if train.is_empty() {
        return Err(AttackError::EmptyTraining);
    }
    if k == 0 || k.is_multiple_of(2) {
        return Err(AttackError::BadK(k));
    }
    if k > train.len() {
        return Err(AttackError::KTooLarge { k, n: train.len() });
    }
    if let Some(bad) = train.iter().find(|i| i.vector.len() != probe.len()) {
        return Err(AttackError::LengthMismatch(bad.vector.len(), probe.len()));
    }
    let mut scored: Vec<(f64, &LabeledQueryVector)> = train
        .iter()
        .map(|item| {
            let d: f64 = item.vector.iter().zip(probe).map(|(a, b)| (a - b) * (a - b)).sum();
            (d.sqrt(), *item)
        })
        .collect();
    scored.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.1.query_id.cmp(&b.1.query_id))
    });
    let real_votes = scored[..k].iter().filter(|(_, i)| i.label == LABEL_REAL).count();
    Ok(if real_votes * 2 > k { LABEL_REAL } else { LABEL_DUMMY })
}

/// Trained multinomial Naive Bayes over non-negative weight vectors with
/// add-one smoothing.
#[derive(Debug, Clone)]
pub struct NaiveBayes {
    log_prior: [f64; 2],
    log_cond: [Vec<f64>; 2],
}

impl NaiveBayes {
    pub fn fit(train: &[&LabeledQueryVector]) -> Result<Self, AttackError> {
        let first = train.first().ok_or(AttackError::EmptyTraining)?;
        let dim = first.vector.len();
        let mut mass = [vec![0.0; dim], vec![0.0; dim]];
        let mut counts = [0usize; 2];
        for item in train {
            if item.vector.len() != dim {
                return Err(AttackError::LengthMismatch(item.vector.len(), dim));
            }
            let c = usize::from(item.label == LABEL_REAL);
            counts[c] += 1;
            for (m, w) in mass[c].iter_mut().zip(&item.vector) {
                *m += w;
            }
        }
        if counts[0] == 0 || counts[1] == 0 {
            return Err(AttackError::SingleClass);
        }
        let n = train.len() as f64;
        let log_prior = [(counts[0] as f64 / n).ln(), (counts[1] as f64 / n).ln()];
        let log_cond = mass.map(|m| {
            let denom = m.iter().sum::<f64>() + dim as f64;
            m.iter().map(|w| ((w + 1.0) / denom).ln()).collect()
        });
        Ok(Self { log_prior, log_cond })
    }

    pub fn log_posteriors(&self, probe: &[f64]) -> Result<[f64; 2], AttackError> {
        let dim = self.log_cond[0].len();
        if probe.len() != dim {
            return Err(AttackError::LengthMismatch(probe.len(), dim));
        }
        Ok([0, 1].map(|c| {
            self.log_prior[c]
                + probe
                    .iter()
                    .zip(&self.log_cond[c])
                    .map(|(w, lc)| w * lc)
                    .sum::<f64>()
        }))
    }

    /// Ties go to the dummy label.
    pub fn predict(&self, probe: &[f64]) -> Result<u8, AttackError> {
        let [dummy, real] = self.log_posteriors(probe)?;
        Ok(if real > dummy { LABEL_REAL } else { LABEL_DUMMY })
    }
}

pub fn nb_classify(train: &[&LabeledQueryVector], probe: &[f64]) -> Result<u8, AttackError> {
    NaiveBayes::fit(train)?.predict(probe)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Classifier {
    Knn { k: usize },
    NaiveBayes,
    /// Reserved.
    RandomForest,
    /// Reserved.
    LogisticRegression,
}

impl Classifier {
    pub fn label(&self) -> String {
        match self {
            Classifier::Knn { k } => format!("knn(k={k})"),
            Classifier::NaiveBayes => "naive_bayes".into(),
            Classifier::RandomForest => "random_forest".into(),
            Classifier::LogisticRegression => "logistic_regression".into(),
        }
    }

    fn predict_all(
        &self,
        train: &[&LabeledQueryVector],
        test: &[&LabeledQueryVector],
    ) -> Result<Vec<u8>, AttackError> {
        match self {
            Classifier::Knn { k } => test.iter().map(|t| knn_classify(train, &t.vector, *k)).collect(),
            Classifier::NaiveBayes => {
                let model = NaiveBayes::fit(train)?;
                test.iter().map(|t| model.predict(&t.vector)).collect()
            }
            Classifier::RandomForest => Err(AttackError::Unsupported("random_forest")),
            Classifier::LogisticRegression => Err(AttackError::Unsupported("logistic_regression")),
        }
    }
}

impl std::str::FromStr for Classifier {
    type Err = String;

    /// `knn`, `knn:5`, `nb`/`naive_bayes`, `rf`, `lr`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_lowercase();
        let (name, arg) = lower.split_once(':').unwrap_or((&lower, ""));
        match name {
            "knn" => {
                let k = if arg.is_empty() {
                    3
                } else {
                    arg.parse().map_err(|_| format!("bad k in {s:?}"))?
                };
                Ok(Classifier::Knn { k })
            }
            "nb" | "naive_bayes" | "naive-bayes" => Ok(Classifier::NaiveBayes),
            "rf" | "random_forest" => Ok(Classifier::RandomForest),
            "lr" | "logistic_regression" => Ok(Classifier::LogisticRegression),
            _ => Err(format!("unknown classifier {s:?}")),
        }
    }
}

/// 64-bit FNV-1a, used for order-independent fold assignment.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn fold_key(seed: u64, query_id: &str) -> u64 {
    let mut bytes = seed.to_le_bytes().to_vec();
    bytes.extend_from_slice(query_id.as_bytes());
    fnv1a(&bytes)
}

/// Stratified fold assignment. Items of each class are ordered by
/// `fnv1a(seed ‖ query_id)` (ties by id), dummy class first, and dealt
/// round-robin over the folds. Fold sizes differ by at most one and the
/// result does not depend on input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: usize,
    pub seed: u64,
    /// `assignment[i]` is the fold of `dataset.items[i]`.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    pub fn stratified(dataset: &AttackDataset, folds: usize, seed: u64) -> Result<Self, AttackError> {
        let n = dataset.items.len();
        if folds < 2 || folds > n {
            return Err(AttackError::BadFolds { folds, items: n });
        }
        let mut order: Vec<(u8, u64, &str, usize)> = dataset
            .items
            .iter()
            .enumerate()
            .map(|(i, item)| (item.label, fold_key(seed, &item.query_id), item.query_id.as_str(), i))
            .collect();
        order.sort();
        let mut assignment = vec![0; n];
        for (pos, (_, _, _, i)) in order.into_iter().enumerate() {
            assignment[i] = pos % folds;
        }
        Ok(Self {
            folds,
            seed,
            assignment,
        })
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &f in &self.assignment {
            sizes[f] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    fn record(&mut self, truth: u8, predicted: u8) {
        match (truth == LABEL_REAL, predicted == LABEL_REAL) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub classifier: String,
    pub folds: usize,
    pub overall_accuracy: f64,
    pub per_fold: Vec<f64>,
    pub confusion: Confusion,
}

/// Trains on all folds but one and scores the held-out fold, for every fold.
pub fn cross_validate(
    dataset: &AttackDataset,
    classifier: &Classifier,
    plan: &FoldPlan,
) -> Result<AccuracyReport, AttackError> {
    if plan.assignment.len() != dataset.items.len() {
        return Err(AttackError::BadFolds {
            folds: plan.folds,
            items: dataset.items.len(),
        });
    }
    // Canonical order makes every sum and tie-break independent of how the
    // caller ordered the items.
    let mut order: Vec<usize> = (0..dataset.items.len()).collect();
    order.sort_by(|&a, &b| dataset.items[a].query_id.cmp(&dataset.items[b].query_id));

    let mut confusion = Confusion::default();
    let mut per_fold = Vec::with_capacity(plan.folds);
    for fold in 0..plan.folds {
        let (test, train): (Vec<usize>, Vec<usize>) =
            order.iter().copied().partition(|&i| plan.assignment[i] == fold);
        let train: Vec<&LabeledQueryVector> = train.iter().map(|&i| &dataset.items[i]).collect();
        let test: Vec<&LabeledQueryVector> = test.iter().map(|&i| &dataset.items[i]).collect();
        let labels: HashSet<u8> = train.iter().map(|i| i.label).collect();
        if labels.len() < 2 {
            return Err(AttackError::UnstratifiableFold(fold));
        }
        let predicted = classifier.predict_all(&train, &test)?;
        let mut correct = 0;
        for (item, p) in test.iter().zip(predicted) {
            confusion.record(item.label, p);
            if item.label == p {
                correct += 1;
            }
        }
        per_fold.push(if test.is_empty() {
            0.0
        } else {
            correct as f64 / test.len() as f64
        });
    }
    let overall_accuracy = (confusion.tp + confusion.tn) as f64 / confusion.total() as f64;
    Ok(AccuracyReport {
        classifier: classifier.label(),
        folds: plan.folds,
        overall_accuracy,
        per_fold,
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogFormat {
    /// AOL layout: AnonID, Query, QueryTime, ... separated by tabs.
    TsvQueries,
    /// Obfuscator batch output, one query JSON per line.
    JsonlObfuscated,
}

impl std::str::FromStr for LogFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tsv-queries" | "tsv" => Ok(LogFormat::TsvQueries),
            "jsonl-obfuscated" | "jsonl" => Ok(LogFormat::JsonlObfuscated),
            other => Err(format!("unknown log format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestOutcome {
    pub records: Vec<LabeledText>,
    pub skipped: usize,
    pub warnings: Vec<String>,
}

pub fn ingest_query_log_from(
    reader: impl BufRead,
    source: &str,
    label: u8,
    format: LogFormat,
) -> Result<IngestOutcome, AttackError> {
    let mut out = IngestOutcome::default();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|source_err| AttackError::Io {
            path: source.to_string(),
            source: source_err,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match format {
            LogFormat::TsvQueries => {
                let cols: Vec<&str> = line.split('\t').collect();
                if line_no == 1 && cols.first().is_some_and(|c| c.trim().eq_ignore_ascii_case("anonid")) {
                    continue;
                }
                match cols.get(1).map(|q| q.trim()) {
                    Some(q) if !q.is_empty() => Ok((format!("{source}:{line_no}"), q.to_string())),
                    _ => Err("missing query column".to_string()),
                }
            }
            LogFormat::JsonlObfuscated => serde_json::from_str::<ObfuscatedQuery>(&line)
                .map(|q| (q.id.clone(), q.render()))
                .map_err(|e| e.to_string()),
        };
        match parsed {
            Ok((query_id, text)) => out.records.push(LabeledText { query_id, text, label }),
            Err(reason) => {
                out.skipped += 1;
                let w = format!("{source} line {line_no}: {reason}; skipped");
                log::warn!("{w}");
                out.warnings.push(w);
            }
        }
    }
    Ok(out)
}

/// Reads a query log; malformed rows are skipped and counted. Query ids are
/// `<file stem>:<line>` for TSV input and the stored id for JSONL.
pub fn ingest_query_log(path: impl AsRef<Path>, label: u8, format: LogFormat) -> Result<IngestOutcome, AttackError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| AttackError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "log".into());
    ingest_query_log_from(BufReader::new(file), &stem, label, format)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, v: &[f64], label: u8) -> LabeledQueryVector {
        LabeledQueryVector {
            query_id: id.into(),
            vector: v.to_vec(),
            label,
        }
    }

    #[test]
    fn euclidean_examples() {
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(euclidean(&[1.5, 2.5], &[1.5, 2.5]).unwrap(), 0.0);
        assert_eq!(euclidean(&[1.0, 2.0, 3.0], &[4.0, 6.0, 3.0]).unwrap(), 5.0);
        assert!(matches!(
            euclidean(&[1.0], &[1.0, 2.0]),
            Err(AttackError::LengthMismatch(1, 2))
        ));
    }

    #[test]
    fn knn_nearest() {
        let a = item("a", &[0.0, 0.0], 0);
        let b = item("b", &[10.0, 10.0], 1);
        let train = [&a, &b];
        assert_eq!(knn_classify(&train, &[1.0, 1.0], 1).unwrap(), 0);
        assert_eq!(knn_classify(&train, &[10.0, 10.0], 1).unwrap(), 1);
        assert!(matches!(knn_classify(&train, &[0.0, 0.0], 3), Err(AttackError::KTooLarge { .. })));
        assert!(matches!(knn_classify(&train, &[0.0, 0.0], 2), Err(AttackError::BadK(2))));
        assert!(matches!(knn_classify(&[], &[0.0], 1), Err(AttackError::EmptyTraining)));
    }

    #[test]
    fn knn_one_dimensional_majority() {
        // points 0,1,2 (labels 0,1,1) and 5,6 (labels 0,0); probe 1.4:
        // distances 1.4, 0.4, 0.6, 3.6, 4.6 -> nearest three are 1,2,0 -> labels 1,1,0
        let pts = [
            item("p0", &[0.0], 0),
            item("p1", &[1.0], 1),
            item("p2", &[2.0], 1),
            item("p5", &[5.0], 0),
            item("p6", &[6.0], 0),
        ];
        let train: Vec<_> = pts.iter().collect();
        assert_eq!(knn_classify(&train, &[1.4], 3).unwrap(), 1);
        // probe 4.0: distances 4,3,2,1,2 -> p5 (1), then p2 and p6 tie at 2 -> p2 < p6 by id
        // labels 0,1,0 -> 0
        assert_eq!(knn_classify(&train, &[4.0], 3).unwrap(), 0);
        assert_eq!(knn_classify(&train, &[4.0], 5).unwrap(), 0);
    }

    #[test]
    fn naive_bayes_hand_computed() {
        // vocabulary [car, phone, shoe]
        let docs = [
            item("d1", &[2.0, 0.0, 0.0], 1),
            item("d2", &[1.0, 1.0, 0.0], 1),
            item("d3", &[0.0, 2.0, 1.0], 0),
            item("d4", &[0.0, 0.0, 2.0], 0),
        ];
        let train: Vec<_> = docs.iter().collect();
        let model = NaiveBayes::fit(&train).unwrap();
        // class 1 mass [3,1,0] total 4; denominators 4+3=7 -> cond [4/7, 2/7, 1/7]
        // class 0 mass [0,2,3] total 5; denominators 5+3=8 -> cond [1/8, 3/8, 4/8]
        // probe [1,1,0]: real = ln(.5) + ln(4/7) + ln(2/7); dummy = ln(.5) + ln(1/8) + ln(3/8)
        let [dummy, real] = model.log_posteriors(&[1.0, 1.0, 0.0]).unwrap();
        let want_real = 0.5f64.ln() + (4.0f64 / 7.0).ln() + (2.0f64 / 7.0).ln();
        let want_dummy = 0.5f64.ln() + (1.0f64 / 8.0).ln() + (3.0f64 / 8.0).ln();
        assert!((real - want_real).abs() < 1e-12);
        assert!((dummy - want_dummy).abs() < 1e-12);
        assert_eq!(model.predict(&[1.0, 1.0, 0.0]).unwrap(), 1);
        assert_eq!(model.predict(&[0.0, 0.0, 1.0]).unwrap(), 0);
    }

    #[test]
    fn naive_bayes_separated_and_single_class() {
        let docs = [item("a", &[3.0, 0.0], 0), item("b", &[0.0, 3.0], 1)];
        let train: Vec<_> = docs.iter().collect();
        assert_eq!(nb_classify(&train, &[2.0, 0.0]).unwrap(), 0);
        let one = [&docs[0]];
        assert!(matches!(nb_classify(&one, &[1.0, 0.0]), Err(AttackError::SingleClass)));
        assert!(matches!(nb_classify(&[], &[1.0]), Err(AttackError::EmptyTraining)));
    }

    fn toy_dataset(n: usize) -> AttackDataset {
        let items = (0..n)
            .map(|i| item(&format!("q{i:03}"), &[i as f64], (i % 2) as u8))
            .collect();
        AttackDataset::new(vec!["x".into()], items).unwrap()
    }

    #[test]
    fn fold_plan_balanced_partition() {
        let ds = toy_dataset(23);
        let plan = FoldPlan::stratified(&ds, 10, 7).unwrap();
        let sizes = plan.fold_sizes();
        assert_eq!(sizes.iter().sum::<usize>(), 23);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert!(matches!(FoldPlan::stratified(&ds, 1, 0), Err(AttackError::BadFolds { .. })));
        assert!(matches!(FoldPlan::stratified(&ds, 24, 0), Err(AttackError::BadFolds { .. })));
    }

    #[test]
    fn reserved_classifiers_error() {
        let ds = toy_dataset(10);
        let plan = FoldPlan::stratified(&ds, 2, 0).unwrap();
        assert!(matches!(
            cross_validate(&ds, &Classifier::RandomForest, &plan),
            Err(AttackError::Unsupported(_))
        ));
    }

    #[test]
    fn classifier_parsing() {
        assert_eq!("knn".parse::<Classifier>().unwrap(), Classifier::Knn { k: 3 });
        assert_eq!("knn:5".parse::<Classifier>().unwrap(), Classifier::Knn { k: 5 });
        assert_eq!("nb".parse::<Classifier>().unwrap(), Classifier::NaiveBayes);
        assert!("svm".parse::<Classifier>().is_err());
    }

    #[test]
    fn tsv_ingest() {
        let tsv = "AnonID\tQuery\tQueryTime\n142\tcheap flights\t2006-03-01 07:17:12\n142\tweather\t2006-03-01\n217\tlottery results\t2006-03-02\n";
        let out = ingest_query_log_from(tsv.as_bytes(), "aol", LABEL_REAL, LogFormat::TsvQueries).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.records[0].text, "cheap flights");
        assert_eq!(out.records[0].query_id, "aol:2");
        assert_eq!(out.skipped, 0);

        let bad = "142\tcheap flights\n143\n";
        let out = ingest_query_log_from(bad.as_bytes(), "aol", LABEL_REAL, LogFormat::TsvQueries).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.skipped, 1);
        assert!(out.warnings[0].contains("line 2"));
    }

    #[test]
    fn jsonl_ingest() {
        let line = r#"{"id":"Q7","pattern":"NI","segments":["cnn.com","buy a toyota 2014"],"intent_index":1}"#;
        let out = ingest_query_log_from(line.as_bytes(), "batch", LABEL_DUMMY, LogFormat::JsonlObfuscated).unwrap();
        assert_eq!(out.records[0].query_id, "Q7");
        assert_eq!(out.records[0].text, "cnn.com, buy a toyota 2014");
        assert_eq!(out.records[0].label, LABEL_DUMMY);
    }
}
