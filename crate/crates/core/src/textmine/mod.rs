//! Text-mining pipeline: case folding, tokenization, stop-word removal,
//! stemming, n-grams and TF-IDF word vectors, plus relevance counting over
//! retrieved snippets.

mod porter;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::searchsim::{Corpus, ResultPage};

pub use porter::stem;

/// Stop words shipped with the crate.
pub const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("every document normalizes to an empty token list")]
    EmptyVocabulary,
    #[error("no documents given")]
    NoDocuments,
    #[error("intent phrase {0:?} normalizes to no tokens")]
    EmptyIntent(String),
    #[error("ngram_max must be at least 1")]
    ZeroNgram,
    #[error("cannot read stop words from {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown doc id {0:?} in result page")]
    UnknownDoc(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub lowercase: bool,
    pub stopwords: BTreeSet<String>,
    pub stem: bool,
    pub ngram_max: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            lowercase: true,
            stopwords: parse_stopwords(DEFAULT_STOPWORDS),
            stem: true,
            ngram_max: 1,
        }
    }
}

impl PipelineConfig {
    pub fn with_stopwords(mut self, words: impl IntoIterator<Item = impl Into<String>>) -> Self {
        self.stopwords = words.into_iter().map(Into::into).collect();
        self
    }

    pub fn load_stopwords(mut self, path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.stopwords = parse_stopwords(&text);
        Ok(self)
    }
}

/// Newline-delimited list; blank lines and `#` comments are ignored.
pub fn parse_stopwords(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

pub fn normalize_tokens(text: &str, config: &PipelineConfig) -> Vec<String> {
    let folded;
    let text = if config.lowercase {
        folded = text.to_lowercase();
        folded.as_str()
    } else {
        text
    };
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .filter(|t| !config.stopwords.contains(*t))
        .map(|t| if config.stem { stem(t) } else { t.to_string() })
        .collect()
}

/// Contiguous `n`-token windows joined by single spaces.
pub fn ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> Vec<String> {
    if n == 0 || tokens.len() < n {
        return Vec::new();
    }
    tokens
        .windows(n)
        .map(|w| {
            w.iter()
                .map(AsRef::as_ref)
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

/// All 1..=ngram_max grams of a token list.
pub fn terms_of(tokens: &[String], ngram_max: usize) -> Vec<String> {
    (1..=ngram_max).flat_map(|n| ngrams(tokens, n)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordVectorMatrix {
    pub terms: Vec<String>,
    pub doc_ids: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl WordVectorMatrix {
    pub fn row(&self, doc_id: &str) -> Option<&[f64]> {
        self.doc_ids
            .iter()
            .position(|d| d == doc_id)
            .map(|i| self.rows[i].as_slice())
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    pub fn weight(&self, doc_id: &str, term: &str) -> Option<f64> {
        Some(self.row(doc_id)?[self.term_index(term)?])
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "doc_id")?;
        for t in &self.terms {
            write!(out, ",{}", csv_field(t))?;
        }
        writeln!(out)?;
        for (id, row) in self.doc_ids.iter().zip(&self.rows) {
            write!(out, "{}", csv_field(id))?;
            for w in row {
                write!(out, ",{w}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// TF-IDF matrix with raw term counts and `ln(N / df)` inverse document
/// frequency. Terms are every 1..=ngram_max gram, sorted lexicographically.
pub fn build_matrix<I, S>(docs: &[(I, S)], config: &PipelineConfig) -> Result<WordVectorMatrix, TextError>
where
    I: AsRef<str>,
    S: AsRef<str>,
{
    if config.ngram_max == 0 {
        return Err(TextError::ZeroNgram);
    }
    if docs.is_empty() {
        return Err(TextError::NoDocuments);
    }
    let counts: Vec<HashMap<String, usize>> = docs
        .iter()
        .map(|(_, text)| {
            let tokens = normalize_tokens(text.as_ref(), config);
            let mut tf = HashMap::new();
            for term in terms_of(&tokens, config.ngram_max) {
                *tf.entry(term).or_insert(0) += 1;
            }
            tf
        })
        .collect();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for tf in &counts {
        for term in tf.keys() {
            *df.entry(term.as_str()).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(TextError::EmptyVocabulary);
    }
    let n = docs.len() as f64;
    let terms: Vec<String> = df.keys().map(|t| t.to_string()).collect();
    let idf: Vec<f64> = df.values().map(|&d| (n / d as f64).ln()).collect();
    let rows = counts
        .iter()
        .map(|tf| {
            terms
                .iter()
                .zip(&idf)
                .map(|(t, idf)| tf.get(t).map_or(0.0, |&c| c as f64 * idf))
                .collect()
        })
        .collect();
    Ok(WordVectorMatrix {
        terms,
        doc_ids: docs.iter().map(|(id, _)| id.as_ref().to_string()).collect(),
        rows,
    })
}

/// How a snippet is judged relevant to the intent phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelevanceMode {
    /// Every normalized intent token must appear in the snippet.
    #[default]
    TokensAll,
    /// Only the key intent token must appear; see [`key_token`].
    SingleToken,
}

impl std::str::FromStr for RelevanceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tokens-all" => Ok(RelevanceMode::TokensAll),
            "single-token" => Ok(RelevanceMode::SingleToken),
            other => Err(format!(
                "unknown relevance mode {other:?} (expected tokens-all or single-token)"
            )),
        }
    }
}

/// The longest normalized token of a phrase, first one on ties.
/// For "buy a toyota 2014" this is "toyota".
pub fn key_token(tokens: &[String]) -> Option<&String> {
    tokens
        .iter()
        .rev()
        .max_by_key(|t| t.chars().count())
}

/// Compiled relevance predicate for one intent phrase.
#[derive(Debug, Clone)]
pub struct RelevanceRule {
    required: Vec<String>,
    config: PipelineConfig,
}

impl RelevanceRule {
    pub fn new(intent_phrase: &str, mode: RelevanceMode, config: &PipelineConfig) -> Result<Self, TextError> {
        let tokens = normalize_tokens(intent_phrase, config);
        let required = match mode {
            RelevanceMode::TokensAll => {
                let set: BTreeSet<String> = tokens.into_iter().collect();
                set.into_iter().collect::<Vec<_>>()
            }
            RelevanceMode::SingleToken => key_token(&tokens).cloned().into_iter().collect(),
        };
        if required.is_empty() {
            return Err(TextError::EmptyIntent(intent_phrase.to_string()));
        }
        Ok(Self {
            required,
            config: config.clone(),
        })
    }

    pub fn required_tokens(&self) -> &[String] {
        &self.required
    }

    pub fn matches(&self, text: &str) -> bool {
        let tokens: HashSet<String> = normalize_tokens(text, &self.config).into_iter().collect();
        self.required.iter().all(|t| tokens.contains(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceCount {
    pub retrieved: usize,
    pub relevant: usize,
}

/// Retrieved and relevant snippet counts per query id. A snippet's text is
/// its title followed by its snippet body.
pub fn relevance_count(
    pages: &[ResultPage],
    corpus: &Corpus,
    intent_phrase: &str,
    config: &PipelineConfig,
    mode: RelevanceMode,
) -> Result<BTreeMap<String, RelevanceCount>, TextError> {
    let rule = RelevanceRule::new(intent_phrase, mode, config)?;
    let mut out = BTreeMap::new();
    for page in pages {
        let mut relevant = 0;
        for hit in &page.hits {
            let doc = corpus
                .get(&hit.doc_id)
                .ok_or_else(|| TextError::UnknownDoc(hit.doc_id.clone()))?;
            if rule.matches(&doc.text()) {
                relevant += 1;
            }
        }
        out.insert(
            page.query_id.clone(),
            RelevanceCount {
                retrieved: page.hits.len(),
                relevant,
            },
        );
    }
    Ok(out)
}
