//! Deterministic stand-in for a web search engine and its ad network.
//!
//! [`Corpus`] ranks snippets by the summed TF-IDF weight of the query's
//! distinct tokens (same weighting as [`crate::textmine::build_matrix`]).
//! [`AdInventory`] serves ads conditioned only on a [`PseudoProfile`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::obfuscator::ObfuscatedQuery;
use crate::session::PseudoProfile;
use crate::textmine::{normalize_tokens, PipelineConfig};

pub const MAX_SNIPPET_CHARS: usize = 400;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("query {0:?} has no searchable tokens")]
    EmptyQuery(String),
    #[error("top_k must be at least 1")]
    ZeroTopK,
    #[error("ad inventory is empty")]
    EmptyInventory,
    #[error("requested zero ads")]
    ZeroAds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub id: String,
    #[serde(default)]
    pub url: String,
    #[serde(default)]
    pub title: String,
    pub snippet: String,
    #[serde(default)]
    pub categories: Vec<String>,
}

impl CorpusDoc {
    /// Searchable text: title then snippet.
    pub fn text(&self) -> String {
        if self.title.is_empty() {
            self.snippet.clone()
        } else {
            format!("{} {}", self.title, self.snippet)
        }
    }

    fn validate(&self, line: usize) -> Result<(), SearchError> {
        let bad = |reason: &str| SearchError::Malformed {
            line,
            reason: reason.to_string(),
        };
        if self.id.trim().is_empty() {
            return Err(bad("empty id"));
        }
        if self.snippet.trim().is_empty() {
            return Err(bad("empty snippet"));
        }
        if self.snippet.chars().count() > MAX_SNIPPET_CHARS {
            return Err(bad("snippet longer than 400 characters"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Hit {
    pub doc_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultPage {
    pub query_id: String,
    pub hits: Vec<Hit>,
    pub top_k: usize,
}

impl ResultPage {
    pub fn contains(&self, doc_id: &str) -> bool {
        self.hits.iter().any(|h| h.doc_id == doc_id)
    }
}

#[derive(Debug, Clone, Copy)]
struct Posting {
    doc: usize,
    tf: u32,
}

/// Anything that turns query text into a ranked page of snippets. Only the
/// corpus-backed engine ships; a live adapter would implement this too.
pub trait SearchBackend {
    fn search(&self, query_id: &str, query_text: &str, top_k: usize) -> Result<ResultPage, SearchError>;
    fn document(&self, doc_id: &str) -> Option<&CorpusDoc>;
}

#[derive(Debug, Clone)]
pub struct Corpus {
    docs: Vec<CorpusDoc>,
    by_id: HashMap<String, usize>,
    index: BTreeMap<String, Vec<Posting>>,
    config: PipelineConfig,
}

impl Corpus {
    pub fn from_docs(docs: Vec<CorpusDoc>, config: PipelineConfig) -> Result<Self, SearchError> {
        let mut by_id = HashMap::with_capacity(docs.len());
        for (i, doc) in docs.iter().enumerate() {
            doc.validate(i + 1)?;
            if by_id.insert(doc.id.clone(), i).is_some() {
                return Err(SearchError::DuplicateId {
                    line: i + 1,
                    id: doc.id.clone(),
                });
            }
        }
        let mut index: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        for (i, doc) in docs.iter().enumerate() {
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for tok in normalize_tokens(&doc.text(), &config) {
                *tf.entry(tok).or_insert(0) += 1;
            }
            for (term, count) in tf {
                index.entry(term).or_default().push(Posting { doc: i, tf: count });
            }
        }
        Ok(Self {
            docs,
            by_id,
            index,
            config,
        })
    }

    pub fn from_jsonl(reader: impl BufRead, config: PipelineConfig) -> Result<Self, SearchError> {
        let mut docs = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| SearchError::Malformed {
                line: line_no,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: CorpusDoc = serde_json::from_str(&line).map_err(|e| SearchError::Malformed {
                line: line_no,
                reason: e.to_string(),
            })?;
            doc.validate(line_no)?;
            if !seen.insert(doc.id.clone()) {
                return Err(SearchError::DuplicateId {
                    line: line_no,
                    id: doc.id,
                });
            }
            docs.push(doc);
        }
        Self::from_docs(docs, config)
    }

    pub fn load(path: impl AsRef<Path>, config: PipelineConfig) -> Result<Self, SearchError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| SearchError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(BufReader::new(file), config)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn docs(&self) -> &[CorpusDoc] {
        &self.docs
    }

    pub fn get(&self, id: &str) -> Option<&CorpusDoc> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn term_count(&self) -> usize {
        self.index.len()
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.index.get(term).map_or(0, Vec::len)
    }

    pub fn idf(&self, term: &str) -> f64 {
        match self.doc_freq(term) {
            0 => 0.0,
            df => (self.docs.len() as f64 / df as f64).ln(),
        }
    }

    /// Distinct normalized query tokens in sorted order.
    pub fn query_terms(&self, text: &str) -> Vec<String> {
        let mut terms = normalize_tokens(text, &self.config);
        terms.sort();
        terms.dedup();
        terms
    }

    pub fn search_text(&self, query_id: &str, text: &str, top_k: usize) -> Result<ResultPage, SearchError> {
        if top_k == 0 {
            return Err(SearchError::ZeroTopK);
        }
        let terms = self.query_terms(text);
        if terms.is_empty() {
            return Err(SearchError::EmptyQuery(query_id.to_string()));
        }
        let mut scores: HashMap<usize, f64> = HashMap::new();
        for term in &terms {
            let Some(postings) = self.index.get(term) else {
                continue;
            };
            let idf = (self.docs.len() as f64 / postings.len() as f64).ln();
            for p in postings {
                *scores.entry(p.doc).or_insert(0.0) += p.tf as f64 * idf;
            }
        }
        let mut hits: Vec<Hit> = scores
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(doc, score)| Hit {
                doc_id: self.docs[doc].id.clone(),
                score,
            })
            .collect();
        hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.doc_id.cmp(&b.doc_id)));
        hits.truncate(top_k);
        Ok(ResultPage {
            query_id: query_id.to_string(),
            hits,
            top_k,
        })
    }

    /// Runs the rendered obfuscated query as one search.
    pub fn execute(&self, query: &ObfuscatedQuery, top_k: usize) -> Result<ResultPage, SearchError> {
        self.search_text(&query.id, &query.render(), top_k)
    }
}

impl SearchBackend for Corpus {
    fn search(&self, query_id: &str, query_text: &str, top_k: usize) -> Result<ResultPage, SearchError> {
        self.search_text(query_id, query_text, top_k)
    }

    fn document(&self, doc_id: &str) -> Option<&CorpusDoc> {
        self.get(doc_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ad {
    pub id: String,
    pub text: String,
    pub category: String,
    #[serde(default)]
    pub specific_tags: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct AdInventory {
    ads: Vec<Ad>,
    by_category: BTreeMap<String, Vec<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdDraw {
    pub ads: Vec<Ad>,
    /// Profile categories that had no ads and were ignored.
    pub warnings: Vec<String>,
}

impl AdInventory {
    pub fn new(ads: Vec<Ad>) -> Result<Self, SearchError> {
        if ads.is_empty() {
            return Err(SearchError::EmptyInventory);
        }
        let mut by_category: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut seen = HashSet::new();
        for (i, ad) in ads.iter().enumerate() {
            if !seen.insert(ad.id.as_str()) {
                return Err(SearchError::DuplicateId {
                    line: i + 1,
                    id: ad.id.clone(),
                });
            }
            by_category.entry(ad.category.clone()).or_default().push(i);
        }
        Ok(Self { ads, by_category })
    }

    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, SearchError> {
        let mut ads = Vec::new();
        let mut seen = HashSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line.map_err(|e| SearchError::Malformed {
                line: line_no,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let ad: Ad = serde_json::from_str(&line).map_err(|e| SearchError::Malformed {
                line: line_no,
                reason: e.to_string(),
            })?;
            if !seen.insert(ad.id.clone()) {
                return Err(SearchError::DuplicateId {
                    line: line_no,
                    id: ad.id,
                });
            }
            ads.push(ad);
        }
        Self::new(ads)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SearchError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| SearchError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_jsonl(BufReader::new(file))
    }

    pub fn ads(&self) -> &[Ad] {
        &self.ads
    }

    pub fn get(&self, id: &str) -> Option<&Ad> {
        self.ads.iter().find(|a| a.id == id)
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.by_category.keys().map(String::as_str)
    }

    /// Draws `n` ads with replacement. The category is chosen in proportion
    /// to the profile's weight on it (uniformly when the profile puts no
    /// weight on any stocked category), then an ad uniformly within it.
    pub fn sample<R: Rng + ?Sized>(
        &self,
        profile: &PseudoProfile,
        n: usize,
        rng: &mut R,
    ) -> Result<AdDraw, SearchError> {
        if n == 0 {
            return Err(SearchError::ZeroAds);
        }
        let warnings: Vec<String> = profile
            .category_weights
            .iter()
            .filter(|(c, w)| **w > 0 && !self.by_category.contains_key(*c))
            .map(|(c, _)| format!("profile category {c:?} has no ads; ignored"))
            .collect();
        for w in &warnings {
            log::warn!("{w}");
        }
        let cats: Vec<&Vec<usize>> = self.by_category.values().collect();
        let weights: Vec<u64> = self
            .by_category
            .keys()
            .map(|c| profile.category_weights.get(c).copied().unwrap_or(0))
            .collect();
        let chooser = if weights.iter().any(|&w| w > 0) {
            WeightedIndex::new(&weights).expect("non-zero weights")
        } else {
            WeightedIndex::new(vec![1u64; cats.len()]).expect("non-empty inventory")
        };
        let ads = (0..n)
            .map(|_| {
                let members = cats[chooser.sample(rng)];
                self.ads[members[rng.gen_range(0..members.len())]].clone()
            })
            .collect();
        Ok(AdDraw { ads, warnings })
    }
}
