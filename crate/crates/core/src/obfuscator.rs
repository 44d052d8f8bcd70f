//! Query-type permutations and obfuscated query assembly.
//!
//! An obfuscated query is the user's intent phrase embedded among decoy
//! keywords, one decoy per query type in a [`CategoryPattern`], executed as a
//! single comma-separated query string.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Lexicon, LexiconError, QueryCategory, SEGMENT_SEPARATOR};

/// Largest `n` for which `n!` fits in a `u64`.
pub const MAX_PERMUTATION_N: u64 = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PatternError {
    #[error("arrangement length {k} exceeds set size {n}")]
    KExceedsN { n: u64, k: u64 },
    #[error("set size {0} exceeds the supported maximum of 20")]
    Overflow(u64),
    #[error("unknown category letter {letter:?} in {token:?}")]
    UnknownLetter { token: String, letter: char },
    #[error("category {letter} repeated in {token:?}")]
    RepeatedLetter { token: String, letter: char },
    #[error("pattern {0:?} listed more than once")]
    DuplicateToken(String),
    #[error("empty pattern")]
    Empty,
    #[error("arrangement length {k} out of range 1..={n}")]
    KOutOfRange { n: usize, k: usize },
}

#[derive(Debug, Error)]
pub enum ObfuscationError {
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("intent phrase is empty")]
    EmptyIntent,
    #[error("per_pattern must be at least 1")]
    ZeroMultiplicity,
}

/// Arity of a partial permutation: arrangements of `k` out of `n` items.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationArity {
    n: u64,
    k: u64,
}

impl PermutationArity {
    pub fn new(n: u64, k: u64) -> Result<Self, PatternError> {
        if k > n {
            return Err(PatternError::KExceedsN { n, k });
        }
        if n > MAX_PERMUTATION_N {
            return Err(PatternError::Overflow(n));
        }
        Ok(Self { n, k })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn k(&self) -> u64 {
        self.k
    }
}

/// `n! / (n - k)!`, computed as the falling factorial.
pub fn count_permutations(arity: PermutationArity) -> u64 {
    (arity.n - arity.k + 1..=arity.n).product()
}

pub fn factorial(n: u64) -> Result<u64, PatternError> {
    PermutationArity::new(n, n).map(count_permutations)
}

/// Ordered, duplicate-free sequence of query types, e.g. `NITP`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CategoryPattern(Vec<QueryCategory>);

impl CategoryPattern {
    pub fn new(categories: Vec<QueryCategory>) -> Result<Self, PatternError> {
        let token: String = categories.iter().map(|c| c.tag()).collect();
        if categories.is_empty() {
            return Err(PatternError::Empty);
        }
        let mut seen = HashSet::new();
        for c in &categories {
            if !seen.insert(*c) {
                return Err(PatternError::RepeatedLetter {
                    token,
                    letter: c.tag(),
                });
            }
        }
        Ok(Self(categories))
    }

    pub fn categories(&self) -> &[QueryCategory] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, c: QueryCategory) -> bool {
        self.0.contains(&c)
    }
}

impl fmt::Display for CategoryPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.0 {
            write!(f, "{}", c.tag())?;
        }
        Ok(())
    }
}

impl FromStr for CategoryPattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let token = s.trim();
        if token.is_empty() {
            return Err(PatternError::Empty);
        }
        let mut cats = Vec::with_capacity(token.len());
        for letter in token.chars() {
            let c = QueryCategory::from_tag(letter).ok_or_else(|| PatternError::UnknownLetter {
                token: token.to_string(),
                letter,
            })?;
            if cats.contains(&c) {
                return Err(PatternError::RepeatedLetter {
                    token: token.to_string(),
                    letter,
                });
            }
            cats.push(c);
        }
        Ok(Self(cats))
    }
}

impl Serialize for CategoryPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CategoryPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All ordered duplicate-free arrangements of `k` categories drawn from
/// `categories`, sorted by tag sequence.
pub fn enumerate_arrangements(
    categories: &BTreeSet<QueryCategory>,
    k: usize,
) -> Result<Vec<CategoryPattern>, PatternError> {
    let items: Vec<QueryCategory> = categories.iter().copied().collect();
    if k == 0 || k > items.len() {
        return Err(PatternError::KOutOfRange { n: items.len(), k });
    }
    fn extend(
        items: &[QueryCategory],
        k: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<QueryCategory>,
        out: &mut Vec<CategoryPattern>,
    ) {
        if current.len() == k {
            out.push(CategoryPattern(current.clone()));
            return;
        }
        for i in 0..items.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            current.push(items[i]);
            extend(items, k, used, current, out);
            current.pop();
            used[i] = false;
        }
    }
    let mut out = Vec::new();
    extend(&items, k, &mut vec![false; items.len()], &mut Vec::with_capacity(k), &mut out);
    Ok(out)
}

/// Parses a comma-separated pattern list such as `I,IT,IP,NITPL`.
pub fn parse_pattern_set(spec: &str) -> Result<Vec<CategoryPattern>, PatternError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for token in spec.split(',') {
        let pattern: CategoryPattern = token.parse()?;
        if !seen.insert(pattern.clone()) {
            return Err(PatternError::DuplicateToken(token.trim().to_string()));
        }
        out.push(pattern);
    }
    Ok(out)
}

/// The query-type list used in the original Toyota experiment.
pub const STANDARD_PATTERNS: &str = "I,IT,IP,TP,IL,NI,NIT,NIP,IPL,ITP,NITP,ITPL,NIPL,NITL,NITPL";

fn domain_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b[a-z0-9-]+\.(com|org|net|edu|gov|io|co|info|biz|uk|us|ke)\b").unwrap()
    })
}

fn year_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(1[89]|20)\d{2}\b").unwrap())
}

const QUESTION_WORDS: &[&str] = &[
    "who", "what", "when", "where", "why", "how", "which", "can", "should", "is", "are", "does", "do",
];

/// Assigns a query type. Lexicon keywords keep their stored category;
/// anything else goes through the rule cascade domain → transactional verb
/// → year → question/long phrase → informational.
pub fn categorize(phrase: &str, lexicon: &Lexicon) -> QueryCategory {
    if let Some(kw) = lexicon.find(phrase) {
        return kw.category;
    }
    let lower = phrase.trim().to_lowercase();
    let tokens: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric() && c != '.' && c != '-')
        .filter(|t| !t.is_empty())
        .collect();
    if domain_re().is_match(&lower) {
        return QueryCategory::N;
    }
    if tokens.first().is_some_and(|t| lexicon.verbs().contains(t)) {
        return QueryCategory::T;
    }
    if year_re().is_match(&lower) {
        return QueryCategory::P;
    }
    if tokens.first().is_some_and(|t| QUESTION_WORDS.contains(t))
        || lower.ends_with('?')
        || tokens.len() >= 5
    {
        return QueryCategory::L;
    }
    QueryCategory::I
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentQuery {
    pub phrase: String,
    pub root_verb: Option<String>,
    pub category: QueryCategory,
}

impl IntentQuery {
    /// Categorizes the phrase and picks its leading verb, if the verb graph
    /// knows it.
    pub fn new(phrase: &str, lexicon: &Lexicon) -> Result<Self, ObfuscationError> {
        let phrase = phrase.trim();
        if phrase.is_empty() {
            return Err(ObfuscationError::EmptyIntent);
        }
        let first = phrase
            .split_whitespace()
            .next()
            .map(str::to_lowercase)
            .filter(|v| lexicon.verbs().contains(v));
        Ok(Self {
            phrase: phrase.to_string(),
            root_verb: first,
            category: categorize(phrase, lexicon),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObfuscatedQuery {
    pub id: String,
    pub pattern: CategoryPattern,
    pub segments: Vec<String>,
    pub intent_index: usize,
    /// The pattern lacked the intent's category, so the intent was appended.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub intent_appended: bool,
}

impl ObfuscatedQuery {
    /// Single query string as sent to the engine.
    pub fn render(&self) -> String {
        self.segments.join(SEGMENT_SEPARATOR)
    }

    pub fn intent_phrase(&self) -> &str {
        &self.segments[self.intent_index]
    }

    pub fn decoys(&self) -> impl Iterator<Item = &str> {
        self.segments
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != self.intent_index)
            .map(|(_, s)| s.as_str())
    }

    /// The unobfuscated query: the intent alone under its own category.
    pub fn original(id: impl Into<String>, intent: &IntentQuery) -> Self {
        Self {
            id: id.into(),
            pattern: CategoryPattern(vec![intent.category]),
            segments: vec![intent.phrase.clone()],
            intent_index: 0,
            intent_appended: false,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("query serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssembleOptions {
    /// Swap a decoy's leading verb for a synonym of the intent's root verb.
    pub verb_substitution: bool,
    pub max_verb_degree: usize,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        Self {
            verb_substitution: true,
            max_verb_degree: 2,
        }
    }
}

fn substitute_verb<R: Rng + ?Sized>(
    decoy: &str,
    intent: &IntentQuery,
    lexicon: &Lexicon,
    options: &AssembleOptions,
    rng: &mut R,
) -> Result<String, ObfuscationError> {
    let Some(root) = intent.root_verb.as_deref() else {
        return Ok(decoy.to_string());
    };
    let mut words = decoy.splitn(2, ' ');
    let head = words.next().unwrap_or_default();
    let rest = words.next();
    if !lexicon.verbs().contains(&head.to_lowercase()) {
        return Ok(decoy.to_string());
    }
    let related = lexicon.related_verbs(root, options.max_verb_degree)?;
    let Some(verb) = related.choose(rng) else {
        return Ok(decoy.to_string());
    };
    let verb = if head.starts_with(|c: char| c.is_uppercase()) {
        let mut chars = verb.chars();
        chars
            .next()
            .map(|c| c.to_uppercase().chain(chars).collect())
            .unwrap_or_default()
    } else {
        verb.clone()
    };
    Ok(match rest {
        Some(rest) => format!("{verb} {rest}"),
        None => verb,
    })
}

/// Builds one obfuscated query: a decoy per pattern category, with the
/// intent phrase in its own category's slot (or appended last when the
/// pattern lacks that category).
pub fn assemble_query<R: Rng + ?Sized>(
    id: impl Into<String>,
    intent: &IntentQuery,
    pattern: &CategoryPattern,
    lexicon: &Lexicon,
    options: &AssembleOptions,
    rng: &mut R,
) -> Result<ObfuscatedQuery, ObfuscationError> {
    let mut segments = Vec::with_capacity(pattern.len() + 1);
    let mut used: Vec<String> = vec![intent.phrase.clone()];
    let mut intent_index = None;
    for &category in pattern.categories() {
        if category == intent.category && intent_index.is_none() {
            intent_index = Some(segments.len());
            segments.push(intent.phrase.clone());
            continue;
        }
        let exclude: Vec<&str> = used.iter().map(String::as_str).collect();
        let decoy = lexicon
            .decoy_candidates_excluding(category, 1, &exclude, rng)?
            .remove(0)
            .text;
        let decoy = if options.verb_substitution {
            let swapped = substitute_verb(&decoy, intent, lexicon, options, rng)?;
            if swapped.eq_ignore_ascii_case(&intent.phrase) {
                decoy
            } else {
                swapped
            }
        } else {
            decoy
        };
        used.push(decoy.clone());
        segments.push(decoy);
    }
    let intent_appended = intent_index.is_none();
    let intent_index = intent_index.unwrap_or_else(|| {
        segments.push(intent.phrase.clone());
        segments.len() - 1
    });
    Ok(ObfuscatedQuery {
        id: id.into(),
        pattern: pattern.clone(),
        segments,
        intent_index,
        intent_appended,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchOptions {
    pub per_pattern: usize,
    /// Append the bare intent query after the permuted ones.
    pub include_original: bool,
    pub assemble: AssembleOptions,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            per_pattern: 1,
            include_original: false,
            assemble: AssembleOptions::default(),
        }
    }
}

/// `patterns.len() * per_pattern` queries (plus the original, if requested)
/// with ids `Q1..Qn`. Each query draws from its own generator seeded from
/// `rng`, so a query's content depends only on its position in the batch.
pub fn generate_batch<R: Rng + ?Sized>(
    intent: &IntentQuery,
    patterns: &[CategoryPattern],
    lexicon: &Lexicon,
    options: &BatchOptions,
    rng: &mut R,
) -> Result<Vec<ObfuscatedQuery>, ObfuscationError> {
    if options.per_pattern == 0 {
        return Err(ObfuscationError::ZeroMultiplicity);
    }
    let mut out = Vec::with_capacity(patterns.len() * options.per_pattern + 1);
    for pattern in patterns {
        for _ in 0..options.per_pattern {
            let mut query_rng = ChaCha8Rng::seed_from_u64(rng.gen());
            let id = format!("Q{}", out.len() + 1);
            out.push(assemble_query(
                id,
                intent,
                pattern,
                lexicon,
                &options.assemble,
                &mut query_rng,
            )?);
        }
    }
    if options.include_original {
        let id = format!("Q{}", out.len() + 1);
        out.push(ObfuscatedQuery::original(id, intent));
    }
    Ok(out)
}
