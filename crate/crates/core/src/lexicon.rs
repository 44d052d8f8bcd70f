//! Keyword pools used to build obfuscated queries.
//!
//! A [`Lexicon`] holds decoy keywords grouped by query type together with a
//! small synonym graph over verbs. Both are loaded from a JSON file and are
//! immutable afterwards; random draws take a caller-owned RNG.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Segment separator used when rendering an obfuscated query. Keywords may
/// not contain it, otherwise a rendered query could not be split back.
pub const SEGMENT_SEPARATOR: &str = ", ";

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("schema violation at {field}: {reason}")]
    Schema { field: String, reason: String },
    #[error("duplicate keyword {text:?} in category {category}")]
    DuplicateKeyword { text: String, category: QueryCategory },
    #[error("verb edge ({0}, {0}) is a self-loop")]
    SelfLoop(String),
    #[error("duplicate verb edge ({0}, {1})")]
    DuplicateEdge(String, String),
    #[error("unknown verb {0:?}")]
    UnknownVerb(String),
    #[error("category {0} has no keywords")]
    EmptyCategory(QueryCategory),
    #[error("requested {requested} keywords from category {category} but only {available} are available")]
    NotEnoughKeywords {
        category: QueryCategory,
        requested: usize,
        available: usize,
    },
    #[error("max_degree must be at least 1")]
    ZeroDegree,
}

/// The five query types. Ordering follows the tag letter so that sorted
/// pattern lists come out lexicographic (`I < L < N < P < T`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum QueryCategory {
    /// Informational.
    I,
    /// Natural-language.
    L,
    /// Navigational.
    N,
    /// Temporal.
    P,
    /// Transactional.
    T,
}

impl QueryCategory {
    pub const ALL: [QueryCategory; 5] = [
        QueryCategory::I,
        QueryCategory::L,
        QueryCategory::N,
        QueryCategory::P,
        QueryCategory::T,
    ];

    pub fn tag(self) -> char {
        match self {
            QueryCategory::I => 'I',
            QueryCategory::L => 'L',
            QueryCategory::N => 'N',
            QueryCategory::P => 'P',
            QueryCategory::T => 'T',
        }
    }

    pub fn from_tag(c: char) -> Option<Self> {
        match c {
            'I' => Some(QueryCategory::I),
            'L' => Some(QueryCategory::L),
            'N' => Some(QueryCategory::N),
            'P' => Some(QueryCategory::P),
            'T' => Some(QueryCategory::T),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            QueryCategory::I => "informational",
            QueryCategory::L => "natural-language",
            QueryCategory::N => "navigational",
            QueryCategory::P => "temporal",
            QueryCategory::T => "transactional",
        }
    }
}

impl fmt::Display for QueryCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.tag())
    }
}

impl FromStr for QueryCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => {
                QueryCategory::from_tag(c).ok_or_else(|| format!("unknown category {s:?}"))
            }
            _ => Err(format!("unknown category {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub text: String,
    pub category: QueryCategory,
    /// Relative prominence; selection probability is proportional to it.
    pub visibility: f64,
    #[serde(default)]
    pub topic: String,
}

/// Undirected simple graph of verb synonyms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerbGraph {
    adjacency: BTreeMap<String, BTreeSet<String>>,
}

impl VerbGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_verb(&mut self, verb: &str) {
        self.adjacency.entry(verb.to_string()).or_default();
    }

    pub fn add_edge(&mut self, a: &str, b: &str) -> Result<(), LexiconError> {
        if a == b {
            return Err(LexiconError::SelfLoop(a.to_string()));
        }
        if self.adjacency.get(a).is_some_and(|n| n.contains(b)) {
            return Err(LexiconError::DuplicateEdge(a.to_string(), b.to_string()));
        }
        self.adjacency
            .entry(a.to_string())
            .or_default()
            .insert(b.to_string());
        self.adjacency
            .entry(b.to_string())
            .or_default()
            .insert(a.to_string());
        Ok(())
    }

    pub fn contains(&self, verb: &str) -> bool {
        self.adjacency.contains_key(verb)
    }

    pub fn verbs(&self) -> impl Iterator<Item = &str> {
        self.adjacency.keys().map(String::as_str)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Shortest-path distances from `root` up to `max_degree` hops.
    pub fn distances(&self, root: &str, max_degree: usize) -> Option<BTreeMap<&str, usize>> {
        let (root_key, _) = self.adjacency.get_key_value(root)?;
        let mut dist: BTreeMap<&str, usize> = BTreeMap::new();
        dist.insert(root_key.as_str(), 0);
        let mut queue = VecDeque::from([root_key.as_str()]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v];
            if d == max_degree {
                continue;
            }
            for n in &self.adjacency[v] {
                if !dist.contains_key(n.as_str()) {
                    dist.insert(n.as_str(), d + 1);
                    queue.push_back(n.as_str());
                }
            }
        }
        Some(dist)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    keywords: BTreeMap<QueryCategory, Vec<Keyword>>,
    verbs: VerbGraph,
}

#[derive(Deserialize)]
struct RawLexicon {
    keywords: Vec<serde_json::Value>,
    #[serde(default)]
    verbs: Vec<RawEdge>,
    /// Verbs with no synonym links.
    #[serde(default)]
    isolated_verbs: Vec<String>,
}

#[derive(Deserialize)]
struct RawEdge {
    a: String,
    b: String,
}

#[derive(Serialize)]
struct LexiconFile<'a> {
    keywords: Vec<&'a Keyword>,
    verbs: Vec<EdgeOut<'a>>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    isolated_verbs: Vec<&'a str>,
}

#[derive(Serialize)]
struct EdgeOut<'a> {
    a: &'a str,
    b: &'a str,
}

fn schema(field: impl Into<String>, reason: impl Into<String>) -> LexiconError {
    LexiconError::Schema {
        field: field.into(),
        reason: reason.into(),
    }
}

fn parse_keyword(index: usize, value: &serde_json::Value) -> Result<Keyword, LexiconError> {
    let field = |name: &str| format!("keywords[{index}].{name}");
    let obj = value
        .as_object()
        .ok_or_else(|| schema(format!("keywords[{index}]"), "expected an object"))?;
    let text = obj
        .get("text")
        .and_then(|v| v.as_str())
        .ok_or_else(|| schema(field("text"), "missing or not a string"))?;
    if text.trim().is_empty() {
        return Err(schema(field("text"), "keyword text is empty"));
    }
    if text.contains(SEGMENT_SEPARATOR) {
        return Err(schema(
            field("text"),
            format!("keyword text may not contain {SEGMENT_SEPARATOR:?}"),
        ));
    }
    let category = obj
        .get("category")
        .and_then(|v| v.as_str())
        .ok_or_else(|| schema(field("category"), "missing or not a string"))?
        .parse::<QueryCategory>()
        .map_err(|e| schema(field("category"), e))?;
    let visibility = obj
        .get("visibility")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| schema(field("visibility"), "missing or not a number"))?;
    if !(visibility >= 0.0 && visibility.is_finite()) {
        return Err(schema(field("visibility"), "must be a finite number >= 0"));
    }
    let topic = match obj.get("topic") {
        None => String::new(),
        Some(v) => v
            .as_str()
            .ok_or_else(|| schema(field("topic"), "not a string"))?
            .to_string(),
    };
    Ok(Keyword {
        text: text.trim().to_string(),
        category,
        visibility,
        topic,
    })
}

impl Lexicon {
    pub fn from_parts(keywords: Vec<Keyword>, verbs: VerbGraph) -> Result<Self, LexiconError> {
        let mut grouped: BTreeMap<QueryCategory, Vec<Keyword>> = BTreeMap::new();
        let mut seen: HashSet<(QueryCategory, String)> = HashSet::new();
        for kw in keywords {
            if kw.text.trim().is_empty() {
                return Err(schema("keywords.text", "keyword text is empty"));
            }
            if !seen.insert((kw.category, kw.text.to_lowercase())) {
                return Err(LexiconError::DuplicateKeyword {
                    text: kw.text,
                    category: kw.category,
                });
            }
            grouped.entry(kw.category).or_default().push(kw);
        }
        Ok(Lexicon {
            keywords: grouped,
            verbs,
        })
    }

    pub fn from_json_str(json: &str) -> Result<Self, LexiconError> {
        let raw: RawLexicon = serde_json::from_str(json).map_err(|e| schema("<root>", e.to_string()))?;
        let keywords = raw
            .keywords
            .iter()
            .enumerate()
            .map(|(i, v)| parse_keyword(i, v))
            .collect::<Result<Vec<_>, _>>()?;
        let mut verbs = VerbGraph::new();
        for (i, edge) in raw.verbs.iter().enumerate() {
            let a = edge.a.trim().to_lowercase();
            let b = edge.b.trim().to_lowercase();
            if a.is_empty() || b.is_empty() {
                return Err(schema(format!("verbs[{i}]"), "verb lemma is empty"));
            }
            verbs.add_edge(&a, &b)?;
        }
        for v in &raw.isolated_verbs {
            verbs.add_verb(&v.trim().to_lowercase());
        }
        Self::from_parts(keywords, verbs)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        let mut edges = Vec::new();
        let mut isolated = Vec::new();
        for (a, ns) in &self.verbs.adjacency {
            if ns.is_empty() {
                isolated.push(a.as_str());
            }
            for b in ns.iter().filter(|b| a < *b) {
                edges.push(EdgeOut { a, b });
            }
        }
        let file = LexiconFile {
            keywords: self.keywords.values().flatten().collect(),
            verbs: edges,
            isolated_verbs: isolated,
        };
        serde_json::to_string_pretty(&file).expect("lexicon serializes")
    }

    pub fn verbs(&self) -> &VerbGraph {
        &self.verbs
    }

    pub fn keywords(&self, category: QueryCategory) -> &[Keyword] {
        self.keywords.get(&category).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn non_empty_categories(&self) -> Vec<QueryCategory> {
        self.keywords
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(c, _)| *c)
            .collect()
    }

    pub fn all_keywords(&self) -> impl Iterator<Item = &Keyword> {
        self.keywords.values().flatten()
    }

    /// Case-insensitive exact lookup of a phrase among all keywords.
    pub fn find(&self, phrase: &str) -> Option<&Keyword> {
        let needle = phrase.trim().to_lowercase();
        self.all_keywords().find(|k| k.text.to_lowercase() == needle)
    }

    /// Verbs within `max_degree` hops of `root`, ordered by
    /// (distance, lemma). The root itself is excluded.
    pub fn related_verbs(&self, root: &str, max_degree: usize) -> Result<Vec<String>, LexiconError> {
        if max_degree == 0 {
            return Err(LexiconError::ZeroDegree);
        }
        let root = root.trim().to_lowercase();
        let dist = self
            .verbs
            .distances(&root, max_degree)
            .ok_or_else(|| LexiconError::UnknownVerb(root.clone()))?;
        let mut out: Vec<(usize, &str)> = dist
            .into_iter()
            .filter(|(_, d)| *d > 0)
            .map(|(v, d)| (d, v))
            .collect();
        out.sort();
        Ok(out.into_iter().map(|(_, v)| v.to_string()).collect())
    }

    pub fn decoy_candidates<R: Rng + ?Sized>(
        &self,
        category: QueryCategory,
        count: usize,
        rng: &mut R,
    ) -> Result<Vec<Keyword>, LexiconError> {
        self.decoy_candidates_excluding(category, count, &[], rng)
    }

    /// Draws `count` distinct keywords without replacement, each step picking
    /// with probability proportional to visibility. Keywords whose text
    /// matches one of `exclude` (case-insensitive) are never returned.
    pub fn decoy_candidates_excluding<R: Rng + ?Sized>(
        &self,
        category: QueryCategory,
        count: usize,
        exclude: &[&str],
        rng: &mut R,
    ) -> Result<Vec<Keyword>, LexiconError> {
        let all = self.keywords(category);
        if all.is_empty() {
            return Err(LexiconError::EmptyCategory(category));
        }
        let excluded: HashSet<String> = exclude.iter().map(|s| s.trim().to_lowercase()).collect();
        let mut pool: Vec<&Keyword> = all
            .iter()
            .filter(|k| !excluded.contains(&k.text.to_lowercase()))
            .collect();
        if count > pool.len() {
            return Err(LexiconError::NotEnoughKeywords {
                category,
                requested: count,
                available: pool.len(),
            });
        }
        let mut picked = Vec::with_capacity(count);
        for _ in 0..count {
            let total: f64 = pool.iter().map(|k| k.visibility).sum();
            let idx = if total > 0.0 {
                let mut target = rng.gen::<f64>() * total;
                let mut chosen = None;
                for (i, k) in pool.iter().enumerate() {
                    if k.visibility <= 0.0 {
                        continue;
                    }
                    if target < k.visibility {
                        chosen = Some(i);
                        break;
                    }
                    target -= k.visibility;
                }
                // rounding can leave target just past the last weight
                chosen.unwrap_or_else(|| {
                    pool.iter()
                        .rposition(|k| k.visibility > 0.0)
                        .expect("positive total implies a positive weight")
                })
            } else {
                rng.gen_range(0..pool.len())
            };
            picked.push(pool.remove(idx).clone());
        }
        Ok(picked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig5_graph() -> Lexicon {
        Lexicon::from_json_str(
            r#"{
                "keywords": [
                    {"text": "shoes.com", "category": "N", "visibility": 1.0, "topic": "fashion"},
                    {"text": "western civilization", "category": "I", "visibility": 1.0, "topic": "education"}
                ],
                "verbs": [
                    {"a": "buy", "b": "purchase"},
                    {"a": "buy", "b": "get"},
                    {"a": "get", "b": "obtain"}
                ],
                "isolated_verbs": ["sell"]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn related_verbs_by_degree() {
        let lex = fig5_graph();
        assert_eq!(lex.related_verbs("buy", 2).unwrap(), ["get", "purchase", "obtain"]);
        assert_eq!(lex.related_verbs("buy", 1).unwrap(), ["get", "purchase"]);
        assert!(lex.related_verbs("sell", 2).unwrap().is_empty());
        assert!(matches!(
            lex.related_verbs("fly", 1),
            Err(LexiconError::UnknownVerb(_))
        ));
        assert!(matches!(lex.related_verbs("buy", 0), Err(LexiconError::ZeroDegree)));
    }

    #[test]
    fn self_loop_rejected() {
        let err = Lexicon::from_json_str(
            r#"{"keywords": [], "verbs": [{"a": "buy", "b": "buy"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, LexiconError::SelfLoop(v) if v == "buy"));
    }

    #[test]
    fn duplicate_edge_rejected() {
        let err = Lexicon::from_json_str(
            r#"{"keywords": [], "verbs": [{"a": "buy", "b": "get"}, {"a": "get", "b": "buy"}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, LexiconError::DuplicateEdge(..)));
    }

    #[test]
    fn empty_text_is_schema_violation() {
        let err = Lexicon::from_json_str(
            r#"{"keywords": [{"text": "  ", "category": "N", "visibility": 1}], "verbs": []}"#,
        )
        .unwrap_err();
        match err {
            LexiconError::Schema { field, .. } => assert_eq!(field, "keywords[0].text"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_errors_name_field() {
        let bad_cat = r#"{"keywords": [{"text": "x", "category": "Z", "visibility": 1}]}"#;
        let neg_vis = r#"{"keywords": [{"text": "x", "category": "N", "visibility": -1}]}"#;
        let sep = r#"{"keywords": [{"text": "a, b", "category": "N", "visibility": 1}]}"#;
        for (json, field) in [
            (bad_cat, "keywords[0].category"),
            (neg_vis, "keywords[0].visibility"),
            (sep, "keywords[0].text"),
        ] {
            match Lexicon::from_json_str(json).unwrap_err() {
                LexiconError::Schema { field: f, .. } => assert_eq!(f, field),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_keyword_within_category() {
        let err = Lexicon::from_json_str(
            r#"{"keywords": [
                {"text": "cnn.com", "category": "N", "visibility": 1},
                {"text": "CNN.com", "category": "N", "visibility": 2}
            ]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, LexiconError::DuplicateKeyword { .. }));
    }

    #[test]
    fn forced_single_choice() {
        let lex = fig5_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let got = lex.decoy_candidates(QueryCategory::N, 1, &mut rng).unwrap();
        assert_eq!(got[0].text, "shoes.com");
    }

    #[test]
    fn empty_category_and_overdraw() {
        let lex = fig5_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(
            lex.decoy_candidates(QueryCategory::T, 1, &mut rng),
            Err(LexiconError::EmptyCategory(QueryCategory::T))
        ));
        assert!(matches!(
            lex.decoy_candidates(QueryCategory::N, 2, &mut rng),
            Err(LexiconError::NotEnoughKeywords { .. })
        ));
    }

    #[test]
    fn zero_weights_fall_back_to_uniform() {
        let kws = (0..3)
            .map(|i| Keyword {
                text: format!("k{i}"),
                category: QueryCategory::I,
                visibility: 0.0,
                topic: String::new(),
            })
            .collect();
        let lex = Lexicon::from_parts(kws, VerbGraph::new()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let got = lex.decoy_candidates(QueryCategory::I, 3, &mut rng).unwrap();
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn json_round_trip() {
        let lex = fig5_graph();
        let again = Lexicon::from_json_str(&lex.to_json()).unwrap();
        assert_eq!(again.verbs(), lex.verbs());
        assert_eq!(again.keywords(QueryCategory::N), lex.keywords(QueryCategory::N));
    }
}
