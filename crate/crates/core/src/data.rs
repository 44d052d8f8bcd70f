//! Locations of the bundled data files.

use std::path::PathBuf;

/// Overrides the data directory when set.
pub const DATA_DIR_ENV: &str = "DISTORT_DATA_DIR";

pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/data")))
}

pub fn lexicon_path() -> PathBuf {
    data_dir().join("lexicon.json")
}

pub fn corpus_path() -> PathBuf {
    data_dir().join("corpus.jsonl")
}

pub fn ads_path() -> PathBuf {
    data_dir().join("ads.jsonl")
}

pub fn real_queries_path() -> PathBuf {
    data_dir().join("real_queries.tsv")
}

pub fn stopwords_path() -> PathBuf {
    data_dir().join("stopwords.txt")
}

pub fn fixtures_dir() -> PathBuf {
    data_dir().join("fixtures")
}
