//! Straight-line reference implementations used as test oracles. They share
//! only the tokenizer with the library.
#![allow(dead_code)]

use distortion_core::textmine::{normalize_tokens, PipelineConfig};

/// Term list and dense TF-IDF rows, computed the slow way.
pub fn brute_tfidf(texts: &[&str], config: &PipelineConfig) -> (Vec<String>, Vec<Vec<f64>>) {
    let docs: Vec<Vec<String>> = texts
        .iter()
        .map(|t| {
            let tokens = normalize_tokens(t, config);
            let mut terms = Vec::new();
            for n in 1..=config.ngram_max {
                if tokens.len() >= n {
                    for start in 0..=tokens.len() - n {
                        terms.push(tokens[start..start + n].join(" "));
                    }
                }
            }
            terms
        })
        .collect();
    let mut vocab: Vec<String> = docs.iter().flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();
    let n = docs.len() as f64;
    let rows = docs
        .iter()
        .map(|doc| {
            vocab
                .iter()
                .map(|term| {
                    let tf = doc.iter().filter(|t| *t == term).count() as f64;
                    let df = docs.iter().filter(|d| d.contains(term)).count() as f64;
                    tf * (n / df).ln()
                })
                .collect()
        })
        .collect();
    (vocab, rows)
}

pub fn fnv(bytes: &[u8]) -> u64 {
    let mut h: u64 = 14695981039346656037;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(1099511628211);
    }
    h
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

/// Stratified k-fold KNN accuracy over `(id, text, label)` triples. Folds
/// deal each class, ordered by FNV-1a of `seed ‖ id`, round-robin.
pub fn oracle_knn_accuracy(items: &[(String, String, u8)], k: usize, folds: usize, seed: u64, config: &PipelineConfig) -> f64 {
    let texts: Vec<&str> = items.iter().map(|i| i.1.as_str()).collect();
    let (_, rows) = brute_tfidf(&texts, config);

    let mut keyed: Vec<(u8, u64, String, usize)> = Vec::new();
    for (i, (id, _, label)) in items.iter().enumerate() {
        let mut bytes = seed.to_le_bytes().to_vec();
        bytes.extend(id.bytes());
        keyed.push((*label, fnv(&bytes), id.clone(), i));
    }
    keyed.sort();
    let mut fold_of = vec![0; items.len()];
    for (pos, entry) in keyed.iter().enumerate() {
        fold_of[entry.3] = pos % folds;
    }

    let mut correct = 0;
    for probe in 0..items.len() {
        let mut neighbours: Vec<(f64, &str, u8)> = Vec::new();
        for j in 0..items.len() {
            if fold_of[j] != fold_of[probe] {
                neighbours.push((dist(&rows[probe], &rows[j]), &items[j].0, items[j].2));
            }
        }
        neighbours.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(b.1)));
        let real = neighbours[..k].iter().filter(|n| n.2 == 1).count();
        let predicted = if 2 * real > k { 1 } else { 0 };
        if predicted == items[probe].2 {
            correct += 1;
        }
    }
    correct as f64 / items.len() as f64
}

/// Reads the attack fixture without the library's ingest code.
pub fn read_attack_fixture(dir: &std::path::Path) -> Vec<(String, String, u8)> {
    let mut items = Vec::new();
    let jsonl = std::fs::read_to_string(dir.join("obfuscated.jsonl")).unwrap();
    for line in jsonl.lines().filter(|l| !l.trim().is_empty()) {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let segments: Vec<&str> = v["segments"].as_array().unwrap().iter().map(|s| s.as_str().unwrap()).collect();
        items.push((v["id"].as_str().unwrap().to_string(), segments.join(", "), 0));
    }
    let tsv = std::fs::read_to_string(dir.join("real.tsv")).unwrap();
    for (i, line) in tsv.lines().enumerate() {
        if i == 0 {
            continue;
        }
        let query = line.split('\t').nth(1).unwrap().trim();
        items.push((format!("real:{}", i + 1), query.to_string(), 1));
    }
    items
}
