#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use bactint::corpus::{AnnotatedSentence, Span};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

/// Every `.ann` file under `dir`, sorted.
pub fn ann_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(ann_files(&path));
        } else if path.extension().is_some_and(|e| e == "ann") {
            out.push(path);
        }
    }
    out.sort();
    out
}

/// Abbreviation cases as (input, expected sentences).
pub fn abbreviation_cases() -> Vec<(String, Vec<String>)> {
    fs::read_to_string(fixtures().join("abbreviations.txt"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|l| {
            let parts: Vec<String> = l.split(" | ").map(str::to_string).collect();
            (parts.join(" "), parts)
        })
        .collect()
}

/// Key normalization written out independently of the library.
fn oracle_key(surface: &str) -> String {
    let mut words: Vec<String> = surface.split_whitespace().map(|w| w.to_lowercase()).collect();
    while let Some(last) = words.last_mut() {
        while last.ends_with(['.', ',', ';', ':', '!', '?']) {
            last.pop();
        }
        if last.is_empty() {
            words.pop();
        } else {
            break;
        }
    }
    words.join(" ")
}

/// Distinct unordered pairs of differently-keyed mentions, by checking
/// every pair of mentions.
pub fn brute_force_pair_count(sentence: &AnnotatedSentence) -> usize {
    let keys: Vec<String> = sentence.entities.iter().map(|e| oracle_key(&e.surface)).collect();
    let mut pairs = BTreeSet::new();
    for i in 0..keys.len() {
        for j in 0..keys.len() {
            if keys[i] != keys[j] {
                let (a, b) = if keys[i] < keys[j] { (&keys[i], &keys[j]) } else { (&keys[j], &keys[i]) };
                pairs.insert((a.clone(), b.clone()));
            }
        }
    }
    pairs.len()
}

/// Precision, recall and F1 from counts with plain rational arithmetic,
/// zero when a denominator is zero.
pub fn brute_force_prf(
    tp: i64,
    fp: i64,
    fn_: i64,
) -> (num_rational::Ratio<i64>, num_rational::Ratio<i64>, num_rational::Ratio<i64>) {
    use num_rational::Ratio;
    let frac = |n: i64, d: i64| if d == 0 { Ratio::from_integer(0) } else { Ratio::new(n, d) };
    let p = frac(tp, tp + fp);
    let r = frac(tp, tp + fn_);
    // F1 as the harmonic mean of P and R, which reduces to 2tp/(2tp+fp+fn).
    let f = frac(2 * tp, 2 * tp + fp + fn_);
    (p, r, f)
}

/// Sentence spans must be ordered, disjoint, inside the text, and cover
/// every non-whitespace character.
pub fn check_coverage(text: &str, spans: &[Span]) -> Result<(), String> {
    let chars: Vec<char> = text.chars().collect();
    let mut covered = vec![false; chars.len()];
    let mut prev_end = 0;
    for s in spans {
        if s.start < prev_end || s.end > chars.len() || s.is_empty() {
            return Err(format!("bad span {s} after {prev_end} in {} chars", chars.len()));
        }
        covered[s.start..s.end].iter_mut().for_each(|c| *c = true);
        prev_end = s.end;
    }
    match chars.iter().zip(&covered).position(|(c, cov)| !c.is_whitespace() && !cov) {
        Some(i) => Err(format!("char {i} ({:?}) not covered", chars[i])),
        None => Ok(()),
    }
}
