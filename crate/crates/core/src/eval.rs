//! Splitting, scoring and run aggregation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Real, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("predictions ({predicted}) and gold ({gold}) differ in length")]
    LengthMismatch { predicted: usize, gold: usize },
    #[error("train fraction {0} is not in (0, 1)")]
    InvalidFraction(f64),
    #[error("cannot split {0} items into non-empty train and test sets")]
    TooSmall(usize),
    #[error("aggregation needs at least 2 runs, got {0}")]
    TooFewRuns(usize),
}

/// Precision, recall and F1 with the confusion counts they came from.
///
/// A zero denominator yields 0 for the affected metric and sets
/// `degenerate`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T> {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: T,
    pub recall: T,
    pub f1: T,
    pub degenerate: bool,
}

fn ratio<T: Scalar>(num: u64, den: u64) -> (T, bool) {
    if den == 0 {
        (T::zero(), true)
    } else {
        (T::from_count(num) / T::from_count(den), false)
    }
}

impl<T: Scalar> Metrics<T> {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let (precision, dp) = ratio::<T>(tp, tp + fp);
        let (recall, dr) = ratio::<T>(tp, tp + fn_);
        let sum = precision + recall;
        let (f1, df) = if sum == T::zero() {
            (T::zero(), true)
        } else {
            let two = T::one() + T::one();
            (two * precision * recall / sum, false)
        };
        Metrics { tp, fp, fn_, precision, recall, f1, degenerate: dp || dr || df }
    }
}

/// Positional instance-level scoring.
pub fn evaluate_instances<T: Scalar>(predicted: &[bool], gold: &[bool]) -> Result<Metrics<T>, EvalError> {
    if predicted.len() != gold.len() {
        return Err(EvalError::LengthMismatch { predicted: predicted.len(), gold: gold.len() });
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (&p, &g) in predicted.iter().zip(gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    Ok(Metrics::from_counts(tp, fp, fn_))
}

/// Canonical normalized pair.
pub type PairKey = (String, String);

/// Pairs per document id.
pub type DocPairs = BTreeMap<String, BTreeSet<PairKey>>;

/// Set-based pair scoring per document, summed over documents.
pub fn evaluate_pairs<T: Scalar>(predicted: &DocPairs, gold: &DocPairs) -> Metrics<T> {
    let empty = BTreeSet::new();
    let docs: BTreeSet<&String> = predicted.keys().chain(gold.keys()).collect();
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for doc in docs {
        let p = predicted.get(doc).unwrap_or(&empty);
        let g = gold.get(doc).unwrap_or(&empty);
        let hit = p.intersection(g).count() as u64;
        tp += hit;
        fp += p.len() as u64 - hit;
        fn_ += g.len() as u64 - hit;
    }
    Metrics::from_counts(tp, fp, fn_)
}

/// Number of training items: `ceil(fraction * n)`, clamped so both sides are non-empty.
pub fn train_size(n: usize, fraction: f64) -> Result<usize, EvalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::InvalidFraction(fraction));
    }
    if n < 2 {
        return Err(EvalError::TooSmall(n));
    }
    // The epsilon keeps products like 0.85 * 20 from rounding up past an integer.
    let raw = (fraction * n as f64 - 1e-9).ceil() as usize;
    Ok(raw.clamp(1, n - 1))
}

/// Seeded random split at item granularity. Each side keeps input order.
pub fn split<I: Clone>(items: &[I], fraction: f64, seed: u64) -> Result<(Vec<I>, Vec<I>), EvalError> {
    let n_train = train_size(items.len(), fraction)?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_idx = order[..n_train].to_vec();
    let mut test_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((train_idx.iter().map(|&i| items[i].clone()).collect(), test_idx.iter().map(|&i| items[i].clone()).collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd<T> {
    pub mean: T,
    pub std: T,
}

impl<T: Real> MeanStd<T> {
    /// Mean and sample (n - 1) standard deviation; needs `values.len() >= 2`.
    fn of(values: &[T]) -> Self {
        let n = T::from_count(values.len() as u64);
        let mean = values.iter().fold(T::zero(), |a, &v| a + v) / n;
        let ss = values.iter().fold(T::zero(), |a, &v| a + (v - mean) * (v - mean));
        MeanStd { mean, std: (ss / (n - T::one())).sqrt() }
    }

    pub fn render(&self) -> String {
        format!("{:.2} ± {:.2}", self.mean.to_f64(), self.std.to_f64())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate<T> {
    pub precision: MeanStd<T>,
    pub recall: MeanStd<T>,
    pub f1: MeanStd<T>,
    pub runs: usize,
}

pub fn aggregate<T: Real>(runs: &[Metrics<T>]) -> Result<RunAggregate<T>, EvalError> {
    if runs.len() < 2 {
        return Err(EvalError::TooFewRuns(runs.len()));
    }
    let pick = |f: fn(&Metrics<T>) -> T| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(RunAggregate {
        precision: pick(|m| m.precision),
        recall: pick(|m| m.recall),
        f1: pick(|m| m.f1),
        runs: runs.len(),
    })
}

fn render_grid(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain(std::iter::once(header[c].chars().count()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let padded: Vec<String> =
            cells.iter().zip(&widths).map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        let _ = writeln!(out, "| {} |", padded.join(" | "));
    };
    line(&mut out, header);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "|-{}-|", rule.join("-|-"));
    for r in rows {
        line(&mut out, r);
    }
    out
}

/// Rows Precision/Recall/F1, one `mean ± std` column per model.
pub fn render_run_table<T: Real>(columns: &[(String, RunAggregate<T>)]) -> String {
    let mut header = vec![String::new()];
    header.extend(columns.iter().map(|(name, _)| name.clone()));
    let row = |label: &str, f: fn(&RunAggregate<T>) -> MeanStd<T>| {
        let mut r = vec![label.to_string()];
        r.extend(columns.iter().map(|(_, a)| f(a).render()));
        r
    };
    render_grid(&header, &[row("Precision", |a| a.precision), row("Recall", |a| a.recall), row("F1", |a| a.f1)])
}

/// One row per configuration, columns Precision/Recall/F1.
pub fn render_metrics_table<T: Scalar>(rows: &[(String, Metrics<T>)]) -> String {
    let header: Vec<String> = ["", "Precision", "Recall", "F1"].iter().map(|s| s.to_string()).collect();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(label, m)| {
            vec![
                label.clone(),
                format!("{:.2}", m.precision.to_f64()),
                format!("{:.2}", m.recall.to_f64()),
                format!("{:.2}", m.f1.to_f64()),
            ]
        })
        .collect();
    render_grid(&header, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    #[test]
    fn hand_computed_metrics() {
        let m: Metrics<Rational> = Metrics::from_counts(2, 1, 0);
        assert_eq!(m.precision, Rational::new(2, 3));
        assert_eq!(m.recall, Rational::from_integer(1));
        assert_eq!(m.f1, Rational::new(4, 5));
        let m: Metrics<f64> = Metrics::from_counts(2, 1, 0);
        assert!((m.precision - 0.667).abs() < 1e-3);
        assert!((m.f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn all_negative_is_degenerate() {
        let m: Metrics<f64> = evaluate_instances(&[false; 4], &[false; 4]).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
        assert!(m.degenerate);
    }

    #[test]
    fn perfect_predictions() {
        let gold = [true, false, true, true, false];
        let m: Metrics<f64> = evaluate_instances(&gold, &gold).unwrap();
        assert_eq!((m.precision, m.recall, m.f1, m.degenerate), (1.0, 1.0, 1.0, false));
    }

    #[test]
    fn length_mismatch() {
        assert_eq!(
            evaluate_instances::<f64>(&[true], &[true, false]),
            Err(EvalError::LengthMismatch { predicted: 1, gold: 2 })
        );
    }

    fn pairs(items: &[(&str, &str, &str)]) -> DocPairs {
        let mut out = DocPairs::new();
        for (d, a, b) in items {
            out.entry(d.to_string()).or_default().insert((a.to_string(), b.to_string()));
        }
        out
    }

    #[test]
    fn pair_scoring() {
        let gold = pairs(&[("d", "a", "b")]);
        let m: Metrics<f64> = evaluate_pairs(&gold, &gold);
        assert_eq!(m.tp, 1);
        let m: Metrics<f64> = evaluate_pairs(&pairs(&[("d", "a", "b"), ("d", "a", "c")]), &gold);
        assert_eq!((m.tp, m.fp, m.fn_), (1, 1, 0));
        let gold3 = pairs(&[("d", "a", "b"), ("d", "a", "c"), ("e", "x", "y")]);
        let m: Metrics<f64> = evaluate_pairs(&DocPairs::new(), &gold3);
        assert_eq!((m.fn_, m.recall), (3, 0.0));
        // Same pair in another document is a different item.
        let m: Metrics<f64> = evaluate_pairs(&pairs(&[("e", "a", "b")]), &gold);
        assert_eq!((m.tp, m.fp, m.fn_), (0, 1, 1));
    }

    #[test]
    fn split_sizes() {
        assert_eq!(train_size(1406, 0.85).unwrap(), 1196);
        assert_eq!(train_size(2, 0.85).unwrap(), 1);
        assert_eq!(train_size(20, 0.85).unwrap(), 17);
        assert_eq!(train_size(100, 0.85).unwrap(), 85);
        assert_eq!(train_size(1, 0.85), Err(EvalError::TooSmall(1)));
        assert_eq!(train_size(10, 1.0), Err(EvalError::InvalidFraction(1.0)));
        let items: Vec<u32> = (0..1406).collect();
        let (train, test) = split(&items, 0.85, 7).unwrap();
        assert_eq!((train.len(), test.len()), (1196, 210));
        let (train2, _) = split(&items, 0.85, 7).unwrap();
        assert_eq!(train, train2);
        let (train3, _) = split(&items, 0.85, 8).unwrap();
        assert_ne!(train, train3);
        let (a, b) = split(&[1, 2], 0.85, 0).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
    }

    #[test]
    fn aggregation() {
        let runs: Vec<Metrics<f64>> =
            [0.88, 0.89, 0.90].iter().map(|&f1| Metrics { f1, ..Metrics::from_counts(1, 0, 0) }).collect();
        let agg = aggregate(&runs).unwrap();
        assert!((agg.f1.mean - 0.89).abs() < 1e-12);
        assert!((agg.f1.std - 0.01).abs() < 1e-12);
        assert_eq!(agg.f1.render(), "0.89 ± 0.01");
        assert_eq!(agg.precision.std, 0.0);
        assert_eq!(aggregate(&runs[..1]), Err(EvalError::TooFewRuns(1)));
    }

    #[test]
    fn tables() {
        let m: Metrics<f64> = Metrics::from_counts(8, 1, 1);
        let t = render_metrics_table(&[("Only IE".into(), m)]);
        assert_eq!(
            t,
            "|         | Precision | Recall | F1   |\n|---------|-----------|--------|------|\n| Only IE | 0.89      | 0.89   | 0.89 |\n"
        );
    }
}
