//! Interaction scoring for marker-tagged instances.
//!
//! The baseline is a logistic model over a handful of lexical cue features:
//! one indicator per interaction cue found between or near the two markers,
//! the scaled token distance between the markers, and a negation indicator.

use std::collections::HashMap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{aggregate, evaluate_instances, split, EvalError, Metrics, RunAggregate};
use crate::remote::{HttpClient, RemoteError};
use crate::scalar::Real;
use crate::transform::{LabeledInstance, MARKER_A, MARKER_B};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Interaction cue stems and their default weights. A stem matches any
/// token it prefixes.
pub const DEFAULT_LEXICON: &[(&str, f64)] = &[
    ("inhibit", 3.0),
    ("antagoni", 2.5),
    ("suppress", 2.5),
    ("outcompet", 2.5),
    ("synergi", 2.5),
    ("kill", 2.0),
    ("promot", 2.0),
    ("enhanc", 2.0),
    ("stimulat", 2.0),
    ("compet", 2.0),
    ("cross-feed", 2.0),
    ("bacteriocin", 1.5),
    ("antimicrobial", 1.5),
    ("interact", 1.5),
    ("against", 1.5),
    ("reduc", 1.5),
    ("prevent", 1.5),
    ("impair", 1.5),
    ("increas", 1.0),
    ("decreas", 1.0),
    ("degrad", 1.0),
];

/// Negation cues, matched as whole token sequences.
pub const NEGATION_CUES: &[&str] = &["not", "no", "did not"];

const DEFAULT_BIAS: f64 = -1.5;
const DEFAULT_DISTANCE_WEIGHT: f64 = -1.0;
const DEFAULT_NEGATION_WEIGHT: f64 = -2.5;
pub const DEFAULT_WINDOW: usize = 5;

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("tagged text lacks marker {marker}: {text:?}")]
    MissingMarkers { marker: &'static str, text: String },
    #[error("training data has a single class ({positives} positive of {total})")]
    DegenerateTraining { positives: usize, total: usize },
    #[error("threshold {0} must lie strictly between 0 and 1")]
    InvalidThreshold(f64),
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{endpoint}: item {index}: {message}")]
    Item { endpoint: String, index: usize, message: String },
}

/// Anything that maps tagged texts to interaction probabilities.
pub trait Scorer<T>: Send + Sync {
    fn score_batch(&self, texts: &[&str]) -> Result<Vec<T>, ClassifyError>;

    fn score(&self, text: &str) -> Result<T, ClassifyError> {
        Ok(self.score_batch(&[text])?.remove(0))
    }
}

pub fn check_markers(text: &str) -> Result<(), ClassifyError> {
    for marker in [MARKER_A, MARKER_B] {
        if !text.contains(marker) {
            return Err(ClassifyError::MissingMarkers { marker, text: text.to_string() });
        }
    }
    Ok(())
}

/// Decision threshold; predictions are `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold<T>(T);

impl<T: Real> Threshold<T> {
    pub fn new(t: T) -> Result<Self, ClassifyError> {
        if t > T::zero() && t < T::one() {
            Ok(Threshold(t))
        } else {
            Err(ClassifyError::InvalidThreshold(t.to_f64()))
        }
    }

    pub fn value(&self) -> T {
        self.0
    }

    pub fn accepts(&self, score: T) -> bool {
        score >= self.0
    }
}

impl<T: Real> Default for Threshold<T> {
    fn default() -> Self {
        Threshold(T::from_f64(DEFAULT_THRESHOLD))
    }
}

/// Score one instance and apply the threshold.
pub fn classify<T: Real>(
    instance: &LabeledInstance,
    scorer: &dyn Scorer<T>,
    threshold: Threshold<T>,
) -> Result<bool, ClassifyError> {
    Ok(threshold.accepts(scorer.score(&instance.tagged_text)?))
}

fn tokens(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || matches!(c, ',' | ';' | ':' | '(' | ')' | '[' | ']' | '"'))
        .map(|t| t.trim_end_matches(['.', '!', '?']).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Logistic baseline over lexical cue features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel<T> {
    /// Cue stem and weight, in feature order.
    pub lexicon: Vec<(String, T)>,
    pub distance_weight: T,
    pub negation_weight: T,
    pub bias: T,
    /// Tokens considered on either side of the marker pair; also caps the
    /// distance feature.
    pub window: usize,
}

impl<T: Real> Default for BaselineModel<T> {
    fn default() -> Self {
        BaselineModel {
            lexicon: DEFAULT_LEXICON.iter().map(|(t, w)| (t.to_string(), T::from_f64(*w))).collect(),
            distance_weight: T::from_f64(DEFAULT_DISTANCE_WEIGHT),
            negation_weight: T::from_f64(DEFAULT_NEGATION_WEIGHT),
            bias: T::from_f64(DEFAULT_BIAS),
            window: DEFAULT_WINDOW,
        }
    }
}

pub fn sigmoid<T: Real>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

/// Token region around the closest pair of markers, and their distance.
fn marker_region(toks: &[String], window: usize) -> Option<(Vec<&str>, usize)> {
    let pos = |m: &str| -> Vec<usize> {
        let m = m.to_lowercase();
        toks.iter().enumerate().filter(|(_, t)| t.contains(&m)).map(|(i, _)| i).collect()
    };
    let (pa, pb) = (pos(MARKER_A), pos(MARKER_B));
    let (lo, hi) =
        pa.iter().flat_map(|&a| pb.iter().map(move |&b| (a.min(b), a.max(b)))).min_by_key(|(lo, hi)| hi - lo)?;
    let from = lo.saturating_sub(window);
    let to = (hi + window + 1).min(toks.len());
    let region = (from..to)
        .filter(|&i| !toks[i].contains("@bac1$") && !toks[i].contains("@bac2$"))
        .map(|i| toks[i].as_str())
        .collect();
    Some((region, hi - lo - 1))
}

fn has_sequence(region: &[&str], cue: &str) -> bool {
    let words: Vec<&str> = cue.split(' ').collect();
    region.windows(words.len()).any(|w| w == words.as_slice())
}

impl<T: Real> BaselineModel<T> {
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.lexicon.iter().map(|(t, _)| t.clone()).collect();
        names.push("marker_distance".into());
        names.push("negation".into());
        names
    }

    /// Feature vector: cue indicators, scaled distance, negation indicator.
    pub fn features(&self, text: &str) -> Result<Vec<T>, ClassifyError> {
        check_markers(text)?;
        let toks = tokens(text);
        let window = self.window.max(1);
        let (region, distance) = marker_region(&toks, window)
            .ok_or(ClassifyError::MissingMarkers { marker: MARKER_A, text: text.to_string() })?;
        let indicator = |b: bool| if b { T::one() } else { T::zero() };
        let mut x: Vec<T> = self
            .lexicon
            .iter()
            .map(|(stem, _)| indicator(region.iter().any(|t| t.starts_with(stem.as_str()))))
            .collect();
        x.push(T::from_count(distance.min(window) as u64) / T::from_count(window as u64));
        x.push(indicator(NEGATION_CUES.iter().any(|c| has_sequence(&region, c))));
        Ok(x)
    }

    pub fn weights(&self) -> Vec<T> {
        let mut w: Vec<T> = self.lexicon.iter().map(|(_, w)| *w).collect();
        w.push(self.distance_weight);
        w.push(self.negation_weight);
        w
    }

    fn set_weights(&mut self, w: &[T]) {
        let k = self.lexicon.len();
        for (entry, v) in self.lexicon.iter_mut().zip(w) {
            entry.1 = *v;
        }
        self.distance_weight = w[k];
        self.negation_weight = w[k + 1];
    }

    pub fn logit(&self, x: &[T]) -> T {
        self.weights().iter().zip(x).fold(self.bias, |acc, (w, v)| acc + *w * *v)
    }

    pub fn score_text(&self, text: &str) -> Result<T, ClassifyError> {
        Ok(sigmoid(self.logit(&self.features(text)?)))
    }
}

impl<T: Real> Scorer<T> for BaselineModel<T> {
    fn score_batch(&self, texts: &[&str]) -> Result<Vec<T>, ClassifyError> {
        texts.iter().map(|t| self.score_text(t)).collect()
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus<T: Real>(z: T) -> T {
    z.max(T::zero()) + (T::one() + (-z.abs()).exp()).ln()
}

/// Mean logistic loss with L2 on the weights (not the bias), and its
/// gradient with respect to `(weights, bias)`.
pub fn logistic_loss<T: Real>(weights: &[T], bias: T, xs: &[Vec<T>], ys: &[T], l2: T) -> (T, Vec<T>, T) {
    let n = T::from_count(xs.len() as u64);
    let half = T::from_f64(0.5);
    let mut loss = T::zero();
    let mut grad = vec![T::zero(); weights.len()];
    let mut grad_bias = T::zero();
    for (x, &y) in xs.iter().zip(ys) {
        let z = weights.iter().zip(x).fold(bias, |a, (w, v)| a + *w * *v);
        loss = loss + softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, v) in grad.iter_mut().zip(x) {
            *g = *g + r * *v;
        }
        grad_bias = grad_bias + r;
    }
    let reg = weights.iter().fold(T::zero(), |a, w| a + *w * *w);
    let loss = loss / n + half * l2 * reg;
    let grad = grad.iter().zip(weights).map(|(g, w)| *g / n + l2 * *w).collect();
    (loss, grad, grad_bias / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub window: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { seed: 0, epochs: 400, learning_rate: 1.0, l2: 1e-3, window: DEFAULT_WINDOW }
    }
}

/// Fit cue weights by full-batch gradient descent from a seeded start.
pub fn fit_baseline<T: Real>(train: &[LabeledInstance], opts: &FitOptions) -> Result<BaselineModel<T>, ClassifyError> {
    let positives = train.iter().filter(|i| i.label).count();
    if positives == 0 || positives == train.len() {
        return Err(ClassifyError::DegenerateTraining { positives, total: train.len() });
    }
    let mut model = BaselineModel::<T> { window: opts.window, ..BaselineModel::default() };
    let xs = train.iter().map(|i| model.features(&i.tagged_text)).collect::<Result<Vec<_>, _>>()?;
    let ys: Vec<T> = train.iter().map(|i| if i.label { T::one() } else { T::zero() }).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut w: Vec<T> = (0..xs[0].len()).map(|_| T::from_f64(rng.gen_range(-0.01..0.01))).collect();
    let mut b = T::zero();
    let lr = T::from_f64(opts.learning_rate);
    let l2 = T::from_f64(opts.l2);
    for _ in 0..opts.epochs {
        let (_, gw, gb) = logistic_loss(&w, b, &xs, &ys, l2);
        for (wi, gi) in w.iter_mut().zip(&gw) {
            *wi = *wi - lr * *gi;
        }
        b = b - lr * gb;
    }
    model.set_weights(&w);
    model.bias = b;
    Ok(model)
}

/// Per-run test metrics and their mean ± std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport<T> {
    pub runs: Vec<Metrics<T>>,
    pub aggregate: RunAggregate<T>,
}

/// Split, fit and evaluate `runs` times. Run `i` uses `seed + i` for both
/// the split and the weight initialization.
pub fn repeated_runs<T: Real>(
    instances: &[LabeledInstance],
    train_fraction: f64,
    seed: u64,
    runs: usize,
    opts: &FitOptions,
) -> Result<RunReport<T>, ClassifyError> {
    let mut metrics = Vec::with_capacity(runs);
    for i in 0..runs as u64 {
        let run_seed = seed.wrapping_add(i);
        let (train, test) = split(instances, train_fraction, run_seed)?;
        let model = fit_baseline::<T>(&train, &FitOptions { seed: run_seed, ..*opts })?;
        let threshold = Threshold::<T>::default();
        let predicted = test
            .iter()
            .map(|t| model.score_text(&t.tagged_text).map(|s| threshold.accepts(s)))
            .collect::<Result<Vec<_>, _>>()?;
        let gold: Vec<bool> = test.iter().map(|t| t.label).collect();
        let m = evaluate_instances::<T>(&predicted, &gold)?;
        log::info!(
            "run {i} (seed {run_seed}): P {:.3} R {:.3} F1 {:.3}",
            m.precision.to_f64(),
            m.recall.to_f64(),
            m.f1.to_f64()
        );
        metrics.push(m);
    }
    let aggregate = aggregate(&metrics)?;
    Ok(RunReport { runs: metrics, aggregate })
}

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    instances: &'a [&'a str],
}

#[derive(Debug, Deserialize)]
struct ScoreResponse {
    scores: Vec<serde_json::Value>,
}

/// Client for a `/score` service.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    client: HttpClient,
}

impl RemoteScorer {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        RemoteScorer { client: HttpClient::new(endpoint, timeout) }
    }
}

impl<T: Real> Scorer<T> for RemoteScorer {
    fn score_batch(&self, texts: &[&str]) -> Result<Vec<T>, ClassifyError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        for t in texts {
            check_markers(t)?;
        }
        let resp: ScoreResponse = self.client.post_json("/score", &ScoreRequest { instances: texts })?;
        if resp.scores.len() != texts.len() {
            return Err(self
                .client
                .protocol_violation(format!("{} instances sent, {} scores returned", texts.len(), resp.scores.len()))
                .into());
        }
        resp.scores
            .iter()
            .enumerate()
            .map(|(index, v)| match v.as_f64() {
                Some(s) if s.is_finite() && (0.0..=1.0).contains(&s) => Ok(T::from_f64(s)),
                Some(s) => Err(self.client.protocol_violation(format!("score {s} at {index} outside [0, 1]")).into()),
                None => Err(ClassifyError::Item {
                    endpoint: self.client.endpoint().to_string(),
                    index,
                    message: v
                        .get("error")
                        .and_then(|e| e.as_str())
                        .map(str::to_string)
                        .unwrap_or_else(|| format!("unexpected entry {v}")),
                }),
            })
            .collect()
    }
}

/// Scores 1 for instances labelled positive in a gold dataset, 0 otherwise.
#[derive(Debug, Clone, Default)]
pub struct GoldScorer {
    labels: HashMap<String, bool>,
}

impl GoldScorer {
    pub fn new<'a, I>(instances: I) -> Self
    where
        I: IntoIterator<Item = &'a LabeledInstance>,
    {
        let mut labels = HashMap::new();
        for i in instances {
            *labels.entry(i.tagged_text.clone()).or_insert(false) |= i.label;
        }
        GoldScorer { labels }
    }
}

impl<T: Real> Scorer<T> for GoldScorer {
    fn score_batch(&self, texts: &[&str]) -> Result<Vec<T>, ClassifyError> {
        texts
            .iter()
            .map(|t| {
                check_markers(t)?;
                Ok(if self.labels.get(*t).copied().unwrap_or(false) { T::one() } else { T::zero() })
            })
            .collect()
    }
}
