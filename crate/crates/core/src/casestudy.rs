//! Checking an externally inferred microbial association network against
//! literature: fetch sentences co-mentioning each pair of taxa, run the
//! pipeline on them and keep the sentences that support the pair.

use std::collections::BTreeSet;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::PairKey;
use crate::pipeline::{extract, Components, PipelineInput};
use crate::remote::{HttpClient, RemoteError};
use crate::scalar::{Real, Scalar};
use crate::transform::{canonical_pair, normalize_entity};

pub const DEFAULT_FETCH_CAP: usize = 100;
pub const DEFAULT_SEARCH_ENDPOINT: &str = "https://www.ncbi.nlm.nih.gov/research/litsense-api";

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: self-edge on {name:?}")]
    SelfEdge { line: usize, name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub taxon_a: String,
    pub taxon_b: String,
}

impl Edge {
    /// Canonical normalized pair, comparable with pipeline predictions.
    pub fn key(&self) -> PairKey {
        canonical_pair(normalize_entity(&self.taxon_a), normalize_entity(&self.taxon_b))
    }
}

/// Undirected taxon pairs from one association study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssociationNetwork {
    pub source_id: String,
    pub edges: Vec<Edge>,
}

impl AssociationNetwork {
    /// One edge per line, two tab-separated taxon names; further columns
    /// (weights, signs) are ignored. Blank lines and `#` comments are
    /// skipped, and repeated pairs keep their first occurrence.
    pub fn parse(text: &str, source_id: &str) -> Result<Self, NetworkError> {
        let mut seen = BTreeSet::new();
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = raw.split('\t').map(str::trim);
            let (a, b) = match (cols.next(), cols.next()) {
                (Some(a), Some(b)) if !a.is_empty() && !b.is_empty() => (a, b),
                _ => {
                    return Err(NetworkError::Malformed {
                        line,
                        reason: "expected two tab-separated taxon names".into(),
                    })
                }
            };
            let edge = Edge { taxon_a: a.to_string(), taxon_b: b.to_string() };
            let key = edge.key();
            if key.0 == key.1 {
                return Err(NetworkError::SelfEdge { line, name: a.to_string() });
            }
            if seen.insert(key) {
                edges.push(edge);
            } else {
                log::warn!("line {line}: duplicate edge {a} / {b} skipped");
            }
        }
        Ok(AssociationNetwork { source_id: source_id.to_string(), edges })
    }

    /// Parse a network file; the file stem becomes the source id.
    pub fn from_file(path: &Path) -> Result<Self, NetworkError> {
        let text = fs::read_to_string(path).map_err(|source| NetworkError::Io { path: path.into(), source })?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Self::parse(&text, &id)
    }
}

/// A literature sentence and where it came from (e.g. `PMID:123`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FetchedSentence {
    pub reference: String,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum FetchError {
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

/// A backend returning candidate sentences for a pair of names.
pub trait SentenceSource: Send + Sync {
    fn search(&self, taxon_a: &str, taxon_b: &str, limit: usize) -> Result<Vec<FetchedSentence>, FetchError>;
}

impl<S: SentenceSource + ?Sized> SentenceSource for Box<S> {
    fn search(&self, taxon_a: &str, taxon_b: &str, limit: usize) -> Result<Vec<FetchedSentence>, FetchError> {
        (**self).search(taxon_a, taxon_b, limit)
    }
}

/// File stem shared by the local store and the cache for a pair.
pub fn pair_file_stem(taxon_a: &str, taxon_b: &str) -> String {
    let (a, b) = canonical_pair(normalize_entity(taxon_a), normalize_entity(taxon_b));
    let slug = |s: &str| -> String {
        s.chars().map(|c| if c.is_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
    };
    format!("{}__{}", slug(&a), slug(&b))
}

/// Offline backend: a directory with one `<a>__<b>.tsv` file per pair
/// (see [`pair_file_stem`]), each line `reference<TAB>sentence`. A pair
/// without a file has no sentences.
#[derive(Debug, Clone)]
pub struct LocalStore {
    dir: PathBuf,
}

impl LocalStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        LocalStore { dir: dir.into() }
    }
}

impl SentenceSource for LocalStore {
    fn search(&self, taxon_a: &str, taxon_b: &str, limit: usize) -> Result<Vec<FetchedSentence>, FetchError> {
        let path = self.dir.join(format!("{}.tsv", pair_file_stem(taxon_a, taxon_b)));
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => return Err(FetchError::Io { path, source }),
        };
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (reference, sentence) = line.split_once('\t').ok_or_else(|| FetchError::Format {
                path: path.clone(),
                message: format!("line {}: expected reference<TAB>sentence", i + 1),
            })?;
            out.push(FetchedSentence { reference: reference.to_string(), text: sentence.to_string() });
            if out.len() == limit {
                break;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
struct SearchHit {
    text: String,
    #[serde(default)]
    pmid: Option<serde_json::Value>,
    #[serde(default)]
    pmcid: Option<String>,
}

/// Client for the LitSense sentence search service.
///
/// Each pair becomes `GET <endpoint>/api/?query="<a>" "<b>"&rerank=true`;
/// the response is a JSON array of hits with `text` and `pmid`/`pmcid`.
/// Requests are spaced at least `min_interval` apart across threads, and a
/// 429 reply is retried after the advertised `Retry-After` delay.
pub struct LitSenseClient {
    http: HttpClient,
    max_retries: u32,
    min_interval: Duration,
    last_request: Mutex<Option<Instant>>,
}

impl LitSenseClient {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        LitSenseClient {
            http: HttpClient::new(endpoint, timeout),
            max_retries: 3,
            min_interval: Duration::from_millis(350),
            last_request: Mutex::new(None),
        }
    }

    pub fn with_rate(mut self, min_interval: Duration, max_retries: u32) -> Self {
        self.min_interval = min_interval;
        self.max_retries = max_retries;
        self
    }

    pub fn query(taxon_a: &str, taxon_b: &str) -> String {
        format!("\"{taxon_a}\" \"{taxon_b}\"")
    }

    fn pace(&self) {
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(t) = *last {
            let wait = self.min_interval.saturating_sub(t.elapsed());
            if !wait.is_zero() {
                thread::sleep(wait);
            }
        }
        *last = Some(Instant::now());
    }
}

impl SentenceSource for LitSenseClient {
    fn search(&self, taxon_a: &str, taxon_b: &str, limit: usize) -> Result<Vec<FetchedSentence>, FetchError> {
        let query = Self::query(taxon_a, taxon_b);
        let mut attempt = 0;
        let hits: Vec<SearchHit> = loop {
            self.pace();
            match self.http.get_json("/api/", &[("query", &query), ("rerank", "true")]) {
                Err(RemoteError::RateLimited { retry_after, .. }) if attempt < self.max_retries => {
                    attempt += 1;
                    let wait = retry_after.unwrap_or(Duration::from_secs(1));
                    log::info!("search rate limited; retrying in {wait:?}");
                    thread::sleep(wait);
                }
                other => break other?,
            }
        };
        Ok(hits
            .into_iter()
            .take(limit)
            .map(|h| {
                let reference = match (h.pmid, h.pmcid) {
                    (Some(serde_json::Value::Number(n)), _) => format!("PMID:{n}"),
                    (Some(serde_json::Value::String(s)), _) => format!("PMID:{s}"),
                    (_, Some(c)) => c,
                    _ => String::new(),
                };
                FetchedSentence { reference, text: h.text }
            })
            .collect())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    pair: PairKey,
    limit: usize,
    sentences: Vec<FetchedSentence>,
}

/// Disk cache in front of another source: one JSON file per canonical
/// pair. Files are written to a temporary name and renamed into place, so
/// concurrent writers never expose a partial entry.
pub struct CachedSource<S> {
    inner: S,
    dir: PathBuf,
}

impl<S: SentenceSource> CachedSource<S> {
    pub fn new(inner: S, dir: impl Into<PathBuf>) -> Self {
        CachedSource { inner, dir: dir.into() }
    }

    pub fn path_for(&self, taxon_a: &str, taxon_b: &str) -> PathBuf {
        self.dir.join(format!("{}.json", pair_file_stem(taxon_a, taxon_b)))
    }
}

static TMP_COUNTER: AtomicUsize = AtomicUsize::new(0);

impl<S: SentenceSource> SentenceSource for CachedSource<S> {
    fn search(&self, taxon_a: &str, taxon_b: &str, limit: usize) -> Result<Vec<FetchedSentence>, FetchError> {
        let path = self.path_for(taxon_a, taxon_b);
        let key = canonical_pair(normalize_entity(taxon_a), normalize_entity(taxon_b));
        match fs::read_to_string(&path) {
            Ok(text) => {
                let entry: CacheEntry = serde_json::from_str(&text)
                    .map_err(|e| FetchError::Format { path: path.clone(), message: e.to_string() })?;
                if entry.pair == key && entry.limit == limit {
                    return Ok(entry.sentences);
                }
            }
            Err(e) if e.kind() == ErrorKind::NotFound => {}
            Err(source) => return Err(FetchError::Io { path, source }),
        }
        let sentences = self.inner.search(taxon_a, taxon_b, limit)?;
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| FetchError::Io { path, source }
        };
        fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        let tmp = path.with_extension(format!(
            "json.{}.{}.tmp",
            std::process::id(),
            TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let entry = CacheEntry { pair: key, limit, sentences };
        fs::write(&tmp, serde_json::to_string_pretty(&entry).expect("cache entry serializes")).map_err(io(&tmp))?;
        fs::rename(&tmp, &path).map_err(io(&path))?;
        Ok(entry.sentences)
    }
}

/// Whether `name` occurs in `text` as whole words, after normalization.
fn mentions(text: &str, name: &str) -> bool {
    let hay = normalize_entity(text);
    let needle = normalize_entity(name);
    if needle.is_empty() {
        return false;
    }
    let word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric());
    hay.match_indices(&needle)
        .any(|(i, _)| !word(hay[..i].chars().next_back()) && !word(hay[i + needle.len()..].chars().next()))
}

/// Fetch sentences for a pair, keep those naming both taxa, cap at `limit`.
pub fn fetch_sentences(
    taxon_a: &str,
    taxon_b: &str,
    source: &dyn SentenceSource,
    limit: usize,
) -> Result<Vec<FetchedSentence>, FetchError> {
    let mut found = source.search(taxon_a, taxon_b, limit)?;
    found.retain(|s| mentions(&s.text, taxon_a) && mentions(&s.text, taxon_b));
    found.truncate(limit);
    Ok(found)
}

/// A sentence in which the pipeline predicts the queried pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbableSentence<T> {
    pub text: String,
    pub reference: String,
    pub score: T,
    /// Manual verdict, filled in by a curator before auditing.
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport<T> {
    pub edge: Edge,
    pub pair: PairKey,
    pub fetched: usize,
    pub probable: Vec<ProbableSentence<T>>,
    pub error: Option<String>,
}

/// Only precision-side evidence can be gathered this way; recall stays
/// unmeasured because there is no list of missed interactions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecallStatus {
    Unmeasured,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport<T> {
    pub network: String,
    pub fetch_cap: usize,
    pub edges: Vec<EdgeReport<T>>,
    pub total_edges: usize,
    pub supported_edges: usize,
    pub failed_edges: usize,
    pub recall: RecallStatus,
}

impl<T: Real + Serialize> ValidationReport<T> {
    pub fn probable_sentences(&self) -> usize {
        self.edges.iter().map(|e| e.probable.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text summary followed by the supported edges.
    pub fn render(&self) -> String {
        let mut out = format!(
            "network {}: {} of {} edges have at least one probable sentence ({} sentences, fetch cap {})\n",
            self.network,
            self.supported_edges,
            self.total_edges,
            self.probable_sentences(),
            self.fetch_cap
        );
        if self.failed_edges > 0 {
            out.push_str(&format!("{} edges failed\n", self.failed_edges));
        }
        out.push_str("recall: unmeasured\n");
        for e in &self.edges {
            if let Some(err) = &e.error {
                out.push_str(&format!("\n{} -- {}: error: {err}\n", e.edge.taxon_a, e.edge.taxon_b));
                continue;
            }
            if e.probable.is_empty() {
                continue;
            }
            out.push_str(&format!(
                "\n{} -- {} ({} of {} fetched)\n",
                e.edge.taxon_a,
                e.edge.taxon_b,
                e.probable.len(),
                e.fetched
            ));
            for p in &e.probable {
                out.push_str(&format!("  [{:.2}] {}  {}\n", p.score.to_f64(), p.reference, p.text));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    pub fetch_cap: usize,
    /// Edges processed concurrently; output order never depends on it.
    pub workers: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions { fetch_cap: DEFAULT_FETCH_CAP, workers: 1 }
    }
}

fn validate_edge<T: Real>(
    edge: &Edge,
    c: &Components<'_, T>,
    source: &dyn SentenceSource,
    cap: usize,
) -> EdgeReport<T> {
    let pair = edge.key();
    let mut report =
        EdgeReport { edge: edge.clone(), pair: pair.clone(), fetched: 0, probable: Vec::new(), error: None };
    let sentences = match fetch_sentences(&edge.taxon_a, &edge.taxon_b, source, cap) {
        Ok(s) => s,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    report.fetched = sentences.len();
    for (i, s) in sentences.iter().enumerate() {
        let input = PipelineInput::Passage { doc_id: format!("{}__{}#{i}", pair.0, pair.1), text: s.text.clone() };
        match extract(&input, c) {
            Ok(preds) => {
                if let Some(p) = preds.into_iter().find(|p| p.pair == pair) {
                    report.probable.push(ProbableSentence {
                        text: s.text.clone(),
                        reference: s.reference.clone(),
                        score: p.score,
                        correct: None,
                    });
                }
            }
            Err(e) => {
                report.error = Some(format!("sentence {i} ({}): {e}", s.reference));
                return report;
            }
        }
    }
    report
}

/// Run the full pipeline over literature sentences for every edge. Errors
/// are recorded on the edge and the run moves on.
pub fn validate_network<T: Real>(
    network: &AssociationNetwork,
    c: &Components<'_, T>,
    source: &dyn SentenceSource,
    opts: ValidationOptions,
) -> ValidationReport<T> {
    let n = network.edges.len();
    let slots: Vec<Mutex<Option<EdgeReport<T>>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let work = || loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= n {
            break;
        }
        let r = validate_edge(&network.edges[i], c, source, opts.fetch_cap);
        *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(r);
    };
    let workers = opts.workers.clamp(1, n.max(1));
    if workers == 1 {
        work();
    } else {
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(work);
            }
        });
    }
    let edges: Vec<EdgeReport<T>> = slots
        .into_iter()
        .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every edge processed"))
        .collect();
    ValidationReport {
        network: network.source_id.clone(),
        fetch_cap: opts.fetch_cap,
        total_edges: n,
        supported_edges: edges.iter().filter(|e| !e.probable.is_empty()).count(),
        failed_edges: edges.iter().filter(|e| e.error.is_some()).count(),
        edges,
        recall: RecallStatus::Unmeasured,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("{flagged} of {total} probable sentences have a manual verdict")]
    IncompleteFlags { flagged: usize, total: usize },
}

/// One wrong prediction, laid out as sentence / entity 1 / entity 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorExample {
    pub sentence: String,
    pub entity_1: String,
    pub entity_2: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary<S> {
    pub correct: usize,
    pub total: usize,
    /// `correct / total`, or zero when there is nothing to audit.
    pub precision: S,
    pub errors: Vec<ErrorExample>,
}

/// Fraction of probable sentences judged correct. `flags[e][s]` is the
/// verdict for sentence `s` of edge `e`; every sentence needs one.
pub fn precision_audit<T, S: Scalar>(
    report: &ValidationReport<T>,
    flags: &[Vec<bool>],
) -> Result<AuditSummary<S>, AuditError> {
    let total: usize = report.edges.iter().map(|e| e.probable.len()).sum();
    let complete =
        flags.len() == report.edges.len() && report.edges.iter().zip(flags).all(|(e, f)| f.len() == e.probable.len());
    if !complete {
        let flagged = report.edges.iter().zip(flags).map(|(e, f)| f.len().min(e.probable.len())).sum();
        return Err(AuditError::IncompleteFlags { flagged, total });
    }
    let mut correct = 0;
    let mut errors = Vec::new();
    for (e, f) in report.edges.iter().zip(flags) {
        for (p, &ok) in e.probable.iter().zip(f) {
            if ok {
                correct += 1;
            } else {
                errors.push(ErrorExample {
                    sentence: p.text.clone(),
                    entity_1: e.edge.taxon_a.clone(),
                    entity_2: e.edge.taxon_b.clone(),
                });
            }
        }
    }
    let precision = if total == 0 { S::zero() } else { S::from_count(correct as u64) / S::from_count(total as u64) };
    Ok(AuditSummary { correct, total, precision, errors })
}

/// Verdicts stored in the report's `correct` slots.
pub fn flags_from_report<T>(report: &ValidationReport<T>) -> Result<Vec<Vec<bool>>, AuditError> {
    let total: usize = report.edges.iter().map(|e| e.probable.len()).sum();
    let flagged = report.edges.iter().flat_map(|e| &e.probable).filter(|p| p.correct.is_some()).count();
    if flagged != total {
        return Err(AuditError::IncompleteFlags { flagged, total });
    }
    Ok(report.edges.iter().map(|e| e.probable.iter().map(|p| p.correct == Some(true)).collect()).collect())
}

/// Numbered table of wrong predictions.
pub fn render_error_examples(errors: &[ErrorExample]) -> String {
    let mut out = String::from("|   | Sentence | Entity 1 | Entity 2 |\n|---|---|---|---|\n");
    for (i, e) in errors.iter().enumerate() {
        out.push_str(&format!(
            "| {} | {} | {} | {} |\n",
            i + 1,
            e.sentence.replace('|', "\\|"),
            e.entity_1,
            e.entity_2
        ));
    }
    out
}
