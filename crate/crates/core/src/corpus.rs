//! Annotated text data model and BRAT standoff I/O.
//!
//! Offsets are counted in Unicode scalar values (`char`s), which is what
//! BRAT itself writes. Only entity (`T`) and relation (`R`) lines are
//! understood; any other standoff record type is rejected.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Label used for every relation in the interaction corpora.
pub const INTERACTS: &str = "interacts";

/// Default entity label.
pub const BACTERIA: &str = "Bacteria";

/// Half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end, "empty or inverted span {start}..{end}");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Shift left by `offset`; caller guarantees `offset <= start`.
    pub fn rebase(&self, offset: usize) -> Span {
        Span { start: self.start - offset, end: self.end - offset }
    }

    pub fn shift(&self, offset: usize) -> Span {
        Span { start: self.start + offset, end: self.end + offset }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Maps character offsets of a string to byte offsets.
#[derive(Debug, Clone)]
pub struct CharIndex<'a> {
    text: &'a str,
    bytes: Vec<usize>,
}

impl<'a> CharIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        CharIndex { text, bytes }
    }

    /// Number of characters.
    pub fn len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn byte(&self, char_offset: usize) -> usize {
        self.bytes[char_offset]
    }

    /// Character offset for a byte offset that lies on a char boundary.
    pub fn char_of_byte(&self, byte: usize) -> usize {
        self.bytes.partition_point(|&b| b < byte)
    }

    pub fn slice(&self, span: Span) -> Option<&'a str> {
        if span.end > self.len() || span.start > span.end {
            return None;
        }
        Some(&self.text[self.bytes[span.start]..self.bytes[span.end]])
    }
}

/// Slice `text` by a character span.
pub fn slice_chars(text: &str, span: Span) -> Option<&str> {
    CharIndex::new(text).slice(span)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub id: String,
    pub label: String,
    pub span: Span,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub id: String,
    pub label: String,
    pub arg1: String,
    pub arg2: String,
}

/// One sentence with its gold annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub text: String,
    pub entities: Vec<EntityMention>,
    pub relations: Vec<Relation>,
    pub provenance: String,
}

/// A multi-sentence passage with gold annotations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub text: String,
    pub entities: Vec<EntityMention>,
    pub relations: Vec<Relation>,
}

/// Violation of the annotation invariants.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvariantError {
    #[error("entity {id}: span {span} out of bounds for text of {len} chars")]
    SpanOutOfBounds { id: String, span: Span, len: usize },
    #[error("entity {id}: surface {surface:?} does not match text {found:?}")]
    SpanMismatch { id: String, surface: String, found: String },
    #[error("entity {id}: empty span")]
    EmptySpan { id: String },
    #[error("duplicate annotation id {0}")]
    DuplicateId(String),
    #[error("relation {relation}: argument {argument} does not resolve to an entity")]
    DanglingArgument { relation: String, argument: String },
    #[error("relation {0} links an entity to itself")]
    SelfRelation(String),
}

fn check_annotations(text: &str, entities: &[EntityMention], relations: &[Relation]) -> Result<(), InvariantError> {
    let index = CharIndex::new(text);
    let mut ids = HashSet::new();
    for e in entities {
        if !ids.insert(e.id.as_str()) {
            return Err(InvariantError::DuplicateId(e.id.clone()));
        }
        if e.span.is_empty() {
            return Err(InvariantError::EmptySpan { id: e.id.clone() });
        }
        let found = index.slice(e.span).ok_or_else(|| InvariantError::SpanOutOfBounds {
            id: e.id.clone(),
            span: e.span,
            len: index.len(),
        })?;
        if found != e.surface {
            return Err(InvariantError::SpanMismatch {
                id: e.id.clone(),
                surface: e.surface.clone(),
                found: found.to_string(),
            });
        }
    }
    for r in relations {
        if !ids.insert(r.id.as_str()) {
            return Err(InvariantError::DuplicateId(r.id.clone()));
        }
        for arg in [&r.arg1, &r.arg2] {
            if !entities.iter().any(|e| &e.id == arg) {
                return Err(InvariantError::DanglingArgument { relation: r.id.clone(), argument: arg.clone() });
            }
        }
        if r.arg1 == r.arg2 {
            return Err(InvariantError::SelfRelation(r.id.clone()));
        }
    }
    Ok(())
}

impl AnnotatedSentence {
    pub fn validate(&self) -> Result<(), InvariantError> {
        check_annotations(&self.text, &self.entities, &self.relations)
    }

    pub fn entity(&self, id: &str) -> Option<&EntityMention> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// View this sentence as a one-sentence document.
    pub fn to_document(&self) -> AnnotatedDocument {
        AnnotatedDocument {
            doc_id: self.provenance.clone(),
            text: self.text.clone(),
            entities: self.entities.clone(),
            relations: self.relations.clone(),
        }
    }
}

impl AnnotatedDocument {
    pub fn validate(&self) -> Result<(), InvariantError> {
        check_annotations(&self.text, &self.entities, &self.relations)
    }

    pub fn entity(&self, id: &str) -> Option<&EntityMention> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn into_sentence(self) -> AnnotatedSentence {
        AnnotatedSentence {
            text: self.text,
            entities: self.entities,
            relations: self.relations,
            provenance: self.doc_id,
        }
    }

    /// Copy with ids rewritten to `T1..Tn` / `R1..Rm` in order of appearance.
    pub fn renumbered(&self) -> AnnotatedDocument {
        let map: HashMap<&str, String> =
            self.entities.iter().enumerate().map(|(i, e)| (e.id.as_str(), format!("T{}", i + 1))).collect();
        let rename = |id: &String| map.get(id.as_str()).cloned().unwrap_or_else(|| id.clone());
        AnnotatedDocument {
            doc_id: self.doc_id.clone(),
            text: self.text.clone(),
            entities: self.entities.iter().map(|e| EntityMention { id: rename(&e.id), ..e.clone() }).collect(),
            relations: self
                .relations
                .iter()
                .enumerate()
                .map(|(i, r)| Relation {
                    id: format!("R{}", i + 1),
                    label: r.label.clone(),
                    arg1: rename(&r.arg1),
                    arg2: rename(&r.arg2),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusKind {
    SentenceLevel,
    PassageLevel,
}

/// A loaded corpus: either sentences or passages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Corpus {
    Sentences(Vec<AnnotatedSentence>),
    Documents(Vec<AnnotatedDocument>),
}

impl Corpus {
    pub fn kind(&self) -> CorpusKind {
        match self {
            Corpus::Sentences(_) => CorpusKind::SentenceLevel,
            Corpus::Documents(_) => CorpusKind::PassageLevel,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Corpus::Sentences(s) => s.len(),
            Corpus::Documents(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sentences(&self) -> Option<&[AnnotatedSentence]> {
        match self {
            Corpus::Sentences(s) => Some(s),
            Corpus::Documents(_) => None,
        }
    }

    pub fn documents(&self) -> Option<&[AnnotatedDocument]> {
        match self {
            Corpus::Documents(d) => Some(d),
            Corpus::Sentences(_) => None,
        }
    }
}

/// Error while reading a `.ann` file. Line numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BratError {
    #[error("line {line}: malformed annotation: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: unsupported annotation type {kind:?} (only T and R lines are supported)")]
    UnsupportedLine { line: usize, kind: String },
    #[error("line {line}: surface {surface:?} does not match text {found:?} at {span}")]
    SpanMismatch { line: usize, span: Span, surface: String, found: String },
    #[error("line {line}: span {span} out of bounds for text of {len} chars")]
    SpanOutOfBounds { line: usize, span: Span, len: usize },
    #[error("line {line}: relation argument {argument} does not name an entity")]
    DanglingArgument { line: usize, argument: String },
    #[error("line {line}: duplicate annotation id {id}")]
    DuplicateId { line: usize, id: String },
}

fn malformed(line: usize, reason: impl Into<String>) -> BratError {
    BratError::MalformedLine { line, reason: reason.into() }
}

/// Parse a BRAT `.txt`/`.ann` pair. The returned document has an empty
/// `doc_id`; callers that know the file name set it.
pub fn parse_brat(text: &str, ann: &str) -> Result<AnnotatedDocument, BratError> {
    let index = CharIndex::new(text);
    let mut entities = Vec::new();
    let mut pending = Vec::new();
    let mut ids = HashSet::new();

    for (n, raw) in ann.split('\n').enumerate() {
        let line = n + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let id = raw.split('\t').next().unwrap_or_default();
        match id.chars().next() {
            Some('T') => {
                let fields: Vec<&str> = raw.splitn(3, '\t').collect();
                if fields.len() != 3 {
                    return Err(malformed(line, "entity line needs 3 tab-separated fields"));
                }
                let mut head = fields[1].split(' ');
                let label = head.next().filter(|l| !l.is_empty());
                let start = head.next().and_then(|s| s.parse::<usize>().ok());
                let end = head.next().and_then(|s| s.parse::<usize>().ok());
                let (Some(label), Some(start), Some(end), None) = (label, start, end, head.next()) else {
                    return Err(malformed(line, format!("expected `Label start end`, found {:?}", fields[1])));
                };
                if start >= end {
                    return Err(malformed(line, format!("empty or inverted span {start} {end}")));
                }
                let span = Span::new(start, end);
                let found = index.slice(span).ok_or(BratError::SpanOutOfBounds { line, span, len: index.len() })?;
                if found != fields[2] {
                    return Err(BratError::SpanMismatch {
                        line,
                        span,
                        surface: fields[2].to_string(),
                        found: found.to_string(),
                    });
                }
                if !ids.insert(id.to_string()) {
                    return Err(BratError::DuplicateId { line, id: id.to_string() });
                }
                entities.push(EntityMention {
                    id: id.to_string(),
                    label: label.to_string(),
                    span,
                    surface: fields[2].to_string(),
                });
            }
            Some('R') => {
                let fields: Vec<&str> = raw.split('\t').collect();
                // A trailing empty field is tolerated; BRAT sometimes writes one.
                if !(fields.len() == 2 || (fields.len() == 3 && fields[2].is_empty())) {
                    return Err(malformed(line, "relation line needs 2 tab-separated fields"));
                }
                let parts: Vec<&str> = fields[1].split(' ').collect();
                let [label, a1, a2] = parts[..] else {
                    return Err(malformed(line, format!("expected `Label Arg1:Tx Arg2:Ty`, found {:?}", fields[1])));
                };
                let arg = |s: &str| -> Result<String, BratError> {
                    s.split_once(':')
                        .filter(|(role, target)| !role.is_empty() && !target.is_empty())
                        .map(|(_, target)| target.to_string())
                        .ok_or_else(|| malformed(line, format!("bad relation argument {s:?}")))
                };
                if label.is_empty() {
                    return Err(malformed(line, "empty relation label"));
                }
                if !ids.insert(id.to_string()) {
                    return Err(BratError::DuplicateId { line, id: id.to_string() });
                }
                pending.push((
                    line,
                    Relation { id: id.to_string(), label: label.to_string(), arg1: arg(a1)?, arg2: arg(a2)? },
                ));
            }
            Some(_) => {
                return Err(BratError::UnsupportedLine {
                    line,
                    kind: id.chars().take_while(|c| !c.is_ascii_digit()).collect(),
                })
            }
            None => return Err(malformed(line, "missing annotation id")),
        }
    }

    let known: HashSet<&str> = entities.iter().map(|e| e.id.as_str()).collect();
    let mut relations = Vec::with_capacity(pending.len());
    for (line, rel) in pending {
        for arg in [&rel.arg1, &rel.arg2] {
            if !known.contains(arg.as_str()) {
                return Err(BratError::DanglingArgument { line, argument: arg.clone() });
            }
        }
        if rel.arg1 == rel.arg2 {
            return Err(malformed(line, "relation links an entity to itself"));
        }
        relations.push(rel);
    }

    Ok(AnnotatedDocument { doc_id: String::new(), text: text.to_string(), entities, relations })
}

/// Serialize a document to `(text, ann)`. Ids are renumbered in order of
/// appearance, entities first.
pub fn write_brat(doc: &AnnotatedDocument) -> (String, String) {
    let doc = doc.renumbered();
    let mut ann = String::new();
    for e in &doc.entities {
        ann.push_str(&format!("{}\t{} {} {}\t{}\n", e.id, e.label, e.span.start, e.span.end, e.surface));
    }
    for r in &doc.relations {
        ann.push_str(&format!("{}\t{} Arg1:{} Arg2:{}\n", r.id, r.label, r.arg1, r.arg2));
    }
    (doc.text, ann)
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: BratError },
    #[error("{name}: missing .{missing} file")]
    MissingPair { name: String, missing: &'static str },
    #[error("{0}: no .txt/.ann pairs found")]
    EmptyCorpus(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.to_path_buf(), source }
}

/// Stems of paired `.txt`/`.ann` files in `dir`, sorted by name.
pub fn list_pairs(dir: &Path) -> Result<Vec<String>, CorpusError> {
    let mut txt = BTreeSet::new();
    let mut ann = BTreeSet::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if !path.is_file() {
            continue;
        }
        let (Some(stem), Some(ext)) = (path.file_stem(), path.extension()) else {
            continue;
        };
        let stem = stem.to_string_lossy().into_owned();
        match ext.to_str() {
            Some("txt") => {
                txt.insert(stem);
            }
            Some("ann") => {
                ann.insert(stem);
            }
            _ => {}
        }
    }
    if let Some(name) = txt.difference(&ann).next() {
        return Err(CorpusError::MissingPair { name: name.clone(), missing: "ann" });
    }
    if let Some(name) = ann.difference(&txt).next() {
        return Err(CorpusError::MissingPair { name: name.clone(), missing: "txt" });
    }
    if txt.is_empty() {
        return Err(CorpusError::EmptyCorpus(dir.to_path_buf()));
    }
    Ok(txt.into_iter().collect())
}

/// Read and parse one pair `<dir>/<name>.txt` + `.ann`.
pub fn read_pair(dir: &Path, name: &str) -> Result<AnnotatedDocument, CorpusError> {
    let txt_path = dir.join(format!("{name}.txt"));
    let ann_path = dir.join(format!("{name}.ann"));
    let text = fs::read_to_string(&txt_path).map_err(io_err(&txt_path))?;
    let ann = fs::read_to_string(&ann_path).map_err(io_err(&ann_path))?;
    let mut doc = parse_brat(&text, &ann).map_err(|source| CorpusError::Parse { path: ann_path, source })?;
    doc.doc_id = name.to_string();
    Ok(doc)
}

/// Load every pair in `dir`. Duplicated sentences are preserved.
pub fn load_corpus(dir: &Path, kind: CorpusKind) -> Result<Corpus, CorpusError> {
    let docs = list_pairs(dir)?.iter().map(|name| read_pair(dir, name)).collect::<Result<Vec<_>, _>>()?;
    Ok(match kind {
        CorpusKind::PassageLevel => Corpus::Documents(docs),
        CorpusKind::SentenceLevel => {
            Corpus::Sentences(docs.into_iter().map(AnnotatedDocument::into_sentence).collect())
        }
    })
}

/// Write documents as `<doc_id>.txt`/`.ann` pairs into `dir`.
pub fn write_corpus(dir: &Path, docs: &[AnnotatedDocument]) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for doc in docs {
        let (text, ann) = write_brat(doc);
        let txt_path = dir.join(format!("{}.txt", doc.doc_id));
        let ann_path = dir.join(format!("{}.ann", doc.doc_id));
        fs::write(&txt_path, text).map_err(io_err(&txt_path))?;
        fs::write(&ann_path, ann).map_err(io_err(&ann_path))?;
    }
    Ok(())
}

/// Outcome of checking every pair in a directory; used by `corpus validate`.
#[derive(Debug, Default)]
pub struct ValidationSummary {
    pub documents: usize,
    pub entities: usize,
    pub relations: usize,
    pub errors: BTreeMap<String, String>,
}

pub fn validate_dir(dir: &Path) -> Result<ValidationSummary, CorpusError> {
    let mut summary = ValidationSummary::default();
    for name in list_pairs(dir)? {
        match read_pair(dir, &name) {
            Ok(doc) => {
                summary.documents += 1;
                summary.entities += doc.entities.len();
                summary.relations += doc.relations.len();
            }
            Err(e) => {
                summary.errors.insert(name, e.to_string());
            }
        }
    }
    Ok(summary)
}
