//! Relation extraction as binary classification: one marker-tagged copy of
//! a sentence per unordered pair of unique entities.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedSentence, CharIndex, Corpus, Span};

/// Replaces every mention of the first entity of a pair.
pub const MARKER_A: &str = "@BAC1$";
/// Replaces every mention of the second entity of a pair.
pub const MARKER_B: &str = "@BAC2$";

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("{provenance}: mentions at {a} and {b} overlap")]
    OverlappingMentions { provenance: String, a: Span, b: Span },
    #[error("{provenance}: span {span} out of bounds")]
    SpanOutOfBounds { provenance: String, span: Span },
    #[error("dataset construction needs a sentence-level corpus")]
    NotSentenceLevel,
    #[error("record line {line}: {source}")]
    Record { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Case-fold, collapse internal whitespace and strip trailing punctuation.
pub fn normalize_entity(surface: &str) -> String {
    let folded = surface.to_lowercase();
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_end_matches(|c: char| matches!(c, '.' | ',' | ';' | ':' | '!' | '?') || c.is_whitespace())
        .to_string()
}

/// Canonically ordered pair of normalized entity keys with their mentions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CandidatePair {
    pub entity_a: String,
    pub entity_b: String,
    pub mentions_a: Vec<Span>,
    pub mentions_b: Vec<Span>,
}

impl CandidatePair {
    pub fn key(&self) -> (&str, &str) {
        (&self.entity_a, &self.entity_b)
    }
}

/// Order two keys canonically.
pub fn canonical_pair(a: String, b: String) -> (String, String) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Mentions of a sentence grouped by normalized key, in key order.
pub fn group_mentions(sentence: &AnnotatedSentence) -> BTreeMap<String, Vec<Span>> {
    let mut groups: BTreeMap<String, Vec<Span>> = BTreeMap::new();
    for e in &sentence.entities {
        groups.entry(normalize_entity(&e.surface)).or_default().push(e.span);
    }
    for spans in groups.values_mut() {
        spans.sort();
    }
    groups
}

/// All unordered pairs of unique normalized entities in the sentence.
pub fn enumerate_pairs(sentence: &AnnotatedSentence) -> Vec<CandidatePair> {
    let groups: Vec<(String, Vec<Span>)> = group_mentions(sentence).into_iter().collect();
    let mut pairs = Vec::new();
    for (i, (a, ma)) in groups.iter().enumerate() {
        for (b, mb) in &groups[i + 1..] {
            pairs.push(CandidatePair {
                entity_a: a.clone(),
                entity_b: b.clone(),
                mentions_a: ma.clone(),
                mentions_b: mb.clone(),
            });
        }
    }
    pairs
}

/// A marker-tagged sentence and its binary target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub tagged_text: String,
    pub label: bool,
    pub pair: CandidatePair,
    pub provenance: String,
}

/// True iff some relation of the sentence joins the two keys, either way round.
pub fn has_relation(sentence: &AnnotatedSentence, a: &str, b: &str) -> bool {
    let keys: HashMap<&str, String> =
        sentence.entities.iter().map(|e| (e.id.as_str(), normalize_entity(&e.surface))).collect();
    sentence.relations.iter().any(|r| match (keys.get(r.arg1.as_str()), keys.get(r.arg2.as_str())) {
        (Some(x), Some(y)) => (x == a && y == b) || (x == b && y == a),
        _ => false,
    })
}

/// Substitute markers for every mention of the pair. Mentions are rewritten
/// right to left so earlier offsets stay valid.
pub fn tag_text(text: &str, pair: &CandidatePair, provenance: &str) -> Result<String, TransformError> {
    let mut marks: Vec<(Span, &str)> =
        pair.mentions_a.iter().map(|s| (*s, MARKER_A)).chain(pair.mentions_b.iter().map(|s| (*s, MARKER_B))).collect();
    marks.sort_by_key(|(s, _)| (s.start, s.end));
    for w in marks.windows(2) {
        if w[0].0.overlaps(&w[1].0) {
            return Err(TransformError::OverlappingMentions {
                provenance: provenance.to_string(),
                a: w[0].0,
                b: w[1].0,
            });
        }
    }
    let index = CharIndex::new(text);
    let mut out = text.to_string();
    for (span, marker) in marks.iter().rev() {
        if span.end > index.len() {
            return Err(TransformError::SpanOutOfBounds { provenance: provenance.to_string(), span: *span });
        }
        out.replace_range(index.byte(span.start)..index.byte(span.end), marker);
    }
    Ok(out)
}

pub fn tag_instance(sentence: &AnnotatedSentence, pair: &CandidatePair) -> Result<LabeledInstance, TransformError> {
    Ok(LabeledInstance {
        tagged_text: tag_text(&sentence.text, pair, &sentence.provenance)?,
        label: has_relation(sentence, &pair.entity_a, &pair.entity_b),
        pair: pair.clone(),
        provenance: sentence.provenance.clone(),
    })
}

/// Instances for every candidate pair of every sentence, in corpus order.
pub fn make_instances(sentences: &[AnnotatedSentence]) -> Result<Vec<LabeledInstance>, TransformError> {
    let mut out = Vec::new();
    for s in sentences {
        for pair in enumerate_pairs(s) {
            out.push(tag_instance(s, &pair)?);
        }
    }
    Ok(out)
}

pub fn make_dataset(corpus: &Corpus) -> Result<Vec<LabeledInstance>, TransformError> {
    match corpus {
        Corpus::Sentences(s) => make_instances(s),
        Corpus::Documents(_) => Err(TransformError::NotSentenceLevel),
    }
}

/// One line of the dataset export. Field order is fixed:
/// `tagged_text`, `label`, `entity_a`, `entity_b`, `provenance`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub tagged_text: String,
    pub label: u8,
    pub entity_a: String,
    pub entity_b: String,
    pub provenance: String,
}

impl From<&LabeledInstance> for InstanceRecord {
    fn from(i: &LabeledInstance) -> Self {
        InstanceRecord {
            tagged_text: i.tagged_text.clone(),
            label: u8::from(i.label),
            entity_a: i.pair.entity_a.clone(),
            entity_b: i.pair.entity_b.clone(),
            provenance: i.provenance.clone(),
        }
    }
}

impl InstanceRecord {
    /// Back to an instance. Mention spans are not exported, so the pair
    /// carries keys only.
    pub fn into_instance(self) -> LabeledInstance {
        LabeledInstance {
            tagged_text: self.tagged_text,
            label: self.label != 0,
            pair: CandidatePair {
                entity_a: self.entity_a,
                entity_b: self.entity_b,
                mentions_a: Vec::new(),
                mentions_b: Vec::new(),
            },
            provenance: self.provenance,
        }
    }
}

/// Write instances as JSON lines.
pub fn write_records<W: Write>(mut out: W, instances: &[LabeledInstance]) -> Result<(), TransformError> {
    for i in instances {
        let line = serde_json::to_string(&InstanceRecord::from(i))
            .map_err(|source| TransformError::Record { line: 0, source })?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(input: R) -> Result<Vec<InstanceRecord>, TransformError> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| TransformError::Record { line: n + 1, source })?);
    }
    Ok(out)
}
