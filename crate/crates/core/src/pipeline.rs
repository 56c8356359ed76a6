//! End-to-end extraction: segmentation, entity tagging and pair
//! classification, with ablation modes that substitute gold inputs for the
//! earlier stages.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{ClassifyError, GoldScorer, Scorer, Threshold};
use crate::corpus::{AnnotatedDocument, AnnotatedSentence, CharIndex};
use crate::eval::{evaluate_pairs, render_metrics_table, DocPairs, Metrics, PairKey};
use crate::ner::{NerError, OracleTagger, TagContext, Tagger};
use crate::scalar::Real;
use crate::segment::{project_annotations, segment_preserving, sentence_id, Segmenter, SentenceBoundary};
use crate::transform::{canonical_pair, enumerate_pairs, make_instances, normalize_entity, tag_text, TransformError};

/// Which stages run; the others take gold input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineMode {
    SsNerIe,
    NerIe,
    OnlyIe,
}

impl PipelineMode {
    pub const ALL: [PipelineMode; 3] = [PipelineMode::OnlyIe, PipelineMode::NerIe, PipelineMode::SsNerIe];

    /// Row label used in ablation tables.
    pub fn label(&self) -> &'static str {
        match self {
            PipelineMode::OnlyIe => "Only IE",
            PipelineMode::NerIe => "IE + NER",
            PipelineMode::SsNerIe => "SS + IE + NER",
        }
    }

    /// Command-line spelling.
    pub fn flag(&self) -> &'static str {
        match self {
            PipelineMode::OnlyIe => "only-ie",
            PipelineMode::NerIe => "ner-ie",
            PipelineMode::SsNerIe => "ss-ner-ie",
        }
    }
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A sentence with its character offset in the passage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacedSentence {
    pub offset: usize,
    pub text: String,
}

/// Pipeline input; the variant fixes the mode, so gold inputs a mode needs
/// are always present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PipelineInput {
    /// Raw passage: segment, tag, classify.
    Passage { doc_id: String, text: String },
    /// Gold sentence boundaries: tag, classify.
    Sentences { doc_id: String, sentences: Vec<PlacedSentence> },
    /// Gold sentences with gold entities: classify only.
    Annotated { doc_id: String, sentences: Vec<PlacedAnnotated> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacedAnnotated {
    pub offset: usize,
    pub sentence: AnnotatedSentence,
}

impl PipelineInput {
    pub fn mode(&self) -> PipelineMode {
        match self {
            PipelineInput::Passage { .. } => PipelineMode::SsNerIe,
            PipelineInput::Sentences { .. } => PipelineMode::NerIe,
            PipelineInput::Annotated { .. } => PipelineMode::OnlyIe,
        }
    }

    pub fn doc_id(&self) -> &str {
        match self {
            PipelineInput::Passage { doc_id, .. }
            | PipelineInput::Sentences { doc_id, .. }
            | PipelineInput::Annotated { doc_id, .. } => doc_id,
        }
    }

    /// Build the input for `mode` from a gold document, taking gold sentence
    /// boundaries from `gold_segmenter` (never cutting a gold entity).
    pub fn from_gold(doc: &AnnotatedDocument, mode: PipelineMode, gold_segmenter: &dyn Segmenter) -> Self {
        let doc_id = doc.doc_id.clone();
        if mode == PipelineMode::SsNerIe {
            return PipelineInput::Passage { doc_id, text: doc.text.clone() };
        }
        let boundaries = segment_preserving(gold_segmenter, &doc.text, &doc.entities);
        let projection = project_annotations(doc, &boundaries);
        let placed = boundaries.iter().zip(projection.sentences);
        match mode {
            PipelineMode::NerIe => PipelineInput::Sentences {
                doc_id,
                sentences: placed.map(|(b, s)| PlacedSentence { offset: b.span.start, text: s.text }).collect(),
            },
            _ => PipelineInput::Annotated {
                doc_id,
                sentences: placed.map(|(b, s)| PlacedAnnotated { offset: b.span.start, sentence: s }).collect(),
            },
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{doc_id}: {source}")]
    Tagging { doc_id: String, source: NerError },
    #[error("{doc_id}: {source}")]
    Transform { doc_id: String, source: TransformError },
    #[error("{doc_id}: {source}")]
    Classify { doc_id: String, source: ClassifyError },
}

/// The three swappable stages plus the decision threshold.
pub struct Components<'a, T> {
    pub segmenter: &'a dyn Segmenter,
    pub tagger: &'a dyn Tagger,
    pub scorer: &'a dyn Scorer<T>,
    pub threshold: Threshold<T>,
}

impl<T> Clone for Components<'_, T>
where
    Threshold<T>: Copy,
{
    fn clone(&self) -> Self {
        Components { segmenter: self.segmenter, tagger: self.tagger, scorer: self.scorer, threshold: self.threshold }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence<T> {
    pub sentence_index: usize,
    pub text: String,
    pub score: T,
}

/// A predicted interaction, deduplicated per document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedInteraction<T> {
    pub pair: PairKey,
    pub score: T,
    pub doc_id: String,
    /// Every sentence that yielded the pair, in sentence order.
    pub evidence: Vec<Evidence<T>>,
}

impl<T: Real> PredictedInteraction<T> {
    /// Evidence sentence with the highest score; earliest on ties.
    pub fn best_evidence(&self) -> &Evidence<T> {
        self.evidence
            .iter()
            .fold(None, |best: Option<&Evidence<T>>, e| match best {
                Some(b) if b.score >= e.score => Some(b),
                _ => Some(e),
            })
            .expect("predictions carry at least one evidence sentence")
    }
}

/// Sentences with entities, ready for pair classification.
fn annotate<T>(input: &PipelineInput, c: &Components<'_, T>) -> Result<Vec<AnnotatedSentence>, PipelineError> {
    let doc_id = input.doc_id();
    let placed: Vec<PlacedSentence> = match input {
        PipelineInput::Annotated { sentences, .. } => {
            return Ok(sentences.iter().map(|p| p.sentence.clone()).collect());
        }
        PipelineInput::Sentences { sentences, .. } => sentences.clone(),
        PipelineInput::Passage { text, .. } => {
            let index = CharIndex::new(text);
            c.segmenter
                .segment(text)
                .iter()
                .map(|b: &SentenceBoundary| PlacedSentence {
                    offset: b.span.start,
                    text: index.slice(b.span).unwrap_or_default().to_string(),
                })
                .collect()
        }
    };
    let ctxs: Vec<TagContext<'_>> =
        placed.iter().map(|p| TagContext { doc_id, offset: p.offset, text: &p.text }).collect();
    let tagged =
        c.tagger.tag_batch(&ctxs).map_err(|source| PipelineError::Tagging { doc_id: doc_id.to_string(), source })?;
    Ok(placed
        .into_iter()
        .zip(tagged)
        .enumerate()
        .map(|(i, (p, entities))| AnnotatedSentence {
            text: p.text,
            entities,
            relations: Vec::new(),
            provenance: sentence_id(doc_id, i),
        })
        .collect())
}

/// Run the pipeline on one document.
pub fn extract<T: Real>(
    input: &PipelineInput,
    c: &Components<'_, T>,
) -> Result<Vec<PredictedInteraction<T>>, PipelineError> {
    let doc_id = input.doc_id();
    let sentences = annotate(input, c)?;

    let mut candidates = Vec::new();
    for (i, s) in sentences.iter().enumerate() {
        for pair in enumerate_pairs(s) {
            let tagged = tag_text(&s.text, &pair, &s.provenance)
                .map_err(|source| PipelineError::Transform { doc_id: doc_id.to_string(), source })?;
            candidates.push((i, (pair.entity_a, pair.entity_b), tagged));
        }
    }
    let texts: Vec<&str> = candidates.iter().map(|(_, _, t)| t.as_str()).collect();
    let scores = c
        .scorer
        .score_batch(&texts)
        .map_err(|source| PipelineError::Classify { doc_id: doc_id.to_string(), source })?;

    let mut merged: BTreeMap<PairKey, PredictedInteraction<T>> = BTreeMap::new();
    for ((i, pair, _), score) in candidates.into_iter().zip(scores) {
        if !c.threshold.accepts(score) {
            continue;
        }
        let evidence = Evidence { sentence_index: i, text: sentences[i].text.clone(), score };
        merged
            .entry(pair.clone())
            .and_modify(|p| {
                if score > p.score {
                    p.score = score;
                }
                p.evidence.push(evidence.clone());
            })
            .or_insert_with(|| PredictedInteraction {
                pair,
                score,
                doc_id: doc_id.to_string(),
                evidence: vec![evidence],
            });
    }
    Ok(merged.into_values().collect())
}

/// Canonical normalized pairs of a document's gold relations.
pub fn gold_pairs(doc: &AnnotatedDocument) -> BTreeSet<PairKey> {
    let keys: HashMap<&str, String> =
        doc.entities.iter().map(|e| (e.id.as_str(), normalize_entity(&e.surface))).collect();
    doc.relations
        .iter()
        .filter_map(|r| {
            let (a, b) = (keys.get(r.arg1.as_str())?, keys.get(r.arg2.as_str())?);
            (a != b).then(|| canonical_pair(a.clone(), b.clone()))
        })
        .collect()
}

pub fn predicted_pairs<T>(predictions: &[PredictedInteraction<T>]) -> DocPairs {
    let mut out = DocPairs::new();
    for p in predictions {
        out.entry(p.doc_id.clone()).or_default().insert(p.pair.clone());
    }
    out
}

/// Run every document through every mode and score predicted pairs against
/// gold pairs. Rows follow [`PipelineMode::ALL`].
pub fn ablation_report<T: Real>(
    gold: &[AnnotatedDocument],
    gold_segmenter: &dyn Segmenter,
    c: &Components<'_, T>,
) -> Result<Vec<(PipelineMode, Metrics<T>)>, PipelineError> {
    let mut truth = DocPairs::new();
    for doc in gold {
        truth.insert(doc.doc_id.clone(), gold_pairs(doc));
    }
    PipelineMode::ALL
        .iter()
        .map(|&mode| {
            let mut predictions = Vec::new();
            for doc in gold {
                predictions.extend(extract(&PipelineInput::from_gold(doc, mode, gold_segmenter), c)?);
            }
            Ok((mode, evaluate_pairs(&predicted_pairs(&predictions), &truth)))
        })
        .collect()
}

/// Three-row Precision/Recall/F1 table, one row per mode.
pub fn render_ablation<T: Real>(rows: &[(PipelineMode, Metrics<T>)]) -> String {
    let labeled: Vec<(String, Metrics<T>)> = rows.iter().map(|(m, x)| (m.label().to_string(), *x)).collect();
    render_metrics_table(&labeled)
}

/// Returns stored gold boundaries for known passages; unknown text falls
/// back to a single sentence.
#[derive(Debug, Clone, Default)]
pub struct OracleSegmenter {
    boundaries: HashMap<String, Vec<SentenceBoundary>>,
}

impl OracleSegmenter {
    pub fn new(docs: &[AnnotatedDocument], gold_segmenter: &dyn Segmenter) -> Self {
        OracleSegmenter {
            boundaries: docs
                .iter()
                .map(|d| (d.text.clone(), segment_preserving(gold_segmenter, &d.text, &d.entities)))
                .collect(),
        }
    }
}

impl Segmenter for OracleSegmenter {
    fn segment(&self, text: &str) -> Vec<SentenceBoundary> {
        self.boundaries.get(text).cloned().unwrap_or_else(|| {
            let n = text.chars().count();
            if n == 0 {
                vec![]
            } else {
                vec![SentenceBoundary { span: crate::corpus::Span::new(0, n) }]
            }
        })
    }
}

/// Gold-backed segmenter, tagger and scorer for a set of documents. With
/// these, every pipeline mode reproduces the gold pairs.
pub struct Oracles {
    pub segmenter: OracleSegmenter,
    pub tagger: OracleTagger,
    pub scorer: GoldScorer,
}

impl Oracles {
    pub fn new(docs: &[AnnotatedDocument], gold_segmenter: &dyn Segmenter) -> Result<Self, TransformError> {
        let mut sentences = Vec::new();
        for d in docs {
            let b = segment_preserving(gold_segmenter, &d.text, &d.entities);
            sentences.extend(project_annotations(d, &b).sentences);
        }
        Ok(Oracles {
            segmenter: OracleSegmenter::new(docs, gold_segmenter),
            tagger: OracleTagger::new(docs),
            scorer: GoldScorer::new(&make_instances(&sentences)?),
        })
    }

    pub fn components<T: Real>(&self) -> Components<'_, T> {
        Components {
            segmenter: &self.segmenter,
            tagger: &self.tagger,
            scorer: &self.scorer,
            threshold: Threshold::default(),
        }
    }
}

/// One line of the prediction export. Field order is fixed: `pair`,
/// `score`, `doc_id`, `sentence_index`, `evidence`; the sentence is the
/// best-scoring evidence sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub pair: PairKey,
    pub score: f64,
    pub doc_id: String,
    pub sentence_index: usize,
    pub evidence: String,
}

impl<T: Real> From<&PredictedInteraction<T>> for PredictionRecord {
    fn from(p: &PredictedInteraction<T>) -> Self {
        let best = p.best_evidence();
        PredictionRecord {
            pair: p.pair.clone(),
            score: p.score.to_f64(),
            doc_id: p.doc_id.clone(),
            sentence_index: best.sentence_index,
            evidence: best.text.clone(),
        }
    }
}

pub fn write_predictions<T: Real, W: Write>(
    mut out: W,
    predictions: &[PredictedInteraction<T>],
) -> std::io::Result<()> {
    for p in predictions {
        let line = serde_json::to_string(&PredictionRecord::from(p)).map_err(std::io::Error::other)?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}
