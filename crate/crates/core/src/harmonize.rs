//! Normalizes external relation corpora (protein–protein, gene regulation,
//! drug–drug) into sentence-level annotated sentences with a single binary
//! relation label.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    load_corpus, write_corpus, AnnotatedDocument, AnnotatedSentence, CharIndex, Corpus, CorpusError, CorpusKind,
    EntityMention, Relation, Span, INTERACTS,
};
use crate::segment::{
    merge_straddling, project_annotations, segment_preserving, ProjectionDrops, Segmenter, SentenceBoundary,
};
use crate::transform::{make_instances, write_records, TransformError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceName {
    BioInfer,
    #[serde(rename = "HPDR50")]
    Hpdr50,
    #[serde(rename = "LLL")]
    Lll,
    #[serde(rename = "IEPA")]
    Iepa,
    #[serde(rename = "AiMED")]
    AiMed,
    GeneReg,
    #[serde(rename = "DDI2011")]
    Ddi2011,
}

impl SourceName {
    pub const ALL: [SourceName; 7] = [
        SourceName::BioInfer,
        SourceName::Hpdr50,
        SourceName::Lll,
        SourceName::Iepa,
        SourceName::AiMed,
        SourceName::GeneReg,
        SourceName::Ddi2011,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SourceName::BioInfer => "BioInfer",
            SourceName::Hpdr50 => "HPDR50",
            SourceName::Lll => "LLL",
            SourceName::Iepa => "IEPA",
            SourceName::AiMed => "AiMED",
            SourceName::GeneReg => "GeneReg",
            SourceName::Ddi2011 => "DDI2011",
        }
    }
}

impl fmt::Display for SourceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceFormat {
    /// Sentence-split XML with `charOffset` entities and `pair` elements.
    UnifiedXml,
    /// Passage-level BRAT standoff directory.
    Brat,
}

/// How to read one source corpus and map its labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceCorpusDescriptor {
    pub name: SourceName,
    pub format: SourceFormat,
    /// File or directory holding the source data; relative paths resolve
    /// against the descriptor file.
    pub path: PathBuf,
    pub entity_label_map: BTreeMap<String, String>,
    pub relation_label_map: BTreeMap<String, String>,
}

#[derive(Debug, Error)]
pub enum HarmonizeError {
    #[error("{source_name}: unmapped {kind} label {label:?} in {doc_id}")]
    UnmappedLabel { source_name: SourceName, kind: &'static str, label: String, doc_id: String },
    #[error("{path}: invalid descriptor: {message}")]
    Descriptor { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Adapter { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("merge needs sentence-level corpora")]
    NotSentenceLevel,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl SourceCorpusDescriptor {
    pub fn from_file(path: &Path) -> Result<Self, HarmonizeError> {
        let text = fs::read_to_string(path).map_err(|source| HarmonizeError::Io { path: path.into(), source })?;
        let mut d: SourceCorpusDescriptor = toml::from_str(&text)
            .map_err(|e| HarmonizeError::Descriptor { path: path.into(), message: e.to_string() })?;
        if d.path.is_relative() {
            d.path = path.parent().unwrap_or(Path::new(".")).join(&d.path);
        }
        if let Some((label, target)) = d.relation_label_map.iter().find(|(_, t)| t.as_str() != INTERACTS) {
            return Err(HarmonizeError::Descriptor {
                path: path.into(),
                message: format!("relation label {label:?} maps to {target:?}; only {INTERACTS:?} is allowed"),
            });
        }
        Ok(d)
    }
}

/// A parsed source document, with native sentence boundaries when the
/// format provides them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceDocument {
    pub doc: AnnotatedDocument,
    pub sentences: Option<Vec<SentenceBoundary>>,
}

/// Reads one on-disk format into source documents.
pub trait SourceAdapter {
    fn read(&self, path: &Path) -> Result<Vec<SourceDocument>, HarmonizeError>;
}

pub struct BratAdapter;

impl SourceAdapter for BratAdapter {
    fn read(&self, path: &Path) -> Result<Vec<SourceDocument>, HarmonizeError> {
        let corpus = load_corpus(path, CorpusKind::PassageLevel)?;
        Ok(corpus
            .documents()
            .unwrap_or_default()
            .iter()
            .map(|d| SourceDocument { doc: d.clone(), sentences: None })
            .collect())
    }
}

/// Reads the shared XML interchange used by the protein–protein interaction
/// corpora:
///
/// ```xml
/// <corpus source="AiMED">
///   <document id="d0">
///     <sentence id="d0.s0" text="...">
///       <entity id="d0.s0.e0" charOffset="0-3" type="protein" text="IL-8"/>
///       <pair id="d0.s0.p0" e1="d0.s0.e0" e2="d0.s0.e1" interaction="True"/>
///     </sentence>
///   </document>
/// </corpus>
/// ```
///
/// `charOffset` ends are inclusive. Discontinuous offsets (`a-b,c-d`) keep
/// their first range. A pair is a relation when its `interaction` (or
/// `ddi`) attribute is true; the relation label is the pair's `type`
/// attribute if present, otherwise `True`.
pub struct UnifiedXmlAdapter;

fn xml_err(path: &Path, message: impl Into<String>) -> HarmonizeError {
    HarmonizeError::Adapter { path: path.into(), message: message.into() }
}

fn parse_offset(offset: &str, text: &str, index: &CharIndex<'_>) -> Option<Span> {
    let first = offset.split(',').next()?;
    let (a, b) = first.split_once('-')?;
    let (start, last): (usize, usize) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    let inclusive = Span { start, end: last + 1 };
    // Some distributions use exclusive ends; accept them when the entity
    // text says so.
    if !text.is_empty()
        && index.slice(inclusive) != Some(text)
        && start < last
        && index.slice(Span::new(start, last)) == Some(text)
    {
        return Some(Span::new(start, last));
    }
    (inclusive.end <= index.len()).then_some(inclusive)
}

impl SourceAdapter for UnifiedXmlAdapter {
    fn read(&self, path: &Path) -> Result<Vec<SourceDocument>, HarmonizeError> {
        let xml = fs::read_to_string(path).map_err(|source| HarmonizeError::Io { path: path.into(), source })?;
        let tree = roxmltree::Document::parse(&xml).map_err(|e| xml_err(path, e.to_string()))?;
        let mut out = Vec::new();
        for (d, document) in tree.descendants().filter(|n| n.has_tag_name("document")).enumerate() {
            let doc_id = document.attribute("id").map(str::to_string).unwrap_or_else(|| format!("d{d}"));
            let mut text = String::new();
            let mut offset = 0usize;
            let mut entities = Vec::new();
            let mut relations = Vec::new();
            let mut sentences = Vec::new();
            for sentence in document.children().filter(|n| n.has_tag_name("sentence")) {
                let s_text = sentence
                    .attribute("text")
                    .ok_or_else(|| xml_err(path, format!("{doc_id}: sentence without text")))?;
                if !text.is_empty() {
                    text.push('\n');
                    offset += 1;
                }
                let index = CharIndex::new(s_text);
                let mut ids = HashMap::new();
                for e in sentence.children().filter(|n| n.has_tag_name("entity")) {
                    let id = e.attribute("id").ok_or_else(|| xml_err(path, format!("{doc_id}: entity without id")))?;
                    let surface = e.attribute("text").unwrap_or("");
                    let span = e
                        .attribute("charOffset")
                        .and_then(|o| parse_offset(o, surface, &index))
                        .ok_or_else(|| xml_err(path, format!("{id}: bad charOffset")))?;
                    let found = index.slice(span).unwrap_or_default();
                    if !surface.is_empty() && !e.attribute("charOffset").unwrap_or("").contains(',') && found != surface
                    {
                        return Err(xml_err(
                            path,
                            format!("{id}: text {surface:?} does not match offsets ({found:?})"),
                        ));
                    }
                    let tid = format!("T{}", entities.len() + 1);
                    ids.insert(id.to_string(), tid.clone());
                    entities.push(EntityMention {
                        id: tid,
                        label: e.attribute("type").unwrap_or("Entity").to_string(),
                        span: span.shift(offset),
                        surface: found.to_string(),
                    });
                }
                for p in sentence.children().filter(|n| n.has_tag_name("pair")) {
                    let positive = p
                        .attribute("interaction")
                        .or_else(|| p.attribute("ddi"))
                        .is_some_and(|v| v.eq_ignore_ascii_case("true"));
                    if !positive {
                        continue;
                    }
                    let arg = |k: &str| {
                        p.attribute(k)
                            .and_then(|e| ids.get(e))
                            .cloned()
                            .ok_or_else(|| xml_err(path, format!("{doc_id}: pair {k} does not name an entity")))
                    };
                    let (arg1, arg2) = (arg("e1")?, arg("e2")?);
                    if arg1 == arg2 {
                        continue;
                    }
                    relations.push(Relation {
                        id: format!("R{}", relations.len() + 1),
                        label: p.attribute("type").unwrap_or("True").to_string(),
                        arg1,
                        arg2,
                    });
                }
                let n = index.len();
                if n > 0 {
                    sentences.push(SentenceBoundary { span: Span::new(offset, offset + n) });
                }
                text.push_str(s_text);
                offset += n;
            }
            out.push(SourceDocument {
                doc: AnnotatedDocument { doc_id, text, entities, relations },
                sentences: Some(sentences),
            });
        }
        Ok(out)
    }
}

pub fn adapter_for(format: SourceFormat) -> Box<dyn SourceAdapter> {
    match format {
        SourceFormat::UnifiedXml => Box::new(UnifiedXmlAdapter),
        SourceFormat::Brat => Box::new(BratAdapter),
    }
}

/// Per-source accounting. `kept_relations + cross_sentence + orphaned`
/// always equals `source_relations`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDrops {
    pub documents: usize,
    pub sentences: usize,
    pub source_entities: usize,
    pub kept_entities: usize,
    pub straddling_entities: usize,
    pub source_relations: usize,
    pub kept_relations: usize,
    pub cross_sentence: usize,
    pub orphaned: usize,
}

impl SourceDrops {
    fn add(&mut self, o: &SourceDrops) {
        self.documents += o.documents;
        self.sentences += o.sentences;
        self.source_entities += o.source_entities;
        self.kept_entities += o.kept_entities;
        self.straddling_entities += o.straddling_entities;
        self.source_relations += o.source_relations;
        self.kept_relations += o.kept_relations;
        self.cross_sentence += o.cross_sentence;
        self.orphaned += o.orphaned;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub per_source: BTreeMap<String, SourceDrops>,
    pub total: SourceDrops,
}

impl DropReport {
    pub fn cross_sentence(&self) -> usize {
        self.total.cross_sentence
    }

    pub fn merge(&mut self, other: &DropReport) {
        for (k, v) in &other.per_source {
            self.per_source.entry(k.clone()).or_default().add(v);
        }
        self.total.add(&other.total);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Source corpus name encoded in a harmonized provenance tag.
pub fn source_of(provenance: &str) -> &str {
    provenance.split_once(':').map_or(provenance, |(s, _)| s)
}

/// Split source documents into sentences, keep intra-sentence annotations,
/// collapse relation labels and count what was dropped.
pub fn harmonize(
    docs: &[SourceDocument],
    descriptor: &SourceCorpusDescriptor,
    segmenter: &dyn Segmenter,
) -> Result<(Corpus, DropReport), HarmonizeError> {
    let source = descriptor.name;
    let mut sentences = Vec::new();
    let mut drops = SourceDrops::default();
    for SourceDocument { doc, sentences: native } in docs {
        let unmapped = |kind, label: &str| HarmonizeError::UnmappedLabel {
            source_name: source,
            kind,
            label: label.to_string(),
            doc_id: doc.doc_id.clone(),
        };
        let mut mapped = doc.clone();
        for e in &mut mapped.entities {
            e.label = descriptor.entity_label_map.get(&e.label).cloned().ok_or_else(|| unmapped("entity", &e.label))?;
        }
        for r in &mut mapped.relations {
            if !descriptor.relation_label_map.contains_key(&r.label) {
                return Err(unmapped("relation", &r.label));
            }
            r.label = INTERACTS.to_string();
        }
        mapped.doc_id = format!("{source}:{}", doc.doc_id);

        let boundaries = match native {
            Some(b) => merge_straddling(b, &mapped.entities.iter().map(|e| e.span).collect::<Vec<_>>()),
            None => segment_preserving(segmenter, &mapped.text, &mapped.entities),
        };
        let projection = project_annotations(&mapped, &boundaries);
        let ProjectionDrops { straddling_entities, cross_sentence_relations, orphaned_relations } = projection.drops;
        let kept_relations: usize = projection.sentences.iter().map(|s| s.relations.len()).sum();
        drops.add(&SourceDrops {
            documents: 1,
            sentences: projection.sentences.len(),
            source_entities: doc.entities.len(),
            kept_entities: doc.entities.len() - straddling_entities,
            straddling_entities,
            source_relations: doc.relations.len(),
            kept_relations,
            cross_sentence: cross_sentence_relations,
            orphaned: orphaned_relations,
        });
        sentences.extend(projection.sentences);
    }
    let report = DropReport { per_source: BTreeMap::from([(source.to_string(), drops)]), total: drops };
    Ok((Corpus::Sentences(sentences), report))
}

/// Read a descriptor's source with the matching adapter, then harmonize.
pub fn harmonize_descriptor(
    descriptor: &SourceCorpusDescriptor,
    segmenter: &dyn Segmenter,
) -> Result<(Corpus, DropReport), HarmonizeError> {
    let docs = adapter_for(descriptor.format).read(&descriptor.path)?;
    harmonize(&docs, descriptor, segmenter)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Merged {
    pub corpus: Corpus,
    /// Set when there was nothing to merge.
    pub empty: bool,
}

/// Concatenate sentence-level corpora in order.
pub fn merge_corpora(parts: Vec<Corpus>) -> Result<Merged, HarmonizeError> {
    let empty = parts.is_empty();
    if empty {
        log::warn!("merging zero corpora");
    }
    let mut all: Vec<AnnotatedSentence> = Vec::new();
    for part in parts {
        match part {
            Corpus::Sentences(s) => all.extend(s),
            Corpus::Documents(_) => return Err(HarmonizeError::NotSentenceLevel),
        }
    }
    Ok(Merged { corpus: Corpus::Sentences(all), empty })
}

/// Write `sentences/` (BRAT pairs), `dataset.jsonl` (instance records) and
/// `drop_report.json` under `out`.
pub fn write_harmonized(out: &Path, corpus: &Corpus, report: &DropReport) -> Result<(), HarmonizeError> {
    let sentences = corpus.sentences().ok_or(HarmonizeError::NotSentenceLevel)?;
    let docs: Vec<AnnotatedDocument> = sentences
        .iter()
        .map(|s| AnnotatedDocument { doc_id: s.provenance.replace(['/', '\\'], "_"), ..s.to_document() })
        .collect();
    write_corpus(&out.join("sentences"), &docs)?;
    let io = |path: PathBuf| move |source| HarmonizeError::Io { path, source };
    let dataset = out.join("dataset.jsonl");
    let file = fs::File::create(&dataset).map_err(io(dataset.clone()))?;
    write_records(std::io::BufWriter::new(file), &make_instances(sentences)?)?;
    let report_path = out.join("drop_report.json");
    fs::write(&report_path, report.to_json()).map_err(io(report_path.clone()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_brat;
    use crate::segment::RuleSegmenter;

    fn descriptor(name: SourceName) -> SourceCorpusDescriptor {
        SourceCorpusDescriptor {
            name,
            format: SourceFormat::Brat,
            path: PathBuf::new(),
            entity_label_map: BTreeMap::from([("Protein".into(), "Entity".into()), ("Gene".into(), "Entity".into())]),
            relation_label_map: BTreeMap::from([
                ("Regulation".into(), INTERACTS.into()),
                ("Binding".into(), INTERACTS.into()),
            ]),
        }
    }

    fn source(text: &str, ann: &str) -> SourceDocument {
        let mut doc = parse_brat(text, ann).unwrap();
        doc.doc_id = "doc".into();
        SourceDocument { doc, sentences: None }
    }

    #[test]
    fn single_sentence_keeps_relation() {
        let doc =
            source("GerE binds SigK.", "T1\tProtein 0 4\tGerE\nT2\tGene 11 15\tSigK\nR1\tBinding Arg1:T1 Arg2:T2");
        let (corpus, report) = harmonize(&[doc], &descriptor(SourceName::GeneReg), &RuleSegmenter::default()).unwrap();
        let s = corpus.sentences().unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].relations[0].label, INTERACTS);
        assert_eq!(s[0].entities[1].label, "Entity");
        assert_eq!(s[0].provenance, "GeneReg:doc_s0");
        assert_eq!(source_of(&s[0].provenance), "GeneReg");
        assert_eq!((report.total.kept_relations, report.cross_sentence()), (1, 0));
    }

    #[test]
    fn cross_sentence_relation_dropped() {
        let doc = source(
            "GerE is expressed. It represses SigK.",
            "T1\tProtein 0 4\tGerE\nT2\tGene 32 36\tSigK\nR1\tRegulation Arg1:T1 Arg2:T2",
        );
        let (corpus, report) = harmonize(&[doc], &descriptor(SourceName::GeneReg), &RuleSegmenter::default()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(report.cross_sentence(), 1);
        assert!(corpus.sentences().unwrap().iter().all(|s| s.relations.is_empty()));
        let t = report.total;
        assert_eq!(t.kept_relations + t.cross_sentence + t.orphaned, t.source_relations);
    }

    #[test]
    fn unmapped_labels() {
        let doc = source("GerE binds SigK.", "T1\tChemical 0 4\tGerE");
        let err = harmonize(&[doc], &descriptor(SourceName::GeneReg), &RuleSegmenter::default()).unwrap_err();
        assert!(matches!(err, HarmonizeError::UnmappedLabel { kind: "entity", .. }), "{err}");
        let doc = source("GerE binds SigK.", "T1\tProtein 0 4\tGerE\nT2\tGene 11 15\tSigK\nR1\tCauses Arg1:T1 Arg2:T2");
        let err = harmonize(&[doc], &descriptor(SourceName::GeneReg), &RuleSegmenter::default()).unwrap_err();
        assert!(matches!(err, HarmonizeError::UnmappedLabel { kind: "relation", .. }), "{err}");
    }

    #[test]
    fn idempotent_on_sentence_input() {
        let doc = source(
            "GerE binds SigK. SigK activates GerE. Nothing here.",
            "T1\tProtein 0 4\tGerE\nT2\tGene 11 15\tSigK\nT3\tGene 17 21\tSigK\nT4\tProtein 32 36\tGerE\nR1\tBinding Arg1:T1 Arg2:T2\nR2\tRegulation Arg1:T3 Arg2:T4",
        );
        let seg = RuleSegmenter::default();
        let mut d = descriptor(SourceName::GeneReg);
        let (first, r1) = harmonize(&[doc], &d, &seg).unwrap();
        assert_eq!(r1.total.kept_relations, 2);
        d.entity_label_map.insert("Entity".into(), "Entity".into());
        d.relation_label_map.insert(INTERACTS.into(), INTERACTS.into());
        let again: Vec<SourceDocument> = first
            .sentences()
            .unwrap()
            .iter()
            .map(|s| SourceDocument { doc: s.to_document(), sentences: None })
            .collect();
        let (second, r2) = harmonize(&again, &d, &seg).unwrap();
        assert_eq!(r2.total.cross_sentence + r2.total.orphaned + r2.total.straddling_entities, 0);
        for (a, b) in first.sentences().unwrap().iter().zip(second.sentences().unwrap()) {
            assert_eq!((&a.text, &a.entities, &a.relations), (&b.text, &b.entities, &b.relations));
        }
    }

    #[test]
    fn merge() {
        let part = |n: usize| {
            Corpus::Sentences(
                (0..n)
                    .map(|i| AnnotatedSentence {
                        text: "x".into(),
                        entities: vec![],
                        relations: vec![],
                        provenance: format!("S{n}:{i}"),
                    })
                    .collect(),
            )
        };
        let merged = merge_corpora((1..=7).map(part).collect()).unwrap();
        assert_eq!(merged.corpus.len(), 28);
        assert!(!merged.empty);
        let none = merge_corpora(vec![]).unwrap();
        assert!(none.empty && none.corpus.is_empty());
        assert!(matches!(merge_corpora(vec![Corpus::Documents(vec![])]), Err(HarmonizeError::NotSentenceLevel)));
    }

    #[test]
    fn unified_xml_adapter() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.xml");
        fs::write(
            &path,
            r#"<corpus source="AiMED">
  <document id="A.d0">
    <sentence id="A.d0.s0" text="IL-8 binds CXCR1 and not TNF.">
      <entity id="A.d0.s0.e0" charOffset="0-3" type="protein" text="IL-8"/>
      <entity id="A.d0.s0.e1" charOffset="11-15" type="protein" text="CXCR1"/>
      <entity id="A.d0.s0.e2" charOffset="25-27" type="protein" text="TNF"/>
      <pair id="p0" e1="A.d0.s0.e0" e2="A.d0.s0.e1" interaction="True"/>
      <pair id="p1" e1="A.d0.s0.e0" e2="A.d0.s0.e2" interaction="False"/>
    </sentence>
    <sentence id="A.d0.s1" text="TNF was measured.">
      <entity id="A.d0.s1.e0" charOffset="0-2" type="protein" text="TNF"/>
    </sentence>
  </document>
</corpus>"#,
        )
        .unwrap();
        let docs = UnifiedXmlAdapter.read(&path).unwrap();
        assert_eq!(docs.len(), 1);
        let d = &docs[0].doc;
        d.validate().unwrap();
        assert_eq!(d.relations.len(), 1);
        assert_eq!(d.entities[3].span, Span::new(30, 33));
        let desc = SourceCorpusDescriptor {
            name: SourceName::AiMed,
            format: SourceFormat::UnifiedXml,
            path,
            entity_label_map: BTreeMap::from([("protein".into(), "Entity".into())]),
            relation_label_map: BTreeMap::from([("True".into(), INTERACTS.into())]),
        };
        let (corpus, report) = harmonize_descriptor(&desc, &RuleSegmenter::default()).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(report.total.kept_relations, 1);
        assert_eq!(corpus.sentences().unwrap()[1].text, "TNF was measured.");
    }

    #[test]
    fn descriptor_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.toml");
        fs::write(
            &path,
            "name = \"DDI2011\"\nformat = \"unified-xml\"\npath = \"ddi.xml\"\n[entity_label_map]\ndrug = \"Entity\"\n[relation_label_map]\nTrue = \"interacts\"\n",
        )
        .unwrap();
        let d = SourceCorpusDescriptor::from_file(&path).unwrap();
        assert_eq!(d.name, SourceName::Ddi2011);
        assert_eq!(d.path, dir.path().join("ddi.xml"));
        fs::write(&path, "name = \"DDI2011\"\nformat = \"brat\"\npath = \"x\"\nbogus = 1\n[entity_label_map]\n[relation_label_map]\n").unwrap();
        assert!(matches!(SourceCorpusDescriptor::from_file(&path), Err(HarmonizeError::Descriptor { .. })));
    }
}
