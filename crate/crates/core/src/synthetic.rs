//! Seeded generators for property tests and smoke runs: random valid BRAT
//! documents, random multi-mention sentences, and a template corpus whose
//! labels are separable by the baseline's cue features.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::classify::{fit_baseline, BaselineModel, FitOptions};
use crate::corpus::{AnnotatedDocument, AnnotatedSentence, EntityMention, Relation, Span, BACTERIA, INTERACTS};
use crate::transform::{CandidatePair, LabeledInstance, MARKER_A, MARKER_B};

/// Taxa used by the template corpus; all are in the default gazetteer.
pub const TAXA: &[&str] = &[
    "Lactobacillus reuteri",
    "Escherichia coli",
    "Bacillus subtilis",
    "Listeria monocytogenes",
    "Staphylococcus aureus",
    "Pseudomonas aeruginosa",
    "Bifidobacterium longum",
    "Clostridium difficile",
    "Roseburia",
    "Eubacterium",
    "Bacteroides",
    "Faecalibacterium prausnitzii",
    "Akkermansia muciniphila",
    "Streptococcus mutans",
    "Enterococcus faecalis",
    "Salmonella enterica",
];

/// Interaction templates; `{A}` and `{B}` stand for the two taxa.
pub const POSITIVE_TEMPLATES: &[&str] = &[
    "{A} inhibits the growth of {B}.",
    "{A} strongly suppressed {B} in co-culture.",
    "Growth of {B} was inhibited by {A}.",
    "{A} produces a bacteriocin active against {B}.",
    "{A} outcompetes {B} in the murine gut.",
    "{A} enhanced the growth of {B} through cross-feeding.",
    "{A} promotes colonization by {B}.",
    "Antagonism of {A} towards {B} was observed on agar plates.",
    "{A} killed {B} within two hours.",
    "{A} reduced the viability of {B}.",
];

/// Co-mention templates without an interaction.
pub const NEGATIVE_TEMPLATES: &[&str] = &[
    "{A} and {B} were observed in the same samples.",
    "{A} was isolated together with {B}.",
    "{A} did not inhibit {B} in vitro.",
    "No antagonism between {A} and {B} was detected.",
    "Both {A} and {B} were detected in fecal samples of the cohort.",
    "{A} and {B} were quantified by qPCR.",
    "Levels of {A} correlated with levels of {B}.",
    "{A} did not suppress {B} under these conditions.",
];

fn fill(template: &str, a: &str, b: &str) -> (String, Span, Span) {
    let ia = template.find("{A}").expect("template has {A}");
    let ib = template.find("{B}").expect("template has {B}");
    let text = template.replace("{A}", a).replace("{B}", b);
    let chars = |s: &str| s.chars().count();
    let (a_len, b_len) = (chars(a), chars(b));
    let (sa, sb) = if ia < ib {
        let sa = chars(&template[..ia]);
        (sa, sa + a_len + chars(&template[ia + 3..ib]))
    } else {
        let sb = chars(&template[..ib]);
        (sb + b_len + chars(&template[ib + 3..ia]), sb)
    };
    (text, Span::new(sa, sa + a_len), Span::new(sb, sb + b_len))
}

/// `n` single-sentence instances, each with two distinct taxa; about half
/// use an interaction template.
pub fn template_corpus(n: usize, seed: u64) -> Vec<AnnotatedSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let positive = rng.gen_bool(0.5);
            let pool = if positive { POSITIVE_TEMPLATES } else { NEGATIVE_TEMPLATES };
            let template = pool.choose(&mut rng).expect("templates");
            let picked: Vec<&&str> = TAXA.choose_multiple(&mut rng, 2).collect();
            let (text, span_a, span_b) = fill(template, picked[0], picked[1]);
            let mention = |id: &str, span: Span, surface: &str| EntityMention {
                id: id.into(),
                label: BACTERIA.into(),
                span,
                surface: surface.into(),
            };
            let relations = if positive {
                vec![Relation { id: "R1".into(), label: INTERACTS.into(), arg1: "T1".into(), arg2: "T2".into() }]
            } else {
                vec![]
            };
            let mut entities = vec![mention("T1", span_a, picked[0]), mention("T2", span_b, picked[1])];
            entities.sort_by_key(|e| e.span.start);
            AnnotatedSentence { text, entities, relations, provenance: format!("synthetic_s{i}") }
        })
        .collect()
}

/// Result of enumerating every template's feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Separability {
    pub templates: usize,
    /// Feature vectors produced by both a positive and a negative template.
    pub conflicts: usize,
    /// Training accuracy of the baseline fitted on one instance per
    /// template.
    pub fit_accuracy: f64,
}

impl Separability {
    pub fn holds(&self) -> bool {
        self.conflicts == 0 && self.fit_accuracy == 1.0
    }
}

fn marked(template: &str) -> String {
    template.replace("{A}", MARKER_A).replace("{B}", MARKER_B)
}

/// Enumerate the templates through the baseline's features: the labels
/// are separable if no feature vector carries both labels and the fitted
/// model classifies every template correctly. Marker-substituted text is
/// independent of the chosen taxa, so the templates cover every instance
/// the corpus can contain.
pub fn template_separability(opts: &FitOptions) -> Separability {
    let model = BaselineModel::<f64> { window: opts.window, ..BaselineModel::default() };
    let mut seen: BTreeMap<Vec<u64>, (bool, bool)> = BTreeMap::new();
    let mut instances = Vec::new();
    for (label, pool) in [(true, POSITIVE_TEMPLATES), (false, NEGATIVE_TEMPLATES)] {
        for t in pool {
            let text = marked(t);
            let x = model.features(&text).expect("templates carry both markers");
            let slot = seen.entry(x.iter().map(|v| v.to_bits()).collect()).or_default();
            if label {
                slot.0 = true;
            } else {
                slot.1 = true;
            }
            instances.push(LabeledInstance {
                tagged_text: text,
                label,
                pair: CandidatePair {
                    entity_a: "a".into(),
                    entity_b: "b".into(),
                    mentions_a: vec![],
                    mentions_b: vec![],
                },
                provenance: (*t).to_string(),
            });
        }
    }
    let conflicts = seen.values().filter(|(p, n)| *p && *n).count();
    let fitted = fit_baseline::<f64>(&instances, opts).expect("both classes present");
    let correct =
        instances.iter().filter(|i| (fitted.score_text(&i.tagged_text).expect("valid") >= 0.5) == i.label).count();
    Separability { templates: instances.len(), conflicts, fit_accuracy: correct as f64 / instances.len() as f64 }
}

const WORDS: &[&str] = &[
    "the",
    "growth",
    "of",
    "and",
    "inhibits",
    "was",
    "in",
    "co-culture",
    "β-lactamase",
    "naïve",
    "Größe",
    "中文",
    "🦠",
    "(p",
    "<",
    "0.05)",
    "E.",
    "coli",
    "Lactobacillus",
    "reuteri",
    "Lb.",
    "sp.",
    "strain",
    "α-toxin",
    "résumé",
    "O157:H7",
    "[1]",
    "±",
    "x",
];
const ENTITY_LABELS: &[&str] = &["Bacteria", "Protein", "Gene_or_gene_product"];
const RELATION_LABELS: &[&str] = &["interacts", "Regulation", "Binding"];

/// A random valid document: multi-line Unicode text, possibly overlapping
/// entities over word runs, and relations between distinct entities.
pub fn random_document(rng: &mut impl Rng) -> AnnotatedDocument {
    let mut text = String::new();
    let mut words: Vec<Span> = Vec::new();
    let mut pos = 0usize;
    for s in 0..rng.gen_range(1..5) {
        if s > 0 {
            let sep = ["\n", " ", "\n\n"].choose(rng).expect("separators");
            text.push_str(sep);
            pos += sep.chars().count();
        }
        for w in 0..rng.gen_range(1..12) {
            if w > 0 {
                let sep = if rng.gen_bool(0.1) { "  " } else { " " };
                text.push_str(sep);
                pos += sep.len();
            }
            let word = WORDS.choose(rng).expect("words");
            let n = word.chars().count();
            words.push(Span::new(pos, pos + n));
            text.push_str(word);
            pos += n;
        }
        text.push('.');
        pos += 1;
    }
    let chars: Vec<char> = text.chars().collect();
    let mut entities = Vec::new();
    for i in 0..rng.gen_range(0..6) {
        let first = rng.gen_range(0..words.len());
        let last = (first + rng.gen_range(0..3)).min(words.len() - 1);
        let span = Span::new(words[first].start, words[last].end);
        let surface: String = chars[span.start..span.end].iter().collect();
        if surface.contains('\n') {
            continue;
        }
        entities.push(EntityMention {
            id: format!("T{}", 10 + 3 * i),
            label: ENTITY_LABELS.choose(rng).expect("labels").to_string(),
            span,
            surface,
        });
    }
    let mut relations = Vec::new();
    if entities.len() >= 2 {
        for i in 0..rng.gen_range(0..4) {
            let picked: Vec<&EntityMention> = entities.choose_multiple(rng, 2).collect();
            relations.push(Relation {
                id: format!("R{}", 7 + i),
                label: RELATION_LABELS.choose(rng).expect("labels").to_string(),
                arg1: picked[0].id.clone(),
                arg2: picked[1].id.clone(),
            });
        }
    }
    AnnotatedDocument { doc_id: String::new(), text, entities, relations }
}

/// Surface variants that normalize to the same key.
const MENTION_VARIANTS: &[&[&str]] = &[
    &["Escherichia coli", "escherichia  coli", "ESCHERICHIA COLI"],
    &["Bacillus subtilis", "bacillus subtilis."],
    &["Roseburia", "roseburia,", "ROSEBURIA"],
    &["Eubacterium", "eubacterium;"],
    &["Listeria monocytogenes"],
    &["Bacteroides", "bacteroides"],
    &["Lb. reuteri", "lb. reuteri"],
];
const FILLER: &[&str] = &["with", "and", "inhibits", "the", "growth", "of", "was", "seen", "(n", "=", "3)"];

/// A sentence with zero to seven non-overlapping mentions, often repeating
/// the same taxon in different surface forms.
pub fn random_sentence(rng: &mut impl Rng, provenance: &str) -> AnnotatedSentence {
    let mut text = String::new();
    let mut entities = Vec::new();
    let mut pos = 0usize;
    let mentions = rng.gen_range(0..8);
    for i in 0..mentions + rng.gen_range(1..6) {
        if i > 0 {
            text.push(' ');
            pos += 1;
        }
        let word = if entities.len() < mentions && rng.gen_bool(0.6) {
            let variants = MENTION_VARIANTS.choose(rng).expect("variants");
            let surface = variants.choose(rng).expect("variant");
            entities.push(EntityMention {
                id: format!("T{}", entities.len() + 1),
                label: BACTERIA.into(),
                span: Span::new(pos, pos + surface.chars().count()),
                surface: surface.to_string(),
            });
            surface
        } else {
            FILLER.choose(rng).expect("filler")
        };
        text.push_str(word);
        pos += word.chars().count();
    }
    text.push('.');
    AnnotatedSentence { text, entities, relations: vec![], provenance: provenance.into() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_brat, write_brat};
    use crate::transform::make_instances;

    #[test]
    fn templates_are_separable() {
        let s = template_separability(&FitOptions::default());
        assert!(s.holds(), "{s:?}");
        assert_eq!(s.templates, POSITIVE_TEMPLATES.len() + NEGATIVE_TEMPLATES.len());
    }

    #[test]
    fn template_corpus_is_valid_and_seeded() {
        let corpus = template_corpus(200, 11);
        assert_eq!(corpus, template_corpus(200, 11));
        assert_ne!(corpus, template_corpus(200, 12));
        for s in &corpus {
            s.validate().unwrap();
        }
        let instances = make_instances(&corpus).unwrap();
        assert_eq!(instances.len(), 200);
        let positives = instances.iter().filter(|i| i.label).count();
        assert!((70..130).contains(&positives), "{positives}");
    }

    #[test]
    fn random_documents_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let doc = random_document(&mut rng);
            doc.validate().unwrap();
            let (text, ann) = write_brat(&doc);
            assert_eq!(parse_brat(&text, &ann).unwrap(), doc.renumbered());
        }
    }

    #[test]
    fn random_sentences_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for i in 0..200 {
            let s = random_sentence(&mut rng, &format!("s{i}"));
            s.validate().unwrap();
            make_instances(std::slice::from_ref(&s)).unwrap();
        }
    }
}
