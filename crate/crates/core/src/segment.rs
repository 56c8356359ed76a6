//! Rule-based sentence segmentation and projection of passage annotations
//! onto sentences.

use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{AnnotatedDocument, AnnotatedSentence, CharIndex, EntityMention, Span};

/// The guard list shipped with the crate.
pub const DEFAULT_GUARD: &str = include_str!("../data/abbreviations.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceBoundary {
    pub span: Span,
}

#[derive(Debug, Error)]
pub enum GuardError {
    #[error("line {line}: invalid pattern: {source}")]
    Pattern { line: usize, source: regex::Error },
    #[error("guard list has no patterns")]
    Empty,
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
enum GuardPattern {
    /// Lower-cased words; the last one ends with the candidate period.
    Literal(Vec<String>),
    /// Matched against `"<word> <next word>"`.
    Window(Regex),
}

/// Abbreviations after which a period never ends a sentence.
#[derive(Debug, Clone)]
pub struct AbbreviationGuard {
    patterns: Vec<GuardPattern>,
}

impl Default for AbbreviationGuard {
    fn default() -> Self {
        Self::parse(DEFAULT_GUARD).expect("shipped guard list is valid")
    }
}

impl AbbreviationGuard {
    /// Parse the guard file format: one entry per line, `#` comments,
    /// `re:` prefix for window regexes.
    pub fn parse(source: &str) -> Result<Self, GuardError> {
        let mut patterns = Vec::new();
        for (n, line) in source.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.strip_prefix("re:") {
                Some(re) => patterns.push(GuardPattern::Window(
                    Regex::new(re).map_err(|source| GuardError::Pattern { line: n + 1, source })?,
                )),
                None => patterns.push(GuardPattern::Literal(line.split_whitespace().map(str::to_lowercase).collect())),
            }
        }
        if patterns.is_empty() {
            return Err(GuardError::Empty);
        }
        Ok(AbbreviationGuard { patterns })
    }

    pub fn from_file(path: &Path) -> Result<Self, GuardError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// `words` ends with the word carrying the candidate period; `next` is
    /// the word after the whitespace.
    fn protects(&self, words: &[&str], next: &str) -> bool {
        let Some(last) = words.last() else { return false };
        let window = format!("{last} {next}");
        self.patterns.iter().any(|p| match p {
            GuardPattern::Window(re) => re.is_match(&window),
            GuardPattern::Literal(lit) => {
                lit.len() <= words.len()
                    && lit.iter().zip(&words[words.len() - lit.len()..]).all(|(a, b)| a == &b.to_lowercase())
            }
        })
    }
}

/// Anything that can split a passage into sentences.
pub trait Segmenter: Send + Sync {
    fn segment(&self, text: &str) -> Vec<SentenceBoundary>;
}

/// Splits at `.`, `!`, `?` followed by whitespace and an upper-case letter
/// or digit, unless the terminator closes a guarded abbreviation or sits
/// inside balanced parentheses.
#[derive(Debug, Clone, Default)]
pub struct RuleSegmenter {
    pub guard: AbbreviationGuard,
}

impl RuleSegmenter {
    pub fn new(guard: AbbreviationGuard) -> Self {
        RuleSegmenter { guard }
    }
}

const OPENERS: &[char] = &['(', '[', '"', '\'', '\u{201c}', '\u{2018}'];
const CLOSERS: &[char] = &[')', ']', '"', '\'', '\u{201d}', '\u{2019}'];

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Mark characters that lie strictly inside a balanced `()`/`[]` pair.
fn parenthesised(chars: &[char]) -> Vec<bool> {
    let mut inside = vec![false; chars.len()];
    let mut stack: Vec<(char, usize)> = Vec::new();
    for (i, &c) in chars.iter().enumerate() {
        match c {
            '(' | '[' => stack.push((c, i)),
            ')' | ']' => {
                let open = if c == ')' { '(' } else { '[' };
                if let Some(pos) = stack.iter().rposition(|&(o, _)| o == open) {
                    let (_, start) = stack[pos];
                    stack.truncate(pos);
                    inside[start + 1..i].iter_mut().for_each(|x| *x = true);
                }
            }
            _ => {}
        }
    }
    inside
}

impl Segmenter for RuleSegmenter {
    fn segment(&self, text: &str) -> Vec<SentenceBoundary> {
        let chars: Vec<char> = text.chars().collect();
        let inside = parenthesised(&chars);
        let n = chars.len();
        let mut cuts = Vec::new();

        let mut i = 0;
        while i < n {
            if !is_terminator(chars[i]) || inside[i] {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < n && (is_terminator(chars[j]) || CLOSERS.contains(&chars[j])) {
                j += 1;
            }
            let mut k = j;
            while k < n && chars[k].is_whitespace() {
                k += 1;
            }
            if k == j || k == n {
                i = j;
                continue;
            }
            let mut first = k;
            while first < n && OPENERS.contains(&chars[first]) {
                first += 1;
            }
            let starts_sentence = first < n && (chars[first].is_uppercase() || chars[first].is_ascii_digit());
            if !starts_sentence {
                i = j;
                continue;
            }
            if chars[i] == '.' && j == i + 1 {
                let preceding = trailing_words(&chars[..=i], 3);
                let mut words: Vec<&str> = preceding.split_whitespace().collect();
                if let Some(last) = words.last_mut() {
                    *last = last.trim_start_matches(OPENERS);
                }
                let mut e = k;
                while e < n && !chars[e].is_whitespace() {
                    e += 1;
                }
                let next: String = chars[k..e].iter().collect();
                if self.guard.protects(&words, &next) {
                    i = j;
                    continue;
                }
            }
            cuts.push(j);
            i = j;
        }

        let mut out = Vec::new();
        let mut start = 0;
        for end in cuts.into_iter().chain(std::iter::once(n)) {
            if let Some(span) = trim_span(&chars, start, end) {
                out.push(SentenceBoundary { span });
            }
            start = end;
        }
        out
    }
}

/// The last `count` whitespace-separated words of `chars`.
fn trailing_words(chars: &[char], count: usize) -> String {
    let mut start = chars.len();
    let mut seen = 0;
    while start > 0 && seen < count {
        while start > 0 && chars[start - 1].is_whitespace() {
            start -= 1;
        }
        while start > 0 && !chars[start - 1].is_whitespace() {
            start -= 1;
        }
        seen += 1;
    }
    chars[start..].iter().collect()
}

fn trim_span(chars: &[char], mut start: usize, mut end: usize) -> Option<Span> {
    while start < end && chars[start].is_whitespace() {
        start += 1;
    }
    while end > start && chars[end - 1].is_whitespace() {
        end -= 1;
    }
    (start < end).then(|| Span::new(start, end))
}

/// Splits on line breaks; one sentence per non-blank line. This is how
/// gold sentence boundaries are stored in passage-level BRAT files.
#[derive(Debug, Clone, Copy, Default)]
pub struct LineSegmenter;

impl Segmenter for LineSegmenter {
    fn segment(&self, text: &str) -> Vec<SentenceBoundary> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut start = 0;
        for (i, &c) in chars.iter().enumerate() {
            if c == '\n' {
                out.extend(trim_span(&chars, start, i).map(|span| SentenceBoundary { span }));
                start = i + 1;
            }
        }
        out.extend(trim_span(&chars, start, chars.len()).map(|span| SentenceBoundary { span }));
        out
    }
}

/// Merge consecutive boundaries whenever an entity span crosses the gap
/// between them, so no gold entity straddles a sentence break.
pub fn merge_straddling(boundaries: &[SentenceBoundary], entities: &[Span]) -> Vec<SentenceBoundary> {
    let mut out: Vec<SentenceBoundary> = Vec::with_capacity(boundaries.len());
    for b in boundaries {
        match out.last_mut() {
            Some(prev) if entities.iter().any(|e| e.start < prev.span.end && e.end > prev.span.end) => {
                prev.span.end = b.span.end;
            }
            _ => out.push(*b),
        }
    }
    out
}

/// Segment, then suppress any boundary that would cut a gold entity.
pub fn segment_preserving(segmenter: &dyn Segmenter, text: &str, entities: &[EntityMention]) -> Vec<SentenceBoundary> {
    let spans: Vec<Span> = entities.iter().map(|e| e.span).collect();
    merge_straddling(&segmenter.segment(text), &spans)
}

/// Counts of annotations that could not be carried onto a sentence.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionDrops {
    /// Entities not contained in any single sentence.
    pub straddling_entities: usize,
    /// Relations whose arguments sit in different sentences.
    pub cross_sentence_relations: usize,
    /// Relations with an argument among the straddling entities.
    pub orphaned_relations: usize,
}

impl ProjectionDrops {
    pub fn dropped_relations(&self) -> usize {
        self.cross_sentence_relations + self.orphaned_relations
    }

    pub fn add(&mut self, other: &ProjectionDrops) {
        self.straddling_entities += other.straddling_entities;
        self.cross_sentence_relations += other.cross_sentence_relations;
        self.orphaned_relations += other.orphaned_relations;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Projection {
    pub sentences: Vec<AnnotatedSentence>,
    pub drops: ProjectionDrops,
}

/// Provenance tag of the `index`-th sentence of `doc_id`.
pub fn sentence_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}_s{index}")
}

/// Distribute a document's annotations over `boundaries`, rebasing offsets
/// to each sentence and dropping anything that does not fit in one.
pub fn project_annotations(doc: &AnnotatedDocument, boundaries: &[SentenceBoundary]) -> Projection {
    let index = CharIndex::new(&doc.text);
    let mut sentences: Vec<AnnotatedSentence> = boundaries
        .iter()
        .enumerate()
        .map(|(i, b)| AnnotatedSentence {
            text: index.slice(b.span).unwrap_or_default().to_string(),
            entities: Vec::new(),
            relations: Vec::new(),
            provenance: sentence_id(&doc.doc_id, i),
        })
        .collect();
    let mut drops = ProjectionDrops::default();

    let mut home = std::collections::HashMap::new();
    for e in &doc.entities {
        match boundaries.iter().position(|b| b.span.contains(&e.span)) {
            Some(s) => {
                home.insert(e.id.as_str(), s);
                sentences[s]
                    .entities
                    .push(EntityMention { span: e.span.rebase(boundaries[s].span.start), ..e.clone() });
            }
            None => {
                log::warn!("{}: entity {} at {} straddles a sentence break", doc.doc_id, e.id, e.span);
                drops.straddling_entities += 1;
            }
        }
    }
    for r in &doc.relations {
        match (home.get(r.arg1.as_str()), home.get(r.arg2.as_str())) {
            (Some(a), Some(b)) if a == b => sentences[*a].relations.push(r.clone()),
            (Some(_), Some(_)) => drops.cross_sentence_relations += 1,
            _ => drops.orphaned_relations += 1,
        }
    }
    Projection { sentences, drops }
}

/// Segment every document (never cutting a gold entity) and project its
/// annotations; drop counts are summed over the corpus.
pub fn project_corpus(docs: &[AnnotatedDocument], segmenter: &dyn Segmenter) -> Projection {
    let mut out = Projection { sentences: Vec::new(), drops: ProjectionDrops::default() };
    for doc in docs {
        let p = project_annotations(doc, &segment_preserving(segmenter, &doc.text, &doc.entities));
        out.sentences.extend(p.sentences);
        out.drops.add(&p.drops);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_brat;

    fn texts(text: &str) -> Vec<String> {
        RuleSegmenter::default()
            .segment(text)
            .iter()
            .map(|b| crate::corpus::slice_chars(text, b.span).unwrap().to_string())
            .collect()
    }

    #[test]
    fn splits_plain_terminators() {
        assert_eq!(texts("A grows. B shrinks."), ["A grows.", "B shrinks."]);
        assert_eq!(texts("Really? Yes! 3 strains grew."), ["Really?", "Yes!", "3 strains grew."]);
    }

    #[test]
    fn genus_abbreviations_do_not_split() {
        let s = "Lb. oligofermentans inhibited Lc. piscium in co-culture.";
        assert_eq!(texts(s), [s]);
        let s = "Growth of S. Typhimurium was reduced by E. coli Nissle.";
        assert_eq!(texts(s), [s]);
    }

    #[test]
    fn parentheses_protect() {
        let s = "Strains (isolated from soil. See methods) were grown. Then washed.";
        assert_eq!(texts(s), ["Strains (isolated from soil. See methods) were grown.", "Then washed."]);
    }

    #[test]
    fn single_word_and_whitespace() {
        assert_eq!(texts("Bacteria"), ["Bacteria"]);
        let b = RuleSegmenter::default().segment("  Bacteria grew.  ");
        assert_eq!(b, [SentenceBoundary { span: Span::new(2, 16) }]);
        assert!(RuleSegmenter::default().segment("   ").is_empty());
    }

    #[test]
    fn closing_quotes_stay_with_sentence() {
        assert_eq!(texts("It was \"inhibited.\" Then it grew."), ["It was \"inhibited.\"", "Then it grew."]);
    }

    #[test]
    fn guard_file_format() {
        let g = AbbreviationGuard::parse("# c\n\nFoo.\nre:^X\\.").unwrap();
        assert_eq!(g.len(), 2);
        assert!(matches!(AbbreviationGuard::parse("# only\n"), Err(GuardError::Empty)));
        assert!(matches!(AbbreviationGuard::parse("re:(\n"), Err(GuardError::Pattern { line: 1, .. })));
        let seg = RuleSegmenter::new(AbbreviationGuard::parse("Foo.").unwrap());
        assert_eq!(seg.segment("See Foo. Bar here.").len(), 1);
    }

    #[test]
    fn line_segmenter() {
        let b = LineSegmenter.segment("One.\n\n Two two.\n");
        assert_eq!(b.iter().map(|b| b.span).collect::<Vec<_>>(), [Span::new(0, 4), Span::new(7, 15)]);
    }

    #[test]
    fn straddling_entity_suppresses_boundary() {
        let b = [
            SentenceBoundary { span: Span::new(0, 5) },
            SentenceBoundary { span: Span::new(6, 10) },
            SentenceBoundary { span: Span::new(11, 15) },
        ];
        let merged = merge_straddling(&b, &[Span::new(3, 8)]);
        assert_eq!(merged.iter().map(|b| b.span).collect::<Vec<_>>(), [Span::new(0, 10), Span::new(11, 15)]);
    }

    #[test]
    fn projection_keeps_intra_sentence_relation() {
        let text = "Lactobacillus inhibits E. coli. Nothing else.";
        let ann = "T1\tBacteria 0 13\tLactobacillus\nT2\tBacteria 23 30\tE. coli\nR1\tinteracts Arg1:T1 Arg2:T2";
        let doc = parse_brat(text, ann).unwrap();
        let p = project_annotations(&doc, &RuleSegmenter::default().segment(text));
        assert_eq!(p.sentences.len(), 2);
        assert_eq!(p.sentences[0].entities.len(), 2);
        assert_eq!(p.sentences[0].relations.len(), 1);
        assert!(p.sentences[1].entities.is_empty());
        assert_eq!(p.drops, ProjectionDrops::default());
    }

    #[test]
    fn projection_drops_cross_sentence_relation() {
        let text = "Roseburia grew. Blautia declined.";
        let ann = "T1\tBacteria 0 9\tRoseburia\nT2\tBacteria 16 23\tBlautia\nR1\tinteracts Arg1:T1 Arg2:T2";
        let doc = parse_brat(text, ann).unwrap();
        let p = project_annotations(&doc, &RuleSegmenter::default().segment(text));
        assert_eq!(p.sentences.len(), 2);
        assert_eq!(p.drops.cross_sentence_relations, 1);
        assert_eq!(p.sentences[1].entities[0].span, Span::new(0, 7));
        for s in &p.sentences {
            s.validate().unwrap();
            assert!(s.relations.is_empty());
        }
    }

    #[test]
    fn projection_without_entities() {
        let doc = parse_brat("One here. Two there.", "").unwrap();
        let p = project_annotations(&doc, &RuleSegmenter::default().segment(&doc.text));
        assert_eq!(p.sentences.len(), 2);
        assert!(p.sentences.iter().all(|s| s.entities.is_empty() && s.relations.is_empty()));
    }

    #[test]
    fn projection_counts_straddlers() {
        let text = "Alpha one. Beta two.";
        let ann = "T1\tBacteria 6 15\tone. Beta\nT2\tBacteria 0 5\tAlpha\nR1\tinteracts Arg1:T1 Arg2:T2";
        let doc = parse_brat(text, ann).unwrap();
        let b = RuleSegmenter::default().segment(text);
        let p = project_annotations(&doc, &b);
        assert_eq!(p.drops.straddling_entities, 1);
        assert_eq!(p.drops.orphaned_relations, 1);
        let p = project_annotations(&doc, &segment_preserving(&RuleSegmenter::default(), text, &doc.entities));
        assert_eq!(p.sentences.len(), 1);
        assert_eq!(p.drops, ProjectionDrops::default());
    }
}
