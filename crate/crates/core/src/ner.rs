//! Bacterial named entity tagging: a dictionary tagger and a client for a
//! remote tagging service, behind one [`Tagger`] interface.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CharIndex, EntityMention, Span, BACTERIA};
use crate::remote::{HttpClient, RemoteError};
use crate::transform::normalize_entity;

/// The curated name list shipped with the crate.
pub const DEFAULT_GAZETTEER: &str = include_str!("../data/gazetteer.tsv");

#[derive(Debug, Error)]
pub enum NerError {
    #[error(transparent)]
    Remote(#[from] RemoteError),
    #[error("{doc_id}: {message}")]
    Oracle { doc_id: String, message: String },
}

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("gazetteer has no names")]
    Empty,
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Where a sentence sits, for taggers that need document context.
#[derive(Debug, Clone, Copy)]
pub struct TagContext<'a> {
    pub doc_id: &'a str,
    /// Character offset of the sentence within its passage.
    pub offset: usize,
    pub text: &'a str,
}

impl<'a> TagContext<'a> {
    pub fn standalone(text: &'a str) -> Self {
        TagContext { doc_id: "", offset: 0, text }
    }
}

pub trait Tagger: Send + Sync {
    fn tag(&self, ctx: &TagContext<'_>) -> Result<Vec<EntityMention>, NerError>;

    fn tag_batch(&self, ctxs: &[TagContext<'_>]) -> Result<Vec<Vec<EntityMention>>, NerError> {
        ctxs.iter().map(|c| self.tag(c)).collect()
    }
}

/// Keep the longest of any overlapping spans, earlier start winning ties.
/// Output is sorted by start.
pub fn resolve_overlaps(spans: &[Span]) -> Vec<Span> {
    let mut order: Vec<Span> = spans.to_vec();
    order.sort_by(|a, b| b.len().cmp(&a.len()).then(a.start.cmp(&b.start)));
    let mut kept: Vec<Span> = Vec::new();
    for s in order {
        if !kept.iter().any(|k| k.overlaps(&s)) {
            kept.push(s);
        }
    }
    kept.sort();
    kept
}

fn mentions_from_spans(text: &str, spans: &[(Span, String)]) -> Vec<EntityMention> {
    let index = CharIndex::new(text);
    spans
        .iter()
        .enumerate()
        .map(|(i, (span, label))| EntityMention {
            id: format!("T{}", i + 1),
            label: label.clone(),
            span: *span,
            surface: index.slice(*span).unwrap_or_default().to_string(),
        })
        .collect()
}

/// Case-fold and collapse whitespace without stripping punctuation; used to
/// compare a candidate surface against normalized names.
fn lookup_key(surface: &str) -> String {
    surface.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Dictionary of bacterial names with abbreviated genus expansion.
#[derive(Debug, Clone)]
pub struct Gazetteer {
    names: HashSet<String>,
    aliases: HashMap<String, String>,
    /// Abbreviated genus (`"lb."`) to full genus names.
    expansions: HashMap<String, BTreeSet<String>>,
    max_tokens: usize,
}

impl Default for Gazetteer {
    fn default() -> Self {
        Self::parse(DEFAULT_GAZETTEER).expect("shipped gazetteer is valid")
    }
}

impl Gazetteer {
    pub fn from_names<I, S>(names: I) -> Result<Self, GazetteerError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let source: Vec<String> = names.into_iter().map(|s| s.as_ref().to_string()).collect();
        Self::parse(&source.join("\n"))
    }

    /// One name per line; optional tab-separated column of `|`-separated
    /// abbreviated forms. Blank lines and `#` comments are skipped.
    pub fn parse(source: &str) -> Result<Self, GazetteerError> {
        let mut g =
            Gazetteer { names: HashSet::new(), aliases: HashMap::new(), expansions: HashMap::new(), max_tokens: 1 };
        for (n, line) in source.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            let name = normalize_entity(cols.next().unwrap_or_default());
            if name.is_empty() {
                return Err(GazetteerError::Malformed { line: n + 1, reason: "empty name".into() });
            }
            let forms: Vec<String> = cols
                .next()
                .map(|c| c.split('|').map(normalize_entity).filter(|f| !f.is_empty()).collect())
                .unwrap_or_default();
            if cols.next().is_some() {
                return Err(GazetteerError::Malformed { line: n + 1, reason: "more than two columns".into() });
            }
            let words: Vec<&str> = name.split(' ').collect();
            if words.len() > 1 {
                let initial: String = words[0].chars().take(1).collect();
                g.add_expansion(format!("{initial}."), words[0]);
            }
            for form in forms {
                let fw: Vec<&str> = form.split(' ').collect();
                if fw.len() == words.len() && fw.len() > 1 && fw[0].ends_with('.') && fw[1..] == words[1..] {
                    g.add_expansion(fw[0].to_string(), words[0]);
                }
                g.note_length(&form);
                g.aliases.insert(form, name.clone());
            }
            g.note_length(&name);
            g.names.insert(name);
        }
        if g.names.is_empty() {
            return Err(GazetteerError::Empty);
        }
        Ok(g)
    }

    pub fn from_file(path: &Path) -> Result<Self, GazetteerError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn add_expansion(&mut self, abbrev: String, genus: &str) {
        self.expansions.entry(abbrev).or_default().insert(genus.to_string());
    }

    fn note_length(&mut self, form: &str) {
        // Abbreviated words contribute an extra token for their period.
        let tokens: usize = form.split(' ').map(|w| 1 + usize::from(w.ends_with('.'))).sum();
        self.max_tokens = self.max_tokens.max(tokens);
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Canonical name a surface form resolves to, if any.
    pub fn resolve(&self, surface: &str) -> Option<String> {
        let key = lookup_key(surface);
        if self.names.contains(&key) {
            return Some(key);
        }
        if let Some(name) = self.aliases.get(&key) {
            return Some(name.clone());
        }
        let (first, rest) = key.split_once(' ')?;
        self.expansions.get(first)?.iter().map(|genus| format!("{genus} {rest}")).find(|full| self.names.contains(full))
    }

    pub fn contains(&self, surface: &str) -> bool {
        self.resolve(surface).is_some()
    }

    /// Longest non-overlapping matches, scanning left to right.
    pub fn tag_text(&self, text: &str) -> Vec<EntityMention> {
        let tokens = tokenize(text);
        let index = CharIndex::new(text);
        let mut spans = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let mut best = None;
            let mut j = i;
            while j < tokens.len() && j - i < self.max_tokens {
                if j > i && !tokens[j].joinable {
                    break;
                }
                let span = Span::new(tokens[i].span.start, tokens[j].span.end);
                if tokens[j].word && self.contains(index.slice(span).unwrap_or_default()) {
                    best = Some((j, span));
                }
                j += 1;
            }
            match best {
                Some((end, span)) => {
                    spans.push((span, BACTERIA.to_string()));
                    i = end + 1;
                }
                None => i += 1,
            }
        }
        mentions_from_spans(text, &spans)
    }
}

impl Tagger for Gazetteer {
    fn tag(&self, ctx: &TagContext<'_>) -> Result<Vec<EntityMention>, NerError> {
        Ok(self.tag_text(ctx.text))
    }
}

#[derive(Debug, Clone, Copy)]
struct Token {
    span: Span,
    /// Alphanumeric word, as opposed to an attached period.
    word: bool,
    /// Separated from the previous token only by spaces, or attached to it.
    joinable: bool,
}

/// Words (alphanumeric runs with inner hyphens or apostrophes) and periods
/// attached directly to a word.
fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let blank = |c: &char| *c == ' ' || *c == '\t';
    let mut tokens: Vec<Token> = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_alphanumeric() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len()
            && (chars[i].is_alphanumeric()
                || (matches!(chars[i], '-' | '\'') && i + 1 < chars.len() && chars[i + 1].is_alphanumeric()))
        {
            i += 1;
        }
        let joinable = tokens.last().is_some_and(|prev| {
            let gap = &chars[prev.span.end..start];
            !gap.is_empty() && gap.iter().all(blank)
        });
        tokens.push(Token { span: Span::new(start, i), word: true, joinable });
        if i < chars.len() && chars[i] == '.' {
            tokens.push(Token { span: Span::new(i, i + 1), word: false, joinable: true });
            i += 1;
        }
    }
    tokens
}

/// One `{start, end, label}` record of the `/ner` response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMention {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

#[derive(Debug, Serialize)]
struct NerRequest<'a> {
    sentences: Vec<&'a str>,
}

#[derive(Debug, Deserialize)]
struct NerResponse {
    mentions: Vec<Vec<WireMention>>,
}

/// Client for a `/ner` service.
#[derive(Debug, Clone)]
pub struct RemoteTagger {
    client: HttpClient,
}

impl RemoteTagger {
    pub fn new(endpoint: &str, timeout: Duration) -> Self {
        RemoteTagger { client: HttpClient::new(endpoint, timeout) }
    }

    fn validate(&self, text: &str, wire: &[WireMention]) -> Result<Vec<EntityMention>, NerError> {
        let len = text.chars().count();
        let mut labels = HashMap::new();
        let mut spans = Vec::with_capacity(wire.len());
        for m in wire {
            if m.start >= m.end || m.end > len {
                return Err(self
                    .client
                    .protocol_violation(format!("span {}..{} invalid for sentence of {len} chars", m.start, m.end))
                    .into());
            }
            let span = Span::new(m.start, m.end);
            labels.entry(span).or_insert_with(|| m.label.clone());
            spans.push(span);
        }
        let kept: Vec<(Span, String)> = resolve_overlaps(&spans).into_iter().map(|s| (s, labels[&s].clone())).collect();
        Ok(mentions_from_spans(text, &kept))
    }
}

impl Tagger for RemoteTagger {
    fn tag(&self, ctx: &TagContext<'_>) -> Result<Vec<EntityMention>, NerError> {
        Ok(self.tag_batch(std::slice::from_ref(ctx))?.remove(0))
    }

    fn tag_batch(&self, ctxs: &[TagContext<'_>]) -> Result<Vec<Vec<EntityMention>>, NerError> {
        if ctxs.is_empty() {
            return Ok(Vec::new());
        }
        let req = NerRequest { sentences: ctxs.iter().map(|c| c.text).collect() };
        let resp: NerResponse = self.client.post_json("/ner", &req)?;
        if resp.mentions.len() != ctxs.len() {
            return Err(self
                .client
                .protocol_violation(format!(
                    "{} sentences sent, {} mention lists returned",
                    ctxs.len(),
                    resp.mentions.len()
                ))
                .into());
        }
        ctxs.iter().zip(&resp.mentions).map(|(c, m)| self.validate(c.text, m)).collect()
    }
}

/// Returns the gold entities of each sentence; used for ablation.
#[derive(Debug, Clone, Default)]
pub struct OracleTagger {
    docs: HashMap<String, Vec<EntityMention>>,
}

impl OracleTagger {
    pub fn new<'a, I>(docs: I) -> Self
    where
        I: IntoIterator<Item = &'a crate::corpus::AnnotatedDocument>,
    {
        OracleTagger { docs: docs.into_iter().map(|d| (d.doc_id.clone(), d.entities.clone())).collect() }
    }
}

impl Tagger for OracleTagger {
    fn tag(&self, ctx: &TagContext<'_>) -> Result<Vec<EntityMention>, NerError> {
        let gold = self.docs.get(ctx.doc_id).ok_or_else(|| NerError::Oracle {
            doc_id: ctx.doc_id.to_string(),
            message: "no gold annotations for document".into(),
        })?;
        let window = Span { start: ctx.offset, end: ctx.offset + ctx.text.chars().count() };
        Ok(gold
            .iter()
            .filter(|e| window.contains(&e.span))
            .map(|e| EntityMention { span: e.span.rebase(ctx.offset), ..e.clone() })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::remote::mock::{serve, Reply};

    fn surfaces(m: &[EntityMention]) -> Vec<&str> {
        m.iter().map(|e| e.surface.as_str()).collect()
    }

    #[test]
    fn tags_binomials_with_exact_spans() {
        let g = Gazetteer::default();
        let text = "Lactobacillus reuteri inhibits Escherichia coli.";
        let m = g.tag_text(text);
        assert_eq!(surfaces(&m), ["Lactobacillus reuteri", "Escherichia coli"]);
        assert_eq!(m[0].span, Span::new(0, 21));
        assert_eq!(m[1].span, Span::new(31, 47));
        assert!(m.iter().all(|e| e.label == BACTERIA));
    }

    #[test]
    fn non_bacterial_taxa_are_not_tagged() {
        let g = Gazetteer::default();
        let m = g.tag_text("Caenorhabditis elegans feeds on E. coli.");
        assert_eq!(surfaces(&m), ["E. coli"]);
        assert_eq!(m[0].span, Span::new(32, 39));
    }

    #[test]
    fn no_hits() {
        assert!(Gazetteer::default().tag_text("The mice were fed a high-fat diet.").is_empty());
    }

    #[test]
    fn abbreviated_genus_expansion() {
        let g = Gazetteer::default();
        let m = g.tag_text("Lb. oligofermentans inhibited Lc. piscium in co-culture.");
        assert_eq!(surfaces(&m), ["Lb. oligofermentans", "Lc. piscium"]);
        // Expansion derived from another species of the same genus.
        assert_eq!(g.resolve("Lb. sakei").as_deref(), Some("lactobacillus sakei"));
        assert_eq!(g.resolve("B. subtilis").as_deref(), Some("bacillus subtilis"));
        assert_eq!(g.resolve("LGG").as_deref(), Some("lactobacillus rhamnosus"));
        assert_eq!(g.resolve("Lb."), None);
    }

    #[test]
    fn longest_match_wins() {
        let g = Gazetteer::from_names(["Escherichia", "Escherichia coli"]).unwrap();
        let m = g.tag_text("Escherichia coli and Escherichia grew");
        assert_eq!(surfaces(&m), ["Escherichia coli", "Escherichia"]);
    }

    #[test]
    fn matches_respect_punctuation_and_word_edges() {
        let g = Gazetteer::from_names(["Roseburia", "Eubacterium", "Bacillus"]).unwrap();
        let m = g.tag_text("Roseburia, Eubacterium and Bacillus-like cells");
        assert_eq!(surfaces(&m), ["Roseburia", "Eubacterium"]);
        let g = Gazetteer::from_names(["Roseburia intestinalis"]).unwrap();
        assert!(g.tag_text("Roseburia, intestinalis").is_empty());
        assert_eq!(surfaces(&g.tag_text("ROSEBURIA intestinalis.")), ["ROSEBURIA intestinalis"]);
    }

    #[test]
    fn gazetteer_file_errors() {
        assert!(matches!(Gazetteer::parse("# nothing\n"), Err(GazetteerError::Empty)));
        assert!(matches!(Gazetteer::parse("A b\tx\ty"), Err(GazetteerError::Malformed { line: 1, .. })));
        assert!(Gazetteer::default().len() >= 200);
    }

    #[test]
    fn overlap_resolution() {
        let spans = [Span::new(0, 5), Span::new(3, 12), Span::new(20, 25), Span::new(18, 23)];
        assert_eq!(resolve_overlaps(&spans), [Span::new(3, 12), Span::new(18, 23)]);
    }

    #[test]
    fn remote_tagger_validates_and_resolves() {
        let (url, log) = serve(|_| {
            Reply::json(
                r#"{"mentions":[[{"start":0,"end":11,"label":"Bacteria"},{"start":0,"end":16,"label":"Bacteria"},{"start":26,"end":33,"label":"Bacteria"}],[]]}"#,
            )
        });
        let tagger = RemoteTagger::new(&url, Duration::from_secs(5));
        let ctxs = [TagContext::standalone("Escherichia coli inhibits E. coli"), TagContext::standalone("Nothing.")];
        let out = tagger.tag_batch(&ctxs).unwrap();
        assert_eq!(surfaces(&out[0]), ["Escherichia coli", "E. coli"]);
        assert!(out[1].is_empty());
        let body: serde_json::Value = serde_json::from_str(&log.lock().unwrap()[0].body).unwrap();
        assert_eq!(body["sentences"][1], "Nothing.");
    }

    #[test]
    fn remote_tagger_protocol_violations() {
        let (url, _) = serve(|req| {
            if req.body.contains("short") {
                Reply::json(r#"{"mentions":[[{"start":0,"end":99,"label":"Bacteria"}]]}"#)
            } else {
                Reply::json(r#"{"mentions":[]}"#)
            }
        });
        let tagger = RemoteTagger::new(&url, Duration::from_secs(5));
        for text in ["short", "other"] {
            let err = tagger.tag(&TagContext::standalone(text)).unwrap_err();
            assert!(matches!(err, NerError::Remote(RemoteError::ProtocolViolation { .. })), "{err}");
        }
    }

    #[test]
    fn remote_tagger_unreachable() {
        let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let url = format!("http://127.0.0.1:{port}");
        let err = RemoteTagger::new(&url, Duration::from_secs(2)).tag(&TagContext::standalone("x")).unwrap_err();
        assert!(err.to_string().contains(&url), "{err}");
    }
}
