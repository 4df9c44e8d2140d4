//! Annotated documents, IOB2 span encoding, corpus file formats, and the
//! synthetic corpus generator.

pub mod chars;
mod io;
mod iob2;
pub mod synth;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::DocRelTimeLabel;

pub use chars::{char_sequence, document_char_tags, sentences_from_char_tags};
pub use io::{load_corpus, parse_corpus, render_corpus, save_corpus, CorpusFormat};
pub use iob2::{decode_iob2, encode_iob2, repair_orphans, repair_span_classes, Iob2Tag};
pub use synth::{generate_synthetic_corpus, GeneratorConfig};

pub const TIMEX3: &str = "TIMEX3";
pub const EVENT: &str = "EVENT";

/// A token with character offsets into its document's text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub begin: usize,
    pub end: usize,
}

impl Token {
    pub fn new(surface: impl Into<String>, begin: usize, end: usize) -> Self {
        Self {
            surface: surface.into(),
            begin,
            end,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Character range covered by the sentence, from its first token's
    /// begin to its last token's end.
    pub fn char_range(&self) -> (usize, usize) {
        (
            self.tokens.first().map_or(0, |t| t.begin),
            self.tokens.last().map_or(0, |t| t.end),
        )
    }
}

/// An annotated character range. Offsets count Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub begin: usize,
    pub end: usize,
    pub klass: String,
    /// Gold relation to document creation time, carried by EVENT spans.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_rel_time: Option<DocRelTimeLabel>,
}

impl Span {
    pub fn new(begin: usize, end: usize, klass: impl Into<String>) -> Self {
        Self {
            begin,
            end,
            klass: klass.into(),
            doc_rel_time: None,
        }
    }

    pub fn with_label(mut self, label: DocRelTimeLabel) -> Self {
        self.doc_rel_time = Some(label);
        self
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.begin < other.end && other.begin < self.end
    }

    pub fn midpoint2(&self) -> usize {
        self.begin + self.end
    }
}

/// The candidate whose midpoint is closest to `target`'s midpoint; ties go
/// to the candidate that starts earlier.
pub fn nearest_span<'a>(target: &Span, candidates: &[&'a Span]) -> Option<&'a Span> {
    let mid = target.midpoint2();
    candidates
        .iter()
        .copied()
        .min_by_key(|c| (c.midpoint2().abs_diff(mid), c.begin, c.end))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub sentences: Vec<Sentence>,
    pub doctime: NaiveDate,
    #[serde(default)]
    pub revisions: Vec<NaiveDate>,
    /// One tag per token, aligned with `sentences`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_tags: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub gold_spans: Vec<Span>,
}

impl Document {
    /// Substring of `text` between two character offsets.
    pub fn slice(&self, begin: usize, end: usize) -> String {
        self.text.chars().skip(begin).take(end.saturating_sub(begin)).collect()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }

    /// Gold spans of one class, sorted by offset.
    pub fn spans_of(&self, klass: &str) -> Vec<&Span> {
        let mut out: Vec<&Span> = self.gold_spans.iter().filter(|s| s.klass == klass).collect();
        out.sort_by_key(|s| (s.begin, s.end));
        out
    }

    /// Spans that fall inside sentence `index`.
    pub fn sentence_spans<'a>(&'a self, index: usize, klass: Option<&'a str>) -> Vec<Span> {
        let (lo, hi) = self.sentences[index].char_range();
        let mut out: Vec<Span> = self
            .gold_spans
            .iter()
            .filter(|s| s.begin >= lo && s.end <= hi)
            .filter(|s| klass.is_none_or(|k| s.klass == k))
            .cloned()
            .collect();
        out.sort_by_key(|s| (s.begin, s.end));
        out
    }

    /// Gold IOB2 tags for one sentence, optionally restricted to one class.
    pub fn sentence_tags(&self, index: usize, klass: Option<&str>) -> Result<Vec<Iob2Tag>> {
        encode_iob2(&self.sentence_spans(index, klass), &self.sentences[index].tokens)
    }

    /// Locate the token range `[first, last]` (inclusive) that a span covers.
    pub fn token_range(&self, span: &Span) -> Option<(usize, usize, usize)> {
        for (si, sentence) in self.sentences.iter().enumerate() {
            let first = sentence.tokens.iter().position(|t| t.begin == span.begin);
            let last = sentence.tokens.iter().position(|t| t.end == span.end);
            if let (Some(a), Some(b)) = (first, last) {
                if a <= b {
                    return Some((si, a, b));
                }
            }
        }
        None
    }

    /// Checks every structural invariant of the document.
    pub fn validate(&self) -> Result<()> {
        let chars: Vec<char> = self.text.chars().collect();
        let fail = |msg: String| Err(Error::Validation(format!("document {}: {msg}", self.id)));
        let mut prev_end = 0usize;
        for (si, sentence) in self.sentences.iter().enumerate() {
            if sentence.tokens.is_empty() {
                return fail(format!("sentence {si} is empty"));
            }
            for token in &sentence.tokens {
                if token.begin >= token.end {
                    return fail(format!("token {:?} has empty range", token.surface));
                }
                if token.begin < prev_end {
                    return fail(format!("token {:?} at {} overlaps or is out of order", token.surface, token.begin));
                }
                if token.end > chars.len() {
                    return fail(format!("token {:?} extends past end of text", token.surface));
                }
                let slice: String = chars[token.begin..token.end].iter().collect();
                if slice != token.surface {
                    return fail(format!(
                        "token surface {:?} does not match text {:?} at [{}, {})",
                        token.surface, slice, token.begin, token.end
                    ));
                }
                prev_end = token.end;
            }
        }
        if let Some(r) = self.revisions.iter().find(|r| **r < self.doctime) {
            return fail(format!("revision {r} precedes doctime {}", self.doctime));
        }
        if let Some(pos) = &self.pos_tags {
            if pos.len() != self.sentences.len()
                || pos.iter().zip(&self.sentences).any(|(p, s)| p.len() != s.len())
            {
                return fail("pos_tags are not aligned with tokens".into());
            }
        }
        let mut spans: Vec<&Span> = self.gold_spans.iter().collect();
        spans.sort_by_key(|s| (s.begin, s.end));
        for s in &spans {
            if s.begin >= s.end {
                return fail(format!("span [{}, {}) is empty", s.begin, s.end));
            }
        }
        for pair in spans.windows(2) {
            if pair[0].overlaps(pair[1]) {
                return fail(format!(
                    "spans [{}, {}) and [{}, {}) overlap",
                    pair[0].begin, pair[0].end, pair[1].begin, pair[1].end
                ));
            }
        }
        Ok(())
    }
}

/// Builds a document from pre-tokenized sentences, joining tokens with a
/// single space and sentences with a single space. Used by tests and the
/// generator.
pub fn document_from_tokens(
    id: &str,
    doctime: NaiveDate,
    sentences: &[Vec<&str>],
) -> Document {
    let mut text = String::new();
    let mut offset = 0usize;
    let mut out = Vec::with_capacity(sentences.len());
    for words in sentences {
        let mut tokens = Vec::with_capacity(words.len());
        for w in words {
            if !text.is_empty() {
                text.push(' ');
                offset += 1;
            }
            let len = w.chars().count();
            tokens.push(Token::new(*w, offset, offset + len));
            text.push_str(w);
            offset += len;
        }
        out.push(Sentence::new(tokens));
    }
    Document {
        id: id.to_string(),
        text,
        sentences: out,
        doctime,
        revisions: Vec::new(),
        pos_tags: None,
        gold_spans: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn built_documents_validate() {
        let doc = document_from_tokens("d", day(2010, 1, 5), &[vec!["Chest", "pain", "."], vec!["Ok", "."]]);
        assert_eq!(doc.text, "Chest pain . Ok .");
        doc.validate().unwrap();
        assert_eq!(doc.slice(6, 10), "pain");
    }

    #[test]
    fn surface_mismatch_is_rejected() {
        let mut doc = document_from_tokens("d", day(2010, 1, 5), &[vec!["a", "b"]]);
        doc.sentences[0].tokens[1].surface = "c".into();
        assert!(matches!(doc.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn early_revision_is_rejected() {
        let mut doc = document_from_tokens("d", day(2010, 1, 5), &[vec!["a"]]);
        doc.revisions.push(day(2009, 1, 1));
        assert!(doc.validate().is_err());
    }

    #[test]
    fn overlapping_gold_spans_are_rejected() {
        let mut doc = document_from_tokens("d", day(2010, 1, 5), &[vec!["a", "b", "c"]]);
        doc.gold_spans = vec![Span::new(0, 3, EVENT), Span::new(2, 5, TIMEX3)];
        assert!(doc.validate().is_err());
    }

    #[test]
    fn token_range_finds_multi_token_span() {
        let doc = document_from_tokens("d", day(2010, 1, 5), &[vec!["x"], vec!["chest", "pain", "now"]]);
        let span = Span::new(2, 12, EVENT);
        assert_eq!(doc.token_range(&span), Some((1, 0, 1)));
    }
}
