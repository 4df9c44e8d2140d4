use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{decode_iob2, encode_iob2, Document, Iob2Tag, Sentence, Token};
use crate::error::{Error, Result};
use crate::temporal::DocRelTimeLabel;
use crate::util::write_atomic;

/// On-disk corpus formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    /// Tab-separated token rows: surface, begin, end, POS (or `_`), IOB2 tag,
    /// and an optional sixth column holding the DocRelTime label on the
    /// first token of an EVENT span. Sentences are separated by blank lines,
    /// documents start with `#doc <id> <doctime> [revisions...]`.
    Conll,
    Json,
}

impl CorpusFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "json" => Some(Self::Json),
            "conll" | "tsv" => Some(Self::Conll),
            _ => None,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conll" => Ok(Self::Conll),
            "json" => Ok(Self::Json),
            _ => Err(Error::Config(format!("unknown corpus format {s:?}"))),
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<Document>> {
    let content = std::fs::read_to_string(path)?;
    parse_corpus(&content, format, path)
}

pub fn save_corpus(docs: &[Document], path: &Path, format: CorpusFormat) -> Result<()> {
    write_atomic(path, render_corpus(docs, format)?.as_bytes())
}

/// Parses corpus text. `origin` is only used in error messages.
pub fn parse_corpus(content: &str, format: CorpusFormat, origin: &Path) -> Result<Vec<Document>> {
    let docs = match format {
        CorpusFormat::Json => {
            if content.trim().is_empty() {
                return Ok(Vec::new());
            }
            serde_json::from_str::<Vec<Document>>(content).map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: e.line(),
                message: e.to_string(),
            })?
        }
        CorpusFormat::Conll => parse_conll(content, origin)?,
    };
    for doc in &docs {
        doc.validate()?;
    }
    Ok(docs)
}

pub fn render_corpus(docs: &[Document], format: CorpusFormat) -> Result<String> {
    match format {
        CorpusFormat::Json => {
            let mut s = serde_json::to_string_pretty(docs)?;
            s.push('\n');
            Ok(s)
        }
        CorpusFormat::Conll => render_conll(docs),
    }
}

fn render_conll(docs: &[Document]) -> Result<String> {
    let mut out = String::new();
    for doc in docs {
        out.push_str("#doc ");
        out.push_str(&doc.id);
        out.push(' ');
        out.push_str(&doc.doctime.to_string());
        for r in &doc.revisions {
            out.push(' ');
            out.push_str(&r.to_string());
        }
        out.push('\n');
        for (si, sentence) in doc.sentences.iter().enumerate() {
            let spans = doc.sentence_spans(si, None);
            let tags = encode_iob2(&spans, &sentence.tokens)?;
            for (ti, (token, tag)) in sentence.tokens.iter().zip(&tags).enumerate() {
                let pos = doc
                    .pos_tags
                    .as_ref()
                    .map_or("_", |p| p[si][ti].as_str());
                let drt = spans
                    .iter()
                    .find(|s| s.begin == token.begin)
                    .and_then(|s| s.doc_rel_time);
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}",
                    token.surface, token.begin, token.end, pos, tag
                ));
                if let Some(label) = drt {
                    out.push('\t');
                    out.push_str(label.as_str());
                }
                out.push('\n');
            }
            out.push('\n');
        }
    }
    Ok(out)
}

struct PendingDoc {
    id: String,
    doctime: NaiveDate,
    revisions: Vec<NaiveDate>,
    sentences: Vec<Sentence>,
    pos: Vec<Vec<String>>,
    any_pos: bool,
    tags: Vec<Vec<Iob2Tag>>,
    labels: Vec<(usize, DocRelTimeLabel)>,
}

impl PendingDoc {
    fn finish(self) -> Result<Document> {
        let end = self
            .sentences
            .last()
            .and_then(|s| s.tokens.last())
            .map_or(0, |t| t.end);
        let mut text: Vec<char> = vec![' '; end];
        for token in self.sentences.iter().flat_map(|s| &s.tokens) {
            for (k, c) in token.surface.chars().enumerate() {
                if let Some(slot) = text.get_mut(token.begin + k) {
                    *slot = c;
                }
            }
        }
        let mut gold_spans = Vec::new();
        for (sentence, tags) in self.sentences.iter().zip(&self.tags) {
            for mut span in decode_iob2(tags, &sentence.tokens)? {
                span.doc_rel_time = self
                    .labels
                    .iter()
                    .find(|(b, _)| *b == span.begin)
                    .map(|(_, l)| *l);
                gold_spans.push(span);
            }
        }
        Ok(Document {
            id: self.id,
            text: text.into_iter().collect(),
            sentences: self.sentences,
            doctime: self.doctime,
            revisions: self.revisions,
            pos_tags: self.any_pos.then_some(self.pos),
            gold_spans,
        })
    }
}

fn parse_conll(content: &str, origin: &Path) -> Result<Vec<Document>> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let date = |line: usize, s: &str| {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| err(line, format!("bad date {s:?}: {e}")))
    };
    let mut docs = Vec::new();
    let mut current: Option<PendingDoc> = None;
    let mut sentence: Vec<Token> = Vec::new();
    let mut pos: Vec<String> = Vec::new();
    let mut tags: Vec<Iob2Tag> = Vec::new();

    fn close_sentence(doc: &mut PendingDoc, tokens: &mut Vec<Token>, pos: &mut Vec<String>, tags: &mut Vec<Iob2Tag>) {
        if !tokens.is_empty() {
            doc.sentences.push(Sentence::new(std::mem::take(tokens)));
            doc.pos.push(std::mem::take(pos));
            doc.tags.push(std::mem::take(tags));
        }
    }

    for (idx, raw) in content.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(header) = line.strip_prefix("#doc") {
            if let Some(mut doc) = current.take() {
                close_sentence(&mut doc, &mut sentence, &mut pos, &mut tags);
                docs.push(doc.finish()?);
            }
            let fields: Vec<&str> = header.split_whitespace().collect();
            if fields.len() < 2 {
                return Err(err(lineno, "document header needs an id and a doctime".into()));
            }
            let revisions = fields[2..].iter().map(|f| date(lineno, f)).collect::<Result<_>>()?;
            current = Some(PendingDoc {
                id: fields[0].to_string(),
                doctime: date(lineno, fields[1])?,
                revisions,
                sentences: Vec::new(),
                pos: Vec::new(),
                any_pos: false,
                tags: Vec::new(),
                labels: Vec::new(),
            });
            continue;
        }
        if line.trim().is_empty() {
            if let Some(doc) = current.as_mut() {
                close_sentence(doc, &mut sentence, &mut pos, &mut tags);
            }
            continue;
        }
        let doc = current
            .as_mut()
            .ok_or_else(|| err(lineno, "token row before any #doc header".into()))?;
        let cols: Vec<&str> = line.split('\t').collect();
        if !(5..=6).contains(&cols.len()) {
            return Err(err(lineno, format!("expected 5 or 6 tab-separated columns, found {}", cols.len())));
        }
        let begin: usize = cols[1].parse().map_err(|_| err(lineno, format!("bad begin offset {:?}", cols[1])))?;
        let end: usize = cols[2].parse().map_err(|_| err(lineno, format!("bad end offset {:?}", cols[2])))?;
        let tag: Iob2Tag = cols[4].parse().map_err(|e: Error| err(lineno, e.to_string()))?;
        if cols[3] != "_" {
            doc.any_pos = true;
        }
        if let Some(label) = cols.get(5).filter(|c| **c != "_") {
            let label: DocRelTimeLabel = label.parse().map_err(|e: Error| err(lineno, e.to_string()))?;
            doc.labels.push((begin, label));
        }
        sentence.push(Token::new(cols[0], begin, end));
        pos.push(cols[3].to_string());
        tags.push(tag);
    }
    if let Some(mut doc) = current.take() {
        close_sentence(&mut doc, &mut sentence, &mut pos, &mut tags);
        docs.push(doc.finish()?);
    }
    Ok(docs)
}
