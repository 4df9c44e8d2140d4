//! Vocabularies, word normalization, embedding tables, and context windows.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::util::{rng, write_atomic};

pub const PAD: &str = "<PAD>";
pub const UNK: &str = "<UNK>";

/// Lowercases a word and replaces every decimal digit with `N`, so that
/// `01-Apr-2016` becomes `NN-apr-NNNN`.
pub fn normalize_word(token: &str) -> String {
    token
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_ascii_digit() { 'N' } else { c })
        .collect()
}

/// Unit granularity of a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Normalized words.
    Word,
    /// Raw characters.
    Char,
}

/// Dense ids for units. `<PAD>` is id 0 and `<UNK>` id 1; the remaining
/// entries follow in sorted order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    level: Level,
    words: Vec<String>,
    id_of: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    level: Level,
    words: Vec<String>,
}

impl From<VocabRepr> for Vocabulary {
    fn from(r: VocabRepr) -> Self {
        let id_of = r.words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { level: r.level, words: r.words, id_of }
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        Self { level: v.level, words: v.words }
    }
}

impl Vocabulary {
    pub const PAD_ID: usize = 0;
    pub const UNK_ID: usize = 1;

    /// Builds a vocabulary from arbitrary entries (already normalized for
    /// word level).
    pub fn from_entries<I, S>(level: Level, entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let set: BTreeSet<String> = entries
            .into_iter()
            .map(Into::into)
            .filter(|w| w != PAD && w != UNK)
            .collect();
        let words: Vec<String> = [PAD.to_string(), UNK.to_string()].into_iter().chain(set).collect();
        VocabRepr { level, words }.into()
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, key: &str) -> Option<usize> {
        self.id_of.get(key).copied()
    }

    /// Id of a raw token, normalizing it first at word level. Unknown
    /// entries map to `<UNK>`.
    pub fn id(&self, raw: &str) -> usize {
        match self.level {
            Level::Word => self.get(&normalize_word(raw)),
            Level::Char => self.get(raw),
        }
        .unwrap_or(Self::UNK_ID)
    }

    pub fn char_id(&self, c: char) -> usize {
        let mut buf = [0u8; 4];
        self.get(c.encode_utf8(&mut buf)).unwrap_or(Self::UNK_ID)
    }
}

/// Every distinct normalized word (or raw character) of the corpus, plus
/// the reserved entries.
pub fn build_vocab(corpus: &[Document], level: Level) -> Vocabulary {
    match level {
        Level::Word => Vocabulary::from_entries(
            level,
            corpus
                .iter()
                .flat_map(|d| d.sentences.iter().flat_map(|s| &s.tokens))
                .map(|t| normalize_word(&t.surface)),
        ),
        Level::Char => Vocabulary::from_entries(level, corpus.iter().flat_map(|d| d.text.chars()).map(String::from)),
    }
}

/// The learned lookup table, one row per vocabulary entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub vectors: Array2<f64>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn rows(&self) -> usize {
        self.vectors.nrows()
    }
}

/// Uniform entries in [-1, 1], except the `<PAD>` row which starts at zero.
pub fn init_random(vocab: &Vocabulary, dim: usize, seed: u64) -> EmbeddingTable {
    let mut r = rng(seed);
    let mut vectors = Array2::from_shape_simple_fn((vocab.len(), dim), || r.gen_range(-1.0..=1.0));
    vectors.row_mut(Vocabulary::PAD_ID).fill(0.0);
    EmbeddingTable { vectors }
}

/// Loads vectors in word2vec text format (`count dim` header, then
/// `word v1 ... vdim` rows). Vocabulary entries missing from the file keep
/// a random row; `<UNK>` becomes the mean of all vectors in the file.
pub fn load_word2vec_text(path: &Path, vocab: &Vocabulary, dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let content = std::fs::read_to_string(path)?;
    parse_word2vec_text(&content, path, vocab, dim, seed)
}

pub fn parse_word2vec_text(
    content: &str,
    origin: &Path,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = content.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let [count, file_dim] = fields[..] else {
        return Err(err(1, format!("header must be `count dim`, found {header:?}")));
    };
    let count: usize = count.parse().map_err(|_| err(1, format!("bad count {count:?}")))?;
    let file_dim: usize = file_dim.parse().map_err(|_| err(1, format!("bad dimension {file_dim:?}")))?;
    if file_dim != dim {
        return Err(Error::Config(format!(
            "{} holds {file_dim}-dimensional vectors, {dim} requested",
            origin.display()
        )));
    }
    let mut table = init_random(vocab, dim, seed);
    let mut filled = vec![false; vocab.len()];
    let mut sum = Array1::<f64>::zeros(dim);
    let mut read = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap_or_default();
        let values: Vec<f64> = parts
            .map(|v| v.parse::<f64>().map_err(|_| err(lineno, format!("bad float {v:?}"))))
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(err(lineno, format!("expected {dim} values, found {}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(err(lineno, "non-finite value".into()));
        }
        read += 1;
        let row = Array1::from(values);
        sum += &row;
        let target = vocab.get(word).map(|id| (id, true)).or_else(|| {
            let norm = normalize_word(word);
            vocab.get(&norm).map(|id| (id, false))
        });
        if let Some((id, exact)) = target {
            if id != Vocabulary::PAD_ID && id != Vocabulary::UNK_ID && (exact || !filled[id]) {
                table.vectors.row_mut(id).assign(&row);
                filled[id] = true;
            }
        }
    }
    if read != count {
        log::warn!("{}: header announces {count} vectors, found {read}", origin.display());
    }
    if read > 0 {
        table.vectors.row_mut(Vocabulary::UNK_ID).assign(&(sum / read as f64));
    }
    Ok(table)
}

/// Writes a table in word2vec text format with fixed decimal precision.
pub fn render_word2vec_text(table: &EmbeddingTable, vocab: &Vocabulary, precision: usize) -> String {
    let mut out = format!("{} {}\n", vocab.len(), table.dim());
    for (word, row) in vocab.words().iter().zip(table.vectors.rows()) {
        out.push_str(word);
        for v in row {
            out.push_str(&format!(" {v:.precision$}"));
        }
        out.push('\n');
    }
    out
}

pub fn save_word2vec_text(table: &EmbeddingTable, vocab: &Vocabulary, path: &Path, precision: usize) -> Result<()> {
    write_atomic(path, render_word2vec_text(table, vocab, precision).as_bytes())
}

/// Concatenated rows for positions `index - c ..= index + c`, using the
/// `<PAD>` row past either sentence edge.
pub fn lookup_window(table: &EmbeddingTable, ids: &[usize], index: usize, c: usize) -> Array1<f64> {
    let n = table.dim();
    let mut out = Array1::zeros((2 * c + 1) * n);
    for (slot, id) in window_ids(ids, index, c).into_iter().enumerate() {
        out.slice_mut(ndarray::s![slot * n..(slot + 1) * n]).assign(&table.vectors.row(id));
    }
    out
}

/// Row ids feeding the context window at `index`.
pub fn window_ids(ids: &[usize], index: usize, c: usize) -> Vec<usize> {
    (0..=2 * c)
        .map(|slot| {
            let pos = index as isize + slot as isize - c as isize;
            if pos < 0 || pos as usize >= ids.len() {
                Vocabulary::PAD_ID
            } else {
                ids[pos as usize]
            }
        })
        .collect()
}

/// Distributional vectors from unlabeled text: positive PMI co-occurrence
/// counts inside a symmetric window, compressed to `dim` columns with a
/// seeded random projection, centered, and scaled to the typical length of
/// a random row. Stands in for a
/// pretrained word2vec file when none is available.
pub fn cooccurrence_embeddings(corpus: &[Document], vocab: &Vocabulary, dim: usize, window: usize, seed: u64) -> EmbeddingTable {
    let v = vocab.len();
    let mut pair_counts: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut word_counts = vec![0.0f64; v];
    let mut total = 0.0;
    for doc in corpus {
        for sentence in &doc.sentences {
            let ids: Vec<usize> = sentence.tokens.iter().map(|t| vocab.id(&t.surface)).collect();
            for (i, &w) in ids.iter().enumerate() {
                let lo = i.saturating_sub(window);
                let hi = (i + window + 1).min(ids.len());
                for (j, &ctx) in ids.iter().enumerate().take(hi).skip(lo) {
                    if i != j {
                        *pair_counts.entry((w, ctx)).or_default() += 1.0;
                        word_counts[w] += 1.0;
                        total += 1.0;
                    }
                }
            }
        }
    }
    let mut r = rng(seed);
    let projection = Array2::from_shape_simple_fn((v, dim), || if r.gen_bool(0.5) { 1.0 } else { -1.0 });
    let mut table = init_random(vocab, dim, seed ^ 0x5eed);
    let mut acc = Array2::<f64>::zeros((v, dim));
    let mut touched = vec![false; v];
    for ((w, ctx), n) in pair_counts {
        // Context marginals equal word marginals for a symmetric window.
        let pmi = (n * total / (word_counts[w] * word_counts[ctx])).ln();
        if pmi > 0.0 {
            acc.row_mut(w).scaled_add(pmi, &projection.row(ctx));
            touched[w] = true;
        }
    }
    let rows: Vec<usize> = (0..v).filter(|&id| touched[id] && id != Vocabulary::PAD_ID).collect();
    if rows.is_empty() {
        return table;
    }
    // Remove the component every word shares, then match the norm of a
    // uniform [-1, 1] row so either initialization feeds the network
    // inputs of the same scale.
    let mut mean = Array1::<f64>::zeros(dim);
    for &id in &rows {
        mean += &acc.row(id);
    }
    mean /= rows.len() as f64;
    let target = (dim as f64 / 3.0).sqrt();
    for &id in &rows {
        let row = &acc.row(id) - &mean;
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            table.vectors.row_mut(id).assign(&(row * (target / norm)));
        }
    }
    table
}
