use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{predict, train, train_with_early_stopping, Example, Hyperparams, RnnModel, TrainingReport};
use crate::corpus::{
    char_sequence, decode_iob2, repair_orphans, repair_span_classes, sentences_from_char_tags, Document, Iob2Tag,
    Sentence, Span, Token, EVENT, TIMEX3,
};
use crate::corpus::chars::{END, WORD};
use crate::embeddings::{build_vocab, init_random, EmbeddingTable, Level, Vocabulary};
use crate::error::{Error, Result};
use crate::eval::{score_spans, MatchMode, PrfScore};
use crate::util::{sub_seed, write_atomic};

/// What an RNN tagger labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Characters into word (`W`) and sentence-final (`E`) spans.
    Tokenizer,
    Pos,
    Timex3,
    Event,
}

impl Task {
    /// Entity class for span tasks.
    pub fn klass(self) -> Option<&'static str> {
        match self {
            Task::Timex3 => Some(TIMEX3),
            Task::Event => Some(EVENT),
            _ => None,
        }
    }

    pub fn level(self) -> Level {
        match self {
            Task::Tokenizer => Level::Char,
            _ => Level::Word,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Task::Tokenizer => "tokenizer",
            Task::Pos => "pos",
            Task::Timex3 => "timex3",
            Task::Event => "event",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tokenizer" | "tokenize" => Ok(Task::Tokenizer),
            "pos" => Ok(Task::Pos),
            "timex3" => Ok(Task::Timex3),
            "event" => Ok(Task::Event),
            _ => Err(Error::Config(format!("unknown RNN task {s:?}"))),
        }
    }
}

/// Architecture and optimizer settings for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub task: Task,
    /// Embedding size.
    pub dim: usize,
    pub hidden: usize,
    pub context: usize,
    pub lr: f64,
    /// Characters borrowed from each neighbouring sentence (tokenizer only).
    pub pad: usize,
}

impl Preset {
    pub fn hyperparams(&self, epochs: usize, seed: u64) -> Hyperparams {
        Hyperparams {
            hidden: self.hidden,
            context: self.context,
            lr: self.lr,
            epochs,
            seed,
        }
    }
}

/// Default settings per task. Word-level tasks use 80 hidden units with
/// 100-d embeddings and 256 with larger ones; `dim` is ignored for the
/// tokenizer, which always uses 16-d character embeddings.
pub fn preset_config(task: Task, dim: usize) -> Preset {
    let hidden = if dim <= 100 { 80 } else { 256 };
    match task {
        Task::Tokenizer => Preset {
            task,
            dim: 16,
            hidden: 64,
            context: 5,
            lr: 0.01,
            pad: 5,
        },
        Task::Pos | Task::Timex3 | Task::Event => Preset {
            task,
            dim,
            hidden,
            context: 2,
            lr: 0.01,
            pad: 0,
        },
    }
}

fn label_strings(task: Task, corpus: &[Document]) -> Result<Vec<String>> {
    let tags = match task {
        Task::Tokenizer => Iob2Tag::label_set(&[WORD, END]),
        Task::Timex3 | Task::Event => Iob2Tag::label_set(&[task.klass().unwrap_or_default()]),
        Task::Pos => {
            let mut set = std::collections::BTreeSet::new();
            for doc in corpus {
                let pos = doc
                    .pos_tags
                    .as_ref()
                    .ok_or_else(|| Error::Data(format!("document {} has no POS tags", doc.id)))?;
                set.extend(pos.iter().flatten().cloned());
            }
            if set.is_empty() {
                return Err(Error::Data("no POS tags in training corpus".into()));
            }
            return Ok(set.into_iter().collect());
        }
    };
    Ok(tags.iter().map(ToString::to_string).collect())
}

fn label_index(labels: &[String], label: &str) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::Data(format!("label {label:?} is not in the model's label set")))
}

/// Training sequences for `task`: one per sentence, at the vocabulary's
/// granularity.
pub fn prepare_examples(task: Task, corpus: &[Document], vocab: &Vocabulary, labels: &[String], pad: usize) -> Result<Vec<Example>> {
    let mut out = Vec::new();
    for doc in corpus {
        for (si, sentence) in doc.sentences.iter().enumerate() {
            let (ids, gold): (Vec<usize>, Vec<String>) = match task {
                Task::Tokenizer => {
                    let (chars, tags) = char_sequence(doc, si, pad);
                    (chars.iter().map(|&c| vocab.char_id(c)).collect(), tags.iter().map(ToString::to_string).collect())
                }
                Task::Pos => {
                    let pos = doc
                        .pos_tags
                        .as_ref()
                        .ok_or_else(|| Error::Data(format!("document {} has no POS tags", doc.id)))?;
                    (sentence.tokens.iter().map(|t| vocab.id(&t.surface)).collect(), pos[si].clone())
                }
                Task::Timex3 | Task::Event => {
                    let tags = doc.sentence_tags(si, task.klass())?;
                    (
                        sentence.tokens.iter().map(|t| vocab.id(&t.surface)).collect(),
                        tags.iter().map(ToString::to_string).collect(),
                    )
                }
            };
            let gold = gold.iter().map(|g| label_index(labels, g)).collect::<Result<Vec<_>>>()?;
            out.push(Example { ids, gold });
        }
    }
    Ok(out)
}

/// An RNN model bound to a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnTagger {
    pub task: Task,
    pub pad: usize,
    pub model: RnnModel,
}

impl RnnTagger {
    /// Fresh tagger for `preset.task`. The vocabulary comes from `corpus`
    /// unless `pretrained` supplies one together with its table.
    pub fn new(corpus: &[Document], preset: &Preset, pretrained: Option<(Vocabulary, EmbeddingTable)>, seed: u64) -> Result<Self> {
        let task = preset.task;
        let labels = label_strings(task, corpus)?;
        let (vocab, table) = match pretrained {
            Some((vocab, table)) => {
                if vocab.level() != task.level() || table.rows() != vocab.len() {
                    return Err(Error::Config("pretrained table does not match the task's vocabulary".into()));
                }
                (vocab, table)
            }
            None => {
                let vocab = build_vocab(corpus, task.level());
                let table = init_random(&vocab, preset.dim, sub_seed(seed, "embeddings"));
                (vocab, table)
            }
        };
        let model = RnnModel::new(vocab, table, preset.hidden, preset.context, labels, sub_seed(seed, "weights"));
        Ok(Self {
            task,
            pad: preset.pad,
            model,
        })
    }

    pub fn examples(&self, corpus: &[Document]) -> Result<Vec<Example>> {
        prepare_examples(self.task, corpus, &self.model.vocab, &self.model.labels, self.pad)
    }

    pub fn fit(&mut self, corpus: &[Document], hp: &Hyperparams) -> Result<Vec<f64>> {
        let data = self.examples(corpus)?;
        train(&mut self.model, &data, hp)
    }

    /// Trains with early stopping on the score over `dev`.
    pub fn fit_with_dev(&mut self, corpus: &[Document], dev: &[Document], hp: &Hyperparams, patience: usize) -> Result<TrainingReport> {
        let data = self.examples(corpus)?;
        let (task, pad) = (self.task, self.pad);
        train_with_early_stopping(&mut self.model, &data, hp, patience, |m| {
            let probe = RnnTagger {
                task,
                pad,
                model: m.clone(),
            };
            probe.score(dev)
        })
    }

    /// Label indices for a unit sequence.
    pub fn predict_ids(&self, ids: &[usize]) -> Vec<usize> {
        predict(&self.model, ids)
    }

    fn to_tags(&self, labels: &[usize]) -> Vec<Iob2Tag> {
        let tags: Vec<Iob2Tag> = labels
            .iter()
            .map(|&l| self.model.labels[l].parse().unwrap_or(Iob2Tag::O))
            .collect();
        match self.task {
            Task::Tokenizer => repair_span_classes(&tags),
            _ => repair_orphans(&tags),
        }
    }

    fn word_ids(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.model.vocab.id(&t.surface)).collect()
    }

    /// IOB2 tags for one sentence of an entity task.
    pub fn tag_sentence(&self, doc: &Document, index: usize) -> Result<Vec<Iob2Tag>> {
        if self.task.klass().is_none() {
            return Err(Error::ModelKind(format!("{} tagger does not emit entity tags", self.task)));
        }
        let ids = self.word_ids(&doc.sentences[index].tokens);
        Ok(self.to_tags(&self.predict_ids(&ids)))
    }

    /// Predicted entity spans of a document.
    pub fn predict_spans(&self, doc: &Document) -> Result<Vec<Span>> {
        let mut out = Vec::new();
        for (si, sentence) in doc.sentences.iter().enumerate() {
            out.extend(decode_iob2(&self.tag_sentence(doc, si)?, &sentence.tokens)?);
        }
        Ok(out)
    }

    /// One POS tag per token.
    pub fn tag_pos(&self, doc: &Document) -> Result<Vec<Vec<String>>> {
        if self.task != Task::Pos {
            return Err(Error::ModelKind(format!("{} tagger does not emit POS tags", self.task)));
        }
        Ok(doc
            .sentences
            .iter()
            .map(|s| self.predict_ids(&self.word_ids(&s.tokens)).into_iter().map(|l| self.model.labels[l].clone()).collect())
            .collect())
    }

    /// Character tags over a whole text, consistency-repaired.
    pub fn tag_chars(&self, text: &str) -> Result<Vec<Iob2Tag>> {
        if self.task != Task::Tokenizer {
            return Err(Error::ModelKind(format!("{} tagger does not tokenize", self.task)));
        }
        let ids: Vec<usize> = text.chars().map(|c| self.model.vocab.char_id(c)).collect();
        Ok(self.to_tags(&self.predict_ids(&ids)))
    }

    /// Splits raw text into sentences of tokens.
    pub fn tokenize(&self, text: &str) -> Result<Vec<Sentence>> {
        Ok(sentences_from_char_tags(text, &self.tag_chars(text)?))
    }

    /// Copy of `doc` carrying this tagger's predictions: entity spans
    /// replace the gold spans, POS tags replace `pos_tags`, and a
    /// tokenizer re-segments the text.
    pub fn annotate(&self, doc: &Document) -> Result<Document> {
        let mut out = doc.clone();
        match self.task {
            Task::Timex3 | Task::Event => out.gold_spans = self.predict_spans(doc)?,
            Task::Pos => out.pos_tags = Some(self.tag_pos(doc)?),
            Task::Tokenizer => {
                out.sentences = self.tokenize(&doc.text)?;
                out.pos_tags = None;
                out.gold_spans.clear();
            }
        }
        Ok(out)
    }

    /// Micro exact-span F1 for entity tasks and the tokenizer (token
    /// spans), token accuracy for POS.
    pub fn score(&self, corpus: &[Document]) -> Result<f64> {
        match self.task {
            Task::Timex3 | Task::Event => {
                let klass = self.task.klass().unwrap_or_default();
                let mut total = PrfScore::default();
                for doc in corpus {
                    let gold: Vec<Span> = doc.spans_of(klass).into_iter().cloned().collect();
                    total = total.merge(&score_spans(&gold, &self.predict_spans(doc)?, MatchMode::Exact)?);
                }
                Ok(total.f1)
            }
            Task::Pos => {
                let (mut right, mut all) = (0usize, 0usize);
                for doc in corpus {
                    let gold = doc.pos_tags.as_ref().ok_or_else(|| Error::Data(format!("document {} has no POS tags", doc.id)))?;
                    for (p, g) in self.tag_pos(doc)?.iter().flatten().zip(gold.iter().flatten()) {
                        right += usize::from(p == g);
                        all += 1;
                    }
                }
                Ok(if all == 0 { 1.0 } else { right as f64 / all as f64 })
            }
            Task::Tokenizer => {
                let mut total = PrfScore::default();
                for doc in corpus {
                    let units = |sentences: &[Sentence]| -> Vec<Span> {
                        sentences.iter().flat_map(|s| &s.tokens).map(|t| Span::new(t.begin, t.end, WORD)).collect()
                    };
                    let pred = units(&self.tokenize(&doc.text)?);
                    total = total.merge(&score_spans(&units(&doc.sentences), &pred, MatchMode::Exact)?);
                }
                Ok(total.f1)
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let tagger: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        tagger.model.check_shapes()?;
        Ok(tagger)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::document_from_tokens;
    use chrono::NaiveDate;

    #[test]
    fn presets() {
        let p = preset_config(Task::Timex3, 100);
        assert_eq!((p.hidden, p.context, p.lr), (80, 2, 0.01));
        assert_eq!(preset_config(Task::Event, 300).hidden, 256);
        let t = preset_config(Task::Tokenizer, 100);
        assert_eq!((t.dim, 2 * t.context + 1, t.pad), (16, 11, 5));
        assert_eq!(preset_config(Task::Pos, 100).context, 2);
    }

    #[test]
    fn task_names_parse() {
        assert_eq!("tokenize".parse::<Task>().unwrap(), Task::Tokenizer);
        assert_eq!("EVENT".parse::<Task>().unwrap(), Task::Event);
        assert!("crf".parse::<Task>().is_err());
    }

    fn corpus() -> Vec<Document> {
        let day = NaiveDate::from_ymd_opt(2012, 3, 4).unwrap();
        let mut doc = document_from_tokens("a", day, &[vec!["Chest", "pain", "today", "."], vec!["No", "fever", "."]]);
        doc.gold_spans = vec![Span::new(0, 10, EVENT), Span::new(22, 27, EVENT)];
        vec![doc]
    }

    #[test]
    fn uniform_tokenizer_output_has_no_mixed_runs() {
        let docs = corpus();
        let mut t = RnnTagger::new(&docs, &preset_config(Task::Tokenizer, 16), None, 1).unwrap();
        t.model.w.fill(0.0);
        let tags = t.tag_chars(&docs[0].text).unwrap();
        assert!(tags.iter().all(Iob2Tag::is_outside));
        t.model.w.row_mut(3).fill(1.0);
        t.model.w.row_mut(2).fill(0.99);
        let tags = t.tag_chars("ab cd").unwrap();
        assert_eq!(repair_span_classes(&tags), tags);
    }

    #[test]
    fn entity_tagger_learns_a_small_synthetic_corpus() {
        use crate::corpus::{generate_synthetic_corpus, GeneratorConfig};
        let cfg = GeneratorConfig {
            documents: 80,
            ..GeneratorConfig::default()
        };
        let docs = generate_synthetic_corpus(&cfg, 9).unwrap();
        let preset = preset_config(Task::Event, 20);
        let mut t = RnnTagger::new(&docs[..60], &preset, None, 2).unwrap();
        t.fit(&docs[..60], &preset.hyperparams(10, 3)).unwrap();
        assert!(t.score(&docs[..60]).unwrap() > 0.9);
        assert!(t.score(&docs[60..]).unwrap() > 0.8);
        let dir = tempfile::tempdir().unwrap();
        t.save(&dir.path().join("t.json")).unwrap();
        assert_eq!(RnnTagger::load(&dir.path().join("t.json")).unwrap(), t);
    }

    #[test]
    fn pos_requires_tags() {
        assert!(matches!(RnnTagger::new(&corpus(), &preset_config(Task::Pos, 10), None, 0), Err(Error::Data(_))));
    }

    #[test]
    fn wrong_task_is_rejected() {
        let docs = corpus();
        let t = RnnTagger::new(&docs, &preset_config(Task::Event, 8), None, 0).unwrap();
        assert!(matches!(t.tokenize("x"), Err(Error::ModelKind(_))));
        assert!(matches!(t.tag_pos(&docs[0]), Err(Error::ModelKind(_))));
    }
}
