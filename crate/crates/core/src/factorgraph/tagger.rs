use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::inference::{gibbs_marginals, viterbi, GibbsConfig};
use super::train::{train_crf, train_pseudolikelihood, Instance, SgdConfig};
use super::{Anchor, Factor, FactorGraph, FactorKind, IndexMode, ModelKind, Weights};
use crate::corpus::{decode_iob2, repair_orphans, Document, Iob2Tag, Span};
use crate::embeddings::normalize_word;
use crate::error::{Error, Result};
use crate::features::{build_memorization_dict, sentence_features, FeatureRun, PhraseDictionary};
use crate::util::{argmax, write_atomic};

/// Always-on feature giving every label a learned prior.
const BIAS: &str = "bias";

/// Settings of a factor-graph span tagger for one entity class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaggerConfig {
    pub klass: String,
    pub run: u8,
    pub kind: ModelKind,
    /// Maximum sentence distance for skip factors.
    pub skip_window: usize,
    pub sgd: SgdConfig,
    pub gibbs: GibbsConfig,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        Self {
            klass: crate::corpus::TIMEX3.to_string(),
            run: 2,
            kind: ModelKind::Crf,
            skip_window: 3,
            sgd: SgdConfig::default(),
            gibbs: GibbsConfig::default(),
        }
    }
}

fn sentence_factors(
    graph: &mut FactorGraph,
    doc: &Document,
    sentence: usize,
    run: FeatureRun,
    dicts: &[PhraseDictionary],
    kind: ModelKind,
    index: &mut IndexMode<'_>,
) -> Result<Vec<usize>> {
    let features = sentence_features(doc, sentence, run, dicts)?;
    let mut vars = Vec::with_capacity(features.len());
    for (t, fv) in features.iter().enumerate() {
        let v = graph.add_variable(Anchor { sentence, token: t });
        let ids: Vec<usize> = std::iter::once(BIAS)
            .chain(fv.iter().map(String::as_str))
            .filter_map(|name| index.resolve(name))
            .collect();
        graph.factors.push(Factor::unigram(v, ids));
        if kind != ModelKind::Lr && t > 0 {
            graph.factors.push(Factor::pairwise(FactorKind::Transition, v - 1, v));
        }
        vars.push(v);
    }
    Ok(vars)
}

/// Builds the factor graph of a document: one variable per token with a
/// unigram factor over its features; transition factors between adjacent
/// tokens for `crf` and `skip`; for `skip`, one skip factor per pair of
/// tokens with identical normalized surface whose sentences are at most
/// `skip_window` apart.
pub fn build_graph(
    doc: &Document,
    run: FeatureRun,
    dicts: &[PhraseDictionary],
    kind: ModelKind,
    skip_window: usize,
    mut index: IndexMode<'_>,
) -> Result<FactorGraph> {
    let mut graph = FactorGraph {
        doc_id: doc.id.clone(),
        ..Default::default()
    };
    for si in 0..doc.sentences.len() {
        sentence_factors(&mut graph, doc, si, run, dicts, kind, &mut index)?;
    }
    if kind == ModelKind::Skip {
        let words: Vec<(usize, String)> = doc
            .sentences
            .iter()
            .enumerate()
            .flat_map(|(si, s)| s.tokens.iter().map(move |t| (si, normalize_word(&t.surface))))
            .collect();
        for i in 0..words.len() {
            for j in i + 1..words.len() {
                if words[j].0 - words[i].0 > skip_window {
                    break;
                }
                if words[i].1 == words[j].1 {
                    graph.factors.push(Factor::pairwise(FactorKind::Skip, i, j));
                }
            }
        }
    }
    Ok(graph)
}

/// Label set of a single-class IOB2 tagger.
pub fn tagger_labels(klass: &str) -> Vec<String> {
    Iob2Tag::label_set(&[klass]).iter().map(ToString::to_string).collect()
}

fn gold_labels(doc: &Document, klass: &str, weights: &Weights) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(doc.token_count());
    for si in 0..doc.sentences.len() {
        for tag in doc.sentence_tags(si, Some(klass))? {
            let name = tag.to_string();
            out.push(
                weights
                    .label_index(&name)
                    .ok_or_else(|| Error::Data(format!("label {name} outside the tagger's label set")))?,
            );
        }
    }
    Ok(out)
}

/// A trained factor-graph span tagger with its dictionaries.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfTagger {
    pub config: TaggerConfig,
    pub dicts: Vec<PhraseDictionary>,
    pub weights: Weights,
}

impl CrfTagger {
    /// Builds the memorization dictionaries for every annotated class, then
    /// trains by SGD: exact conditional likelihood per sentence for `lr`
    /// and `crf`, pseudo-likelihood per document for `skip`. Returns the
    /// tagger and the objective after each epoch.
    pub fn train(corpus: &[Document], config: &TaggerConfig) -> Result<(Self, Vec<f64>)> {
        let run = FeatureRun::from_number(config.run)?;
        let classes: BTreeSet<&str> = corpus.iter().flat_map(|d| &d.gold_spans).map(|s| s.klass.as_str()).collect();
        if !classes.contains(config.klass.as_str()) {
            return Err(Error::Data(format!("training corpus has no {} spans", config.klass)));
        }
        let dicts: Vec<PhraseDictionary> = classes.iter().map(|k| build_memorization_dict(corpus, k)).collect();
        let mut weights = Weights::new(tagger_labels(&config.klass), config.sgd.l2);
        let mut instances = Vec::new();
        for doc in corpus {
            let gold = gold_labels(doc, &config.klass, &weights)?;
            if config.kind == ModelKind::Skip {
                let graph = build_graph(doc, run, &dicts, config.kind, config.skip_window, IndexMode::Grow(&mut weights.features))?;
                instances.push(Instance::new(graph, gold));
            } else {
                let mut offset = 0;
                for si in 0..doc.sentences.len() {
                    let mut graph = FactorGraph {
                        doc_id: doc.id.clone(),
                        ..Default::default()
                    };
                    let mut index = IndexMode::Grow(&mut weights.features);
                    let vars = sentence_factors(&mut graph, doc, si, run, &dicts, config.kind, &mut index)?;
                    instances.push(Instance::new(graph, gold[offset..offset + vars.len()].to_vec()));
                    offset += vars.len();
                }
            }
        }
        weights.sync_features();
        let history = match config.kind {
            ModelKind::Skip => train_pseudolikelihood(&instances, &mut weights, &config.sgd)?,
            _ => train_crf(&instances, &mut weights, &config.sgd)?,
        };
        Ok((
            Self {
                config: config.clone(),
                dicts,
                weights,
            },
            history,
        ))
    }

    pub fn graph(&self, doc: &Document) -> Result<FactorGraph> {
        build_graph(
            doc,
            FeatureRun::from_number(self.config.run)?,
            &self.dicts,
            self.config.kind,
            self.config.skip_window,
            IndexMode::Frozen(&self.weights.features),
        )
    }

    /// Predicted IOB2 tags for every token of the document, in order.
    pub fn tag_document(&self, doc: &Document) -> Result<Vec<Iob2Tag>> {
        let graph = self.graph(doc)?;
        let mode = match self.config.kind {
            ModelKind::Skip => PredictMode::Gibbs(self.config.gibbs),
            _ => PredictMode::Exact,
        };
        predict(&graph, &self.weights, mode)
    }

    /// Predicted spans of the tagger's class.
    pub fn predict_spans(&self, doc: &Document) -> Result<Vec<Span>> {
        let tags = self.tag_document(doc)?;
        let mut spans = Vec::new();
        let mut offset = 0;
        for sentence in &doc.sentences {
            let n = sentence.tokens.len();
            spans.extend(decode_iob2(&tags[offset..offset + n], &sentence.tokens)?);
            offset += n;
        }
        Ok(spans)
    }

    /// Writes `tagger.json`, `weights.tsv`, and one `dict.<class>.tsv` per
    /// dictionary into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_atomic(&dir.join("tagger.json"), serde_json::to_string_pretty(&self.config)?.as_bytes())?;
        write_atomic(&dir.join("weights.tsv"), self.weights.to_tsv().as_bytes())?;
        for d in &self.dicts {
            write_atomic(&dir.join(format!("dict.{}.tsv", d.klass)), d.to_tsv().as_bytes())?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config: TaggerConfig = serde_json::from_str(&std::fs::read_to_string(dir.join("tagger.json"))?)?;
        let weights = Weights::from_tsv(&std::fs::read_to_string(dir.join("weights.tsv"))?)?;
        let mut dicts = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(dir)?.collect::<std::io::Result<Vec<_>>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(klass) = name.strip_prefix("dict.").and_then(|n| n.strip_suffix(".tsv")) {
                dicts.push(PhraseDictionary::from_tsv(klass, &std::fs::read_to_string(entry.path())?)?);
            }
        }
        Ok(Self { config, dicts, weights })
    }
}

/// Decoding strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictMode {
    /// Viterbi on chain-structured graphs.
    Exact,
    /// Per-variable argmax of Gibbs marginal estimates.
    Gibbs(GibbsConfig),
}

/// Label indices chosen for every variable.
pub fn predict_labels(graph: &FactorGraph, weights: &Weights, mode: PredictMode) -> Result<Vec<usize>> {
    match mode {
        PredictMode::Exact => viterbi(graph, weights),
        PredictMode::Gibbs(cfg) => Ok(gibbs_marginals(graph, weights, &cfg)?.iter().map(|m| argmax(m)).collect()),
    }
}

/// IOB2 tags for every variable, with orphan `I` tags repaired.
pub fn predict(graph: &FactorGraph, weights: &Weights, mode: PredictMode) -> Result<Vec<Iob2Tag>> {
    let tags = predict_labels(graph, weights, mode)?
        .into_iter()
        .map(|l| weights.labels[l].parse())
        .collect::<Result<Vec<Iob2Tag>>>()?;
    Ok(repair_orphans(&tags))
}
