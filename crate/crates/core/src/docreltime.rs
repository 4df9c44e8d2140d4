//! DocRelTime classification of events. A logistic-regression factor
//! scores each event from its own context; a skip factor ties the event to
//! its nearest time expression, whose label comes from date canonicalization
//! or learned phrase associations.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{nearest_span, Document, Span, EVENT, TIMEX3};
use crate::embeddings::normalize_word;
use crate::error::{Error, Result};
use crate::eval::{score_labels, LabelScores};
use crate::factorgraph::{
    gibbs_marginals, train_crf, train_pseudolikelihood, unary_scores, Anchor, Factor, FactorGraph, FactorKind,
    GibbsConfig, IndexMode, Instance, SgdConfig, Weights,
};
use crate::features::case_class;
use crate::temporal::{label_document_timexes, learn_phrase_associations, DistantConfig, DocRelTimeLabel, PhraseAssociations};
use crate::util::{argmax, sub_seed, write_atomic};

const BIAS: &str = "bias";

/// Label names in [`DocRelTimeLabel::ALL`] order.
pub fn phase2_labels() -> Vec<String> {
    DocRelTimeLabel::ALL.iter().map(|l| l.as_str().to_string()).collect()
}

/// The time expression whose midpoint is closest to the event's midpoint,
/// preferring the earlier one on ties.
pub fn nearest_timex3<'a>(event: &Span, doc: &'a Document) -> Option<&'a Span> {
    nearest_span(event, &doc.spans_of(TIMEX3))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Phase2Config {
    /// Log-potential bonus for a time expression's rule or distant label.
    pub gamma: f64,
    /// Event logistic regression.
    pub lr: SgdConfig,
    /// Skip-matrix pseudo-likelihood.
    pub skip: SgdConfig,
    pub gibbs: GibbsConfig,
    pub distant: DistantConfig,
}

impl Default for Phase2Config {
    fn default() -> Self {
        Self {
            gamma: 5.0,
            lr: SgdConfig {
                epochs: 10,
                rate: 0.1,
                l2: 0.01,
                seed: 0,
            },
            skip: SgdConfig {
                epochs: 10,
                rate: 0.05,
                l2: 0.01,
                seed: 0,
            },
            gibbs: GibbsConfig::default(),
            distant: DistantConfig::default(),
        }
    }
}

/// Prediction mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase2Mode {
    #[serde(rename = "lr")]
    Lr,
    #[serde(rename = "lr+skip")]
    LrSkip,
}

impl fmt::Display for Phase2Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Phase2Mode::Lr => "lr",
            Phase2Mode::LrSkip => "lr+skip",
        })
    }
}

impl FromStr for Phase2Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(Phase2Mode::Lr),
            "lr+skip" | "skip" => Ok(Phase2Mode::LrSkip),
            _ => Err(Error::Config(format!("unknown phase 2 mode {s:?}"))),
        }
    }
}

/// Trained Phase 2 classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Model {
    /// Event features × 4 labels, plus the 4×4 skip matrix.
    pub weights: Weights,
    pub associations: PhraseAssociations,
    pub config: Phase2Config,
}

fn distance_bucket(chars: Option<usize>) -> &'static str {
    match chars {
        None => "none",
        Some(d) if d <= 20 => "near",
        Some(d) if d <= 50 => "mid",
        Some(d) if d <= 100 => "far",
        Some(_) => "distant",
    }
}

/// Features of one event: its words and two words either side within the
/// sentence, letter case, position of the sentence in the document
/// (quartile), and the distance to the nearest time expression.
pub fn event_features(doc: &Document, event: &Span) -> Vec<String> {
    let mut out = vec![BIAS.to_string()];
    if let Some((si, first, last)) = doc.token_range(event) {
        let tokens = &doc.sentences[si].tokens;
        let word = |i: isize| -> String {
            if i < 0 || i as usize >= tokens.len() {
                "<PAD>".to_string()
            } else {
                normalize_word(&tokens[i as usize].surface)
            }
        };
        let (a, b) = (first as isize, last as isize);
        out.push(format!("w.left2={}", word(a - 2)));
        out.push(format!("w.left1={}", word(a - 1)));
        for t in &tokens[first..=last] {
            out.push(format!("w.in={}", normalize_word(&t.surface)));
        }
        out.push(format!("w.right1={}", word(b + 1)));
        out.push(format!("w.right2={}", word(b + 2)));
        out.push(format!("case.{}", case_class(&tokens[first].surface)));
        let quartile = 4 * si / doc.sentences.len().max(1);
        out.push(format!("section.q{quartile}"));
    }
    let distance = nearest_timex3(event, doc).map(|t| t.midpoint2().abs_diff(event.midpoint2()) / 2);
    out.push(format!("tdist.{}", distance_bucket(distance)));
    out
}

/// Variables, spans and rule labels of a Phase 2 graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase2Graph {
    pub graph: FactorGraph,
    /// Event spans; variable `i` belongs to `events[i]`.
    pub events: Vec<Span>,
    /// Time-expression spans with their rule or distant label; variable
    /// `events.len() + j` belongs to `timexes[j]`.
    pub timexes: Vec<(Span, Option<DocRelTimeLabel>)>,
}

fn anchor_of(doc: &Document, span: &Span) -> Anchor {
    doc.token_range(span)
        .map_or(Anchor { sentence: 0, token: 0 }, |(sentence, token, _)| Anchor { sentence, token })
}

fn build_graph(
    doc: &Document,
    associations: &PhraseAssociations,
    config: &Phase2Config,
    mut index: IndexMode<'_>,
) -> Phase2Graph {
    let mut graph = FactorGraph {
        doc_id: doc.id.clone(),
        ..Default::default()
    };
    let events: Vec<Span> = doc.spans_of(EVENT).into_iter().cloned().collect();
    for e in &events {
        let v = graph.add_variable(anchor_of(doc, e));
        let ids = event_features(doc, e).iter().filter_map(|f| index.resolve(f)).collect();
        graph.factors.push(Factor::unigram(v, ids));
    }
    let timexes = label_document_timexes(doc, associations, &config.distant);
    for (t, label) in &timexes {
        let v = graph.add_variable(anchor_of(doc, t));
        let mut prior = vec![0.0; DocRelTimeLabel::ALL.len()];
        if let Some(l) = label {
            prior[l.index()] = config.gamma;
        }
        graph.factors.push(Factor::unigram(v, Vec::new()).with_prior(prior));
    }
    let timex_spans: Vec<&Span> = timexes.iter().map(|(s, _)| s).collect();
    for (i, e) in events.iter().enumerate() {
        if let Some(t) = nearest_span(e, &timex_spans) {
            if let Some(j) = timex_spans.iter().position(|s| std::ptr::eq(*s, t)) {
                graph.factors.push(Factor::pairwise(FactorKind::Skip, i, events.len() + j));
            }
        }
    }
    Phase2Graph { graph, events, timexes }
}

/// Phase 2 graph of a document under a trained model: one variable per
/// event and per time expression, a feature factor per event, a prior
/// factor per time expression (`+gamma` on its label when it has one) and
/// a skip factor from each event to its nearest time expression.
pub fn build_phase2_graph(doc: &Document, model: &Phase2Model) -> Phase2Graph {
    build_graph(doc, &model.associations, &model.config, IndexMode::Frozen(&model.weights.features))
}

/// Learns event weights by logistic regression on gold event labels, then
/// the skip matrix by pseudo-likelihood with time expressions clamped to
/// their rule or distant labels. Time expressions without such a label
/// take no part in skip training.
pub fn train_phase2(corpus: &[Document], config: &Phase2Config, seed: u64) -> Result<(Phase2Model, Vec<f64>)> {
    let associations = learn_phrase_associations(corpus, config.distant.proximity);
    let mut weights = Weights::new(phase2_labels(), config.lr.l2);

    let mut graphs = Vec::with_capacity(corpus.len());
    for doc in corpus {
        graphs.push(build_graph(doc, &associations, config, IndexMode::Grow(&mut weights.features)));
    }
    weights.sync_features();

    // Event-only graphs for the logistic regression.
    let mut lr_instances = Vec::new();
    for pg in &graphs {
        let mut g = FactorGraph {
            doc_id: pg.graph.doc_id.clone(),
            ..Default::default()
        };
        let mut gold = Vec::new();
        for (i, e) in pg.events.iter().enumerate() {
            let Some(label) = e.doc_rel_time else { continue };
            let v = g.add_variable(pg.graph.variables[i].anchor);
            g.factors.push(Factor::unigram(v, pg.graph.factors[i].features.clone()));
            gold.push(label.index());
        }
        if !gold.is_empty() {
            lr_instances.push(Instance::new(g, gold));
        }
    }
    if lr_instances.is_empty() {
        return Err(Error::Data("no labelled events in the training corpus".into()));
    }
    let lr_config = SgdConfig {
        seed: sub_seed(seed, "phase2-lr"),
        ..config.lr
    };
    let mut history = train_crf(&lr_instances, &mut weights, &lr_config)?;

    // Skip graphs: event scores frozen as priors, labelled time
    // expressions clamped and excluded from the objective.
    let mut skip_instances = Vec::new();
    for pg in &graphs {
        let unary = unary_scores(&pg.graph, &weights);
        let mut g = FactorGraph {
            doc_id: pg.graph.doc_id.clone(),
            ..Default::default()
        };
        let mut gold = Vec::new();
        let mut targets = Vec::new();
        let mut timex_var: BTreeMap<usize, usize> = BTreeMap::new();
        for f in pg.graph.factors.iter().filter(|f| f.kind == FactorKind::Skip) {
            let (ev, tv) = (f.scope[0], f.scope[1]);
            let (Some(label), Some(tlabel)) = (pg.events[ev].doc_rel_time, pg.timexes[tv - pg.events.len()].1) else {
                continue;
            };
            let t = *timex_var.entry(tv).or_insert_with(|| {
                let t = g.add_variable(pg.graph.variables[tv].anchor);
                gold.push(tlabel.index());
                targets.push(false);
                t
            });
            let e = g.add_variable(pg.graph.variables[ev].anchor);
            g.factors.push(Factor::unigram(e, Vec::new()).with_prior(unary[ev].clone()));
            g.factors.push(Factor::pairwise(FactorKind::Skip, e, t));
            gold.push(label.index());
            targets.push(true);
        }
        if !gold.is_empty() {
            skip_instances.push(Instance {
                graph: g,
                gold,
                targets: Some(targets),
            });
        }
    }
    if !skip_instances.is_empty() {
        let mut skip_weights = Weights::new(phase2_labels(), config.skip.l2);
        let skip_config = SgdConfig {
            seed: sub_seed(seed, "phase2-skip"),
            ..config.skip
        };
        history.extend(train_pseudolikelihood(&skip_instances, &mut skip_weights, &skip_config)?);
        weights.skip = skip_weights.skip;
    }
    weights.l2 = config.lr.l2;
    Ok((
        Phase2Model {
            weights,
            associations,
            config: config.clone(),
        },
        history,
    ))
}

/// One DocRelTime label for every event of the document, in offset order.
/// `lr` takes the argmax of each event's own scores; `lr+skip` takes the
/// argmax of Gibbs marginals over the whole graph, seeded per document.
pub fn predict_docreltime(doc: &Document, model: &Phase2Model, mode: Phase2Mode, seed: u64) -> Result<Vec<(Span, DocRelTimeLabel)>> {
    let pg = build_phase2_graph(doc, model);
    let unary = unary_scores(&pg.graph, &model.weights);
    let skip_active = model.weights.skip.iter().any(|w| *w != 0.0) && pg.graph.has_pairwise(FactorKind::Skip);
    let scores: Vec<Vec<f64>> = if mode == Phase2Mode::LrSkip && skip_active {
        let gibbs = GibbsConfig {
            seed: sub_seed(seed, &doc.id),
            ..model.config.gibbs
        };
        gibbs_marginals(&pg.graph, &model.weights, &gibbs)?
    } else {
        unary
    };
    Ok(pg
        .events
        .iter()
        .enumerate()
        .map(|(i, e)| (e.clone(), DocRelTimeLabel::from_index(argmax(&scores[i]))))
        .collect())
}

/// Key identifying an event across gold and predicted label maps.
pub type EventKey = (String, usize, usize);

/// Gold labels of every labelled event.
pub fn gold_label_map(corpus: &[Document]) -> BTreeMap<EventKey, DocRelTimeLabel> {
    corpus
        .iter()
        .flat_map(|d| {
            d.spans_of(EVENT)
                .into_iter()
                .filter_map(|e| Some(((d.id.clone(), e.begin, e.end), e.doc_rel_time?)))
        })
        .collect()
}

/// Predicted labels of every event in the corpus.
pub fn predict_corpus(corpus: &[Document], model: &Phase2Model, mode: Phase2Mode, seed: u64) -> Result<BTreeMap<EventKey, DocRelTimeLabel>> {
    let mut out = BTreeMap::new();
    for doc in corpus {
        for (e, l) in predict_docreltime(doc, model, mode, seed)? {
            out.insert((doc.id.clone(), e.begin, e.end), l);
        }
    }
    Ok(out)
}

/// Scores predictions on the labelled events of `corpus`.
pub fn evaluate(corpus: &[Document], model: &Phase2Model, mode: Phase2Mode, seed: u64) -> Result<LabelScores> {
    let gold = gold_label_map(corpus);
    let mut pred = predict_corpus(corpus, model, mode, seed)?;
    pred.retain(|k, _| gold.contains_key(k));
    score_labels(&gold, &pred)
}

/// `doc id TAB begin TAB end TAB label` lines.
pub fn render_predictions(predictions: &BTreeMap<EventKey, DocRelTimeLabel>) -> String {
    predictions
        .iter()
        .map(|((id, b, e), l)| format!("{id}\t{b}\t{e}\t{l}\n"))
        .collect()
}

pub fn parse_predictions(text: &str, origin: &Path) -> Result<BTreeMap<EventKey, DocRelTimeLabel>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 4 {
            return Err(err(format!("expected 4 columns, found {}", cols.len())));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|e| err(format!("bad offset {s:?}: {e}")));
        let label = cols[3].parse().map_err(|e: Error| err(e.to_string()))?;
        out.insert((cols[0].to_string(), num(cols[1])?, num(cols[2])?), label);
    }
    Ok(out)
}

impl Phase2Model {
    /// Writes `phase2.json`, `weights.tsv` and `associations.tsv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("phase2.json"), (serde_json::to_string_pretty(&self.config)? + "\n").as_bytes())?;
        write_atomic(&dir.join("weights.tsv"), self.weights.to_tsv().as_bytes())?;
        write_atomic(&dir.join("associations.tsv"), self.associations.to_tsv().as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config: Phase2Config = serde_json::from_str(&std::fs::read_to_string(dir.join("phase2.json"))?)?;
        let weights = Weights::from_tsv(&std::fs::read_to_string(dir.join("weights.tsv"))?)?;
        if weights.labels != phase2_labels() {
            return Err(Error::ModelKind("weights do not use the DocRelTime label set".into()));
        }
        let associations = PhraseAssociations::from_tsv(&std::fs::read_to_string(dir.join("associations.tsv"))?)?;
        Ok(Self {
            weights,
            associations,
            config,
        })
    }
}
