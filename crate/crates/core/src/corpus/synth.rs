//! Template-driven generator of annotated clinical-style notes.
//!
//! Every event's DocRelTime label depends on its nearest time expression:
//! near a calendar date it copies the date's label with probability
//! `date_follow`, near any other time phrase it is drawn from that phrase's
//! label weights, and with no time expression in the document it is drawn
//! from the event's own weights.

use chrono::{Datelike, Duration, NaiveDate};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{nearest_span, Document, Sentence, Span, Token, EVENT, TIMEX3};
use crate::error::{Error, Result};
use crate::temporal::{label_document_timexes, DistantConfig, DocRelTimeLabel, PhraseAssociations};
use crate::util::{rng, Rng};

/// Unnormalized weights over the four DocRelTime labels.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelWeights {
    pub before: f64,
    pub overlap: f64,
    pub before_overlap: f64,
    pub after: f64,
}

impl LabelWeights {
    pub const fn new(before: f64, overlap: f64, before_overlap: f64, after: f64) -> Self {
        Self {
            before,
            overlap,
            before_overlap,
            after,
        }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.before, self.overlap, self.before_overlap, self.after]
    }

    /// Weights normalized to probabilities, indexed like
    /// [`DocRelTimeLabel::ALL`].
    pub fn probabilities(&self) -> Option<[f64; 4]> {
        let w = self.as_array();
        let total: f64 = w.iter().sum();
        (w.iter().all(|x| x.is_finite() && *x >= 0.0) && total > 0.0).then(|| w.map(|x| x / total))
    }

    fn sample(&self, r: &mut Rng) -> DocRelTimeLabel {
        let p = self.probabilities().unwrap_or([0.25; 4]);
        let mut u: f64 = r.gen();
        for (i, pi) in p.iter().enumerate() {
            if u < *pi {
                return DocRelTimeLabel::from_index(i);
            }
            u -= pi;
        }
        DocRelTimeLabel::ALL[p.iter().rposition(|x| *x > 0.0).unwrap_or(0)]
    }
}

/// A lexicon phrase with label tendencies and a selection weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phrase {
    pub text: String,
    pub labels: LabelWeights,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

impl Phrase {
    fn new(text: &str, labels: LabelWeights, weight: f64) -> Self {
        Self {
            text: text.into(),
            labels,
            weight,
        }
    }
}

/// Generator settings. Templates are whitespace-separated words with the
/// slots `{EVENT}`, `{TIMEX}`, `{CUE}` and `{AMBIG}` (an ambiguous word used
/// outside any entity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub documents: usize,
    /// Inclusive range of sentences per document.
    pub sentences: (usize, usize),
    /// Inclusive range of creation dates.
    pub doctime_range: (NaiveDate, NaiveDate),
    pub max_revisions: usize,
    /// Largest gap in days between creation and a revision.
    pub revision_days: i64,
    /// Share of time expressions rendered as calendar dates.
    pub date_fraction: f64,
    /// Probability that an event copies the label of its nearest date.
    pub date_follow: f64,
    /// Target label mix of generated dates.
    pub date_labels: LabelWeights,
    /// Time phrases that are not dates, with the label distribution of the
    /// events they are nearest to.
    pub timex_phrases: Vec<Phrase>,
    pub event_phrases: Vec<Phrase>,
    /// Words that are events after a cue word and plain words elsewhere.
    pub ambiguous_events: Vec<Phrase>,
    /// Chance that an event slot takes an ambiguous word.
    pub ambiguous_rate: f64,
    pub cues: Vec<String>,
    pub templates: Vec<String>,
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap_or_default()
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let procedure = LabelWeights::new(0.45, 0.15, 0.1, 0.3);
        let symptom = LabelWeights::new(0.25, 0.45, 0.2, 0.1);
        let chronic = LabelWeights::new(0.2, 0.3, 0.5, 0.0);
        let events = [
            ("chest pain", symptom),
            ("fever", symptom),
            ("cough", symptom),
            ("nausea", symptom),
            ("headache", symptom),
            ("rash", symptom),
            ("swelling", symptom),
            ("bleeding", symptom),
            ("fatigue", symptom),
            ("weight loss", symptom),
            ("pneumonia", symptom),
            ("infection", symptom),
            ("fracture", symptom),
            ("surgery", procedure),
            ("biopsy", procedure),
            ("colonoscopy", procedure),
            ("chemotherapy", procedure),
            ("radiation therapy", procedure),
            ("tumor resection", procedure),
            ("ct scan", procedure),
            ("mri", procedure),
            ("hypertension", chronic),
            ("diabetes", chronic),
        ];
        let ambiguous = ["discharge", "mass", "cold", "pressure", "growth"];
        let timex = [
            ("currently", LabelWeights::new(0.1, 0.9, 0.0, 0.0), 3.0),
            ("today", LabelWeights::new(0.1, 0.85, 0.0, 0.05), 2.0),
            ("now", LabelWeights::new(0.0, 0.8, 0.2, 0.0), 1.0),
            ("two weeks ago", LabelWeights::new(0.9, 0.1, 0.0, 0.0), 2.0),
            ("last year", LabelWeights::new(0.85, 0.0, 0.15, 0.0), 1.0),
            ("previously", LabelWeights::new(0.8, 0.0, 0.2, 0.0), 1.0),
            ("since last year", LabelWeights::new(0.15, 0.0, 0.85, 0.0), 1.0),
            ("for several months", LabelWeights::new(0.2, 0.0, 0.8, 0.0), 1.0),
            ("next week", LabelWeights::new(0.0, 0.1, 0.0, 0.9), 1.0),
            ("in two months", LabelWeights::new(0.0, 0.15, 0.0, 0.85), 1.0),
            ("tomorrow", LabelWeights::new(0.0, 0.1, 0.0, 0.9), 1.0),
        ];
        let templates = [
            "Patient {CUE} {EVENT} and was seen in clinic {TIMEX} .",
            "{TIMEX} the patient was examined and {CUE} {EVENT} .",
            "She {CUE} {EVENT} , which was discussed at the visit {TIMEX} .",
            "He {CUE} {EVENT} and {CUE} {EVENT} per the note from {TIMEX} .",
            "{TIMEX} , imaging was reviewed and the patient {CUE} {EVENT} .",
            "Patient {CUE} {EVENT} .",
            "Exam {CUE} {EVENT} and {EVENT} .",
            "The patient {CUE} {EVENT} on review of systems .",
            "Labs were drawn {TIMEX} .",
            "Records were updated {TIMEX} .",
            "The {AMBIG} summary was reviewed with the team .",
            "Plan was discussed with the family .",
            "Per the {AMBIG} clinic note , no changes were made .",
            "Vital signs were reviewed .",
        ];
        Self {
            documents: 100,
            sentences: (6, 12),
            doctime_range: (date(2005, 1, 1), date(2015, 12, 31)),
            max_revisions: 2,
            revision_days: 45,
            date_fraction: 0.42,
            date_follow: 0.9,
            date_labels: LabelWeights::new(0.5, 0.25, 0.0, 0.25),
            timex_phrases: timex.iter().map(|(t, l, w)| Phrase::new(t, *l, *w)).collect(),
            event_phrases: events.iter().map(|(t, l)| Phrase::new(t, *l, 1.0)).collect(),
            ambiguous_events: ambiguous
                .iter()
                .map(|t| Phrase::new(t, LabelWeights::new(0.3, 0.5, 0.2, 0.0), 1.0))
                .collect(),
            ambiguous_rate: 0.2,
            cues: ["reports", "denies", "developed", "noted", "has", "with"].map(String::from).to_vec(),
            templates: templates.map(String::from).to_vec(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        let uses = |slot: &str| self.templates.iter().any(|t| t.contains(slot));
        if self.templates.is_empty() {
            return fail("generator needs at least one template");
        }
        if self.sentences.0 == 0 || self.sentences.0 > self.sentences.1 {
            return fail("sentence range must be non-empty and start at 1 or more");
        }
        if self.doctime_range.0 > self.doctime_range.1 {
            return fail("doctime range is inverted");
        }
        if !(0.0..=1.0).contains(&self.date_fraction)
            || !(0.0..=1.0).contains(&self.date_follow)
            || !(0.0..=1.0).contains(&self.ambiguous_rate)
        {
            return fail("probabilities must lie in [0, 1]");
        }
        if uses("{EVENT}") && self.event_phrases.is_empty() {
            return fail("event lexicon is empty");
        }
        if uses("{TIMEX}") && self.date_fraction < 1.0 && self.timex_phrases.is_empty() {
            return fail("time-phrase lexicon is empty");
        }
        if uses("{CUE}") && self.cues.is_empty() {
            return fail("cue lexicon is empty");
        }
        if (uses("{AMBIG}") || self.ambiguous_rate > 0.0) && self.ambiguous_events.is_empty() {
            return fail("ambiguous-word lexicon is empty");
        }
        if self.date_fraction > 0.0 && self.date_labels.probabilities().is_none() {
            return fail("date label weights must be non-negative with a positive sum");
        }
        for p in self.timex_phrases.iter().chain(&self.event_phrases).chain(&self.ambiguous_events) {
            if p.text.split_whitespace().next().is_none() {
                return fail("lexicon phrases must contain a word");
            }
            if p.labels.probabilities().is_none() || !(p.weight.is_finite() && p.weight > 0.0) {
                return fail(&format!("phrase {:?} has invalid weights", p.text));
            }
        }
        Ok(())
    }
}

fn pick<'a, T>(r: &mut Rng, items: &'a [T]) -> &'a T {
    &items[r.gen_range(0..items.len())]
}

fn pick_weighted<'a>(r: &mut Rng, items: &'a [Phrase]) -> &'a Phrase {
    let total: f64 = items.iter().map(|p| p.weight).sum();
    let mut u = r.gen::<f64>() * total;
    for p in items {
        if u < p.weight {
            return p;
        }
        u -= p.weight;
    }
    &items[items.len() - 1]
}

const MONTH_NAMES: [&str; 12] = [
    "January", "February", "March", "April", "May", "June", "July", "August", "September", "October", "November",
    "December",
];

/// Renders a date in one of the supported surface forms. Some forms drop
/// the year or the day, so the canonical date is recomputed afterwards.
fn render_date(d: NaiveDate, r: &mut Rng) -> Vec<String> {
    let (y, m, day) = (d.year(), d.month(), d.day());
    let month = MONTH_NAMES[m as usize - 1];
    match r.gen_range(0..7) {
        0 if (2000..2030).contains(&y) => vec![format!("{m}/{day}/{:02}", y % 100)],
        0 | 1 => vec![format!("{m}/{day}/{y}")],
        2 => vec![format!("{y}-{m:02}-{day:02}")],
        3 => vec![format!("{day}-{}-{y}", &month[..3])],
        4 => vec![month.to_string(), day.to_string()],
        5 => vec![month.to_string(), format!("{day},"), y.to_string()],
        _ => vec![month.to_string(), y.to_string()],
    }
}

fn random_date(cfg: &GeneratorConfig, doctime: NaiveDate, last: NaiveDate, r: &mut Rng) -> NaiveDate {
    match cfg.date_labels.sample(r) {
        DocRelTimeLabel::Before => doctime - Duration::days(r.gen_range(1..=900)),
        DocRelTimeLabel::After => last + Duration::days(r.gen_range(1..=300)),
        _ => doctime + Duration::days(r.gen_range(0..=(last - doctime).num_days())),
    }
}

/// Part-of-speech tag from a small closed-class table and word shape.
fn pos_tag(word: &str) -> &'static str {
    let lower = word.to_ascii_lowercase();
    match lower.as_str() {
        "." => ".",
        "," => ",",
        "the" | "a" | "no" => "DT",
        "and" => "CC",
        "in" | "at" | "from" | "per" | "on" | "of" | "with" | "for" | "since" => "IN",
        "he" | "she" | "which" => "PRP",
        "was" | "were" | "has" => "VBD",
        "reports" | "denies" => "VBZ",
        "developed" | "noted" | "seen" | "examined" | "reviewed" | "discussed" | "drawn" | "updated" | "made" => "VBN",
        "ago" | "now" | "currently" | "today" | "tomorrow" | "previously" => "RB",
        "last" | "next" | "several" | "two" => "JJ",
        _ if lower.chars().any(|c| c.is_ascii_digit()) => "CD",
        _ if MONTH_NAMES.iter().any(|m| m.eq_ignore_ascii_case(&lower)) => "NNP",
        _ => "NN",
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Role {
    Plain,
    Event(usize),
    Timex(usize),
}

struct Draft {
    words: Vec<(String, Role)>,
    event_phrases: Vec<usize>,
    /// Per time expression: `Some(phrase index)` or `None` for a date.
    timex_phrases: Vec<Option<usize>>,
    /// `true` for ambiguous-lexicon events.
    ambiguous: Vec<bool>,
}

fn push_phrase(draft: &mut Draft, text: &str, role: Role) {
    for w in text.split_whitespace() {
        draft.words.push((w.to_string(), role));
    }
}

fn generate_document(cfg: &GeneratorConfig, id: String, r: &mut Rng) -> Document {
    let span_days = (cfg.doctime_range.1 - cfg.doctime_range.0).num_days();
    let doctime = cfg.doctime_range.0 + Duration::days(r.gen_range(0..=span_days));
    let mut revisions: Vec<NaiveDate> = (0..r.gen_range(0..=cfg.max_revisions))
        .map(|_| doctime + Duration::days(r.gen_range(1..=cfg.revision_days.max(1))))
        .collect();
    revisions.sort();
    let last = revisions.last().copied().unwrap_or(doctime);

    let mut draft = Draft {
        words: Vec::new(),
        event_phrases: Vec::new(),
        timex_phrases: Vec::new(),
        ambiguous: Vec::new(),
    };
    let mut sentence_lengths = Vec::new();
    for _ in 0..r.gen_range(cfg.sentences.0..=cfg.sentences.1) {
        let before = draft.words.len();
        let template = pick(r, &cfg.templates).clone();
        for slot in template.split_whitespace() {
            match slot {
                "{EVENT}" => {
                    let id = draft.event_phrases.len();
                    let ambiguous = r.gen::<f64>() < cfg.ambiguous_rate;
                    let lexicon = if ambiguous { &cfg.ambiguous_events } else { &cfg.event_phrases };
                    let index = r.gen_range(0..lexicon.len());
                    push_phrase(&mut draft, &lexicon[index].text, Role::Event(id));
                    draft.event_phrases.push(index);
                    draft.ambiguous.push(ambiguous);
                }
                "{TIMEX}" => {
                    let id = draft.timex_phrases.len();
                    if r.gen::<f64>() < cfg.date_fraction {
                        let d = random_date(cfg, doctime, last, r);
                        for w in render_date(d, r) {
                            draft.words.push((w, Role::Timex(id)));
                        }
                        draft.timex_phrases.push(None);
                    } else {
                        let p = pick_weighted(r, &cfg.timex_phrases);
                        push_phrase(&mut draft, &p.text, Role::Timex(id));
                        let index = cfg.timex_phrases.iter().position(|q| std::ptr::eq(q, p)).unwrap_or(0);
                        draft.timex_phrases.push(Some(index));
                    }
                }
                "{CUE}" => {
                    let cue = pick(r, &cfg.cues).clone();
                    push_phrase(&mut draft, &cue, Role::Plain);
                }
                "{AMBIG}" => {
                    let word = pick(r, &cfg.ambiguous_events).text.clone();
                    push_phrase(&mut draft, &word, Role::Plain);
                }
                w => draft.words.push((w.to_string(), Role::Plain)),
            }
        }
        if let Some((first, _)) = draft.words.get_mut(before) {
            let mut chars = first.chars();
            if let Some(c) = chars.next() {
                *first = c.to_uppercase().chain(chars).collect();
            }
        }
        sentence_lengths.push(draft.words.len() - before);
    }

    // Lay out text and collect entity extents.
    let mut text = String::new();
    let mut sentences = Vec::new();
    let mut pos_tags = Vec::new();
    let mut extents: Vec<(Role, usize, usize)> = Vec::new();
    let mut words = draft.words.iter();
    let mut offset = 0usize;
    for len in sentence_lengths {
        let mut tokens = Vec::with_capacity(len);
        let mut tags = Vec::with_capacity(len);
        for (w, role) in words.by_ref().take(len) {
            // Punctuation attaches to the preceding word, as in real notes.
            if !text.is_empty() && !matches!(w.as_str(), "." | "," | ":" | ";") {
                text.push(' ');
                offset += 1;
            }
            let n = w.chars().count();
            tokens.push(Token::new(w.clone(), offset, offset + n));
            tags.push(pos_tag(w).to_string());
            text.push_str(w);
            match extents.last_mut() {
                Some((r, _, end)) if *r == *role && *role != Role::Plain => *end = offset + n,
                _ => extents.push((*role, offset, offset + n)),
            }
            offset += n;
        }
        sentences.push(Sentence::new(tokens));
        pos_tags.push(tags);
    }

    let mut doc = Document {
        id,
        text,
        sentences,
        doctime,
        revisions,
        pos_tags: Some(pos_tags),
        gold_spans: Vec::new(),
    };
    let mut timex_spans = vec![Span::new(0, 0, TIMEX3); draft.timex_phrases.len()];
    for (role, b, e) in &extents {
        if let Role::Timex(i) = role {
            timex_spans[*i] = Span::new(*b, *e, TIMEX3);
        }
    }
    doc.gold_spans = timex_spans.clone();

    // Dates are labelled by the same canonicalization used downstream.
    let date_labels = label_document_timexes(&doc, &PhraseAssociations::default(), &DistantConfig::default());
    let timex_refs: Vec<&Span> = timex_spans.iter().collect();
    for (role, b, e) in extents {
        let Role::Event(i) = role else { continue };
        let lexicon = if draft.ambiguous[i] { &cfg.ambiguous_events } else { &cfg.event_phrases };
        let own = lexicon[draft.event_phrases[i]].labels;
        let mut span = Span::new(b, e, EVENT);
        let label = match nearest_span(&span, &timex_refs) {
            None => own.sample(r),
            Some(t) => {
                let ti = timex_spans.iter().position(|s| s == t).unwrap_or(0);
                match draft.timex_phrases[ti] {
                    Some(p) => cfg.timex_phrases[p].labels.sample(r),
                    None => {
                        let date_label = date_labels
                            .iter()
                            .find(|(s, _)| s == t)
                            .and_then(|(_, l)| *l)
                            .unwrap_or(DocRelTimeLabel::Overlap);
                        if r.gen::<f64>() < cfg.date_follow {
                            date_label
                        } else {
                            own.sample(r)
                        }
                    }
                }
            }
        };
        span = span.with_label(label);
        doc.gold_spans.push(span);
    }
    doc.gold_spans.sort_by_key(|s| (s.begin, s.end));
    doc
}

/// Generates `config.documents` annotated documents. The output is a pure
/// function of the configuration and the seed.
pub fn generate_synthetic_corpus(config: &GeneratorConfig, seed: u64) -> Result<Vec<Document>> {
    config.validate()?;
    let mut r = rng(seed);
    let width = config.documents.saturating_sub(1).to_string().len().max(4);
    let docs: Vec<Document> = (0..config.documents)
        .map(|i| generate_document(config, format!("doc{i:0width$}"), &mut r))
        .collect();
    for d in &docs {
        d.validate()?;
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::temporal::{classify_date_docreltime, normalized_phrase, parse_date_expression, resolve_partial_date};

    fn small(n: usize) -> GeneratorConfig {
        GeneratorConfig {
            documents: n,
            ..GeneratorConfig::default()
        }
    }

    #[test]
    fn zero_documents() {
        assert!(generate_synthetic_corpus(&small(0), 1).unwrap().is_empty());
    }

    #[test]
    fn same_seed_same_corpus() {
        let a = generate_synthetic_corpus(&small(20), 5).unwrap();
        let b = generate_synthetic_corpus(&small(20), 5).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_corpus(&small(20), 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_lexicon_is_a_config_error() {
        let mut cfg = small(3);
        cfg.event_phrases.clear();
        assert!(matches!(generate_synthetic_corpus(&cfg, 0), Err(Error::Config(_))));
        let mut cfg = small(3);
        cfg.timex_phrases.clear();
        assert!(matches!(generate_synthetic_corpus(&cfg, 0), Err(Error::Config(_))));
    }

    #[test]
    fn every_event_is_labelled_and_documents_validate() {
        for doc in generate_synthetic_corpus(&small(30), 2).unwrap() {
            doc.validate().unwrap();
            assert!(doc.spans_of(EVENT).iter().all(|e| e.doc_rel_time.is_some()));
            assert!(doc.spans_of(TIMEX3).iter().all(|t| t.doc_rel_time.is_none()));
            for s in &doc.gold_spans {
                assert!(doc.token_range(s).is_some());
            }
        }
    }

    #[test]
    fn planted_overlap_rate_near_currently() {
        let docs = generate_synthetic_corpus(&small(1000), 17).unwrap();
        let (mut overlap, mut total) = (0usize, 0usize);
        for doc in &docs {
            let timexes = doc.spans_of(TIMEX3);
            for e in doc.spans_of(EVENT) {
                if let Some(t) = nearest_span(e, &timexes) {
                    if normalized_phrase(doc, t) == "currently" {
                        total += 1;
                        overlap += usize::from(e.doc_rel_time == Some(DocRelTimeLabel::Overlap));
                    }
                }
            }
        }
        let rate = overlap as f64 / total as f64;
        assert!(total > 500, "only {total} events near the phrase");
        assert!((rate - 0.9).abs() <= 0.03, "rate {rate}");
    }

    #[test]
    fn date_share_and_consistency() {
        let docs = generate_synthetic_corpus(&small(400), 3).unwrap();
        let (mut dates, mut all) = (0usize, 0usize);
        let (mut agree, mut near_date) = (0usize, 0usize);
        for doc in &docs {
            let mut preceding = Vec::new();
            let timexes = doc.spans_of(TIMEX3);
            let mut labels = Vec::new();
            for t in &timexes {
                all += 1;
                let label = parse_date_expression(&doc.slice(t.begin, t.end)).map(|pd| {
                    let d = resolve_partial_date(pd, &preceding, doc.doctime);
                    preceding.push(d);
                    classify_date_docreltime(d, doc.doctime, &doc.revisions)
                });
                dates += usize::from(label.is_some());
                labels.push(label);
            }
            for e in doc.spans_of(EVENT) {
                if let Some(t) = nearest_span(e, &timexes) {
                    let i = timexes.iter().position(|x| std::ptr::eq(*x, t)).unwrap();
                    if let Some(l) = labels[i] {
                        near_date += 1;
                        agree += usize::from(e.doc_rel_time == Some(l));
                    }
                }
            }
        }
        let share = dates as f64 / all as f64;
        assert!((share - 0.42).abs() < 0.04, "date share {share}");
        let follow = agree as f64 / near_date as f64;
        assert!(follow > 0.88, "events follow their date {follow}");
    }

    #[test]
    fn time_expressions_keep_distance_from_events() {
        for doc in generate_synthetic_corpus(&small(50), 4).unwrap() {
            for (si, sentence) in doc.sentences.iter().enumerate() {
            let tokens: Vec<&Token> = sentence.tokens.iter().collect();
            let index = |offset: usize| tokens.iter().position(|t| t.begin == offset).unwrap();
            for e in doc.sentence_spans(si, Some(EVENT)) {
                for t in doc.sentence_spans(si, Some(TIMEX3)) {
                    let (eb, tb) = (index(e.begin), index(t.begin));
                    let ee = tokens.iter().rposition(|x| x.end == e.end).unwrap();
                    let te = tokens.iter().rposition(|x| x.end == t.end).unwrap();
                    let gap = if ee < tb { tb - ee } else { eb - te };
                    assert!(gap > 2, "{}: gap {gap}", doc.id);
                }
            }
            }
        }
    }
}
