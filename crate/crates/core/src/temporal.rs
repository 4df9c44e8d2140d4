//! Date-expression parsing and canonicalization, DocRelTime rules, and
//! distant supervision for time expressions that are not dates.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use chrono::{Datelike, NaiveDate};
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{Document, Span, EVENT, TIMEX3};
use crate::embeddings::normalize_word;
use crate::error::{Error, Result};

/// Relation of a mention to its document's creation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DocRelTimeLabel {
    Before,
    Overlap,
    BeforeOverlap,
    After,
}

impl DocRelTimeLabel {
    /// All labels in their fixed order, which is also the tie-break order.
    pub const ALL: [DocRelTimeLabel; 4] = [
        DocRelTimeLabel::Before,
        DocRelTimeLabel::Overlap,
        DocRelTimeLabel::BeforeOverlap,
        DocRelTimeLabel::After,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DocRelTimeLabel::Before => "Before",
            DocRelTimeLabel::Overlap => "Overlap",
            DocRelTimeLabel::BeforeOverlap => "Before/Overlap",
            DocRelTimeLabel::After => "After",
        }
    }
}

impl fmt::Display for DocRelTimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for DocRelTimeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Input(format!("unknown DocRelTime label {s:?}")))
    }
}

impl Serialize for DocRelTimeLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DocRelTimeLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A date with possibly missing components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartialDate {
    pub year: Option<i32>,
    pub month: Option<u32>,
    pub day: Option<u32>,
}

impl PartialDate {
    pub fn new(year: Option<i32>, month: Option<u32>, day: Option<u32>) -> Self {
        Self { year, month, day }
    }
}

const MONTHS: [&str; 12] = [
    "january", "february", "march", "april", "may", "june", "july", "august", "september", "october",
    "november", "december",
];

fn month_from_name(name: &str) -> Option<u32> {
    let name = name.to_ascii_lowercase();
    let name = name.trim_end_matches('.');
    if name.len() < 3 {
        return None;
    }
    if name == "sept" {
        return Some(9);
    }
    MONTHS
        .iter()
        .position(|m| *m == name || (name.len() == 3 && m.starts_with(name)))
        .map(|i| i as u32 + 1)
}

fn two_digit_year(yy: i32) -> i32 {
    if yy <= 29 {
        2000 + yy
    } else {
        1900 + yy
    }
}

struct Patterns {
    slash: Regex,
    iso: Regex,
    day_mon_year: Regex,
    month_day: Regex,
    month_year: Regex,
    year: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        slash: Regex::new(r"^(\d{1,2})/(\d{1,2})/(\d{4}|\d{2})$").unwrap(),
        iso: Regex::new(r"^(\d{4})-(\d{1,2})-(\d{1,2})$").unwrap(),
        day_mon_year: Regex::new(r"(?i)^(\d{1,2})-([a-z]{3,9})-(\d{4})$").unwrap(),
        month_day: Regex::new(r"(?i)^([a-z]{3,9})\.?\s+(\d{1,2})(?:st|nd|rd|th)?(?:\s*,?\s*(\d{4}))?$").unwrap(),
        month_year: Regex::new(r"(?i)^([a-z]{3,9})\.?\s*,?\s+(\d{4})$").unwrap(),
        year: Regex::new(r"^(19\d{2}|20\d{2})$").unwrap(),
    })
}

fn valid_md(month: u32, day: Option<u32>) -> bool {
    (1..=12).contains(&month) && day.is_none_or(|d| (1..=31).contains(&d))
}

/// Recognizes simple calendar-date expressions. Returns `None` for anything
/// else, including relative phrases.
///
/// Accepted forms (case-insensitive): `M/D/YY`, `M/D/YYYY`, `YYYY-MM-DD`,
/// `D-Mon-YYYY`, `Month D[, YYYY]`, `Month YYYY`, and a bare year in
/// 1900–2099. Two-digit years map to 20YY when YY ≤ 29, else 19YY.
pub fn parse_date_expression(text: &str) -> Option<PartialDate> {
    let text = text.trim();
    let p = patterns();
    let num = |s: &str| s.parse::<u32>().ok();
    if let Some(c) = p.slash.captures(text) {
        let (m, d) = (num(&c[1])?, num(&c[2])?);
        let y = c[3].parse::<i32>().ok()?;
        let y = if c[3].len() == 2 { two_digit_year(y) } else { y };
        return valid_md(m, Some(d)).then_some(PartialDate::new(Some(y), Some(m), Some(d)));
    }
    if let Some(c) = p.iso.captures(text) {
        let (y, m, d) = (c[1].parse::<i32>().ok()?, num(&c[2])?, num(&c[3])?);
        return valid_md(m, Some(d)).then_some(PartialDate::new(Some(y), Some(m), Some(d)));
    }
    if let Some(c) = p.day_mon_year.captures(text) {
        let (d, m, y) = (num(&c[1])?, month_from_name(&c[2])?, c[3].parse::<i32>().ok()?);
        return valid_md(m, Some(d)).then_some(PartialDate::new(Some(y), Some(m), Some(d)));
    }
    if let Some(c) = p.month_day.captures(text) {
        let (m, d) = (month_from_name(&c[1])?, num(&c[2])?);
        let y = c.get(3).and_then(|y| y.as_str().parse::<i32>().ok());
        return valid_md(m, Some(d)).then_some(PartialDate::new(y, Some(m), Some(d)));
    }
    if let Some(c) = p.month_year.captures(text) {
        let (m, y) = (month_from_name(&c[1])?, c[2].parse::<i32>().ok()?);
        return Some(PartialDate::new(Some(y), Some(m), None));
    }
    if let Some(c) = p.year.captures(text) {
        return Some(PartialDate::new(c[1].parse().ok(), None, None));
    }
    None
}

fn days_in_month(year: i32, month: u32) -> u32 {
    let (ny, nm) = if month == 12 { (year + 1, 1) } else { (year, month + 1) };
    NaiveDate::from_ymd_opt(ny, nm, 1)
        .and_then(|d| d.pred_opt())
        .map_or(28, |d| d.day())
}

/// Fills in missing components. A missing year comes from the latest
/// preceding date mention, otherwise from the document creation year;
/// missing month and day default to 1; days past the month end are clamped.
pub fn resolve_partial_date(pd: PartialDate, preceding: &[NaiveDate], doctime: NaiveDate) -> NaiveDate {
    let year = pd
        .year
        .or_else(|| preceding.last().map(|d| d.year()))
        .unwrap_or_else(|| doctime.year());
    let month = pd.month.unwrap_or(1).clamp(1, 12);
    let day = pd.day.unwrap_or(1).clamp(1, days_in_month(year, month));
    NaiveDate::from_ymd_opt(year, month, day).unwrap_or(doctime)
}

/// Places a canonical date relative to the document's active period,
/// `[doctime, last revision]`. Never yields `BeforeOverlap`.
pub fn classify_date_docreltime(d: NaiveDate, doctime: NaiveDate, revisions: &[NaiveDate]) -> DocRelTimeLabel {
    let last = revisions.iter().copied().chain([doctime]).max().unwrap_or(doctime);
    if d < doctime {
        DocRelTimeLabel::Before
    } else if d <= last {
        DocRelTimeLabel::Overlap
    } else {
        DocRelTimeLabel::After
    }
}

/// Learned label tendency of one time phrase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Association {
    pub label: DocRelTimeLabel,
    pub confidence: f64,
    pub support: usize,
}

/// Normalized TIMEX3 phrase → majority DocRelTime label of nearby events.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhraseAssociations {
    pub entries: BTreeMap<String, Association>,
}

impl PhraseAssociations {
    pub fn get(&self, phrase: &str) -> Option<&Association> {
        self.entries.get(phrase)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `phrase TAB label TAB confidence TAB support`, sorted by phrase.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (phrase, a) in &self.entries {
            out.push_str(&format!("{phrase}\t{}\t{}\t{}\n", a.label, a.confidence, a.support));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |m: &str| Error::Input(format!("associations line {}: {m}", i + 1));
            if cols.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            entries.insert(
                cols[0].to_string(),
                Association {
                    label: cols[1].parse()?,
                    confidence: cols[2].parse().map_err(|_| bad("bad confidence"))?,
                    support: cols[3].parse().map_err(|_| bad("bad support"))?,
                },
            );
        }
        Ok(Self { entries })
    }
}

/// Thresholds for distant-supervision labeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistantConfig {
    pub min_confidence: f64,
    pub min_support: usize,
    /// Token radius for counting events near a phrase.
    pub proximity: usize,
}

impl Default for DistantConfig {
    fn default() -> Self {
        Self {
            min_confidence: 0.7,
            min_support: 3,
            proximity: 10,
        }
    }
}

/// Normalized surface of a span: its tokens normalized and space-joined.
pub fn normalized_phrase(doc: &Document, span: &Span) -> String {
    doc.sentences
        .iter()
        .flat_map(|s| &s.tokens)
        .filter(|t| t.begin >= span.begin && t.end <= span.end)
        .map(|t| normalize_word(&t.surface))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Document-wide index of the first and last token a span covers.
pub(crate) fn token_extent(doc: &Document, span: &Span) -> Option<(usize, usize)> {
    let mut first = None;
    let mut last = None;
    for (i, t) in doc.sentences.iter().flat_map(|s| &s.tokens).enumerate() {
        if t.begin >= span.begin && t.end <= span.end {
            first.get_or_insert(i);
            last = Some(i);
        }
    }
    Some((first?, last?))
}

fn token_gap(a: (usize, usize), b: (usize, usize)) -> usize {
    if a.1 < b.0 {
        b.0 - a.1
    } else if b.1 < a.0 {
        a.0 - b.1
    } else {
        0
    }
}

/// Tallies the gold DocRelTime labels of events near each non-date TIMEX3
/// phrase and keeps the majority label per phrase.
pub fn learn_phrase_associations(corpus: &[Document], proximity: usize) -> PhraseAssociations {
    let mut tallies: BTreeMap<String, [usize; 4]> = BTreeMap::new();
    for doc in corpus {
        let events: Vec<((usize, usize), DocRelTimeLabel)> = doc
            .spans_of(EVENT)
            .into_iter()
            .filter_map(|e| Some((token_extent(doc, e)?, e.doc_rel_time?)))
            .collect();
        for timex in doc.spans_of(TIMEX3) {
            if parse_date_expression(&doc.slice(timex.begin, timex.end)).is_some() {
                continue;
            }
            let Some(extent) = token_extent(doc, timex) else { continue };
            let mut counts = [0usize; 4];
            let mut any = false;
            for (ev, label) in &events {
                if token_gap(extent, *ev) <= proximity {
                    counts[label.index()] += 1;
                    any = true;
                }
            }
            if any {
                let entry = tallies.entry(normalized_phrase(doc, timex)).or_default();
                for (e, c) in entry.iter_mut().zip(counts) {
                    *e += c;
                }
            }
        }
    }
    let entries = tallies
        .into_iter()
        .map(|(phrase, counts)| {
            let support: usize = counts.iter().sum();
            let mut best = 0;
            for i in 1..4 {
                if counts[i] > counts[best] {
                    best = i;
                }
            }
            let a = Association {
                label: DocRelTimeLabel::from_index(best),
                confidence: counts[best] as f64 / support as f64,
                support,
            };
            (phrase, a)
        })
        .collect();
    PhraseAssociations { entries }
}

/// What the date path needs to know about the surrounding document.
#[derive(Debug, Clone, PartialEq)]
pub struct DateContext {
    pub doctime: NaiveDate,
    pub revisions: Vec<NaiveDate>,
    /// Canonical dates of earlier date mentions, in document order.
    pub preceding: Vec<NaiveDate>,
}

/// How a TIMEX3 mention received its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimexLabelSource {
    Date(NaiveDate),
    Phrase,
}

/// Labels one TIMEX3 mention: dates go through canonicalization and the
/// revision-span rule, other phrases through learned associations that
/// clear both thresholds.
pub fn label_timex3(
    mention: &str,
    normalized: &str,
    context: &DateContext,
    associations: &PhraseAssociations,
    config: &DistantConfig,
) -> Option<(DocRelTimeLabel, TimexLabelSource)> {
    if let Some(pd) = parse_date_expression(mention) {
        let date = resolve_partial_date(pd, &context.preceding, context.doctime);
        let label = classify_date_docreltime(date, context.doctime, &context.revisions);
        return Some((label, TimexLabelSource::Date(date)));
    }
    associations
        .get(normalized)
        .filter(|a| a.confidence >= config.min_confidence && a.support >= config.min_support)
        .map(|a| (a.label, TimexLabelSource::Phrase))
}

/// Labels every TIMEX3 span of a document in order, threading the
/// preceding-date context through the date path.
pub fn label_document_timexes(
    doc: &Document,
    associations: &PhraseAssociations,
    config: &DistantConfig,
) -> Vec<(Span, Option<DocRelTimeLabel>)> {
    let mut context = DateContext {
        doctime: doc.doctime,
        revisions: doc.revisions.clone(),
        preceding: Vec::new(),
    };
    let mut out = Vec::new();
    for span in doc.spans_of(TIMEX3) {
        let text = doc.slice(span.begin, span.end);
        let labeled = label_timex3(&text, &normalized_phrase(doc, span), &context, associations, config);
        if let Some((_, TimexLabelSource::Date(d))) = labeled {
            context.preceding.push(d);
        }
        out.push((span.clone(), labeled.map(|(l, _)| l)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::document_from_tokens;
    use DocRelTimeLabel::*;

    fn day(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    #[test]
    fn parses_supported_forms() {
        let cases = [
            ("12/29/08", (Some(2008), Some(12), Some(29))),
            ("3/2/1975", (Some(1975), Some(3), Some(2))),
            ("1/5/30", (Some(1930), Some(1), Some(5))),
            ("2009-03-02", (Some(2009), Some(3), Some(2))),
            ("01-Apr-2016", (Some(2016), Some(4), Some(1))),
            ("October 16", (None, Some(10), Some(16))),
            ("oct. 16th , 2009", (Some(2009), Some(10), Some(16))),
            ("March 2, 2009", (Some(2009), Some(3), Some(2))),
            ("Sept 2011", (Some(2011), Some(9), None)),
            ("1999", (Some(1999), None, None)),
        ];
        for (text, (y, m, d)) in cases {
            assert_eq!(parse_date_expression(text), Some(PartialDate::new(y, m, d)), "{text}");
        }
    }

    #[test]
    fn rejects_non_dates() {
        for text in ["currently", "today's", "2 years ago", "13/01/2009", "1850", "may", "march 40"] {
            assert_eq!(parse_date_expression(text), None, "{text}");
        }
    }

    #[test]
    fn resolution_rules() {
        let pd = PartialDate::new(None, Some(10), Some(16));
        assert_eq!(resolve_partial_date(pd, &[day(2009, 3, 2)], day(2010, 1, 5)), day(2009, 10, 16));
        assert_eq!(resolve_partial_date(pd, &[], day(2010, 1, 5)), day(2010, 10, 16));
        let feb = PartialDate::new(Some(2008), Some(2), None);
        assert_eq!(resolve_partial_date(feb, &[], day(2010, 1, 5)), day(2008, 2, 1));
        let feb30 = PartialDate::new(Some(2009), Some(2), Some(30));
        assert_eq!(resolve_partial_date(feb30, &[], day(2010, 1, 5)), day(2009, 2, 28));
        let year = PartialDate::new(Some(2004), None, None);
        assert_eq!(resolve_partial_date(year, &[], day(2010, 1, 5)), day(2004, 1, 1));
    }

    #[test]
    fn classification_boundaries() {
        let doctime = day(2010, 1, 5);
        assert_eq!(classify_date_docreltime(doctime, doctime, &[]), Overlap);
        assert_eq!(classify_date_docreltime(day(2010, 1, 4), doctime, &[]), Before);
        assert_eq!(classify_date_docreltime(day(2010, 1, 12), doctime, &[day(2010, 1, 20)]), Overlap);
        assert_eq!(classify_date_docreltime(day(2010, 1, 21), doctime, &[day(2010, 1, 20)]), After);
        assert_eq!(classify_date_docreltime(day(2010, 1, 6), doctime, &[]), After);
    }

    fn labeled_doc(phrase: &str, labels: &[DocRelTimeLabel]) -> Document {
        // "<phrase> e e e ..." with every event one token.
        let mut words = vec![phrase];
        words.extend(std::iter::repeat_n("pain", labels.len()));
        let mut doc = document_from_tokens("d", day(2010, 1, 5), &[words]);
        let tokens = doc.sentences[0].tokens.clone();
        doc.gold_spans.push(Span::new(tokens[0].begin, tokens[0].end, TIMEX3));
        for (t, l) in tokens[1..].iter().zip(labels) {
            doc.gold_spans.push(Span::new(t.begin, t.end, EVENT).with_label(*l));
        }
        doc
    }

    #[test]
    fn association_majority_and_confidence() {
        let mut labels = vec![Overlap; 9];
        labels.push(Before);
        let assoc = learn_phrase_associations(&[labeled_doc("currently", &labels)], 10);
        let a = assoc.get("currently").unwrap();
        assert_eq!((a.label, a.support), (Overlap, 10));
        assert!((a.confidence - 0.9).abs() < 1e-12);
    }

    #[test]
    fn association_ties_use_fixed_order() {
        let assoc = learn_phrase_associations(&[labeled_doc("lately", &[After, Overlap, After, Overlap])], 10);
        let a = assoc.get("lately").unwrap();
        assert_eq!(a.label, Overlap);
        assert_eq!(a.confidence, 0.5);
    }

    #[test]
    fn distant_phrases_and_dates_are_skipped() {
        let far = labeled_doc("recently", &[Before, Before, Before]);
        assert!(learn_phrase_associations(&[far.clone()], 0).is_empty());
        assert_eq!(learn_phrase_associations(&[far.clone()], 1).get("recently").unwrap().support, 1);
        let mut lonely = far;
        lonely.gold_spans.retain(|s| s.klass == TIMEX3);
        assert!(learn_phrase_associations(&[lonely], 10).is_empty());
        let dated = labeled_doc("12/29/08", &[Before]);
        assert!(learn_phrase_associations(&[dated], 10).is_empty());
    }

    #[test]
    fn timex_labeling_paths() {
        let ctx = DateContext { doctime: day(2010, 1, 5), revisions: vec![], preceding: vec![] };
        let mut assoc = PhraseAssociations::default();
        assoc.entries.insert("currently".into(), Association { label: Overlap, confidence: 0.9, support: 10 });
        assoc.entries.insert("lately".into(), Association { label: Before, confidence: 0.6, support: 10 });
        let cfg = DistantConfig { min_confidence: 0.7, min_support: 5, proximity: 10 };
        assert_eq!(label_timex3("12/29/08", "NN/NN/NN", &ctx, &assoc, &cfg).map(|x| x.0), Some(Before));
        assert_eq!(label_timex3("currently", "currently", &ctx, &assoc, &cfg).map(|x| x.0), Some(Overlap));
        assert_eq!(label_timex3("lately", "lately", &ctx, &assoc, &cfg), None);
        assert_eq!(label_timex3("intermittently", "intermittently", &ctx, &assoc, &cfg), None);
    }

    #[test]
    fn associations_tsv_round_trip() {
        let mut assoc = PhraseAssociations::default();
        assoc.entries.insert("N years ago".into(), Association { label: Before, confidence: 0.75, support: 4 });
        assoc.entries.insert("currently".into(), Association { label: Overlap, confidence: 1.0, support: 2 });
        let tsv = assoc.to_tsv();
        assert_eq!(tsv, "N years ago\tBefore\t0.75\t4\ncurrently\tOverlap\t1\t2\n");
        assert_eq!(PhraseAssociations::from_tsv(&tsv).unwrap(), assoc);
    }

    #[test]
    fn label_parsing() {
        assert_eq!("Before/Overlap".parse::<DocRelTimeLabel>().unwrap(), BeforeOverlap);
        assert!("Later".parse::<DocRelTimeLabel>().is_err());
        assert!(Before < Overlap && Overlap < BeforeOverlap && BeforeOverlap < After);
    }
}
