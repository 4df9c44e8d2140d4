//! Precision, recall and F1 over spans and labels, plus tag-sequence
//! ensembling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::corpus::{repair_orphans, Document, Iob2Tag, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrfScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Default for PrfScore {
    fn default() -> Self {
        Self::from_counts(0, 0, 0)
    }
}

impl PrfScore {
    /// Precision is 1 with no predictions and recall is 1 with no gold
    /// items.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f1,
            tp,
            fp,
            fn_,
        }
    }

    /// Pools the counts of two scores.
    pub fn merge(&self, other: &PrfScore) -> PrfScore {
        Self::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Same begin, end and class.
    Exact,
    /// Same class and at least one shared character.
    Overlap,
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            MatchMode::Exact => "exact",
            MatchMode::Overlap => "overlap",
        })
    }
}

impl std::str::FromStr for MatchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MatchMode::Exact),
            "overlap" => Ok(MatchMode::Overlap),
            _ => Err(Error::Config(format!("unknown match mode {s:?}"))),
        }
    }
}

fn check_gold(gold: &[Span]) -> Result<()> {
    let mut by_class: BTreeMap<&str, Vec<&Span>> = BTreeMap::new();
    for s in gold {
        by_class.entry(&s.klass).or_default().push(s);
    }
    for (klass, mut spans) in by_class {
        spans.sort_by_key(|s| (s.begin, s.end));
        if let Some(pair) = spans.windows(2).find(|p| p[0].overlaps(p[1])) {
            return Err(Error::Validation(format!(
                "gold {klass} spans [{}, {}) and [{}, {}) overlap",
                pair[0].begin, pair[0].end, pair[1].begin, pair[1].end
            )));
        }
    }
    Ok(())
}

/// Scores predicted spans of one document against gold. Overlap mode
/// matches greedily in gold order, using each span at most once.
pub fn score_spans(gold: &[Span], pred: &[Span], mode: MatchMode) -> Result<PrfScore> {
    check_gold(gold)?;
    let tp = match mode {
        MatchMode::Exact => {
            let key = |s: &Span| (s.begin, s.end, s.klass.clone());
            let gold: BTreeSet<_> = gold.iter().map(key).collect();
            let pred: BTreeSet<_> = pred.iter().map(key).collect();
            let tp = gold.intersection(&pred).count();
            return Ok(PrfScore::from_counts(tp, pred.len() - tp, gold.len() - tp));
        }
        MatchMode::Overlap => {
            let mut gold_sorted: Vec<&Span> = gold.iter().collect();
            gold_sorted.sort_by_key(|s| (s.begin, s.end));
            let mut pred_sorted: Vec<&Span> = pred.iter().collect();
            pred_sorted.sort_by_key(|s| (s.begin, s.end));
            let mut used = vec![false; pred_sorted.len()];
            let mut tp = 0;
            for g in gold_sorted {
                if let Some(j) = (0..pred_sorted.len()).find(|&j| !used[j] && pred_sorted[j].klass == g.klass && pred_sorted[j].overlaps(g)) {
                    used[j] = true;
                    tp += 1;
                }
            }
            tp
        }
    };
    Ok(PrfScore::from_counts(tp, pred.len() - tp, gold.len() - tp))
}

/// Pairs documents by id. Any id present on only one side is an error.
pub fn align_documents<'a>(gold: &'a [Document], pred: &'a [Document]) -> Result<Vec<(&'a Document, &'a Document)>> {
    let pred_by_id: BTreeMap<&str, &Document> = pred.iter().map(|d| (d.id.as_str(), d)).collect();
    let gold_ids: BTreeSet<&str> = gold.iter().map(|d| d.id.as_str()).collect();
    let mut missing: Vec<&str> = gold_ids.iter().filter(|id| !pred_by_id.contains_key(*id)).copied().collect();
    missing.extend(pred_by_id.keys().filter(|id| !gold_ids.contains(*id)));
    if !missing.is_empty() {
        return Err(Error::Input(format!("document ids present on only one side: {}", missing.join(", "))));
    }
    Ok(gold.iter().map(|g| (g, pred_by_id[g.id.as_str()])).collect())
}

/// Pooled span score over a corpus for one class.
pub fn score_corpus(gold: &[Document], pred: &[Document], klass: &str, mode: MatchMode) -> Result<PrfScore> {
    let mut total = PrfScore::default();
    for (g, p) in align_documents(gold, pred)? {
        let gs: Vec<Span> = g.spans_of(klass).into_iter().cloned().collect();
        let ps: Vec<Span> = p.spans_of(klass).into_iter().cloned().collect();
        total = total.merge(&score_spans(&gs, &ps, mode)?);
    }
    Ok(total)
}

/// Micro and per-class scores of a single-label classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub micro: PrfScore,
    pub per_class: BTreeMap<String, PrfScore>,
}

/// Compares two labelings of the same keys. Every key carries exactly one
/// label on each side, so micro precision and recall both equal accuracy.
pub fn score_labels<K, L>(gold: &BTreeMap<K, L>, pred: &BTreeMap<K, L>) -> Result<LabelScores>
where
    K: Ord + fmt::Debug,
    L: Eq + fmt::Display,
{
    let mismatched: Vec<&K> = gold
        .keys()
        .filter(|k| !pred.contains_key(*k))
        .chain(pred.keys().filter(|k| !gold.contains_key(*k)))
        .collect();
    if !mismatched.is_empty() {
        return Err(Error::Input(format!("label maps disagree on keys: {mismatched:?}")));
    }
    let mut counts: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    let mut right = 0;
    for (k, g) in gold {
        let p = &pred[k];
        if g == p {
            right += 1;
            counts.entry(g.to_string()).or_default().0 += 1;
        } else {
            counts.entry(p.to_string()).or_default().1 += 1;
            counts.entry(g.to_string()).or_default().2 += 1;
        }
    }
    let wrong = gold.len() - right;
    Ok(LabelScores {
        micro: PrfScore::from_counts(right, wrong, wrong),
        per_class: counts
            .into_iter()
            .map(|(k, (tp, fp, fn_))| (k, PrfScore::from_counts(tp, fp, fn_)))
            .collect(),
    })
}

/// Per-position majority vote over tag sequences. A position without a
/// unique most frequent tag becomes `O`; orphan `I` tags in the result are
/// promoted to `B`.
pub fn ensemble_vote(sequences: &[Vec<Iob2Tag>]) -> Result<Vec<Iob2Tag>> {
    let Some(first) = sequences.first() else {
        return Err(Error::Input("no sequences to vote over".into()));
    };
    if sequences.iter().any(|s| s.len() != first.len()) {
        return Err(Error::Input("tag sequences differ in length".into()));
    }
    let mut out = Vec::with_capacity(first.len());
    for t in 0..first.len() {
        let mut votes: BTreeMap<&Iob2Tag, usize> = BTreeMap::new();
        for s in sequences {
            *votes.entry(&s[t]).or_default() += 1;
        }
        let top = votes.values().copied().max().unwrap_or(0);
        let winners: Vec<&&Iob2Tag> = votes.iter().filter(|(_, &c)| c == top).map(|(t, _)| t).collect();
        out.push(if winners.len() == 1 { (*winners[0]).clone() } else { Iob2Tag::O });
    }
    Ok(repair_orphans(&out))
}

/// One labelled row of a score report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub name: String,
    pub mode: String,
    #[serde(flatten)]
    pub score: PrfScore,
}

/// A set of scores printable as a table or JSON with the same content.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rows: Vec<ReportRow>,
}

impl ScoreReport {
    pub fn push(&mut self, name: impl Into<String>, mode: impl Into<String>, score: PrfScore) {
        self.rows.push(ReportRow {
            name: name.into(),
            mode: mode.into(),
            score,
        });
    }

    pub fn to_table(&self) -> String {
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(4);
        let mode_w = self.rows.iter().map(|r| r.mode.len()).max().unwrap_or(0).max(4);
        let mut out = format!(
            "{:<name_w$}  {:<mode_w$}  {:>9}  {:>9}  {:>9}  {:>6}  {:>6}  {:>6}\n",
            "name", "mode", "precision", "recall", "f1", "tp", "fp", "fn"
        );
        for r in &self.rows {
            let s = &r.score;
            let _ = writeln!(
                out,
                "{:<name_w$}  {:<mode_w$}  {:>9.6}  {:>9.6}  {:>9.6}  {:>6}  {:>6}  {:>6}",
                r.name, r.mode, s.precision, s.recall, s.f1, s.tp, s.fp, s.fn_
            );
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(b: usize, e: usize) -> Span {
        Span::new(b, e, "T")
    }

    #[test]
    fn perfect_and_empty() {
        let gold = vec![sp(0, 5), sp(7, 9)];
        let s = score_spans(&gold, &gold, MatchMode::Exact).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        let s = score_spans(&gold, &[], MatchMode::Exact).unwrap();
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 0.0, 0.0));
    }

    #[test]
    fn one_extra_prediction() {
        let s = score_spans(&[sp(0, 5)], &[sp(0, 5), sp(7, 9)], MatchMode::Exact).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (1, 1, 0));
        assert_eq!(s.precision, 0.5);
        assert_eq!(s.recall, 1.0);
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn overlap_matching_is_one_to_one() {
        let gold = vec![sp(0, 4), sp(5, 9)];
        let pred = vec![sp(2, 7)];
        let s = score_spans(&gold, &pred, MatchMode::Overlap).unwrap();
        assert_eq!((s.tp, s.fp, s.fn_), (1, 0, 1));
        let exact = score_spans(&gold, &pred, MatchMode::Exact).unwrap();
        assert_eq!(exact.tp, 0);
        let other_class = score_spans(&gold, &[Span::new(0, 4, "U")], MatchMode::Overlap).unwrap();
        assert_eq!(other_class.tp, 0);
    }

    #[test]
    fn overlapping_gold_is_rejected() {
        assert!(matches!(score_spans(&[sp(0, 4), sp(3, 6)], &[], MatchMode::Exact), Err(Error::Validation(_))));
    }

    #[test]
    fn labels_accuracy_identity() {
        let gold: BTreeMap<u32, &str> = [(1, "A"), (2, "B"), (3, "A"), (4, "C")].into_iter().collect();
        let mut pred = gold.clone();
        assert_eq!(score_labels(&gold, &pred).unwrap().micro.f1, 1.0);
        pred.insert(4, "A");
        let s = score_labels(&gold, &pred).unwrap();
        assert_eq!(s.micro.f1, 0.75);
        assert_eq!(s.micro.precision, s.micro.recall);
        assert_eq!(s.per_class["A"].fp, 1);
        assert_eq!(s.per_class["C"].recall, 0.0);
        pred.remove(&4);
        assert!(matches!(score_labels(&gold, &pred), Err(Error::Input(_))));
    }

    #[test]
    fn votes() {
        let b = || Iob2Tag::B("T".into());
        let i = || Iob2Tag::I("T".into());
        let o = || Iob2Tag::O;
        let seq = vec![b(), i(), o()];
        assert_eq!(ensemble_vote(&[seq.clone(), seq.clone(), seq.clone()]).unwrap(), seq);
        let out = ensemble_vote(&[vec![b(), i()], vec![b(), o()], vec![o(), i()]]).unwrap();
        assert_eq!(out, vec![b(), i()]);
        let out = ensemble_vote(&[vec![b()], vec![i()], vec![o()]]).unwrap();
        assert_eq!(out, vec![o()]);
        let out = ensemble_vote(&[vec![o(), i()], vec![o(), i()], vec![b(), o()]]).unwrap();
        assert_eq!(out, vec![o(), b()]);
        assert!(ensemble_vote(&[vec![o()], vec![o(), o()]]).is_err());
    }

    #[test]
    fn table_and_json_agree() {
        let mut r = ScoreReport::default();
        r.push("TIMEX3", "exact", PrfScore::from_counts(3, 1, 2));
        let table = r.to_table();
        let back: ScoreReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let line = table.lines().nth(1).unwrap();
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols, vec!["TIMEX3", "exact", "0.750000", "0.600000", "0.666667", "3", "1", "2"]);
    }

    fn spans_strategy() -> impl Strategy<Value = Vec<Span>> {
        proptest::collection::btree_set(0usize..30, 0..10).prop_map(|starts| {
            starts.into_iter().map(|s| Span::new(s * 3, s * 3 + 2, "T")).collect()
        })
    }

    proptest! {
        #[test]
        fn swap_symmetry(gold in spans_strategy(), pred in spans_strategy(), overlap in any::<bool>()) {
            let mode = if overlap { MatchMode::Overlap } else { MatchMode::Exact };
            let a = score_spans(&gold, &pred, mode).unwrap();
            let b = score_spans(&pred, &gold, mode).unwrap();
            prop_assert_eq!(a.precision, b.recall);
            prop_assert_eq!(a.recall, b.precision);
            if a.precision > 0.0 && a.recall > 0.0 {
                prop_assert!(a.f1 >= a.precision.min(a.recall) - 1e-12);
                prop_assert!(a.f1 <= a.precision.max(a.recall) + 1e-12);
            }
        }

        #[test]
        fn vote_of_copies(k in 1usize..6, tags in proptest::collection::vec(0u8..3, 0..12)) {
            let seq = repair_orphans(&tags.iter().map(|t| match t {
                0 => Iob2Tag::O,
                1 => Iob2Tag::B("T".into()),
                _ => Iob2Tag::I("T".into()),
            }).collect::<Vec<_>>());
            let copies = vec![seq.clone(); k];
            prop_assert_eq!(ensemble_vote(&copies).unwrap(), seq);
        }
    }
}
