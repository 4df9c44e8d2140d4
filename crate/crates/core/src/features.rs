//! Sparse binary features for the factor-graph taggers and the
//! memorization dictionary.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Token};
use crate::embeddings::normalize_word;
use crate::error::{Error, Result};

/// Sentinel used for window offsets that fall outside the sentence.
pub const BOUNDARY: &str = "<PAD>";

/// Phrases labeled as entities of one class in at least half of their
/// occurrences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhraseDictionary {
    pub klass: String,
    pub entries: BTreeMap<Vec<String>, f64>,
    pub max_len: usize,
}

impl PhraseDictionary {
    pub fn empty(klass: &str) -> Self {
        Self {
            klass: klass.to_string(),
            entries: BTreeMap::new(),
            max_len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, phrase: &[String]) -> bool {
        self.entries.contains_key(phrase)
    }

    pub fn ratio(&self, phrase: &str) -> Option<f64> {
        let key: Vec<String> = phrase.split(' ').map(String::from).collect();
        self.entries.get(&key).copied()
    }

    /// `phrase TAB ratio`, sorted by phrase.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(String, f64)> = self.entries.iter().map(|(k, v)| (k.join(" "), *v)).collect();
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        rows.into_iter().map(|(p, r)| format!("{p}\t{r}\n")).collect()
    }

    pub fn from_tsv(klass: &str, text: &str) -> Result<Self> {
        let mut dict = Self::empty(klass);
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let (phrase, ratio) = line
                .split_once('\t')
                .ok_or_else(|| Error::Input(format!("dictionary line {}: missing tab", i + 1)))?;
            let ratio: f64 = ratio
                .parse()
                .map_err(|_| Error::Input(format!("dictionary line {}: bad ratio {ratio:?}", i + 1)))?;
            let key: Vec<String> = phrase.split(' ').map(String::from).collect();
            dict.max_len = dict.max_len.max(key.len());
            dict.entries.insert(key, ratio);
        }
        Ok(dict)
    }
}

/// Counts, for every normalized phrase seen as a full gold span of `klass`,
/// how many of its occurrences are exactly covered by such a span, and
/// keeps phrases at or above one half.
pub fn build_memorization_dict(corpus: &[Document], klass: &str) -> PhraseDictionary {
    let mut candidates: HashSet<Vec<String>> = HashSet::new();
    for doc in corpus {
        for (si, sentence) in doc.sentences.iter().enumerate() {
            for span in doc.sentence_spans(si, Some(klass)) {
                let phrase: Vec<String> = sentence
                    .tokens
                    .iter()
                    .filter(|t| t.begin >= span.begin && t.end <= span.end)
                    .map(|t| normalize_word(&t.surface))
                    .collect();
                if !phrase.is_empty() {
                    candidates.insert(phrase);
                }
            }
        }
    }
    let lengths: BTreeSet<usize> = candidates.iter().map(Vec::len).collect();
    let mut counts: HashMap<&[String], (usize, usize)> = HashMap::new();
    for doc in corpus {
        for (si, sentence) in doc.sentences.iter().enumerate() {
            let words: Vec<String> = sentence.tokens.iter().map(|t| normalize_word(&t.surface)).collect();
            let covered: HashSet<(usize, usize)> = doc
                .sentence_spans(si, Some(klass))
                .iter()
                .map(|s| (s.begin, s.end))
                .collect();
            for &len in &lengths {
                for start in 0..words.len().saturating_sub(len - 1) {
                    let window = &words[start..start + len];
                    if let Some(key) = candidates.get(window) {
                        let entry = counts.entry(key.as_slice()).or_default();
                        entry.1 += 1;
                        let range = (sentence.tokens[start].begin, sentence.tokens[start + len - 1].end);
                        if covered.contains(&range) {
                            entry.0 += 1;
                        }
                    }
                }
            }
        }
    }
    let mut dict = PhraseDictionary::empty(klass);
    for (phrase, (hit, total)) in counts {
        let ratio = hit as f64 / total as f64;
        if ratio >= 0.5 {
            dict.max_len = dict.max_len.max(phrase.len());
            dict.entries.insert(phrase.to_vec(), ratio);
        }
    }
    dict
}

/// Dictionary membership of one token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DictFlag {
    None,
    Begin,
    Inside,
}

impl DictFlag {
    fn as_str(self) -> &'static str {
        match self {
            DictFlag::None => "none",
            DictFlag::Begin => "B",
            DictFlag::Inside => "I",
        }
    }
}

/// Greedy longest-match, left to right, over normalized tokens.
pub fn match_dictionary(tokens: &[Token], dict: &PhraseDictionary) -> Vec<DictFlag> {
    let words: Vec<String> = tokens.iter().map(|t| normalize_word(&t.surface)).collect();
    let mut flags = vec![DictFlag::None; words.len()];
    let mut i = 0;
    while i < words.len() {
        let longest = (1..=dict.max_len.min(words.len() - i))
            .rev()
            .find(|&len| dict.contains(&words[i..i + len]));
        match longest {
            Some(len) => {
                flags[i] = DictFlag::Begin;
                for f in &mut flags[i + 1..i + len] {
                    *f = DictFlag::Inside;
                }
                i += len;
            }
            None => i += 1,
        }
    }
    flags
}

/// Feature templates, each a superset of the previous one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureRun {
    /// Dictionary flags and letter case.
    Run1 = 1,
    /// Run 1 plus normalized words at offsets -2..=2.
    Run2 = 2,
    /// Run 2 plus POS tags at offsets -2..=2.
    Run3 = 3,
}

impl FeatureRun {
    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Self::Run1),
            2 => Ok(Self::Run2),
            3 => Ok(Self::Run3),
            _ => Err(Error::Config(format!("feature run must be 1, 2 or 3, got {n}"))),
        }
    }
}

/// Letter-case class of a token.
pub fn case_class(surface: &str) -> &'static str {
    let letters: Vec<char> = surface.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.is_empty() {
        return "nonalpha";
    }
    let upper = letters.iter().filter(|c| c.is_uppercase()).count();
    if upper == 0 {
        "lower"
    } else if upper == letters.len() && letters.len() > 1 {
        "allcaps"
    } else if upper == 1 && letters[0].is_uppercase() && surface.chars().find(|c| c.is_alphabetic()) == Some(letters[0]) {
        "initcap"
    } else {
        "mixed"
    }
}

pub type FeatureVector = BTreeSet<String>;

const OFFSETS: [(isize, &str); 5] = [(-2, "left2"), (-1, "left1"), (0, "0"), (1, "right1"), (2, "right2")];

/// Features of the token at `index`. `dict_flags` holds one flag sequence
/// per dictionary, already matched against this sentence.
pub fn extract_features(
    tokens: &[Token],
    index: usize,
    run: FeatureRun,
    dict_flags: &[(String, Vec<DictFlag>)],
    pos: Option<&[String]>,
) -> Result<FeatureVector> {
    if run == FeatureRun::Run3 && pos.is_none() {
        return Err(Error::Config("feature run 3 needs POS tags".into()));
    }
    let at = |off: isize| -> Option<usize> {
        let p = index as isize + off;
        (p >= 0 && (p as usize) < tokens.len()).then_some(p as usize)
    };
    let mut out = FeatureVector::new();
    out.insert(format!("case.{}", case_class(&tokens[index].surface)));
    for (klass, flags) in dict_flags {
        for (off, name) in OFFSETS {
            let v = at(off).map_or(BOUNDARY, |p| flags[p].as_str());
            out.insert(format!("dict.{klass}.{name}={v}"));
        }
    }
    if run >= FeatureRun::Run2 {
        for (off, name) in OFFSETS {
            let v = at(off).map_or_else(|| BOUNDARY.to_string(), |p| normalize_word(&tokens[p].surface));
            out.insert(format!("win.{name}={v}"));
        }
    }
    if run == FeatureRun::Run3 {
        let pos = pos.unwrap_or_default();
        for (off, name) in OFFSETS {
            let v = at(off).and_then(|p| pos.get(p)).map_or(BOUNDARY, String::as_str);
            out.insert(format!("pos.{name}={v}"));
        }
    }
    Ok(out)
}

/// Features for every token of sentence `index` in `doc`.
pub fn sentence_features(
    doc: &Document,
    index: usize,
    run: FeatureRun,
    dicts: &[PhraseDictionary],
) -> Result<Vec<FeatureVector>> {
    let tokens = &doc.sentences[index].tokens;
    let flags: Vec<(String, Vec<DictFlag>)> =
        dicts.iter().map(|d| (d.klass.clone(), match_dictionary(tokens, d))).collect();
    let pos = doc.pos_tags.as_ref().map(|p| p[index].as_slice());
    (0..tokens.len())
        .map(|i| extract_features(tokens, i, run, &flags, pos))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{document_from_tokens, Span, EVENT};
    use chrono::NaiveDate;

    fn doc(sentences: &[Vec<&str>]) -> Document {
        document_from_tokens("d", NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(), sentences)
    }

    fn mark(doc: &mut Document, sentence: usize, first: usize, last: usize) {
        let t = &doc.sentences[sentence].tokens;
        doc.gold_spans.push(Span::new(t[first].begin, t[last].end, EVENT));
    }

    fn words(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    #[test]
    fn fifty_percent_rule() {
        // "chest pain" 3 times, twice as gold; "rash" 3 times, once as gold.
        let mut d = doc(&[
            vec!["chest", "pain", "and", "rash"],
            vec!["Chest", "pain", "noted", "rash"],
            vec!["no", "chest", "pain", "rash", "clinic"],
        ]);
        mark(&mut d, 0, 0, 1);
        mark(&mut d, 1, 0, 1);
        mark(&mut d, 2, 3, 3);
        let dict = build_memorization_dict(&[d], EVENT);
        assert!((dict.entries[&words("chest pain")] - 2.0 / 3.0).abs() < 1e-12);
        assert!(!dict.contains(&words("rash")));
        assert_eq!(dict.max_len, 2);
    }

    #[test]
    fn always_gold_phrase_has_ratio_one() {
        let mut d = doc(&[vec!["fever", "today"], vec!["fever"]]);
        mark(&mut d, 0, 0, 0);
        mark(&mut d, 1, 0, 0);
        let dict = build_memorization_dict(&[d], EVENT);
        assert_eq!(dict.entries[&words("fever")], 1.0);
    }

    fn dict_of(phrases: &[&str]) -> PhraseDictionary {
        let mut d = PhraseDictionary::empty(EVENT);
        for p in phrases {
            let k = words(p);
            d.max_len = d.max_len.max(k.len());
            d.entries.insert(k, 1.0);
        }
        d
    }

    #[test]
    fn matching_rules() {
        let toks = |s: &[&str]| doc(&[s.to_vec()]).sentences[0].tokens.clone();
        use DictFlag::*;
        assert_eq!(match_dictionary(&toks(&["a", "b"]), &PhraseDictionary::empty(EVENT)), vec![None, None]);
        assert_eq!(match_dictionary(&toks(&["Chest", "pain"]), &dict_of(&["chest pain", "pain"])), vec![Begin, Inside]);
        assert_eq!(match_dictionary(&toks(&["a", "b", "c"]), &dict_of(&["a b", "b c"])), vec![Begin, Inside, None]);
    }

    #[test]
    fn run_one_on_caps_token() {
        let d = doc(&[vec!["MRI"]]);
        let f = sentence_features(&d, 0, FeatureRun::Run1, &[dict_of(&["x"])]).unwrap();
        let expected: FeatureVector = [
            "case.allcaps",
            "dict.EVENT.left2=<PAD>",
            "dict.EVENT.left1=<PAD>",
            "dict.EVENT.0=none",
            "dict.EVENT.right1=<PAD>",
            "dict.EVENT.right2=<PAD>",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        assert_eq!(f[0], expected);
    }

    #[test]
    fn runs_nest_and_sentinels_appear() {
        let mut d = doc(&[vec!["Pain", "since", "2009", "."]]);
        d.pos_tags = Some(vec![vec!["NN".into(), "IN".into(), "CD".into(), ".".into()]]);
        let dicts = [dict_of(&["pain"])];
        for i in 0..4 {
            let r1 = &sentence_features(&d, 0, FeatureRun::Run1, &dicts).unwrap()[i];
            let r2 = &sentence_features(&d, 0, FeatureRun::Run2, &dicts).unwrap()[i];
            let r3 = &sentence_features(&d, 0, FeatureRun::Run3, &dicts).unwrap()[i];
            assert!(r1.is_subset(r2) && r2.is_subset(r3));
        }
        let first = &sentence_features(&d, 0, FeatureRun::Run2, &dicts).unwrap()[0];
        assert!(first.contains("win.left1=<PAD>") && first.contains("win.left2=<PAD>"));
        assert!(first.contains("win.right2=NNNN"));
        d.pos_tags = None;
        assert!(matches!(sentence_features(&d, 0, FeatureRun::Run3, &dicts), Err(Error::Config(_))));
    }

    #[test]
    fn case_classes() {
        assert_eq!(case_class("pain"), "lower");
        assert_eq!(case_class("Pain"), "initcap");
        assert_eq!(case_class("MRI"), "allcaps");
        assert_eq!(case_class("mRNA"), "mixed");
        assert_eq!(case_class("12/29/08"), "nonalpha");
    }

    #[test]
    fn dictionary_tsv_round_trip() {
        let d = dict_of(&["chest pain", "fever"]);
        let tsv = d.to_tsv();
        assert_eq!(tsv, "chest pain\t1\nfever\t1\n");
        assert_eq!(PhraseDictionary::from_tsv(EVENT, &tsv).unwrap(), d);
    }
}
