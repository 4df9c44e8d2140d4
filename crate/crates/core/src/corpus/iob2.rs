use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{Span, Token};
use crate::error::{Error, Result};

/// One IOB2 tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Iob2Tag {
    O,
    B(String),
    I(String),
}

impl Iob2Tag {
    pub fn klass(&self) -> Option<&str> {
        match self {
            Iob2Tag::O => None,
            Iob2Tag::B(k) | Iob2Tag::I(k) => Some(k),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Iob2Tag::O)
    }

    /// Full IOB2 label set for the given classes: `O`, then `B-k`, `I-k` per class.
    pub fn label_set(classes: &[&str]) -> Vec<Iob2Tag> {
        let mut out = vec![Iob2Tag::O];
        for k in classes {
            out.push(Iob2Tag::B(k.to_string()));
            out.push(Iob2Tag::I(k.to_string()));
        }
        out
    }
}

impl fmt::Display for Iob2Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Iob2Tag::O => f.write_str("O"),
            Iob2Tag::B(k) => write!(f, "B-{k}"),
            Iob2Tag::I(k) => write!(f, "I-{k}"),
        }
    }
}

impl FromStr for Iob2Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" => Ok(Iob2Tag::O),
            _ => match s.split_once('-') {
                Some(("B", k)) if !k.is_empty() => Ok(Iob2Tag::B(k.to_string())),
                Some(("I", k)) if !k.is_empty() => Ok(Iob2Tag::I(k.to_string())),
                _ => Err(Error::Input(format!("not an IOB2 tag: {s:?}"))),
            },
        }
    }
}

impl Serialize for Iob2Tag {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Iob2Tag {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Encodes spans over a unit sequence (tokens or characters) as IOB2 tags.
pub fn encode_iob2(spans: &[Span], units: &[Token]) -> Result<Vec<Iob2Tag>> {
    let mut tags = vec![Iob2Tag::O; units.len()];
    let mut sorted: Vec<&Span> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.begin, s.end));
    for pair in sorted.windows(2) {
        if pair[0].overlaps(pair[1]) {
            return Err(Error::Input(format!(
                "spans [{}, {}) and [{}, {}) overlap",
                pair[0].begin, pair[0].end, pair[1].begin, pair[1].end
            )));
        }
    }
    for span in sorted {
        let misaligned = || Error::Alignment {
            begin: span.begin,
            end: span.end,
            klass: span.klass.clone(),
        };
        let first = units.iter().position(|u| u.begin == span.begin).ok_or_else(misaligned)?;
        let last = units.iter().position(|u| u.end == span.end).ok_or_else(misaligned)?;
        if last < first {
            return Err(misaligned());
        }
        tags[first] = Iob2Tag::B(span.klass.clone());
        for tag in &mut tags[first + 1..=last] {
            *tag = Iob2Tag::I(span.klass.clone());
        }
    }
    Ok(tags)
}

/// Decodes IOB2 tags back into spans. An `I` tag that does not continue a
/// run of the same class opens a new span.
pub fn decode_iob2(tags: &[Iob2Tag], units: &[Token]) -> Result<Vec<Span>> {
    if tags.len() != units.len() {
        return Err(Error::Input(format!(
            "{} tags for {} units",
            tags.len(),
            units.len()
        )));
    }
    let mut spans = Vec::new();
    let mut open: Option<(usize, usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match tag {
            Iob2Tag::O => {
                if let Some((a, b, k)) = open.take() {
                    spans.push(Span::new(units[a].begin, units[b].end, k));
                }
            }
            Iob2Tag::B(k) => {
                if let Some((a, b, k)) = open.take() {
                    spans.push(Span::new(units[a].begin, units[b].end, k));
                }
                open = Some((i, i, k));
            }
            Iob2Tag::I(k) => match open {
                Some((a, _, ok)) if ok == k => open = Some((a, i, ok)),
                _ => {
                    if let Some((a, b, k)) = open.take() {
                        spans.push(Span::new(units[a].begin, units[b].end, k));
                    }
                    open = Some((i, i, k));
                }
            },
        }
    }
    if let Some((a, b, k)) = open {
        spans.push(Span::new(units[a].begin, units[b].end, k));
    }
    Ok(spans)
}

/// Turns every `I` tag that does not continue a same-class run into a `B`,
/// so the sequence is valid IOB2 and decodes to the same spans.
pub fn repair_orphans(tags: &[Iob2Tag]) -> Vec<Iob2Tag> {
    let mut out = tags.to_vec();
    for i in 0..out.len() {
        if let Iob2Tag::I(k) = &out[i] {
            let continues = i > 0 && out[i - 1].klass() == Some(k.as_str());
            if !continues {
                out[i] = Iob2Tag::B(k.clone());
            }
        }
    }
    out
}

/// Makes every span-run single-class. A run starts at a `B` tag or at an
/// `I` tag that follows `O`, and extends over the `I` tags after it. The run
/// takes its majority class; ties go to the class of the run's first tag,
/// then to the earliest tied class in the run.
pub fn repair_span_classes(tags: &[Iob2Tag]) -> Vec<Iob2Tag> {
    let mut out = tags.to_vec();
    let mut i = 0;
    while i < tags.len() {
        if tags[i].is_outside() {
            i += 1;
            continue;
        }
        let start = i;
        i += 1;
        while i < tags.len() && matches!(tags[i], Iob2Tag::I(_)) {
            i += 1;
        }
        let run = &tags[start..i];
        let mut counts: Vec<(&str, usize)> = Vec::new();
        for tag in run {
            let k = tag.klass().unwrap_or_default();
            match counts.iter_mut().find(|(c, _)| *c == k) {
                Some(entry) => entry.1 += 1,
                None => counts.push((k, 1)),
            }
        }
        let best = counts.iter().map(|(_, n)| *n).max().unwrap_or(0);
        // `counts` is in order of first appearance, so the first tag's class
        // wins ties, then the earliest remaining class.
        let winner = counts.iter().find(|(_, n)| *n == best).map(|(k, _)| k.to_string()).unwrap_or_default();
        out[start] = Iob2Tag::B(winner.clone());
        for tag in &mut out[start + 1..i] {
            *tag = Iob2Tag::I(winner.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units(n: usize) -> Vec<Token> {
        // Single-character tokens separated by one space.
        (0..n).map(|i| Token::new("x", 2 * i, 2 * i + 1)).collect()
    }

    fn b(k: &str) -> Iob2Tag {
        Iob2Tag::B(k.into())
    }
    fn i(k: &str) -> Iob2Tag {
        Iob2Tag::I(k.into())
    }
    use Iob2Tag::O;

    #[test]
    fn encode_empty_annotation() {
        assert_eq!(encode_iob2(&[], &units(3)).unwrap(), vec![O, O, O]);
    }

    #[test]
    fn encode_two_token_span() {
        let spans = [Span::new(2, 5, "EVENT")];
        assert_eq!(encode_iob2(&spans, &units(4)).unwrap(), vec![O, b("EVENT"), i("EVENT"), O]);
    }

    #[test]
    fn adjacent_spans_get_two_begins() {
        let spans = [Span::new(0, 1, "EVENT"), Span::new(2, 3, "EVENT")];
        assert_eq!(encode_iob2(&spans, &units(2)).unwrap(), vec![b("EVENT"), b("EVENT")]);
    }

    #[test]
    fn misaligned_span_is_reported() {
        let spans = [Span::new(1, 3, "EVENT")];
        match encode_iob2(&spans, &units(3)) {
            Err(Error::Alignment { begin: 1, end: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decode_cases() {
        let u = units(3);
        assert!(decode_iob2(&[O, O, O], &u).unwrap().is_empty());
        assert_eq!(decode_iob2(&[b("T"), i("T"), O], &u).unwrap(), vec![Span::new(0, 3, "T")]);
        assert_eq!(decode_iob2(&[O, i("T"), i("T")], &u).unwrap(), vec![Span::new(2, 5, "T")]);
        assert_eq!(
            decode_iob2(&[b("T"), i("E"), i("E")], &u).unwrap(),
            vec![Span::new(0, 1, "T"), Span::new(2, 5, "E")]
        );
    }

    #[test]
    fn decode_length_mismatch() {
        assert!(matches!(decode_iob2(&[O], &units(2)), Err(Error::Input(_))));
    }

    #[test]
    fn repair_majority_and_ties() {
        assert_eq!(repair_span_classes(&[b("W"), i("E"), i("E")]), vec![b("E"), i("E"), i("E")]);
        assert_eq!(repair_span_classes(&[b("W"), i("W")]), vec![b("W"), i("W")]);
        assert_eq!(repair_span_classes(&[b("W"), i("E")]), vec![b("W"), i("W")]);
        let once = repair_span_classes(&[b("W"), i("E")]);
        assert_eq!(repair_span_classes(&once), once);
    }

    #[test]
    fn repair_keeps_o_and_adjacent_begins() {
        let tags = vec![O, i("E"), b("W"), i("E"), i("W"), O, b("E")];
        let fixed = repair_span_classes(&tags);
        assert_eq!(fixed, vec![O, b("E"), b("W"), i("W"), i("W"), O, b("E")]);
    }

    #[test]
    fn orphans_become_begins() {
        assert_eq!(repair_orphans(&[O, i("T"), i("T"), i("E")]), vec![O, b("T"), i("T"), b("E")]);
    }

    #[test]
    fn tag_text_round_trip() {
        for t in [O, b("TIMEX3"), i("Before/Overlap")] {
            assert_eq!(t.to_string().parse::<Iob2Tag>().unwrap(), t);
        }
        assert!("X-1".parse::<Iob2Tag>().is_err());
        assert!("B-".parse::<Iob2Tag>().is_err());
    }
}
