use super::{Document, Iob2Tag, Sentence, Token};

/// Word class for characters of a token that does not end its sentence.
pub const WORD: &str = "W";
/// Word class for characters of a sentence-final token.
pub const END: &str = "E";

/// Character-level gold tags for a whole document: tokens that end a
/// sentence are class `E`, other tokens `W`, everything else `O`.
pub fn document_char_tags(doc: &Document) -> Vec<Iob2Tag> {
    let n = doc.text.chars().count();
    let mut tags = vec![Iob2Tag::O; n];
    for sentence in &doc.sentences {
        let last = sentence.tokens.len().saturating_sub(1);
        for (ti, token) in sentence.tokens.iter().enumerate() {
            let klass = if ti == last { END } else { WORD };
            for (k, pos) in (token.begin..token.end.min(n)).enumerate() {
                tags[pos] = if k == 0 {
                    Iob2Tag::B(klass.into())
                } else {
                    Iob2Tag::I(klass.into())
                };
            }
        }
    }
    tags
}

/// Characters of one sentence, padded with up to `pad` characters of the
/// surrounding text on each side, together with their gold tags. Padding
/// stops at the document edges.
pub fn char_sequence(doc: &Document, sentence_index: usize, pad: usize) -> (Vec<char>, Vec<Iob2Tag>) {
    let chars: Vec<char> = doc.text.chars().collect();
    let (lo, hi) = doc.sentences[sentence_index].char_range();
    let start = lo.saturating_sub(pad);
    let end = (hi + pad).min(chars.len());
    let all = document_char_tags(doc);
    let mut tags = all[start..end].to_vec();
    // A window that starts inside a token sees that token's first visible
    // character as its beginning.
    if let Some(Iob2Tag::I(k)) = tags.first().cloned() {
        tags[0] = Iob2Tag::B(k);
    }
    (chars[start..end].to_vec(), tags)
}

/// Rebuilds tokens and sentence boundaries from character tags over
/// `text`. Every decoded span becomes a token; an `E` span closes the
/// current sentence.
pub fn sentences_from_char_tags(text: &str, tags: &[Iob2Tag]) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let units: Vec<Token> = chars
        .iter()
        .enumerate()
        .map(|(i, c)| Token::new(c.to_string(), i, i + 1))
        .collect();
    let n = units.len().min(tags.len());
    let spans = super::decode_iob2(&tags[..n], &units[..n]).unwrap_or_default();
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for span in spans {
        let surface: String = chars[span.begin..span.end].iter().collect();
        current.push(Token::new(surface, span.begin, span.end));
        if span.klass == END {
            sentences.push(Sentence::new(std::mem::take(&mut current)));
        }
    }
    if !current.is_empty() {
        sentences.push(Sentence::new(current));
    }
    sentences
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{decode_iob2, document_from_tokens};
    use chrono::NaiveDate;

    fn doc(sentences: &[Vec<&str>]) -> Document {
        document_from_tokens("d", NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(), sentences)
    }

    #[test]
    fn single_final_token_is_end_class() {
        let d = doc(&[vec!["Hi."]]);
        let (chars, tags) = char_sequence(&d, 0, 0);
        assert_eq!(chars, vec!['H', 'i', '.']);
        let e = || Iob2Tag::I(END.into());
        assert_eq!(tags, vec![Iob2Tag::B(END.into()), e(), e()]);
        let units: Vec<Token> = (0..3).map(|i| Token::new("c", i, i + 1)).collect();
        let spans = decode_iob2(&tags, &units).unwrap();
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].klass, END);
    }

    #[test]
    fn whitespace_is_outside() {
        let d = doc(&[vec!["a", "b"]]);
        let (chars, tags) = char_sequence(&d, 0, 0);
        assert_eq!(chars[1], ' ');
        assert_eq!(tags[1], Iob2Tag::O);
        assert_eq!(tags[0], Iob2Tag::B(WORD.into()));
        assert_eq!(tags[2], Iob2Tag::B(END.into()));
    }

    #[test]
    fn padding_mid_document_adds_both_sides() {
        let d = doc(&[vec!["first", "one", "."], vec!["middle", "."], vec!["last", "words", "."]]);
        let (lo, hi) = d.sentences[1].char_range();
        let (chars, tags) = char_sequence(&d, 1, 5);
        assert_eq!(chars.len(), hi - lo + 10);
        assert_eq!(tags.len(), chars.len());
        assert!(!matches!(tags[0], Iob2Tag::I(_)));
    }

    #[test]
    fn padding_is_clipped_at_document_edges() {
        let d = doc(&[vec!["ab", "."], vec!["cd", "."]]);
        let (lo, hi) = d.sentences[0].char_range();
        let (chars, _) = char_sequence(&d, 0, 5);
        assert_eq!(chars.len(), hi - lo + 5);
    }

    #[test]
    fn char_tags_rebuild_sentences() {
        let d = doc(&[vec!["Pain", "today", "."], vec!["Seen", "."]]);
        let tags = document_char_tags(&d);
        let rebuilt = sentences_from_char_tags(&d.text, &tags);
        assert_eq!(rebuilt, d.sentences);
    }
}
