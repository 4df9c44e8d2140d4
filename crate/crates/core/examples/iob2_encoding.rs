//! Span ↔ IOB2 tag conversion over word tokens and over characters, plus
//! the two repair passes applied to raw model output.
//!
//! ```bash
//! cargo run --example iob2_encoding
//! ```

use chrono::NaiveDate;
use chronotag::corpus::{
    decode_iob2, document_char_tags, document_from_tokens, encode_iob2, repair_orphans, repair_span_classes, Iob2Tag, Span,
    EVENT, TIMEX3,
};
use chronotag::Result;

fn show(tags: &[Iob2Tag]) -> String {
    tags.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn main() -> Result<()> {
    let mut doc = document_from_tokens(
        "example",
        NaiveDate::from_ymd_opt(2011, 3, 14).unwrap_or_default(),
        &[vec!["Chest", "pain", "began", "two", "weeks", "ago", "."]],
    );
    doc.gold_spans = vec![Span::new(0, 10, EVENT), Span::new(17, 30, TIMEX3)];
    let tokens = &doc.sentences[0].tokens;

    let tags = encode_iob2(&doc.gold_spans, tokens)?;
    println!("text:   {}", doc.text);
    println!("tags:   {}", show(&tags));
    println!("spans:  {:?}", decode_iob2(&tags, tokens)?);

    // A span that cuts through a token cannot be encoded.
    println!("misaligned: {}", encode_iob2(&[Span::new(1, 10, EVENT)], tokens).unwrap_err());

    // Tokenizer targets: one tag per character, tokens as spans.
    let chars = document_char_tags(&doc);
    println!("\nchar tags of {:?}: {}", &doc.text[..10], show(&chars[..10]));

    let raw: Vec<Iob2Tag> = ["O", "I-EVENT", "I-EVENT", "O", "B-TIMEX3", "I-EVENT", "I-TIMEX3"]
        .iter()
        .map(|t| t.parse())
        .collect::<Result<_>>()?;
    println!("\nraw model output:     {}", show(&raw));
    println!("orphans promoted:     {}", show(&repair_orphans(&raw)));
    println!("one class per run:    {}", show(&repair_span_classes(&raw)));
    Ok(())
}
