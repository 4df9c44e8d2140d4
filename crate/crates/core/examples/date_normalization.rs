//! The rule path for time expressions: parse a date mention, fill in a
//! missing year from context, and place the date relative to the note's
//! active period. Phrases that are not dates get labels by distant
//! supervision from the events around them.
//!
//! ```bash
//! cargo run --release --example date_normalization
//! ```

use chrono::NaiveDate;
use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig};
use chronotag::temporal::{
    classify_date_docreltime, learn_phrase_associations, parse_date_expression, resolve_partial_date, DistantConfig,
};
use chronotag::Result;

fn main() -> Result<()> {
    let day = |y, m, d| NaiveDate::from_ymd_opt(y, m, d).unwrap_or_default();
    let doctime = day(2009, 3, 2);
    let revisions = [day(2009, 3, 20)];
    let mut preceding = Vec::new();
    println!("note created {doctime}, last revised {}", revisions[0]);
    for mention in ["12/29/08", "October 16", "3/10/2009", "April 2009", "2010", "next Tuesday"] {
        match parse_date_expression(mention) {
            Some(partial) => {
                let date = resolve_partial_date(partial, &preceding, doctime);
                let label = classify_date_docreltime(date, doctime, &revisions);
                println!("{mention:>14} -> {date} -> {label}");
                preceding.push(date);
            }
            None => println!("{mention:>14} -> not a date; left to distant supervision"),
        }
    }

    let corpus = generate_synthetic_corpus(&GeneratorConfig { documents: 300, ..GeneratorConfig::default() }, 9)?;
    let config = DistantConfig::default();
    let associations = learn_phrase_associations(&corpus, config.proximity);
    println!("\nphrase associations learned from {} notes:", corpus.len());
    for phrase in ["currently", "today", "last year", "next week", "two weeks ago", "previously"] {
        if let Some(a) = associations.get(phrase) {
            let usable = a.confidence >= config.min_confidence && a.support >= config.min_support;
            println!(
                "{phrase:>14}: {} (confidence {:.2}, support {}){}",
                a.label,
                a.confidence,
                a.support,
                if usable { "" } else { "  below threshold" }
            );
        }
    }
    Ok(())
}
