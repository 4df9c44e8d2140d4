//! Build the memorization dictionary: phrases annotated as an entity in at
//! least half of their occurrences. Its matches are the first feature
//! template of the factor-graph taggers.
//!
//! ```bash
//! cargo run --example memorization_dictionary
//! ```

use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig, EVENT, TIMEX3};
use chronotag::features::{build_memorization_dict, match_dictionary};
use chronotag::Result;

fn main() -> Result<()> {
    let corpus = generate_synthetic_corpus(&GeneratorConfig { documents: 200, ..GeneratorConfig::default() }, 13)?;
    let (train, test) = corpus.split_at(150);
    for klass in [TIMEX3, EVENT] {
        let dict = build_memorization_dict(train, klass);
        println!("{klass}: {} phrases", dict.len());
        for phrase in ["currently", "chest pain", "mass", "discharge", "cold"] {
            match dict.ratio(phrase) {
                Some(r) => println!("  {phrase:<12} kept, annotated in {:.0}% of occurrences", r * 100.0),
                None => println!("  {phrase:<12} not in dictionary"),
            }
        }
        let sentence = &test[0].sentences[0];
        let flags = match_dictionary(&sentence.tokens, &dict);
        let shown: Vec<String> = sentence.tokens.iter().zip(&flags).map(|(t, f)| format!("{}/{f:?}", t.surface)).collect();
        println!("  {}", shown.join(" "));
    }
    Ok(())
}
