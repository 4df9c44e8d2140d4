//! Generate a small synthetic corpus, write it in both on-disk formats,
//! read it back, and print the first document with its annotations.
//!
//! ```bash
//! cargo run --example synthetic_corpus -- 5
//! ```

use chronotag::corpus::{generate_synthetic_corpus, load_corpus, save_corpus, CorpusFormat, GeneratorConfig, EVENT, TIMEX3};
use chronotag::Result;

fn main() -> Result<()> {
    let documents = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let config = GeneratorConfig {
        documents,
        ..GeneratorConfig::default()
    };
    let corpus = generate_synthetic_corpus(&config, 42)?;

    let dir = std::env::temp_dir().join("chronotag-synthetic-corpus");
    std::fs::create_dir_all(&dir)?;
    for (name, format) in [("corpus.conll", CorpusFormat::Conll), ("corpus.json", CorpusFormat::Json)] {
        let path = dir.join(name);
        save_corpus(&corpus, &path, format)?;
        assert_eq!(load_corpus(&path, format)?, corpus);
        println!("wrote and re-read {}", path.display());
    }

    let doc = &corpus[0];
    println!("\n{} (created {}, revised {:?})", doc.id, doc.doctime, doc.revisions);
    println!("{}\n", doc.text);
    for klass in [TIMEX3, EVENT] {
        for span in doc.spans_of(klass) {
            let label = span.doc_rel_time.map_or("-", |l| l.as_str());
            println!("{klass:<7} [{:>4}, {:>4})  {:<16} {}", span.begin, span.end, label, doc.slice(span.begin, span.end));
        }
    }
    let tokens: usize = corpus.iter().map(|d| d.token_count()).sum();
    println!("\n{} documents, {tokens} tokens", corpus.len());
    Ok(())
}
