//! Train the character-level tokenizer on synthetic text and use it to
//! segment a new note into sentences and tokens.
//!
//! ```bash
//! cargo run --release --example rnn_tokenizer -- 60 4
//! ```

use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig};
use chronotag::rnn::{preset_config, RnnTagger, Task};
use chronotag::Result;

fn main() -> Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let documents = args.first().and_then(|a| a.parse().ok()).unwrap_or(60);
    let epochs = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(4);
    let corpus = generate_synthetic_corpus(&GeneratorConfig { documents, ..GeneratorConfig::default() }, 3)?;
    let (train, test) = corpus.split_at(corpus.len() * 4 / 5);

    let preset = preset_config(Task::Tokenizer, 16);
    let mut tagger = RnnTagger::new(train, &preset, None, 1)?;
    for epoch in 0..epochs {
        let loss = tagger.fit(train, &preset.hyperparams(1, epoch as u64))?[0];
        println!("epoch {epoch}: loss {loss:.1}, held-out token F1 {:.4}", tagger.score(test)?);
    }

    let text = "Pt reports chest pain since 03/14/2011. Denies fever today.";
    for (i, sentence) in tagger.tokenize(text)?.iter().enumerate() {
        let words: Vec<&str> = sentence.tokens.iter().map(|t| t.surface.as_str()).collect();
        println!("sentence {i}: {words:?}");
    }
    Ok(())
}
