//! Train the word-level POS tagger and print its tags for a held-out
//! sentence next to the reference tags.
//!
//! ```bash
//! cargo run --release --example rnn_pos_tagger -- 100 3
//! ```

use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig};
use chronotag::rnn::{preset_config, RnnTagger, Task};
use chronotag::Result;

fn main() -> Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let documents = args.first().and_then(|a| a.parse().ok()).unwrap_or(100);
    let epochs = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(3);
    let corpus = generate_synthetic_corpus(&GeneratorConfig { documents, ..GeneratorConfig::default() }, 8)?;
    let (train, test) = corpus.split_at(corpus.len() * 4 / 5);

    let preset = preset_config(Task::Pos, 50);
    let mut tagger = RnnTagger::new(train, &preset, None, 2)?;
    tagger.fit(train, &preset.hyperparams(epochs, 2))?;
    println!("held-out accuracy after {epochs} epochs: {:.4}", tagger.score(test)?);

    let doc = &test[0];
    let predicted = tagger.tag_pos(doc)?;
    let gold = doc.pos_tags.as_ref().map(|p| &p[0]);
    for (i, token) in doc.sentences[0].tokens.iter().enumerate() {
        let reference = gold.map_or("?", |g| g[i].as_str());
        println!("{:<14} {:<6} {}", token.surface, predicted[0][i], reference);
    }
    Ok(())
}
