//! Train an Elman RNN TIMEX3 or EVENT tagger on a synthetic corpus and
//! report exact-span F1 on held-out documents after every epoch.
//!
//! ```bash
//! cargo run --release --example rnn_entity_tagger -- timex3 300 8
//! ```
//!
//! Arguments: task (`timex3` or `event`), document count, epochs.

use std::time::Instant;

use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig};
use chronotag::rnn::{preset_config, RnnTagger, Task};
use chronotag::Result;

fn main() -> Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let task: Task = args.first().map_or("timex3", String::as_str).parse()?;
    let documents = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(300);
    let epochs = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(8);

    let config = GeneratorConfig {
        documents,
        ..GeneratorConfig::default()
    };
    let corpus = generate_synthetic_corpus(&config, 7)?;
    let split = corpus.len() * 4 / 5;
    let (train, test) = corpus.split_at(split);

    let preset = preset_config(task, 100);
    println!(
        "{task}: {} train / {} test documents, hidden {}, window ±{}, lr {}",
        train.len(),
        test.len(),
        preset.hidden,
        preset.context,
        preset.lr
    );
    let mut tagger = RnnTagger::new(train, &preset, None, 1)?;
    let started = Instant::now();
    for epoch in 0..epochs {
        let loss = tagger.fit(train, &preset.hyperparams(1, epoch as u64))?[0];
        println!(
            "epoch {epoch:>2}  loss {loss:>10.2}  test F1 {:.4}  ({:.1}s)",
            tagger.score(test)?,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
