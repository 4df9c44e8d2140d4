//! Does initializing the RNN from distributional vectors help when labeled
//! data is scarce? Vectors come from positive-PMI co-occurrence counts over
//! a larger unlabeled sample of the same generator; both runs share one
//! vocabulary so only the initial table differs.
//!
//! ```bash
//! cargo run --release --example embedding_pretraining -- event 20 5
//! ```

use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig};
use chronotag::embeddings::{build_vocab, cooccurrence_embeddings, init_random};
use chronotag::rnn::{preset_config, RnnTagger, Task};
use chronotag::Result;

fn main() -> Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let task: Task = args.first().map_or("event", String::as_str).parse()?;
    let labeled = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let epochs = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(5);

    let unlabeled = generate_synthetic_corpus(&GeneratorConfig { documents: 500, ..GeneratorConfig::default() }, 101)?;
    let corpus = generate_synthetic_corpus(&GeneratorConfig { documents: labeled + 100, ..GeneratorConfig::default() }, 202)?;
    let (train, test) = corpus.split_at(labeled);

    let preset = preset_config(task, 50);
    let vocab = build_vocab(&unlabeled, task.level());
    let mut totals = [0.0, 0.0];
    for seed in 0..3 {
        let tables = [
            init_random(&vocab, preset.dim, seed),
            cooccurrence_embeddings(&unlabeled, &vocab, preset.dim, 2, seed),
        ];
        let mut line = format!("seed {seed}:");
        for (k, table) in tables.into_iter().enumerate() {
            let mut tagger = RnnTagger::new(train, &preset, Some((vocab.clone(), table)), seed)?;
            tagger.fit(train, &preset.hyperparams(epochs, seed))?;
            let f1 = tagger.score(test)?;
            totals[k] += f1;
            line.push_str(&format!("  {} F1 {f1:.4}", ["random", "pretrained"][k]));
        }
        println!("{line}");
    }
    println!("mean: random {:.4}  pretrained {:.4}", totals[0] / 3.0, totals[1] / 3.0);
    Ok(())
}
