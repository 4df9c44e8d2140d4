//! Random search over hidden size, context radius and learning rate for a
//! TIMEX3 tagger, scoring each sampled configuration on a held-out split.
//!
//! ```bash
//! cargo run --release --example hyperparameter_search -- 6
//! ```

use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig};
use chronotag::rnn::{preset_config, random_grid_search, Preset, RnnTagger, SearchSpace, Task};
use chronotag::Result;

fn main() -> Result<()> {
    env_logger::init();
    let budget = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(6);
    let corpus = generate_synthetic_corpus(&GeneratorConfig { documents: 80, ..GeneratorConfig::default() }, 4)?;
    let (train, dev) = corpus.split_at(60);
    let base = preset_config(Task::Timex3, 30);

    let result = random_grid_search(&SearchSpace::word_level(), budget, 1, |c| {
        let preset = Preset {
            hidden: c.hidden,
            context: c.context,
            lr: c.lr,
            ..base.clone()
        };
        let mut tagger = RnnTagger::new(train, &preset, None, 0)?;
        tagger.fit(train, &preset.hyperparams(2, 0))?;
        tagger.score(dev)
    })?;
    for (c, score) in &result.trials {
        println!("hidden {:>3}  context {}  lr {:<5}  dev F1 {score:.4}", c.hidden, c.context, c.lr);
    }
    println!("best: {:?} ({:.4})", result.best, result.best_score);
    Ok(())
}
