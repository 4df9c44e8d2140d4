//! Classify every EVENT's relation to document creation time, first with a
//! per-event logistic regression, then jointly with the skip factor that
//! ties each event to its nearest time expression.
//!
//! ```bash
//! cargo run --release --example docreltime_phase2 -- 400
//! ```

use std::time::Instant;

use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig};
use chronotag::docreltime::{evaluate, train_phase2, Phase2Config, Phase2Mode};
use chronotag::Result;

fn main() -> Result<()> {
    env_logger::init();
    let documents = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(400);
    let config = GeneratorConfig {
        documents,
        ..GeneratorConfig::default()
    };
    let corpus = generate_synthetic_corpus(&config, 5)?;
    let (train, test) = corpus.split_at(corpus.len() * 4 / 5);

    let started = Instant::now();
    let (model, _) = train_phase2(train, &Phase2Config::default(), 1)?;
    println!("trained on {} documents in {:.1}s", train.len(), started.elapsed().as_secs_f64());
    println!("skip matrix (rows: event label, columns: time expression label)");
    for (i, label) in model.weights.labels.iter().enumerate() {
        let row = &model.weights.skip[i * 4..i * 4 + 4];
        println!("  {label:<15} {}", row.iter().map(|w| format!("{w:>7.3}")).collect::<Vec<_>>().join(" "));
    }
    for mode in [Phase2Mode::Lr, Phase2Mode::LrSkip] {
        let scores = evaluate(test, &model, mode, 3)?;
        println!("{mode:<8} micro F1 {:.4}", scores.micro.f1);
        for (label, s) in &scores.per_class {
            println!("    {label:<15} P {:.3} R {:.3} F1 {:.3}", s.precision, s.recall, s.f1);
        }
    }
    println!("total {:.1}s", started.elapsed().as_secs_f64());
    Ok(())
}
