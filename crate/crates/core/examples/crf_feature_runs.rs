//! Compare the three feature templates of the factor-graph tagger on a
//! synthetic corpus: dictionary flags and case, plus surrounding words,
//! plus POS tags.
//!
//! ```bash
//! cargo run --release --example crf_feature_runs -- 1000 timex3
//! ```

use std::time::Instant;

use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig, EVENT, TIMEX3};
use chronotag::eval::{score_corpus, MatchMode};
use chronotag::factorgraph::{CrfTagger, TaggerConfig};
use chronotag::Result;

fn main() -> Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let documents = args.first().and_then(|a| a.parse().ok()).unwrap_or(400);
    let klass = match args.get(1).map(String::as_str) {
        Some("event") => EVENT,
        _ => TIMEX3,
    };
    let config = GeneratorConfig {
        documents,
        ..GeneratorConfig::default()
    };
    let corpus = generate_synthetic_corpus(&config, 11)?;
    let (train, test) = corpus.split_at(corpus.len() * 4 / 5);

    for run in 1..=3 {
        let started = Instant::now();
        let tagger_config = TaggerConfig {
            klass: klass.to_string(),
            run,
            ..TaggerConfig::default()
        };
        let (tagger, history) = CrfTagger::train(train, &tagger_config)?;
        let predicted = test
            .iter()
            .map(|doc| {
                let mut out = doc.clone();
                out.gold_spans = tagger.predict_spans(doc)?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let score = score_corpus(test, &predicted, klass, MatchMode::Exact)?;
        println!(
            "run {run}: {klass} P {:.4} R {:.4} F1 {:.4}  final objective {:.2}  ({:.1}s)",
            score.precision,
            score.recall,
            score.f1,
            history.last().copied().unwrap_or(f64::NAN),
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
