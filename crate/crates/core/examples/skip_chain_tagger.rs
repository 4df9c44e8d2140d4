//! Train the three factor-graph model kinds on the same features: token
//! logistic regression, a linear-chain CRF, and a skip-chain CRF that links
//! repeated words across nearby sentences (pseudo-likelihood training,
//! Gibbs decoding). Arguments: document count, class, feature run.
//!
//! ```bash
//! cargo run --release --example skip_chain_tagger -- 300 event 2
//! ```

use std::time::Instant;

use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig, EVENT, TIMEX3};
use chronotag::eval::{score_corpus, MatchMode};
use chronotag::factorgraph::{CrfTagger, GibbsConfig, ModelKind, TaggerConfig};
use chronotag::Result;

fn main() -> Result<()> {
    env_logger::init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let documents = args.first().and_then(|a| a.parse().ok()).unwrap_or(300);
    let klass = if args.get(1).is_some_and(|a| a == "timex3") { TIMEX3 } else { EVENT };
    let run = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(2);
    let corpus = generate_synthetic_corpus(&GeneratorConfig { documents, ..GeneratorConfig::default() }, 21)?;
    let (train, test) = corpus.split_at(corpus.len() * 4 / 5);

    for kind in [ModelKind::Lr, ModelKind::Crf, ModelKind::Skip] {
        let started = Instant::now();
        let config = TaggerConfig {
            klass: klass.to_string(),
            run,
            kind,
            gibbs: GibbsConfig {
                sweeps: 200,
                burn_in: 20,
                seed: 4,
            },
            ..TaggerConfig::default()
        };
        let (tagger, _) = CrfTagger::train(train, &config)?;
        let predicted = test
            .iter()
            .map(|doc| {
                let mut out = doc.clone();
                out.gold_spans = tagger.predict_spans(doc)?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let s = score_corpus(test, &predicted, klass, MatchMode::Exact)?;
        println!(
            "{kind:?}: P {:.4} R {:.4} F1 {:.4}  ({} skip factors in the first test graph, {:.1}s)",
            s.precision,
            s.recall,
            s.f1,
            tagger.graph(&test[0])?.count(chronotag::factorgraph::FactorKind::Skip),
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
