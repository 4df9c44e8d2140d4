use chronotag::corpus::{generate_synthetic_corpus, GeneratorConfig, EVENT};
use chronotag::factorgraph::{predict_labels, CrfTagger, GibbsConfig, ModelKind, PredictMode, TaggerConfig};

fn corpus() -> Vec<chronotag::corpus::Document> {
    generate_synthetic_corpus(&GeneratorConfig { documents: 120, ..GeneratorConfig::default() }, 31).unwrap()
}

fn trained(docs: &[chronotag::corpus::Document], kind: ModelKind) -> CrfTagger {
    let config = TaggerConfig {
        klass: EVENT.into(),
        kind,
        ..TaggerConfig::default()
    };
    CrfTagger::train(docs, &config).unwrap().0
}

#[test]
fn gibbs_decoding_agrees_with_viterbi_on_chains() {
    let docs = corpus();
    let tagger = trained(&docs[..100], ModelKind::Crf);
    let gibbs = PredictMode::Gibbs(GibbsConfig {
        sweeps: 300,
        burn_in: 30,
        seed: 5,
    });
    let (mut same, mut total) = (0usize, 0usize);
    for doc in &docs[100..] {
        let graph = tagger.graph(doc).unwrap();
        let exact = predict_labels(&graph, &tagger.weights, PredictMode::Exact).unwrap();
        let sampled = predict_labels(&graph, &tagger.weights, gibbs).unwrap();
        same += exact.iter().zip(&sampled).filter(|(a, b)| a == b).count();
        total += exact.len();
    }
    let agreement = same as f64 / total as f64;
    assert!(agreement >= 0.95, "agreement {agreement:.4} over {total} tokens");
}

#[test]
fn zero_pairwise_weights_reduce_to_the_unary_model() {
    let docs = corpus();
    let lr = trained(&docs[..100], ModelKind::Lr);
    for kind in [ModelKind::Crf, ModelKind::Skip] {
        let mut nested = lr.clone();
        nested.config.kind = kind;
        for w in nested.weights.transition.iter_mut().chain(nested.weights.skip.iter_mut()) {
            *w = 0.0;
        }
        for doc in &docs[100..] {
            assert_eq!(nested.tag_document(doc).unwrap(), lr.tag_document(doc).unwrap(), "{kind:?} on {}", doc.id);
        }
    }
}
