//! Exact and overlap span scoring, label scoring, and per-token majority
//! voting over several taggers' outputs.
//!
//! ```bash
//! cargo run --example span_scoring
//! ```

use std::collections::BTreeMap;

use chronotag::corpus::{Iob2Tag, Span};
use chronotag::eval::{ensemble_vote, score_labels, score_spans, MatchMode, ScoreReport};
use chronotag::temporal::DocRelTimeLabel;
use chronotag::Result;

fn tags(text: &str) -> Result<Vec<Iob2Tag>> {
    text.split_whitespace().map(str::parse).collect()
}

fn main() -> Result<()> {
    let gold = vec![Span::new(0, 10, "EVENT"), Span::new(20, 33, "EVENT"), Span::new(40, 45, "EVENT")];
    let pred = vec![Span::new(0, 10, "EVENT"), Span::new(24, 33, "EVENT"), Span::new(50, 55, "EVENT")];
    let mut report = ScoreReport::default();
    for mode in [MatchMode::Exact, MatchMode::Overlap] {
        report.push("EVENT", mode.to_string(), score_spans(&gold, &pred, mode)?);
    }
    print!("{}", report.to_table());

    let mut gold_labels = BTreeMap::new();
    let mut pred_labels = BTreeMap::new();
    for (i, (g, p)) in [
        (DocRelTimeLabel::Before, DocRelTimeLabel::Before),
        (DocRelTimeLabel::Overlap, DocRelTimeLabel::Overlap),
        (DocRelTimeLabel::After, DocRelTimeLabel::Overlap),
        (DocRelTimeLabel::Before, DocRelTimeLabel::Before),
    ]
    .into_iter()
    .enumerate()
    {
        gold_labels.insert(i, g);
        pred_labels.insert(i, p);
    }
    let scores = score_labels(&gold_labels, &pred_labels)?;
    println!("\nDocRelTime micro F1 {:.3}", scores.micro.f1);
    for (label, s) in &scores.per_class {
        println!("  {label:<15} P {:.3} R {:.3}", s.precision, s.recall);
    }

    let runs = [
        tags("B-EVENT I-EVENT O B-TIMEX3 O")?,
        tags("B-EVENT I-EVENT O O O")?,
        tags("O I-EVENT O B-TIMEX3 B-EVENT")?,
    ];
    let vote = ensemble_vote(&runs)?;
    println!("\nvote: {}", vote.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "));
    Ok(())
}
