//! Exact and sampled inference on a small factor graph. A linear chain is
//! solved by forward-backward and Viterbi and checked against brute-force
//! enumeration; adding two skip factors makes the graph loopy, where only
//! Gibbs sampling and enumeration apply.
//!
//! ```bash
//! cargo run --release --example factor_graph_inference
//! ```

use chronotag::factorgraph::{
    brute_force_map, brute_force_marginals, forward_backward, gibbs_marginals, viterbi, Anchor, Factor, FactorGraph, FactorKind,
    GibbsConfig, Weights,
};
use chronotag::util::rng;
use chronotag::Result;
use rand::Rng;

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn main() -> Result<()> {
    let mut r = rng(17);
    let labels: Vec<String> = ["O", "B", "I"].iter().map(ToString::to_string).collect();
    let k = labels.len();
    let mut weights = Weights::new(labels, 0.0);
    for w in weights.transition.iter_mut().chain(weights.skip.iter_mut()) {
        *w = r.gen_range(-2.0..2.0);
    }

    let mut graph = FactorGraph::default();
    for t in 0..6 {
        let v = graph.add_variable(Anchor { sentence: 0, token: t });
        let prior = (0..k).map(|_| r.gen_range(-2.0..2.0)).collect();
        graph.factors.push(Factor::unigram(v, Vec::new()).with_prior(prior));
        if t > 0 {
            graph.factors.push(Factor::pairwise(FactorKind::Transition, v - 1, v));
        }
    }

    let exact = forward_backward(&graph, &weights)?;
    let oracle = brute_force_marginals(&graph, &weights)?;
    println!("chain: log Z {:.10} (enumeration {:.10})", exact.log_z, oracle.log_z);
    println!("chain: largest marginal gap vs enumeration {:.2e}", max_gap(&exact.node, &oracle.node));
    println!("chain: viterbi {:?}, enumeration MAP {:?}", viterbi(&graph, &weights)?, brute_force_map(&graph, &weights)?);

    let gibbs = GibbsConfig {
        sweeps: 5000,
        burn_in: 500,
        seed: 3,
    };
    println!("chain: gibbs gap vs exact {:.4}", max_gap(&gibbs_marginals(&graph, &weights, &gibbs)?, &exact.node));

    graph.factors.push(Factor::pairwise(FactorKind::Skip, 0, 4));
    graph.factors.push(Factor::pairwise(FactorKind::Skip, 1, 5));
    println!("\nloopy: forward-backward refuses: {}", forward_backward(&graph, &weights).unwrap_err());
    let oracle = brute_force_marginals(&graph, &weights)?;
    let estimate = gibbs_marginals(&graph, &weights, &gibbs)?;
    println!("loopy: gibbs gap vs enumeration {:.4}", max_gap(&estimate, &oracle.node));
    for (v, (e, o)) in estimate.iter().zip(&oracle.node).enumerate() {
        let fmt = |p: &[f64]| p.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
        println!("  var {v}: gibbs [{}]  exact [{}]", fmt(e), fmt(o));
    }
    Ok(())
}
