use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{score_assignment, FactorGraph, FactorKind, Weights};
use crate::error::{Error, Result};
use crate::util::{argmax, log_sum_exp, rng};

/// Per-variable label distributions and the log partition function.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub node: Vec<Vec<f64>>,
    pub log_z: f64,
}

/// Summed unigram log-potentials for every variable and label.
pub fn unary_scores(graph: &FactorGraph, weights: &Weights) -> Vec<Vec<f64>> {
    let k = weights.num_labels();
    let mut out = vec![vec![0.0; k]; graph.variables.len()];
    for f in graph.factors.iter().filter(|f| f.kind == FactorKind::Unigram) {
        let row = &mut out[f.scope[0]];
        for &feat in &f.features {
            let base = feat * k;
            if let Some(ws) = weights.unigram.get(base..base + k) {
                for (r, w) in row.iter_mut().zip(ws) {
                    *r += w;
                }
            }
        }
        if let Some(prior) = &f.prior {
            for (r, p) in row.iter_mut().zip(prior) {
                *r += p;
            }
        }
    }
    out
}

/// Linear chains of variables linked by transition factors, in order.
/// Isolated variables form chains of length one.
pub(crate) fn chains(graph: &FactorGraph) -> Result<Vec<Vec<usize>>> {
    if graph.has_pairwise(FactorKind::Skip) || graph.has_pairwise(FactorKind::Equality) {
        return Err(Error::ModelKind("exact chain inference needs a graph without skip or equality factors".into()));
    }
    let n = graph.variables.len();
    let mut next = vec![None; n];
    let mut has_prev = vec![false; n];
    for f in graph.factors.iter().filter(|f| f.kind == FactorKind::Transition) {
        let (a, b) = (f.scope[0], f.scope[1]);
        if a == b || next[a].is_some() || has_prev[b] {
            return Err(Error::ModelKind("transition factors do not form linear chains".into()));
        }
        next[a] = Some(b);
        has_prev[b] = true;
    }
    let mut out = Vec::new();
    let mut seen = 0;
    for head in (0..n).filter(|&v| !has_prev[v]) {
        let mut chain = vec![head];
        let mut cur = head;
        while let Some(nx) = next[cur] {
            chain.push(nx);
            cur = nx;
        }
        seen += chain.len();
        out.push(chain);
    }
    if seen != n {
        return Err(Error::ModelKind("transition factors form a cycle".into()));
    }
    Ok(out)
}

/// Edge marginals of one transition: `(from, to, k×k row-major)`.
pub(crate) type EdgeMarginal = (usize, usize, Vec<f64>);

pub(crate) fn forward_backward_full(graph: &FactorGraph, weights: &Weights) -> Result<(Marginals, Vec<EdgeMarginal>)> {
    let k = weights.num_labels();
    let unary = unary_scores(graph, weights);
    let trans = &weights.transition;
    let mut node = vec![vec![0.0; k]; graph.variables.len()];
    let mut edges = Vec::new();
    let mut log_z = 0.0;
    let mut buf = vec![0.0; k];
    for chain in chains(graph)? {
        let len = chain.len();
        let mut alpha = vec![vec![0.0; k]; len];
        let mut beta = vec![vec![0.0; k]; len];
        alpha[0].copy_from_slice(&unary[chain[0]]);
        for t in 1..len {
            for l in 0..k {
                for j in 0..k {
                    buf[j] = alpha[t - 1][j] + trans[j * k + l];
                }
                alpha[t][l] = unary[chain[t]][l] + log_sum_exp(&buf);
            }
        }
        for t in (0..len - 1).rev() {
            for j in 0..k {
                for l in 0..k {
                    buf[l] = trans[j * k + l] + unary[chain[t + 1]][l] + beta[t + 1][l];
                }
                beta[t][j] = log_sum_exp(&buf);
            }
        }
        let z = log_sum_exp(&alpha[len - 1]);
        log_z += z;
        for t in 0..len {
            for l in 0..k {
                node[chain[t]][l] = (alpha[t][l] + beta[t][l] - z).exp();
            }
            if t + 1 < len {
                let mut m = vec![0.0; k * k];
                for j in 0..k {
                    for l in 0..k {
                        m[j * k + l] =
                            (alpha[t][j] + trans[j * k + l] + unary[chain[t + 1]][l] + beta[t + 1][l] - z).exp();
                    }
                }
                edges.push((chain[t], chain[t + 1], m));
            }
        }
    }
    Ok((Marginals { node, log_z }, edges))
}

/// Exact marginals and log partition function of a chain-structured graph.
pub fn forward_backward(graph: &FactorGraph, weights: &Weights) -> Result<Marginals> {
    forward_backward_full(graph, weights).map(|(m, _)| m)
}

/// Highest-scoring assignment of a chain-structured graph. Among tied
/// optima, the one with the lower label at the latest differing position
/// wins.
pub fn viterbi(graph: &FactorGraph, weights: &Weights) -> Result<Vec<usize>> {
    let k = weights.num_labels();
    let unary = unary_scores(graph, weights);
    let trans = &weights.transition;
    let mut out = vec![0; graph.variables.len()];
    for chain in chains(graph)? {
        let len = chain.len();
        let mut delta = vec![vec![0.0; k]; len];
        let mut back = vec![vec![0usize; k]; len];
        delta[0].copy_from_slice(&unary[chain[0]]);
        for t in 1..len {
            for l in 0..k {
                let mut best = 0;
                let mut best_score = f64::NEG_INFINITY;
                for j in 0..k {
                    let s = delta[t - 1][j] + trans[j * k + l];
                    if s > best_score {
                        best_score = s;
                        best = j;
                    }
                }
                delta[t][l] = unary[chain[t]][l] + best_score;
                back[t][l] = best;
            }
        }
        let mut label = argmax(&delta[len - 1]);
        for t in (0..len).rev() {
            out[chain[t]] = label;
            label = back[t][label];
        }
    }
    Ok(out)
}

const MAX_STATES: f64 = 1e6;

fn enumerate(graph: &FactorGraph, weights: &Weights, mut visit: impl FnMut(&[usize], f64)) -> Result<()> {
    let k = weights.num_labels();
    let n = graph.variables.len();
    let states = (k as f64).powi(n as i32);
    if states > MAX_STATES {
        return Err(Error::Size(format!("{k}^{n} assignments exceed {MAX_STATES}")));
    }
    let mut assignment = vec![0usize; n];
    loop {
        visit(&assignment, score_assignment(graph, &assignment, weights));
        // Variable 0 is the fastest-moving digit.
        let mut i = 0;
        loop {
            if i == n {
                return Ok(());
            }
            assignment[i] += 1;
            if assignment[i] < k {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

/// Exact marginals and log partition function by full enumeration.
pub fn brute_force_marginals(graph: &FactorGraph, weights: &Weights) -> Result<Marginals> {
    let k = weights.num_labels();
    let n = graph.variables.len();
    let mut scores = Vec::new();
    let mut assignments = Vec::new();
    enumerate(graph, weights, |a, s| {
        scores.push(s);
        assignments.push(a.to_vec());
    })?;
    let log_z = log_sum_exp(&scores);
    let mut node = vec![vec![0.0; k]; n];
    for (a, s) in assignments.iter().zip(&scores) {
        let p = (s - log_z).exp();
        for (v, &l) in a.iter().enumerate() {
            node[v][l] += p;
        }
    }
    Ok(Marginals { node, log_z })
}

/// Best assignment by full enumeration, with the same tie-break as
/// [`viterbi`].
pub fn brute_force_map(graph: &FactorGraph, weights: &Weights) -> Result<Vec<usize>> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    enumerate(graph, weights, |a, s| {
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, a.to_vec()));
        }
    })?;
    Ok(best.map(|(_, a)| a).unwrap_or_default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            sweeps: 1000,
            burn_in: 100,
            seed: 0,
        }
    }
}

fn conditional(
    v: usize,
    graph: &FactorGraph,
    incident: &[usize],
    unary: &[f64],
    assignment: &[usize],
    weights: &Weights,
    out: &mut [f64],
) {
    let k = weights.num_labels();
    out.copy_from_slice(unary);
    for &fi in incident {
        let f = &graph.factors[fi];
        if f.kind == FactorKind::Unigram {
            continue;
        }
        let w = weights.pair(f.kind);
        if f.scope[0] == v {
            let other = assignment[f.scope[1]];
            for (l, o) in out.iter_mut().enumerate() {
                *o += w[l * k + other];
            }
        } else {
            let other = assignment[f.scope[0]];
            for (l, o) in out.iter_mut().enumerate() {
                *o += w[other * k + l];
            }
        }
    }
    let z = log_sum_exp(out);
    for o in out.iter_mut() {
        *o = (*o - z).exp();
    }
}

/// Systematic-scan Gibbs sampling. Each post-burn-in sweep contributes the
/// full conditional distribution of every variable (a Rao-Blackwellized
/// estimate), so the estimates sum to one and match the exact marginals
/// immediately when the graph has no pairwise factors.
pub fn gibbs_marginals(graph: &FactorGraph, weights: &Weights, config: &GibbsConfig) -> Result<Vec<Vec<f64>>> {
    if config.sweeps <= config.burn_in {
        return Err(Error::Input(format!(
            "gibbs needs more sweeps ({}) than burn-in ({})",
            config.sweeps, config.burn_in
        )));
    }
    let k = weights.num_labels();
    let n = graph.variables.len();
    let unary = unary_scores(graph, weights);
    let incidence = graph.incidence();
    let mut r = rng(config.seed);
    let mut assignment: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
    let mut acc = vec![vec![0.0; k]; n];
    let mut p = vec![0.0; k];
    for sweep in 0..config.sweeps {
        for v in 0..n {
            conditional(v, graph, &incidence[v], &unary[v], &assignment, weights, &mut p);
            if sweep >= config.burn_in {
                for (a, q) in acc[v].iter_mut().zip(&p) {
                    *a += q;
                }
            }
            let u: f64 = r.gen();
            let mut cum = 0.0;
            let mut pick = k - 1;
            for (l, q) in p.iter().enumerate() {
                cum += q;
                if u < cum {
                    pick = l;
                    break;
                }
            }
            assignment[v] = pick;
        }
    }
    let kept = (config.sweeps - config.burn_in) as f64;
    for row in &mut acc {
        for a in row.iter_mut() {
            *a /= kept;
        }
    }
    Ok(acc)
}
