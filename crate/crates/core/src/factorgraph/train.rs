use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::inference::{forward_backward_full, unary_scores};
use super::{score_assignment, FactorGraph, FactorKind, Weights};
use crate::error::{Error, Result};
use crate::util::{log_sum_exp, rng};

/// A graph with its observed labels. `targets` marks the variables whose
/// conditional enters the pseudo-likelihood; `None` means all of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub graph: FactorGraph,
    pub gold: Vec<usize>,
    pub targets: Option<Vec<bool>>,
}

impl Instance {
    pub fn new(graph: FactorGraph, gold: Vec<usize>) -> Self {
        Self { graph, gold, targets: None }
    }

    fn is_target(&self, v: usize) -> bool {
        self.targets.as_ref().is_none_or(|t| t[v])
    }
}

/// Plain stochastic gradient ascent, one instance per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub epochs: usize,
    pub rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            rate: 0.1,
            l2: 0.01,
            seed: 0,
        }
    }
}

type SparseGrad = Vec<(usize, f64)>;

fn penalty(weights: &Weights) -> f64 {
    0.5 * weights.l2 * weights.norm_sq()
}

fn crf_instance(inst: &Instance, weights: &Weights, grad: Option<&mut SparseGrad>) -> Result<f64> {
    let (marginals, edges) = forward_backward_full(&inst.graph, weights)?;
    let value = score_assignment(&inst.graph, &inst.gold, weights) - marginals.log_z;
    if let Some(grad) = grad {
        let k = weights.num_labels();
        for f in inst.graph.factors.iter().filter(|f| f.kind == FactorKind::Unigram) {
            let v = f.scope[0];
            for &feat in &f.features {
                for l in 0..k {
                    let observed = if inst.gold[v] == l { 1.0 } else { 0.0 };
                    grad.push((feat * k + l, observed - marginals.node[v][l]));
                }
            }
        }
        let base = weights.pair_offset(FactorKind::Transition);
        for (a, b, m) in edges {
            for j in 0..k {
                for l in 0..k {
                    let observed = if inst.gold[a] == j && inst.gold[b] == l { 1.0 } else { 0.0 };
                    grad.push((base + j * k + l, observed - m[j * k + l]));
                }
            }
        }
    }
    Ok(value)
}

fn pl_instance(inst: &Instance, weights: &Weights, mut grad: Option<&mut SparseGrad>) -> f64 {
    let k = weights.num_labels();
    let unary = unary_scores(&inst.graph, weights);
    let incidence = inst.graph.incidence();
    let mut scores = vec![0.0; k];
    let mut total = 0.0;
    for v in 0..inst.graph.variables.len() {
        if !inst.is_target(v) {
            continue;
        }
        scores.copy_from_slice(&unary[v]);
        for &fi in &incidence[v] {
            let f = &inst.graph.factors[fi];
            if f.kind == FactorKind::Unigram {
                continue;
            }
            let w = weights.pair(f.kind);
            for (l, s) in scores.iter_mut().enumerate() {
                *s += if f.scope[0] == v {
                    w[l * k + inst.gold[f.scope[1]]]
                } else {
                    w[inst.gold[f.scope[0]] * k + l]
                };
            }
        }
        let z = log_sum_exp(&scores);
        total += scores[inst.gold[v]] - z;
        if let Some(grad) = grad.as_deref_mut() {
            let p: Vec<f64> = scores.iter().map(|s| (s - z).exp()).collect();
            let delta: Vec<f64> = (0..k).map(|l| f64::from(u8::from(inst.gold[v] == l)) - p[l]).collect();
            for &fi in &incidence[v] {
                let f = &inst.graph.factors[fi];
                match f.kind {
                    FactorKind::Unigram => {
                        for &feat in &f.features {
                            for (l, d) in delta.iter().enumerate() {
                                grad.push((feat * k + l, *d));
                            }
                        }
                    }
                    kind => {
                        let base = weights.pair_offset(kind);
                        for (l, d) in delta.iter().enumerate() {
                            let idx = if f.scope[0] == v {
                                l * k + inst.gold[f.scope[1]]
                            } else {
                                inst.gold[f.scope[0]] * k + l
                            };
                            grad.push((base + idx, *d));
                        }
                    }
                }
            }
        }
    }
    total
}

/// Conditional log-likelihood of the gold labels minus the L2 penalty.
pub fn crf_objective(instances: &[Instance], weights: &Weights) -> Result<f64> {
    let mut total = -penalty(weights);
    for inst in instances {
        total += crf_instance(inst, weights, None)?;
    }
    Ok(total)
}

/// The objective and its exact gradient over the flat parameter vector.
pub fn crf_objective_and_gradient(instances: &[Instance], weights: &Weights) -> Result<(f64, Vec<f64>)> {
    let mut grad: Vec<f64> = weights.flat().iter().map(|w| -weights.l2 * w).collect();
    let mut total = -penalty(weights);
    let mut sparse = Vec::new();
    for inst in instances {
        sparse.clear();
        total += crf_instance(inst, weights, Some(&mut sparse))?;
        for &(i, g) in &sparse {
            grad[i] += g;
        }
    }
    Ok((total, grad))
}

/// Sum of each target variable's log conditional given its neighbors'
/// gold labels, minus the L2 penalty.
pub fn pseudolikelihood_objective(instances: &[Instance], weights: &Weights) -> f64 {
    instances.iter().map(|i| pl_instance(i, weights, None)).sum::<f64>() - penalty(weights)
}

pub fn pseudolikelihood_objective_and_gradient(instances: &[Instance], weights: &Weights) -> (f64, Vec<f64>) {
    let mut grad: Vec<f64> = weights.flat().iter().map(|w| -weights.l2 * w).collect();
    let mut total = -penalty(weights);
    let mut sparse = Vec::new();
    for inst in instances {
        sparse.clear();
        total += pl_instance(inst, weights, Some(&mut sparse));
        for &(i, g) in &sparse {
            grad[i] += g;
        }
    }
    (total, grad)
}

fn sgd(
    instances: &[Instance],
    weights: &mut Weights,
    config: &SgdConfig,
    step: impl Fn(&Instance, &Weights, &mut SparseGrad) -> Result<f64>,
    objective: impl Fn(&[Instance], &Weights) -> Result<f64>,
) -> Result<Vec<f64>> {
    weights.l2 = config.l2;
    weights.sync_features();
    let n = instances.len().max(1) as f64;
    let decay = 1.0 - config.rate * config.l2 / n;
    let mut theta = weights.flat();
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut r = rng(config.seed);
    let mut history = Vec::with_capacity(config.epochs);
    let mut sparse = Vec::new();
    for epoch in 0..config.epochs {
        order.shuffle(&mut r);
        for &i in &order {
            sparse.clear();
            let value = step(&instances[i], weights, &mut sparse)?;
            if !value.is_finite() {
                return Err(Error::Divergence(format!("epoch {epoch}: non-finite objective on instance {i}")));
            }
            if decay != 1.0 {
                for t in theta.iter_mut() {
                    *t *= decay;
                }
            }
            for &(j, g) in &sparse {
                theta[j] += config.rate * g;
            }
            weights.set_flat(&theta);
        }
        let value = objective(instances, weights)?;
        if !value.is_finite() || !weights.is_finite() {
            return Err(Error::Divergence(format!("epoch {epoch}: objective {value}")));
        }
        log::debug!("epoch {epoch}: objective {value:.6}");
        history.push(value);
    }
    Ok(history)
}

/// Maximizes conditional log-likelihood minus the L2 penalty by SGD with
/// exact per-sentence gradients. Works for logistic regression (graphs
/// with unigram factors only) and linear-chain CRFs. Returns the objective
/// after each epoch.
pub fn train_crf(instances: &[Instance], weights: &mut Weights, config: &SgdConfig) -> Result<Vec<f64>> {
    sgd(instances, weights, config, |inst, w, g| crf_instance(inst, w, Some(g)), crf_objective)
}

/// Maximizes pseudo-likelihood minus the L2 penalty by SGD. Each
/// conditional is computed exactly from the variable's incident factors,
/// so loopy graphs are handled without inference.
pub fn train_pseudolikelihood(instances: &[Instance], weights: &mut Weights, config: &SgdConfig) -> Result<Vec<f64>> {
    sgd(
        instances,
        weights,
        config,
        |inst, w, g| Ok(pl_instance(inst, w, Some(g))),
        |i, w| Ok(pseudolikelihood_objective(i, w)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorgraph::{Anchor, Factor};
    use rand::Rng as _;

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("L{i}")).collect()
    }

    /// Chains of length 3 where feature `t` marks label `t % k`.
    fn tiny_instances(with_transitions: bool, with_skip: bool) -> (Vec<Instance>, Weights) {
        let k = 3;
        let mut w = Weights::new(labels(k), 0.1);
        for f in 0..4 {
            w.features.intern(&format!("f{f}"));
        }
        w.sync_features();
        let mut r = rng(11);
        let mut out = Vec::new();
        for _ in 0..4 {
            let mut g = FactorGraph::default();
            let mut gold = Vec::new();
            for t in 0..3 {
                let v = g.add_variable(Anchor { sentence: 0, token: t });
                let feat = r.gen_range(0..4);
                g.factors.push(Factor::unigram(v, vec![feat, (feat + 1) % 4]));
                gold.push(feat % k);
                if with_transitions && t > 0 {
                    g.factors.push(Factor::pairwise(FactorKind::Transition, v - 1, v));
                }
            }
            if with_skip {
                g.factors.push(Factor::pairwise(FactorKind::Skip, 0, 2));
            }
            out.push(Instance::new(g, gold));
        }
        let random: Vec<f64> = w.flat().iter().map(|_| r.gen_range(-1.0..1.0)).collect();
        w.set_flat(&random);
        (out, w)
    }

    fn check_gradient(f: impl Fn(&Weights) -> f64, analytic: &[f64], w: &Weights) {
        let h = 1e-5;
        let base = w.flat();
        for (i, g) in analytic.iter().enumerate() {
            let mut plus = w.clone();
            let mut minus = w.clone();
            let mut p = base.clone();
            p[i] += h;
            plus.set_flat(&p);
            p[i] -= 2.0 * h;
            minus.set_flat(&p);
            let numeric = (f(&plus) - f(&minus)) / (2.0 * h);
            let scale = g.abs().max(numeric.abs()).max(1e-3);
            assert!((g - numeric).abs() / scale < 1e-4, "param {i}: analytic {g} numeric {numeric}");
        }
    }

    #[test]
    fn crf_gradient_matches_finite_differences() {
        let (inst, w) = tiny_instances(true, false);
        let (_, grad) = crf_objective_and_gradient(&inst, &w).unwrap();
        check_gradient(|w| crf_objective(&inst, w).unwrap(), &grad, &w);
    }

    #[test]
    fn pseudolikelihood_gradient_matches_finite_differences() {
        let (inst, w) = tiny_instances(true, true);
        let (_, grad) = pseudolikelihood_objective_and_gradient(&inst, &w);
        check_gradient(|w| pseudolikelihood_objective(&inst, w), &grad, &w);
    }

    #[test]
    fn pl_without_pairwise_equals_lr() {
        let (inst, w0) = tiny_instances(false, false);
        assert!((crf_objective(&inst, &w0).unwrap() - pseudolikelihood_objective(&inst, &w0)).abs() < 1e-12);
        let cfg = SgdConfig { epochs: 3, rate: 0.2, l2: 0.1, seed: 3 };
        let mut a = w0.clone();
        let mut b = w0.clone();
        let ha = train_crf(&inst, &mut a, &cfg).unwrap();
        let hb = train_pseudolikelihood(&inst, &mut b, &cfg).unwrap();
        for (x, y) in ha.iter().zip(&hb) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in a.flat().iter().zip(&b.flat()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn training_climbs_and_is_deterministic() {
        let (inst, mut w) = tiny_instances(true, false);
        w.set_flat(&vec![0.0; w.flat().len()]);
        let cfg = SgdConfig { epochs: 5, rate: 0.1, l2: 0.01, seed: 1 };
        let mut again = w.clone();
        let hist = train_crf(&inst, &mut w, &cfg).unwrap();
        assert!(hist.windows(2).take(2).all(|p| p[1] >= p[0]), "{hist:?}");
        train_crf(&inst, &mut again, &cfg).unwrap();
        assert_eq!(w, again);
    }

    #[test]
    fn zero_rate_keeps_weights_without_penalty() {
        let (inst, w0) = tiny_instances(true, false);
        let mut w = w0.clone();
        train_crf(&inst, &mut w, &SgdConfig { epochs: 2, rate: 0.0, l2: 0.0, seed: 0 }).unwrap();
        assert_eq!(w.flat(), w0.flat());
    }

    #[test]
    fn divergence_is_reported() {
        let (inst, mut w) = tiny_instances(true, false);
        let cfg = SgdConfig { epochs: 50, rate: 1e308, l2: 0.0, seed: 0 };
        assert!(matches!(train_crf(&inst, &mut w, &cfg), Err(Error::Divergence(_))));
    }
}
