//! Log-linear factor graphs over label variables.
//!
//! Three model kinds share one representation: logistic regression
//! (unigram factors only), the linear-chain CRF (plus transition factors
//! between adjacent tokens), and the skip-chain CRF (plus skip factors
//! between identical words in nearby sentences).

mod inference;
mod tagger;
mod train;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use inference::{
    brute_force_map, brute_force_marginals, forward_backward, gibbs_marginals, unary_scores, viterbi, GibbsConfig,
    Marginals,
};
pub use tagger::{build_graph, predict, predict_labels, tagger_labels, CrfTagger, PredictMode, TaggerConfig};
pub use train::{
    crf_objective, crf_objective_and_gradient, pseudolikelihood_objective, pseudolikelihood_objective_and_gradient,
    train_crf, train_pseudolikelihood, Instance, SgdConfig,
};

/// Which factor templates a graph carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lr,
    Crf,
    Skip,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lr" => Ok(Self::Lr),
            "crf" => Ok(Self::Crf),
            "skip" => Ok(Self::Skip),
            _ => Err(Error::Config(format!("unknown model kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FactorKind {
    Unigram,
    Transition,
    Skip,
    Equality,
}

/// Token position a variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Anchor {
    pub sentence: usize,
    pub token: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelVariable {
    pub id: usize,
    pub anchor: Anchor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub kind: FactorKind,
    /// One variable for unigram factors, two (ordered) for the others.
    pub scope: Vec<usize>,
    /// Active feature ids of a unigram factor.
    pub features: Vec<usize>,
    /// Fixed per-label log-potential added on top of the weighted features.
    pub prior: Option<Vec<f64>>,
}

impl Factor {
    pub fn unigram(var: usize, features: Vec<usize>) -> Self {
        Self {
            kind: FactorKind::Unigram,
            scope: vec![var],
            features,
            prior: None,
        }
    }

    pub fn pairwise(kind: FactorKind, a: usize, b: usize) -> Self {
        debug_assert!(kind != FactorKind::Unigram);
        Self {
            kind,
            scope: vec![a, b],
            features: Vec::new(),
            prior: None,
        }
    }

    pub fn with_prior(mut self, prior: Vec<f64>) -> Self {
        self.prior = Some(prior);
        self
    }
}

/// Variables and factors of one document. All variables share the label
/// set of the weights they are scored with.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FactorGraph {
    pub doc_id: String,
    pub variables: Vec<LabelVariable>,
    pub factors: Vec<Factor>,
}

impl FactorGraph {
    pub fn add_variable(&mut self, anchor: Anchor) -> usize {
        let id = self.variables.len();
        self.variables.push(LabelVariable { id, anchor });
        id
    }

    pub fn count(&self, kind: FactorKind) -> usize {
        self.factors.iter().filter(|f| f.kind == kind).count()
    }

    pub fn has_pairwise(&self, kind: FactorKind) -> bool {
        self.factors.iter().any(|f| f.kind == kind)
    }

    /// Factor ids touching each variable.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.variables.len()];
        for (fi, f) in self.factors.iter().enumerate() {
            for &v in &f.scope {
                out[v].push(fi);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        for f in &self.factors {
            let arity = if f.kind == FactorKind::Unigram { 1 } else { 2 };
            if f.scope.len() != arity || f.scope.iter().any(|&v| v >= self.variables.len()) {
                return Err(Error::Validation(format!("factor {f:?} has a bad scope")));
            }
        }
        Ok(())
    }
}

/// Interned feature names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureIndex {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl FeatureIndex {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }
}

/// Whether graph construction may add new features.
pub enum IndexMode<'a> {
    Grow(&'a mut FeatureIndex),
    Frozen(&'a FeatureIndex),
}

impl IndexMode<'_> {
    pub fn resolve(&mut self, name: &str) -> Option<usize> {
        match self {
            IndexMode::Grow(index) => Some(index.intern(name)),
            IndexMode::Frozen(index) => index.get(name),
        }
    }
}

/// Names one weight.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum WeightKey {
    Unigram { feature: String, label: String },
    Pair { kind: FactorKind, a: String, b: String },
}

/// Tied weights for every factor template: one weight per (feature,
/// label) pair and one label-pair matrix per pairwise kind.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub labels: Vec<String>,
    pub features: FeatureIndex,
    /// Row-major `features × labels`.
    pub unigram: Vec<f64>,
    /// Row-major `labels × labels`, indexed by (first, second) scope label.
    pub transition: Vec<f64>,
    pub skip: Vec<f64>,
    pub equality: Vec<f64>,
    pub l2: f64,
}

impl Weights {
    pub fn new(labels: Vec<String>, l2: f64) -> Self {
        let k = labels.len();
        Self {
            labels,
            features: FeatureIndex::default(),
            unigram: Vec::new(),
            transition: vec![0.0; k * k],
            skip: vec![0.0; k * k],
            equality: vec![0.0; k * k],
            l2,
        }
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Grows the unigram block to cover every interned feature.
    pub fn sync_features(&mut self) {
        self.unigram.resize(self.features.len() * self.labels.len(), 0.0);
    }

    pub fn pair(&self, kind: FactorKind) -> &[f64] {
        match kind {
            FactorKind::Transition => &self.transition,
            FactorKind::Skip => &self.skip,
            FactorKind::Equality => &self.equality,
            FactorKind::Unigram => &[],
        }
    }

    pub fn pair_mut(&mut self, kind: FactorKind) -> &mut Vec<f64> {
        match kind {
            FactorKind::Transition => &mut self.transition,
            FactorKind::Skip => &mut self.skip,
            FactorKind::Equality => &mut self.equality,
            FactorKind::Unigram => &mut self.unigram,
        }
    }

    pub fn unigram_weight(&self, feature: usize, label: usize) -> f64 {
        self.unigram.get(feature * self.labels.len() + label).copied().unwrap_or(0.0)
    }

    pub fn get(&self, key: &WeightKey) -> f64 {
        match key {
            WeightKey::Unigram { feature, label } => match (self.features.get(feature), self.label_index(label)) {
                (Some(f), Some(l)) => self.unigram_weight(f, l),
                _ => 0.0,
            },
            WeightKey::Pair { kind, a, b } => match (self.label_index(a), self.label_index(b)) {
                (Some(a), Some(b)) => self.pair(*kind)[a * self.labels.len() + b],
                _ => 0.0,
            },
        }
    }

    /// All parameters as one vector: unigram, transition, skip, equality.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = self.unigram.clone();
        v.extend(&self.transition);
        v.extend(&self.skip);
        v.extend(&self.equality);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let (u, k2) = (self.unigram.len(), self.labels.len() * self.labels.len());
        self.unigram.copy_from_slice(&flat[..u]);
        self.transition.copy_from_slice(&flat[u..u + k2]);
        self.skip.copy_from_slice(&flat[u + k2..u + 2 * k2]);
        self.equality.copy_from_slice(&flat[u + 2 * k2..u + 3 * k2]);
    }

    pub(crate) fn pair_offset(&self, kind: FactorKind) -> usize {
        let k2 = self.labels.len() * self.labels.len();
        self.unigram.len()
            + match kind {
                FactorKind::Transition => 0,
                FactorKind::Skip => k2,
                FactorKind::Equality => 2 * k2,
                FactorKind::Unigram => unreachable!("unigram weights are not a pair block"),
            }
    }

    pub fn norm_sq(&self) -> f64 {
        self.flat().iter().map(|w| w * w).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.flat().iter().all(|w| w.is_finite())
    }

    /// Sorted `key TAB value` lines. Header lines start with `@`; zero
    /// weights are omitted.
    pub fn to_tsv(&self) -> String {
        let mut lines = vec![
            format!("@l2\t{}", self.l2),
            format!("@labels\t{}", self.labels.join(" ")),
        ];
        let k = self.labels.len();
        for f in 0..self.features.len() {
            for l in 0..k {
                let w = self.unigram_weight(f, l);
                if w != 0.0 {
                    lines.push(format!("U:{}:{}\t{}", self.labels[l], self.features.name(f), w));
                }
            }
        }
        for (kind, tag) in [(FactorKind::Transition, "T"), (FactorKind::Skip, "S"), (FactorKind::Equality, "E")] {
            for a in 0..k {
                for b in 0..k {
                    let w = self.pair(kind)[a * k + b];
                    if w != 0.0 {
                        lines.push(format!("{tag}:{}:{}\t{}", self.labels[a], self.labels[b], w));
                    }
                }
            }
        }
        lines.sort();
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut header: BTreeMap<&str, &str> = BTreeMap::new();
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let (key, value) = line
                .split_once('\t')
                .ok_or_else(|| Error::Input(format!("weights line {}: missing tab", i + 1)))?;
            if let Some(h) = key.strip_prefix('@') {
                header.insert(h, value);
            } else {
                let v: f64 = value
                    .parse()
                    .map_err(|_| Error::Input(format!("weights line {}: bad value {value:?}", i + 1)))?;
                rows.push((i + 1, key, v));
            }
        }
        let labels: Vec<String> = header
            .get("labels")
            .ok_or_else(|| Error::Input("weights file has no @labels line".into()))?
            .split(' ')
            .map(String::from)
            .collect();
        let l2 = header.get("l2").and_then(|v| v.parse().ok()).unwrap_or(0.0);
        let mut w = Weights::new(labels, l2);
        let k = w.num_labels();
        let mut unigram_rows = Vec::new();
        for (line, key, v) in rows {
            let bad = || Error::Input(format!("weights line {line}: bad key {key:?}"));
            let mut parts = key.splitn(3, ':');
            let (tag, a, b) = (parts.next().ok_or_else(bad)?, parts.next().ok_or_else(bad)?, parts.next().ok_or_else(bad)?);
            let la = w.label_index(a).ok_or_else(bad)?;
            match tag {
                "U" => {
                    let f = w.features.intern(b);
                    unigram_rows.push((f, la, v));
                }
                "T" | "S" | "E" => {
                    let kind = match tag {
                        "T" => FactorKind::Transition,
                        "S" => FactorKind::Skip,
                        _ => FactorKind::Equality,
                    };
                    let lb = w.label_index(b).ok_or_else(bad)?;
                    w.pair_mut(kind)[la * k + lb] = v;
                }
                _ => return Err(bad()),
            }
        }
        w.sync_features();
        for (f, l, v) in unigram_rows {
            w.unigram[f * k + l] = v;
        }
        Ok(w)
    }
}

/// Log-potential of one factor under a full assignment.
pub fn log_potential(factor: &Factor, assignment: &[usize], weights: &Weights) -> f64 {
    let k = weights.num_labels();
    match factor.kind {
        FactorKind::Unigram => {
            let label = assignment[factor.scope[0]];
            let mut s: f64 = factor.features.iter().map(|&f| weights.unigram_weight(f, label)).sum();
            if let Some(prior) = &factor.prior {
                s += prior[label];
            }
            s
        }
        kind => {
            let (a, b) = (assignment[factor.scope[0]], assignment[factor.scope[1]]);
            weights.pair(kind)[a * k + b]
        }
    }
}

/// Total log-potential of an assignment.
pub fn score_assignment(graph: &FactorGraph, assignment: &[usize], weights: &Weights) -> f64 {
    graph.factors.iter().map(|f| log_potential(f, assignment, weights)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights() -> Weights {
        let mut w = Weights::new(vec!["O".into(), "B-X".into()], 0.5);
        for name in ["a", "b", "c"] {
            w.features.intern(name);
        }
        w.sync_features();
        w.unigram = vec![0.5, -1.0, 2.0, 0.25, -3.0, 1.5];
        w.transition = vec![0.1, 0.2, 0.3, 0.4];
        w.skip = vec![1.0, 0.0, 0.0, 1.0];
        w
    }

    #[test]
    fn zero_weights_give_zero_potentials() {
        let w = Weights::new(vec!["O".into(), "B-X".into()], 0.0);
        let f = Factor::pairwise(FactorKind::Transition, 0, 1);
        assert_eq!(log_potential(&f, &[1, 0], &w), 0.0);
        assert_eq!(log_potential(&Factor::unigram(0, vec![]), &[1], &w), 0.0);
    }

    #[test]
    fn unigram_sums_active_features_and_is_linear() {
        let w = weights();
        let f = Factor::unigram(0, vec![0, 1, 2]);
        assert_eq!(log_potential(&f, &[1], &w), -1.0 + 0.25 + 1.5);
        let mut doubled = w.clone();
        doubled.set_flat(&w.flat().iter().map(|x| 2.0 * x).collect::<Vec<_>>());
        let t = Factor::pairwise(FactorKind::Transition, 0, 1);
        assert_eq!(log_potential(&f, &[1], &doubled), 2.0 * log_potential(&f, &[1], &w));
        assert_eq!(log_potential(&t, &[1, 0], &doubled), 2.0 * log_potential(&t, &[1, 0], &w));
        assert_eq!(log_potential(&t, &[1, 0], &w), 0.3);
    }

    #[test]
    fn tsv_round_trip_and_keys() {
        let w = weights();
        let text = w.to_tsv();
        assert!(text.starts_with("@l2\t0.5\n@labels\tO B-X\n"));
        let back = Weights::from_tsv(&text).unwrap();
        assert_eq!(back.to_tsv(), text);
        let key = WeightKey::Unigram { feature: "c".into(), label: "B-X".into() };
        assert_eq!(back.get(&key), 1.5);
        let key = WeightKey::Pair { kind: FactorKind::Skip, a: "B-X".into(), b: "B-X".into() };
        assert_eq!(back.get(&key), 1.0);
    }
}
