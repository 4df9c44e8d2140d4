//! Elman recurrent network taggers.
//!
//! `h(t) = logistic(U x(t) + V h(t-1))`, `y(t) = softmax(W h(t))`, where
//! `x(t)` concatenates the embeddings of a `2c+1` window around position
//! `t`. Training runs full backpropagation through each sentence and takes
//! one gradient step per sentence.

mod tagger;
mod train;

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::embeddings::{lookup_window, window_ids, EmbeddingTable, Vocabulary};
use crate::error::{Error, Result};
use crate::util::{argmax, rng, write_atomic};

pub use tagger::{preset_config, prepare_examples, Preset, RnnTagger, Task};
pub use train::{
    random_grid_search, train, train_with_early_stopping, Candidate, Example, Hyperparams, SearchResult, SearchSpace,
    TrainingReport,
};

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max subtraction, so large inputs do not overflow.
pub fn softmax(v: ArrayView1<'_, f64>) -> Array1<f64> {
    let max = v.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let e = v.mapv(|x| (x - max).exp());
    let z = e.sum();
    e / z
}

/// Parameters of an Elman tagger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnModel {
    pub vocab: Vocabulary,
    pub table: EmbeddingTable,
    /// `hidden × (2c+1)·dim`
    pub u: Array2<f64>,
    /// `hidden × hidden`
    pub v: Array2<f64>,
    /// `labels × hidden`
    pub w: Array2<f64>,
    pub h0: Array1<f64>,
    pub context: usize,
    pub labels: Vec<String>,
}

impl RnnModel {
    /// Weight matrices start uniform in `[-0.1, 0.1] / sqrt(fan_in)`; `h0`
    /// starts at zero.
    pub fn new(vocab: Vocabulary, table: EmbeddingTable, hidden: usize, context: usize, labels: Vec<String>, seed: u64) -> Self {
        let mut r = rng(seed);
        let input = (2 * context + 1) * table.dim();
        let mut init = |rows: usize, cols: usize| {
            let bound = 0.1 / (cols as f64).sqrt();
            Array2::from_shape_simple_fn((rows, cols), || r.gen_range(-bound..=bound))
        };
        let u = init(hidden, input);
        let v = init(hidden, hidden);
        let w = init(labels.len(), hidden);
        Self {
            vocab,
            table,
            u,
            v,
            w,
            h0: Array1::zeros(hidden),
            context,
            labels,
        }
    }

    pub fn hidden(&self) -> usize {
        self.h0.len()
    }

    pub fn input_dim(&self) -> usize {
        (2 * self.context + 1) * self.table.dim()
    }

    pub fn check_shapes(&self) -> Result<()> {
        let h = self.hidden();
        let ok = self.u.dim() == (h, self.input_dim())
            && self.v.dim() == (h, h)
            && self.w.dim() == (self.labels.len(), h)
            && self.table.rows() == self.vocab.len();
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("RNN parameter shapes are inconsistent".into()))
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.u, &self.v, &self.w, &self.table.vectors]
            .iter()
            .all(|m| m.iter().all(|x| x.is_finite()))
            && self.h0.iter().all(|x| x.is_finite())
    }

    /// Stacked window inputs `x(1..T)`, one row per position.
    pub fn inputs(&self, ids: &[usize]) -> Array2<f64> {
        let mut x = Array2::zeros((ids.len(), self.input_dim()));
        for t in 0..ids.len() {
            x.row_mut(t).assign(&lookup_window(&self.table, ids, t, self.context));
        }
        x
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, serde_json::to_string(self)?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let model: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        model.check_shapes()?;
        Ok(model)
    }
}

/// Activations of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    /// Window inputs, one row per position.
    pub inputs: Array2<f64>,
    /// `h(1..T)`, one row per position.
    pub hidden: Array2<f64>,
    /// `y(1..T)`, one distribution per row.
    pub probs: Array2<f64>,
}

pub fn forward(model: &RnnModel, ids: &[usize]) -> Forward {
    let inputs = model.inputs(ids);
    let pre = inputs.dot(&model.u.t());
    let mut hidden = Array2::zeros((ids.len(), model.hidden()));
    let mut prev = model.h0.clone();
    for t in 0..ids.len() {
        let a = &pre.row(t) + &model.v.dot(&prev);
        let h = a.mapv(logistic);
        hidden.row_mut(t).assign(&h);
        prev = h;
    }
    let scores = hidden.dot(&model.w.t());
    let mut probs = Array2::zeros(scores.dim());
    for (t, row) in scores.axis_iter(Axis(0)).enumerate() {
        probs.row_mut(t).assign(&softmax(row));
    }
    Forward { inputs, hidden, probs }
}

/// Summed cross-entropy `-Σ ln y(t)[gold(t)]`.
pub fn sequence_loss(probs: &Array2<f64>, gold: &[usize]) -> Result<f64> {
    if probs.nrows() != gold.len() {
        return Err(Error::Input(format!("{} distributions for {} gold labels", probs.nrows(), gold.len())));
    }
    let mut loss = 0.0;
    for (t, &g) in gold.iter().enumerate() {
        let p = probs
            .get((t, g))
            .ok_or_else(|| Error::Input(format!("gold label {g} out of range at position {t}")))?;
        loss -= p.ln();
    }
    Ok(loss)
}

/// Per-position argmax, lowest label index on ties.
pub fn predict(model: &RnnModel, ids: &[usize]) -> Vec<usize> {
    if ids.is_empty() {
        return Vec::new();
    }
    forward(model, ids).probs.rows().into_iter().map(|r| argmax(r.as_slice().unwrap_or(&r.to_vec()))).collect()
}

/// Loss gradients for every parameter block. Embedding gradients are kept
/// only for rows that feed some context window.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub loss: f64,
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub w: Array2<f64>,
    pub h0: Array1<f64>,
    pub embeddings: BTreeMap<usize, Array1<f64>>,
}

/// Exact gradients of [`sequence_loss`] by backpropagation through the
/// whole sequence.
pub fn bptt_gradients(model: &RnnModel, ids: &[usize], gold: &[usize]) -> Result<Gradients> {
    if ids.is_empty() || ids.len() != gold.len() {
        return Err(Error::Input(format!("{} tokens for {} gold labels", ids.len(), gold.len())));
    }
    let fwd = forward(model, ids);
    let loss = sequence_loss(&fwd.probs, gold)?;
    let steps = ids.len();
    let hidden = model.hidden();

    // Output deltas y(t) - onehot(gold(t)).
    let mut out_delta = fwd.probs.clone();
    for (t, &g) in gold.iter().enumerate() {
        out_delta[(t, g)] -= 1.0;
    }
    let grad_w = out_delta.t().dot(&fwd.hidden);
    let from_output = out_delta.dot(&model.w);

    let mut pre_delta = Array2::<f64>::zeros((steps, hidden));
    let mut carry = Array1::<f64>::zeros(hidden);
    for t in (0..steps).rev() {
        let h = fwd.hidden.row(t);
        let dh = &from_output.row(t) + &carry;
        let da = &dh * &h.mapv(|x| x * (1.0 - x));
        carry = model.v.t().dot(&da);
        pre_delta.row_mut(t).assign(&da);
    }
    let grad_h0 = carry;
    let grad_u = pre_delta.t().dot(&fwd.inputs);
    let mut prev_hidden = Array2::<f64>::zeros((steps, hidden));
    prev_hidden.row_mut(0).assign(&model.h0);
    if steps > 1 {
        prev_hidden.slice_mut(s![1.., ..]).assign(&fwd.hidden.slice(s![..steps - 1, ..]));
    }
    let grad_v = pre_delta.t().dot(&prev_hidden);

    let grad_x = pre_delta.dot(&model.u);
    let dim = model.table.dim();
    let mut embeddings: BTreeMap<usize, Array1<f64>> = BTreeMap::new();
    for t in 0..steps {
        for (slot, id) in window_ids(ids, t, model.context).into_iter().enumerate() {
            let chunk = grad_x.slice(s![t, slot * dim..(slot + 1) * dim]);
            embeddings
                .entry(id)
                .and_modify(|g| *g += &chunk)
                .or_insert_with(|| chunk.to_owned());
        }
    }
    Ok(Gradients {
        loss,
        u: grad_u,
        v: grad_v,
        w: grad_w,
        h0: grad_h0,
        embeddings,
    })
}

/// One plain gradient-descent step on every parameter block.
pub fn apply_gradients(model: &mut RnnModel, grads: &Gradients, rate: f64) {
    model.u.scaled_add(-rate, &grads.u);
    model.v.scaled_add(-rate, &grads.v);
    model.w.scaled_add(-rate, &grads.w);
    model.h0.scaled_add(-rate, &grads.h0);
    for (&id, g) in &grads.embeddings {
        model.table.vectors.row_mut(id).scaled_add(-rate, g);
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::embeddings::Level;

    /// Random model with every parameter uniform in [-1, 1].
    pub(crate) fn random_model(vocab_size: usize, dim: usize, hidden: usize, labels: usize, context: usize, seed: u64) -> RnnModel {
        let vocab = Vocabulary::from_entries(Level::Word, (0..vocab_size).map(|i| format!("w{i}")));
        let mut r = rng(seed);
        let mut m = |rows, cols| Array2::from_shape_simple_fn((rows, cols), || r.gen_range(-1.0..=1.0));
        let table = EmbeddingTable { vectors: m(vocab.len(), dim) };
        let u = m(hidden, (2 * context + 1) * dim);
        let v = m(hidden, hidden);
        let w = m(labels, hidden);
        let h0 = m(1, hidden).row(0).to_owned();
        RnnModel {
            vocab,
            table,
            u,
            v,
            w,
            h0,
            context,
            labels: (0..labels).map(|i| format!("L{i}")).collect(),
        }
    }

    #[test]
    fn logistic_values() {
        assert_eq!(logistic(0.0), 0.5);
        assert!((logistic(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        for x in [-30.0, -2.5, 0.3, 7.0] {
            assert!((logistic(x) - (1.0 - logistic(-x))).abs() < 1e-15);
        }
        assert!(logistic(-800.0) >= 0.0 && logistic(800.0) <= 1.0);
    }

    #[test]
    fn softmax_values() {
        let p = softmax(ndarray::arr1(&[0.0, 0.0]).view());
        assert_eq!(p.to_vec(), vec![0.5, 0.5]);
        let big = softmax(ndarray::arr1(&[1000.0, 0.0]).view());
        assert!(big.iter().all(|x| x.is_finite()));
        assert!((big[0] - 1.0).abs() < 1e-12);
        let a = softmax(ndarray::arr1(&[0.3, -1.2]).view());
        let b = softmax(ndarray::arr1(&[5.3, 3.8]).view());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_weights_give_uniform_outputs() {
        let mut m = random_model(5, 3, 4, 3, 1, 2);
        m.u.fill(0.0);
        m.v.fill(0.0);
        m.w.fill(0.0);
        let f = forward(&m, &[2, 3, 4]);
        for p in f.probs.iter() {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        assert_eq!(predict(&m, &[2, 3, 4]), vec![0, 0, 0]);
    }

    #[test]
    fn single_step_is_direct_substitution() {
        let m = random_model(5, 3, 4, 3, 1, 3);
        let f = forward(&m, &[3]);
        let x = lookup_window(&m.table, &[3], 0, 1);
        let expected = (m.u.dot(&x) + m.v.dot(&m.h0)).mapv(logistic);
        for (a, b) in f.hidden.row(0).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn loss_cases() {
        let perfect = ndarray::arr2(&[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(sequence_loss(&perfect, &[0, 1]).unwrap(), 0.0);
        let uniform = Array2::from_elem((2, 3), 1.0 / 3.0);
        assert!((sequence_loss(&uniform, &[0, 2]).unwrap() - 2.0 * 3f64.ln()).abs() < 1e-12);
        assert!(matches!(sequence_loss(&uniform, &[0, 3]), Err(Error::Input(_))));
        assert!(matches!(sequence_loss(&uniform, &[0]), Err(Error::Input(_))));
        let better = ndarray::arr2(&[[0.5, 0.25, 0.25], [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]]);
        assert!(sequence_loss(&better, &[0, 2]).unwrap() < sequence_loss(&uniform, &[0, 2]).unwrap());
    }

    #[test]
    fn untouched_rows_get_no_gradient() {
        let m = random_model(8, 4, 6, 3, 1, 5);
        let g = bptt_gradients(&m, &[2, 3, 4], &[0, 1, 2]).unwrap();
        let keys: Vec<usize> = g.embeddings.keys().copied().collect();
        assert_eq!(keys, vec![Vocabulary::PAD_ID, 2, 3, 4]);
    }

    #[test]
    fn confident_correct_model_has_vanishing_gradient() {
        let mut m = random_model(4, 2, 3, 2, 0, 6);
        m.w.fill(0.0);
        m.w.row_mut(0).fill(200.0);
        m.w.row_mut(1).fill(-200.0);
        let g = bptt_gradients(&m, &[2, 3], &[0, 0]).unwrap();
        assert!(g.loss < 1e-12);
        assert!(g.u.iter().chain(g.w.iter()).all(|x| x.abs() < 1e-12));
    }

    fn loss_of(m: &RnnModel, ids: &[usize], gold: &[usize]) -> f64 {
        sequence_loss(&forward(m, ids).probs, gold).unwrap()
    }

    fn rel_err(a: f64, n: f64) -> f64 {
        (a - n).abs() / a.abs().max(n.abs()).max(1e-7)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        for draw in 0..5u64 {
            let m = random_model(7, 4, 6, 3, 1, 100 + draw);
            let mut r = rng(draw);
            let ids: Vec<usize> = (0..5).map(|_| r.gen_range(1..7)).collect();
            let gold: Vec<usize> = (0..5).map(|_| r.gen_range(0..3)).collect();
            let g = bptt_gradients(&m, &ids, &gold).unwrap();
            let check = |analytic: f64, bump: &dyn Fn(&mut RnnModel, f64)| {
                let (mut plus, mut minus) = (m.clone(), m.clone());
                bump(&mut plus, h);
                bump(&mut minus, -h);
                let numeric = (loss_of(&plus, &ids, &gold) - loss_of(&minus, &ids, &gold)) / (2.0 * h);
                assert!(rel_err(analytic, numeric) < 1e-4, "analytic {analytic} numeric {numeric}");
            };
            for ((i, j), a) in g.u.indexed_iter() {
                check(*a, &|m, d| m.u[(i, j)] += d);
            }
            for ((i, j), a) in g.v.indexed_iter() {
                check(*a, &|m, d| m.v[(i, j)] += d);
            }
            for ((i, j), a) in g.w.indexed_iter() {
                check(*a, &|m, d| m.w[(i, j)] += d);
            }
            for (i, a) in g.h0.indexed_iter() {
                check(*a, &|m, d| m.h0[i] += d);
            }
            for row in 0..m.table.rows() {
                for col in 0..m.table.dim() {
                    let a = g.embeddings.get(&row).map_or(0.0, |v| v[col]);
                    check(a, &|m, d| m.table.vectors[(row, col)] += d);
                }
            }
        }
    }

    #[test]
    fn severed_recurrence_is_a_window_classifier() {
        let mut m = random_model(9, 3, 5, 4, 2, 12);
        m.v.fill(0.0);
        let ids = [2, 5, 7, 3, 8, 4];
        let f = forward(&m, &ids);
        for t in 0..ids.len() {
            let x = lookup_window(&m.table, &ids, t, 2);
            let hidden = m.u.dot(&x).mapv(logistic);
            let y = softmax(m.w.dot(&hidden).view());
            for (a, b) in f.probs.row(t).iter().zip(&y) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn serialization_is_lossless() {
        let m = random_model(6, 3, 4, 3, 2, 8);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        assert_eq!(RnnModel::load(&path).unwrap(), m);
    }
}
