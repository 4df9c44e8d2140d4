use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{apply_gradients, bptt_gradients, RnnModel};
use crate::error::{Error, Result};
use crate::util::rng;

/// Training hyperparameters. `hidden` and `context` fix the architecture
/// when a model is built; `lr`, `epochs` and `seed` drive [`train`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub hidden: usize,
    pub context: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

/// One training sequence: unit ids and gold label indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub ids: Vec<usize>,
    pub gold: Vec<usize>,
}

fn epoch(model: &mut RnnModel, data: &[Example], order: &mut [usize], lr: f64, r: &mut crate::util::Rng, n: usize) -> Result<f64> {
    order.shuffle(r);
    let mut total = 0.0;
    for &i in order.iter() {
        let ex = &data[i];
        if ex.ids.is_empty() {
            continue;
        }
        let grads = bptt_gradients(model, &ex.ids, &ex.gold)?;
        if !grads.loss.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss on sequence {i} in epoch {n}")));
        }
        total += grads.loss;
        if lr != 0.0 {
            apply_gradients(model, &grads, lr);
        }
    }
    if !model.is_finite() {
        return Err(Error::Divergence(format!("non-finite parameters after epoch {n}")));
    }
    Ok(total)
}

/// Per-sentence gradient descent for `hp.epochs` epochs, visiting the
/// sequences in a fresh seeded order each epoch. Returns the summed loss
/// of every epoch, measured before each sentence's update.
pub fn train(model: &mut RnnModel, data: &[Example], hp: &Hyperparams) -> Result<Vec<f64>> {
    let mut r = rng(hp.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(hp.epochs);
    for n in 0..hp.epochs {
        let loss = epoch(model, data, &mut order, hp.lr, &mut r, n)?;
        log::debug!("epoch {n}: loss {loss:.4}");
        losses.push(loss);
    }
    Ok(losses)
}

/// Outcome of [`train_with_early_stopping`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub losses: Vec<f64>,
    pub scores: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub best_epoch: usize,
}

/// Like [`train`], but scores the model after every epoch and stops once
/// `patience` epochs pass without improvement. The best-scoring parameters
/// are restored at the end.
pub fn train_with_early_stopping<F>(
    model: &mut RnnModel,
    data: &[Example],
    hp: &Hyperparams,
    patience: usize,
    mut score: F,
) -> Result<TrainingReport>
where
    F: FnMut(&RnnModel) -> Result<f64>,
{
    let mut r = rng(hp.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainingReport {
        losses: Vec::new(),
        scores: Vec::new(),
        best_epoch: 0,
    };
    let mut best: Option<(f64, RnnModel)> = None;
    for n in 0..hp.epochs {
        report.losses.push(epoch(model, data, &mut order, hp.lr, &mut r, n)?);
        let s = score(model)?;
        log::debug!("epoch {n}: loss {:.4} score {s:.4}", report.losses[n]);
        report.scores.push(s);
        if best.as_ref().is_none_or(|(b, _)| s > *b) {
            best = Some((s, model.clone()));
            report.best_epoch = n;
        } else if n - report.best_epoch >= patience {
            break;
        }
    }
    if let Some((_, m)) = best {
        *model = m;
    }
    Ok(report)
}

/// Ranges sampled by [`random_grid_search`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    /// Inclusive range of hidden sizes.
    pub hidden: (usize, usize),
    /// Inclusive range of context radii.
    pub context: (usize, usize),
    pub rates: Vec<f64>,
    /// Embedding sizes to choose from; empty keeps the caller's size.
    #[serde(default)]
    pub dims: Vec<usize>,
    /// Inclusive padding range for character models.
    #[serde(default)]
    pub pad: Option<(usize, usize)>,
}

impl SearchSpace {
    pub fn word_level() -> Self {
        Self {
            hidden: (48, 384),
            context: (2, 6),
            rates: vec![0.001, 0.01, 0.1, 0.25],
            dims: Vec::new(),
            pad: None,
        }
    }

    pub fn char_level() -> Self {
        Self {
            dims: vec![16, 32],
            pad: Some((0, 5)),
            ..Self::word_level()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.hidden.0 == 0 || self.hidden.0 > self.hidden.1 || self.context.0 > self.context.1 || self.rates.is_empty() {
            return Err(Error::Config("empty or inverted search range".into()));
        }
        if self.pad.is_some_and(|(a, b)| a > b) {
            return Err(Error::Config("inverted padding range".into()));
        }
        Ok(())
    }
}

/// One sampled configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub hidden: usize,
    pub context: usize,
    pub lr: f64,
    pub dim: Option<usize>,
    pub pad: Option<usize>,
}

/// Result of a search: the winner first, then every trial in sampling
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Candidate,
    pub best_score: f64,
    pub trials: Vec<(Candidate, f64)>,
}

/// Samples `budget` configurations uniformly from `space` and scores each
/// with `eval` (which trains on one split and scores on another). Ties go
/// to the earliest sample.
pub fn random_grid_search<F>(space: &SearchSpace, budget: usize, seed: u64, mut eval: F) -> Result<SearchResult>
where
    F: FnMut(&Candidate) -> Result<f64>,
{
    if budget == 0 {
        return Err(Error::Config("search budget must be at least 1".into()));
    }
    space.validate()?;
    let mut r = rng(seed);
    let mut trials = Vec::with_capacity(budget);
    for _ in 0..budget {
        let c = Candidate {
            hidden: r.gen_range(space.hidden.0..=space.hidden.1),
            context: r.gen_range(space.context.0..=space.context.1),
            lr: space.rates[r.gen_range(0..space.rates.len())],
            dim: (!space.dims.is_empty()).then(|| space.dims[r.gen_range(0..space.dims.len())]),
            pad: space.pad.map(|(a, b)| r.gen_range(a..=b)),
        };
        trials.push(c);
    }
    let mut scored = Vec::with_capacity(budget);
    for c in trials {
        let s = eval(&c)?;
        log::info!("candidate {c:?}: {s:.4}");
        scored.push((c, s));
    }
    let mut best = 0;
    for (i, (_, s)) in scored.iter().enumerate() {
        if *s > scored[best].1 {
            best = i;
        }
    }
    Ok(SearchResult {
        best: scored[best].0.clone(),
        best_score: scored[best].1,
        trials: scored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rnn::tests::random_model;
    use crate::rnn::{forward, sequence_loss};

    fn memorizable(n: usize) -> Vec<Example> {
        (0..n)
            .map(|i| {
                let ids: Vec<usize> = (0..5).map(|t| 2 + (i + t) % 6).collect();
                let gold = ids.iter().map(|&id| id % 3).collect();
                Example { ids, gold }
            })
            .collect()
    }

    fn hp(lr: f64, epochs: usize) -> Hyperparams {
        Hyperparams {
            hidden: 6,
            context: 1,
            lr,
            epochs,
            seed: 11,
        }
    }

    fn small_model() -> RnnModel {
        let mut m = random_model(8, 4, 6, 3, 1, 4);
        m.u.mapv_inplace(|x| x * 0.1);
        m.v.mapv_inplace(|x| x * 0.1);
        m.w.mapv_inplace(|x| x * 0.1);
        m
    }

    #[test]
    fn zero_rate_leaves_parameters_unchanged() {
        let mut m = small_model();
        let before = m.clone();
        train(&mut m, &memorizable(10), &hp(0.0, 2)).unwrap();
        assert_eq!(m, before);
    }

    #[test]
    fn loss_decreases_on_memorizable_data() {
        let data = memorizable(20);
        let mut m = small_model();
        let losses = train(&mut m, &data, &hp(0.1, 5)).unwrap();
        for pair in losses.windows(2) {
            assert!(pair[1] <= pair[0] * 1.05, "{losses:?}");
        }
        assert!(losses[4] < losses[0]);
        let total: f64 = data.iter().map(|e| sequence_loss(&forward(&m, &e.ids).probs, &e.gold).unwrap()).sum();
        assert!(total < losses[0]);
    }

    #[test]
    fn training_is_deterministic() {
        let data = memorizable(12);
        let (mut a, mut b) = (small_model(), small_model());
        let la = train(&mut a, &data, &hp(0.1, 3)).unwrap();
        let lb = train(&mut b, &data, &hp(0.1, 3)).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        let mut m = small_model();
        let err = train(&mut m, &memorizable(10), &hp(1e300, 3)).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let mut m = small_model();
        let mut calls = 0;
        let scores = [0.1, 0.5, 0.4, 0.3, 0.2, 0.1, 0.0, 0.0];
        let report = train_with_early_stopping(&mut m, &memorizable(6), &hp(0.1, 8), 2, |_| {
            calls += 1;
            Ok(scores[calls - 1])
        })
        .unwrap();
        assert_eq!(report.best_epoch, 1);
        assert_eq!(report.scores.len(), 4);
    }

    #[test]
    fn search_samples_inside_ranges() {
        let space = SearchSpace::char_level();
        let res = random_grid_search(&space, 50, 3, |c| Ok(c.hidden as f64)).unwrap();
        for (c, _) in &res.trials {
            assert!((48..=384).contains(&c.hidden));
            assert!((2..=6).contains(&c.context));
            assert!(space.rates.contains(&c.lr));
            assert!(matches!(c.dim, Some(16) | Some(32)));
            assert!(c.pad.is_some_and(|p| p <= 5));
        }
        let max = res.trials.iter().map(|(c, _)| c.hidden).max().unwrap();
        assert_eq!(res.best.hidden, max);
        let again = random_grid_search(&space, 50, 3, |c| Ok(c.hidden as f64)).unwrap();
        assert_eq!(res, again);
    }

    #[test]
    fn search_budget_one_and_ties() {
        let res = random_grid_search(&SearchSpace::word_level(), 1, 0, |_| Ok(0.5)).unwrap();
        assert_eq!(res.trials.len(), 1);
        assert_eq!(res.best, res.trials[0].0);
        let tied = random_grid_search(&SearchSpace::word_level(), 5, 0, |_| Ok(0.5)).unwrap();
        assert_eq!(tied.best, tied.trials[0].0);
        assert!(random_grid_search(&SearchSpace::word_level(), 0, 0, |_| Ok(0.0)).is_err());
    }
}
