//! Compare backpropagation-through-time gradients with central finite
//! differences on a tiny random network, block by block.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use chronotag::embeddings::{init_random, Level, Vocabulary};
use chronotag::rnn::{bptt_gradients, RnnModel};
use chronotag::Result;

const H: f64 = 1e-5;

type Access = fn(&mut RnnModel) -> &mut [f64];

fn flat(a: &mut ndarray::ArrayBase<ndarray::OwnedRepr<f64>, impl ndarray::Dimension>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are stored contiguously")
}

/// Largest relative error between `analytic` and the numeric derivative
/// of the loss with respect to every entry reached by `access`.
fn max_error(model: &RnnModel, ids: &[usize], gold: &[usize], analytic: &[f64], access: Access) -> Result<f64> {
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let original = access(&mut probe)[i];
        access(&mut probe)[i] = original + H;
        let up = bptt_gradients(&probe, ids, gold)?.loss;
        access(&mut probe)[i] = original - H;
        let down = bptt_gradients(&probe, ids, gold)?.loss;
        access(&mut probe)[i] = original;
        let numeric = (up - down) / (2.0 * H);
        worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-7));
    }
    Ok(worst)
}

fn main() -> Result<()> {
    let vocab = Vocabulary::from_entries(Level::Word, ["fever", "since", "monday", "denies"]);
    let table = init_random(&vocab, 4, 1);
    let labels = vec!["O".to_string(), "B-EVENT".to_string(), "I-EVENT".to_string()];
    let mut model = RnnModel::new(vocab, table, 6, 1, labels, 2);
    // Larger weights than the default initialization so every block
    // carries a gradient well above finite-difference noise.
    model.u.mapv_inplace(|w| w * 10.0);
    model.w.mapv_inplace(|w| w * 10.0);
    let ids = [2, 3, 4, 5, 1];
    let gold = [0, 1, 2, 0, 1];

    let grads = bptt_gradients(&model, &ids, &gold)?;
    println!("loss {:.6}", grads.loss);
    let blocks: [(&str, Vec<f64>, Access); 4] = [
        ("U", grads.u.iter().copied().collect(), |m| flat(&mut m.u)),
        ("V", grads.v.iter().copied().collect(), |m| flat(&mut m.v)),
        ("W", grads.w.iter().copied().collect(), |m| flat(&mut m.w)),
        ("h0", grads.h0.to_vec(), |m| flat(&mut m.h0)),
    ];
    for (name, analytic, access) in blocks {
        let err = max_error(&model, &ids, &gold, &analytic, access)?;
        println!("{name:<6} {:>4} entries  max relative error {err:.2e}", analytic.len());
    }
    // The embedding table is trained too: only rows that occur in the
    // input window receive a gradient.
    let dim = model.table.dim();
    for (&row, g) in &grads.embeddings {
        let offset = row * dim;
        let mut probe = model.clone();
        let mut worst = 0.0f64;
        for j in 0..dim {
            let cell = offset + j;
            let original = flat(&mut probe.table.vectors)[cell];
            flat(&mut probe.table.vectors)[cell] = original + H;
            let up = bptt_gradients(&probe, &ids, &gold)?.loss;
            flat(&mut probe.table.vectors)[cell] = original - H;
            let down = bptt_gradients(&probe, &ids, &gold)?.loss;
            flat(&mut probe.table.vectors)[cell] = original;
            let numeric = (up - down) / (2.0 * H);
            worst = worst.max((g[j] - numeric).abs() / g[j].abs().max(numeric.abs()).max(1e-7));
        }
        println!("emb[{row}] {dim:>4} entries  max relative error {worst:.2e}");
    }
    Ok(())
}
