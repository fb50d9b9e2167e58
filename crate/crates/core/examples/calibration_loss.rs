//! The calibrated loss on a three-sample batch: two correct predictions and
//! one incorrect one, so the balanced weights differ from 0.5 / 0.5.

use cpeal::calibration::{calib_loss, entropy, loss_and_grad, Weighting};
use cpeal::heads::{softmax_rows, Probs};
use ndarray::array;

fn main() -> cpeal::Result<()> {
    let probs = Probs::new(array![[0.7, 0.2, 0.1], [0.2, 0.5, 0.3], [0.05, 0.05, 0.9]])?;
    let labels = [0, 0, 2];

    for i in 0..probs.len() {
        let h = entropy(probs.row(i).as_slice().unwrap())?;
        println!("sample {i}: H = {h:.6}, tanh(H) = {:.6}", h.tanh());
    }

    let loss = calib_loss(&probs, &labels, 0.5)?;
    println!("n_correct = {}, n_incorrect = {}", loss.n_correct, loss.n_incorrect);
    println!("gamma = {}, beta = {}", loss.gamma, loss.beta);
    println!("L_C = {:.6}, L_I = {:.6}", loss.correct, loss.incorrect);
    println!("CE = {:.6}, L_calib = {:.6}, total = {:.6}", loss.ce, loss.calib, loss.total);

    // Gradient with respect to logits whose softmax is the batch above.
    let logits = probs.matrix().mapv(f64::ln);
    assert_eq!(softmax_rows(&logits).predictions(), probs.predictions());
    for w in [Weighting::Balanced, Weighting::Equal] {
        let (l, g) = loss_and_grad(&logits, &labels, 0.5, w)?;
        println!("{w:?}: total = {:.6}\n{g:.5}", l.total);
    }
    Ok(())
}
