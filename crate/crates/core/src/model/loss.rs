//! Per-position classification loss on the 3-way output head.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

/// How the three output units become class scores and a loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputLoss {
    /// Independent sigmoids, scored by sparse categorical cross-entropy on the
    /// sigmoid vector renormalized to sum to one: `-ln(σ_c / Σ_k σ_k)`. This
    /// is what a sigmoid head compiled with a sparse categorical
    /// cross-entropy loss computes in the common deep learning frameworks.
    #[default]
    SigmoidNormalized,
    /// Independent sigmoids, loss `-ln σ_c` on the true class only. Nothing
    /// pushes the other two units down, so class scores may all saturate.
    SigmoidTrueClass,
    /// Softmax head with the usual cross-entropy.
    Softmax,
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl OutputLoss {
    /// Class scores for one position's logits.
    pub fn scores(self, logits: ArrayView1<f64>) -> Vec<f64> {
        match self {
            OutputLoss::SigmoidNormalized | OutputLoss::SigmoidTrueClass => {
                logits.iter().map(|&o| sigmoid(o)).collect()
            }
            OutputLoss::Softmax => {
                let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = logits.iter().map(|&o| (o - max).exp()).collect();
                let total: f64 = exps.iter().sum();
                exps.into_iter().map(|e| e / total).collect()
            }
        }
    }

    /// Summed loss over all positions and its gradient with respect to the logits.
    pub(crate) fn loss_and_grad(self, logits: ArrayView2<f64>, targets: &[u8]) -> (f64, Array2<f64>) {
        let mut grad = Array2::zeros(logits.raw_dim());
        let mut total = 0.0;
        for (t, row) in logits.rows().into_iter().enumerate() {
            let c = targets[t] as usize;
            let mut g = grad.row_mut(t);
            match self {
                OutputLoss::SigmoidNormalized => {
                    let p: Vec<f64> = row.iter().map(|&o| sigmoid(o)).collect();
                    let s: f64 = p.iter().sum();
                    total += softplus(-row[c]) + s.ln();
                    for k in 0..p.len() {
                        g[k] = p[k] * (1.0 - p[k]) / s;
                    }
                    g[c] -= 1.0 - p[c];
                }
                OutputLoss::SigmoidTrueClass => {
                    total += softplus(-row[c]);
                    g[c] = -(1.0 - sigmoid(row[c]));
                }
                OutputLoss::Softmax => {
                    let q = self.scores(row);
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + row.iter().map(|&o| (o - max).exp()).sum::<f64>().ln();
                    total += lse - row[c];
                    for k in 0..q.len() {
                        g[k] = q[k];
                    }
                    g[c] -= 1.0;
                }
            }
        }
        (total, grad)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gradients_match_finite_differences() {
        let logits = array![[0.3, -1.2, 2.0], [-0.5, 0.1, 0.4]];
        let targets = [2u8, 0];
        for kind in [
            OutputLoss::SigmoidNormalized,
            OutputLoss::SigmoidTrueClass,
            OutputLoss::Softmax,
        ] {
            let (_, g) = kind.loss_and_grad(logits.view(), &targets);
            for i in 0..2 {
                for k in 0..3 {
                    let eps = 1e-6;
                    let mut p = logits.clone();
                    let mut m = logits.clone();
                    p[[i, k]] += eps;
                    m[[i, k]] -= eps;
                    let n = (kind.loss_and_grad(p.view(), &targets).0 - kind.loss_and_grad(m.view(), &targets).0)
                        / (2.0 * eps);
                    assert!((g[[i, k]] - n).abs() < 1e-8, "{kind:?} {i} {k}");
                }
            }
        }
    }

    #[test]
    fn normalized_sigmoid_loss_value() {
        let logits = array![[0.0, 0.0, 0.0]];
        let (l, _) = OutputLoss::SigmoidNormalized.loss_and_grad(logits.view(), &[1]);
        assert!((l - 3f64.ln()).abs() < 1e-12);
        let (l, _) = OutputLoss::SigmoidTrueClass.loss_and_grad(logits.view(), &[1]);
        assert!((l - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_scores_are_in_open_unit_interval() {
        let s = OutputLoss::SigmoidNormalized.scores(array![-30.0, 0.0, 30.0].view());
        assert!(s.iter().all(|&p| p > 0.0 && p < 1.0));
    }
}
