//! Parameter-free scaled dot-product self-attention over a token sequence.

use ndarray::{Array2, ArrayView2, Axis};

/// Output rows and the attention weights that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    /// Same shape as the input.
    pub output: Array2<f64>,
    /// `weights[[i, j]]`: share of position `j` in output row `i`. Zero for
    /// masked `j`; each row sums to one over unmasked positions.
    pub weights: Array2<f64>,
}

/// `output_i = Σ_j softmax_j(⟨h_i, h_j⟩ / √d) · h_j`, with masked keys
/// (`mask[j] == false`) excluded from the softmax. If every key is masked the
/// output is all zeros.
///
/// ```
/// use ndarray::array;
/// use tsd_core::model::self_attention;
///
/// let h = array![[1.0, 2.0], [1.0, 2.0]];
/// let att = self_attention(h.view(), &[true, true]);
/// assert_eq!(att.output, h);
/// assert_eq!(att.weights, array![[0.5, 0.5], [0.5, 0.5]]);
/// ```
pub fn self_attention(h: ArrayView2<f64>, mask: &[bool]) -> Attention {
    let (len, dim) = h.dim();
    assert_eq!(mask.len(), len, "mask length must equal sequence length");
    let mut weights = Array2::<f64>::zeros((len, len));
    if mask.iter().any(|&m| m) {
        let scale = 1.0 / (dim as f64).sqrt();
        let scores = h.dot(&h.t()) * scale;
        for (i, mut row) in weights.axis_iter_mut(Axis(0)).enumerate() {
            let max = (0..len)
                .filter(|&j| mask[j])
                .map(|j| scores[[i, j]])
                .fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in (0..len).filter(|&j| mask[j]) {
                let e = (scores[[i, j]] - max).exp();
                row[j] = e;
                total += e;
            }
            row.mapv_inplace(|w| w / total);
        }
    }
    let output = weights.dot(&h);
    Attention { output, weights }
}

/// Gradient with respect to the input, given the gradient of the output.
pub(crate) fn self_attention_backward(
    h: ArrayView2<f64>,
    weights: &Array2<f64>,
    d_out: ArrayView2<f64>,
) -> Array2<f64> {
    let dim = h.ncols();
    let scale = 1.0 / (dim as f64).sqrt();
    let mut d_h = weights.t().dot(&d_out);
    let d_weights = d_out.dot(&h.t());
    // softmax Jacobian, row-wise: dS = W ⊙ (dW - rowsum(W ⊙ dW))
    let mut d_scores = weights * &d_weights;
    let inner = d_scores.sum_axis(Axis(1));
    for (i, mut row) in d_scores.axis_iter_mut(Axis(0)).enumerate() {
        let w = weights.row(i);
        row.iter_mut().zip(w.iter()).for_each(|(d, &wij)| *d -= wij * inner[i]);
    }
    d_h += &(d_scores.dot(&h) * scale);
    d_h += &(d_scores.t().dot(&h) * scale);
    d_h
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..1.0))
    }

    #[test]
    fn single_position_is_identity() {
        let h = array![[0.3, -1.2, 4.0]];
        let att = self_attention(h.view(), &[true]);
        assert_eq!(att.output, h);
        assert_eq!(att.weights, array![[1.0]]);
    }

    #[test]
    fn identical_vectors_average_to_themselves() {
        let h = array![[1.5, -2.0], [1.5, -2.0]];
        let att = self_attention(h.view(), &[true, true]);
        for i in 0..2 {
            assert!((att.weights[[i, 0]] - 0.5).abs() < 1e-15);
            for k in 0..2 {
                assert!((att.output[[i, k]] - h[[0, k]]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn shape_is_preserved_and_rows_normalized() {
        let h = random(6, 8, 1);
        let mask = [true, true, false, true, false, false];
        let att = self_attention(h.view(), &mask);
        assert_eq!(att.output.dim(), h.dim());
        for row in att.weights.rows() {
            let s: f64 = row.iter().zip(&mask).filter(|(_, &m)| m).map(|(w, _)| w).sum();
            assert!((s - 1.0).abs() < 1e-6);
            for (w, &m) in row.iter().zip(&mask) {
                if !m {
                    assert_eq!(*w, 0.0);
                }
            }
        }
    }

    #[test]
    fn all_masked_gives_zero_output() {
        let h = random(3, 4, 2);
        let att = self_attention(h.view(), &[false; 3]);
        assert!(att.output.iter().all(|&x| x == 0.0));
        assert!(att.output.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn masked_keys_do_not_influence_output() {
        let mut h = random(4, 3, 3);
        let mask = [true, true, true, false];
        let a = self_attention(h.view(), &mask);
        h.row_mut(3).fill(100.0);
        let b = self_attention(h.view(), &mask);
        for i in 0..3 {
            assert_eq!(a.output.row(i), b.output.row(i));
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        // 4 positions of width 8, one key masked, loss = Σ out ⊙ R for fixed R
        let h = random(4, 8, 4);
        let r = random(4, 8, 5);
        let mask = [true, true, false, true];
        let loss = |h: &Array2<f64>| (&self_attention(h.view(), &mask).output * &r).sum();
        let att = self_attention(h.view(), &mask);
        let analytic = self_attention_backward(h.view(), &att.weights, r.view());
        let eps = 1e-5;
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for k in 0..8 {
                let mut hp = h.clone();
                let mut hm = h.clone();
                hp[[i, k]] += eps;
                hm[[i, k]] -= eps;
                let numeric = (loss(&hp) - loss(&hm)) / (2.0 * eps);
                let a = analytic[[i, k]];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "max relative error {worst}");
    }
}
