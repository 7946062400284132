//! Task losses and their gradients with respect to the representation matrix.

use crate::dense::DenseMatrix;
use crate::scalar::Scalar;

#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// ln(1 + e^z) without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Binary cross-entropy on sigmoid(h_i . h_j) over positive and negative
/// pairs, averaged over all pairs. Returns the loss and d(loss)/dH.
pub fn link_loss_and_grad<T: Scalar>(
    h: &DenseMatrix<T>,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
) -> (f64, DenseMatrix<T>) {
    let total = pos.len() + neg.len();
    assert!(total > 0, "link loss needs at least one pair");
    let inv = 1.0 / total as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(h.rows, h.cols);
    for (pairs, target) in [(pos, 1.0f64), (neg, 0.0f64)] {
        for &(i, j) in pairs {
            let z = dot(h.row(i), h.row(j)).as_f64();
            loss += (softplus(z) - target * z) * inv;
            // d/dz of the above is sigmoid(z) - target.
            let c = T::from_f64((1.0 / (1.0 + (-z).exp()) - target) * inv);
            for k in 0..h.cols {
                let hi = h.get(i, k);
                let hj = h.get(j, k);
                grad.data[i * h.cols + k] += c * hj;
                grad.data[j * h.cols + k] += c * hi;
            }
        }
    }
    (loss, grad)
}

/// Softmax cross-entropy over the rows listed in `train_idx`; logits are the
/// representation columns. Returns the loss and d(loss)/dH (zero outside the
/// training rows).
pub fn node_loss_and_grad<T: Scalar>(
    h: &DenseMatrix<T>,
    labels: &[u32],
    train_idx: &[usize],
) -> (f64, DenseMatrix<T>) {
    assert_eq!(labels.len(), h.rows, "one label per node required");
    assert!(!train_idx.is_empty(), "node loss needs training nodes");
    let classes = h.cols;
    let inv = 1.0 / train_idx.len() as f64;
    let mut loss = 0.0;
    let mut grad = DenseMatrix::zeros(h.rows, h.cols);
    for &i in train_idx {
        let label = labels[i] as usize;
        assert!(
            label < classes,
            "label {label} at node {i} exceeds {classes} output columns"
        );
        let logits = h.row(i);
        let max = logits
            .iter()
            .map(|x| x.as_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for x in logits {
            z += (x.as_f64() - max).exp();
        }
        loss += (z.ln() + max - logits[label].as_f64()) * inv;
        for (k, x) in logits.iter().enumerate() {
            let p = (x.as_f64() - max).exp() / z;
            let indicator = if k == label { 1.0 } else { 0.0 };
            grad.data[i * classes + k] = T::from_f64((p - indicator) * inv);
        }
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_link_loss_at_zero_scores_is_ln2() {
        // Orthogonal rows: every pair scores sigmoid(0) = 1/2.
        let h = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 0.0],
        ]);
        let (loss, _) = link_loss_and_grad(&h, &[(0, 1)], &[(0, 2)]);
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn test_link_grad_matches_finite_differences() {
        let mut h = DenseMatrix::from_rows(&[
            vec![0.3, -0.2],
            vec![0.1, 0.4],
            vec![-0.5, 0.2],
            vec![0.7, 0.1],
        ]);
        let pos = [(0, 1), (1, 2)];
        let neg = [(0, 3), (2, 3)];
        let (_, grad) = link_loss_and_grad(&h, &pos, &neg);
        let step = 1e-6;
        for idx in 0..h.data.len() {
            let orig = h.data[idx];
            h.data[idx] = orig + step;
            let (lp, _) = link_loss_and_grad(&h, &pos, &neg);
            h.data[idx] = orig - step;
            let (lm, _) = link_loss_and_grad(&h, &pos, &neg);
            h.data[idx] = orig;
            let numeric = (lp - lm) / (2.0 * step);
            assert!(
                (numeric - grad.data[idx]).abs() < 1e-8,
                "entry {idx}: numeric {numeric} vs analytic {}",
                grad.data[idx]
            );
        }
    }

    #[test]
    fn test_node_loss_uniform_logits_is_ln_c() {
        let h = DenseMatrix::<f64>::zeros(4, 5);
        let labels = [0, 1, 2, 3];
        let (loss, _) = node_loss_and_grad(&h, &labels, &[0, 1, 2]);
        assert!((loss - (5.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn test_node_grad_matches_finite_differences_and_is_zero_elsewhere() {
        let mut h = DenseMatrix::from_rows(&[
            vec![0.2, -0.1, 0.5],
            vec![-0.3, 0.8, 0.0],
            vec![0.1, 0.1, -0.2],
        ]);
        let labels = [2, 0, 1];
        let train = [0, 2];
        let (_, grad) = node_loss_and_grad(&h, &labels, &train);
        assert!(grad.row(1).iter().all(|&x| x == 0.0), "non-training row");
        let step = 1e-6;
        for idx in 0..h.data.len() {
            let orig = h.data[idx];
            h.data[idx] = orig + step;
            let (lp, _) = node_loss_and_grad(&h, &labels, &train);
            h.data[idx] = orig - step;
            let (lm, _) = node_loss_and_grad(&h, &labels, &train);
            h.data[idx] = orig;
            let numeric = (lp - lm) / (2.0 * step);
            assert!((numeric - grad.data[idx]).abs() < 1e-8, "entry {idx}");
        }
    }

    #[test]
    fn test_link_loss_extreme_scores_stay_finite() {
        let h = DenseMatrix::from_rows(&[vec![100.0], vec![100.0], vec![-100.0]]);
        let (loss, grad) = link_loss_and_grad(&h, &[(0, 1)], &[(0, 2)]);
        assert!(loss.is_finite());
        assert!(grad.is_finite());
    }

    #[test]
    #[should_panic(expected = "exceeds")]
    fn test_node_loss_rejects_out_of_range_label() {
        let h = DenseMatrix::<f64>::zeros(2, 3);
        let _ = node_loss_and_grad(&h, &[0, 7], &[1]);
    }
}
