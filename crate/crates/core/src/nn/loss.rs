use ndarray::{Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Mean categorical cross-entropy over the batch with its gradient
/// `(softmax - onehot) / batch` with respect to the logits.
pub fn softmax_xent(logits: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (n, k) = logits.dim();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: labels.len(),
        });
    }
    if n == 0 {
        return Err(Error::Empty("batch"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::param(format!("label {bad} out of range for {k} classes")));
    }
    let mut grad = Array2::zeros((n, k));
    let mut loss = 0.0;
    for (i, (row, mut g)) in logits.outer_iter().zip(grad.outer_iter_mut()).enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let mut denom = 0.0;
        for (gv, &z) in g.iter_mut().zip(row) {
            *gv = (z - max).exp();
            denom += *gv;
        }
        let label = labels[i];
        loss += denom.ln() - (row[label] - max);
        g.mapv_inplace(|v| v / denom);
        g[label] -= 1.0;
    }
    grad /= n as f64;
    Ok((loss / n as f64, grad))
}

/// Mean squared error over all entries with gradient `2 (pred - target) / count`.
pub fn mse(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            actual: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let diff = &pred - &target;
    let count = diff.len() as f64;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    Ok((loss, diff * (2.0 / count)))
}

pub fn argmax_rows(x: ArrayView2<f64>) -> Vec<usize> {
    x.axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(logits: ArrayView2<f64>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = argmax_rows(logits).iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len() as f64
}
