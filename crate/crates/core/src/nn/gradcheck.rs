use super::dense::DenseNet;

/// Models whose parameters can be read and written as one flat vector.
pub trait Parameterized {
    fn flat_params(&self) -> Vec<f64>;
    fn set_flat_params(&mut self, values: &[f64]);
}

impl Parameterized for DenseNet {
    fn flat_params(&self) -> Vec<f64> {
        DenseNet::flat_params(self)
    }

    fn set_flat_params(&mut self, values: &[f64]) {
        DenseNet::set_flat_params(self, values);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter index at which the maximum occurred.
    pub worst_index: usize,
    pub params_checked: usize,
}

/// Denominator floor for the relative error, so parameters with a true
/// gradient of zero are judged on absolute error.
const REL_FLOOR: f64 = 1e-4;

/// Compares `analytic` against central finite differences of `loss`.
///
/// Relative error per parameter is `|a - n| / max(|a|, |n|, 1e-4)`.
/// `loss` must be a deterministic function of the parameters (freeze any
/// dropout masks or resampled labels beforehand).
pub fn grad_check<M, F>(model: &mut M, analytic: &[f64], mut loss: F, epsilon: f64) -> GradCheckReport
where
    M: Parameterized,
    F: FnMut(&M) -> f64,
{
    let base = model.flat_params();
    assert_eq!(base.len(), analytic.len(), "gradient length must match parameter count");
    let mut work = base.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        params_checked: base.len(),
    };
    for i in 0..base.len() {
        work[i] = base[i] + epsilon;
        model.set_flat_params(&work);
        let plus = loss(model);
        work[i] = base[i] - epsilon;
        model.set_flat_params(&work);
        let minus = loss(model);
        work[i] = base[i];

        let numeric = (plus - minus) / (2.0 * epsilon);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    model.set_flat_params(&base);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{dropout_mask, mse, softmax_xent, Activation, Dense};
    use crate::rng;
    use ndarray::{Array1, Array2};
    use rand::Rng as _;

    fn random_batch(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut r = rng::seeded(seed, 0);
        Array2::from_shape_simple_fn((rows, cols), || r.random_range(-1.0..1.0))
    }

    fn near_kink(net: &DenseNet, x: &Array2<f64>) -> bool {
        let fwd = net.forward(x.view()).unwrap();
        net.layers()
            .iter()
            .zip(&fwd.pre)
            .any(|(l, z)| l.activation == Activation::Relu && z.iter().any(|v| v.abs() < 1e-4))
    }

    fn mse_loss(net: &DenseNet, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
        mse(net.forward(x.view()).unwrap().output.view(), y.view()).unwrap().0
    }

    #[test]
    fn three_layer_mse() {
        let mut checked = 0;
        for seed in 0..10u64 {
            let mut net = DenseNet::mlp(4, &[6, 5], 3, &mut rng::seeded(seed, 1));
            let x = random_batch(8, 4, seed + 100);
            let y = random_batch(8, 3, seed + 200);
            if near_kink(&net, &x) {
                continue;
            }
            let fwd = net.forward(x.view()).unwrap();
            let (_, g) = mse(fwd.output.view(), y.view()).unwrap();
            let (grads, _) = net.backward(&fwd, g.view());
            let report = grad_check(&mut net, &grads.flatten(), |n| mse_loss(n, &x, &y), 1e-5);
            assert!(report.max_rel_error < 1e-5, "seed {seed}: {report:?}");
            checked += 1;
        }
        assert!(checked >= 5);
    }

    #[test]
    fn linear_layer_closed_form() {
        let x = random_batch(6, 3, 1);
        let y = random_batch(6, 2, 2);
        let w = random_batch(3, 2, 3);
        let net = DenseNet::new(vec![Dense {
            weights: w.clone(),
            biases: Array1::zeros(2),
            activation: Activation::Linear,
        }])
        .unwrap();
        let fwd = net.forward(x.view()).unwrap();
        let (_, g) = mse(fwd.output.view(), y.view()).unwrap();
        let (grads, _) = net.backward(&fwd, g.view());
        // d/dW mean((XW - Y)^2) = 2 X^T (XW - Y) / (n * outputs)
        let closed = x.t().dot(&(x.dot(&w) - &y)) * (2.0 / 12.0);
        let diff = (&grads.layers[0].0 - &closed).mapv(f64::abs);
        assert!(diff.iter().all(|&d| d < 1e-8));
    }

    #[test]
    fn cross_entropy_head() {
        let mut net = DenseNet::mlp(5, &[7], 4, &mut rng::seeded(9, 1));
        let x = random_batch(10, 5, 11);
        let labels: Vec<usize> = (0..10).map(|i| i % 4).collect();
        assert!(!near_kink(&net, &x));
        let fwd = net.forward(x.view()).unwrap();
        let (_, g) = softmax_xent(fwd.output.view(), &labels).unwrap();
        let (grads, _) = net.backward(&fwd, g.view());
        let loss = |n: &DenseNet| softmax_xent(n.forward(x.view()).unwrap().output.view(), &labels).unwrap().0;
        let report = grad_check(&mut net, &grads.flatten(), loss, 1e-5);
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn through_frozen_dropout() {
        let mut net = DenseNet::mlp(4, &[6], 5, &mut rng::seeded(21, 1));
        let x = random_batch(7, 4, 22);
        let y = random_batch(7, 5, 23);
        let mask = dropout_mask((7, 5), 0.5, 24).unwrap();
        assert!(!near_kink(&net, &x));
        let loss = |n: &DenseNet| {
            let out = n.forward(x.view()).unwrap().output * &mask;
            mse(out.view(), y.view()).unwrap().0
        };
        let fwd = net.forward(x.view()).unwrap();
        let (_, g) = mse((&fwd.output * &mask).view(), y.view()).unwrap();
        let (grads, _) = net.backward(&fwd, (g * &mask).view());
        let report = grad_check(&mut net, &grads.flatten(), loss, 1e-5);
        assert!(report.max_rel_error < 1e-5, "{report:?}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let mut net = DenseNet::mlp(3, &[4], 2, &mut rng::seeded(5, 1));
        let x = random_batch(4, 3, 6);
        let y = random_batch(4, 2, 7);
        let fwd = net.forward(x.view()).unwrap();
        let (_, g) = mse(fwd.output.view(), y.view()).unwrap();
        let (grads, _) = net.backward(&fwd, g.view());
        let mut wrong = grads.flatten();
        wrong[0] += 0.1;
        let report = grad_check(&mut net, &wrong, |n| mse_loss(n, &x, &y), 1e-5);
        assert!(report.max_rel_error > 1e-2);
        assert_eq!(report.worst_index, 0);
    }
}
