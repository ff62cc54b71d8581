use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

/// `y = act(x W + b)` with `W` stored as `(inputs, outputs)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    /// He-style uniform init, `U(-sqrt(6 / fan_in), sqrt(6 / fan_in))`, zero
    /// biases.
    pub fn init(inputs: usize, outputs: usize, activation: Activation, rng: &mut Rng) -> Self {
        let limit = (6.0 / inputs as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((inputs, outputs), || rng.random_range(-limit..limit));
        Self {
            weights,
            biases: Array1::zeros(outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Dense>,
}

/// Per-layer cache from a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Input to each layer; `inputs[0]` is the network input.
    pub inputs: Vec<Array2<f64>>,
    /// Pre-activation of each layer.
    pub pre: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            *w += ow;
            *b += ob;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in &mut self.layers {
            *w *= factor;
            *b *= factor;
        }
    }

    /// Weights then biases, layer by layer, row-major.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

impl DenseNet {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidData("a network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].outputs(),
                    actual: pair[1].inputs(),
                });
            }
        }
        for l in &layers {
            if l.biases.len() != l.outputs() {
                return Err(Error::DimensionMismatch {
                    expected: l.outputs(),
                    actual: l.biases.len(),
                });
            }
            if l.weights.iter().chain(l.biases.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidData("non-finite network parameter".into()));
            }
        }
        Ok(Self { layers })
    }

    /// ReLU hidden layers and a linear output layer.
    pub fn mlp(input: usize, hidden: &[usize], output: usize, rng: &mut Rng) -> Self {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(output);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { Activation::Linear } else { Activation::Relu };
                Dense::init(w[0], w[1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// Hidden layer widths, excluding input and output.
    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1].iter().map(Dense::outputs).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Forward> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut h = x.to_owned();
        for layer in &self.layers {
            let z = h.dot(&layer.weights) + &layer.biases;
            let a = match layer.activation {
                Activation::Relu => z.mapv(|v| v.max(0.0)),
                Activation::Linear => z.clone(),
            };
            inputs.push(h);
            pre.push(z);
            h = a;
        }
        Ok(Forward {
            inputs,
            pre,
            output: h,
        })
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        let mut h = x.to_owned();
        for layer in &self.layers {
            h = h.dot(&layer.weights) + &layer.biases;
            if layer.activation == Activation::Relu {
                h.mapv_inplace(|v| v.max(0.0));
            }
        }
        Ok(h)
    }

    /// Gradients of a scalar loss given `d loss / d output`. Returns the
    /// parameter gradients and `d loss / d input`.
    pub fn backward(&self, fwd: &Forward, grad_output: ArrayView2<f64>) -> (Gradients, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = grad_output.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                ndarray::Zip::from(&mut g).and(&fwd.pre[i]).for_each(|gv, &z| {
                    if z <= 0.0 {
                        *gv = 0.0;
                    }
                });
            }
            let dw = fwd.inputs[i].t().dot(&g);
            let db = g.sum_axis(Axis(0));
            let dx = g.dot(&layer.weights.t());
            grads.push((dw, db));
            g = dx;
        }
        grads.reverse();
        (Gradients { layers: grads }, g)
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.outputs())))
                .collect(),
        }
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter().copied());
            out.extend(l.biases.iter().copied());
        }
        out
    }

    pub fn set_flat_params(&mut self, values: &[f64]) -> usize {
        let mut k = 0;
        for l in &mut self.layers {
            for w in l.weights.iter_mut().chain(l.biases.iter_mut()) {
                *w = values[k];
                k += 1;
            }
        }
        k
    }
}

/// Serialized layout: shapes plus row-major parameter arrays.
#[derive(Serialize, Deserialize)]
struct LayerRecord {
    inputs: usize,
    outputs: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Serialize for DenseNet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let records: Vec<LayerRecord> = self
            .layers
            .iter()
            .map(|l| LayerRecord {
                inputs: l.inputs(),
                outputs: l.outputs(),
                activation: l.activation,
                weights: l.weights.iter().copied().collect(),
                biases: l.biases.to_vec(),
            })
            .collect();
        records.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DenseNet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let records = Vec::<LayerRecord>::deserialize(deserializer)?;
        let layers = records
            .into_iter()
            .map(|r| {
                let weights = Array2::from_shape_vec((r.inputs, r.outputs), r.weights)
                    .map_err(|e| D::Error::custom(format!("bad weight shape: {e}")))?;
                Ok(Dense {
                    weights,
                    biases: Array1::from(r.biases),
                    activation: r.activation,
                })
            })
            .collect::<std::result::Result<Vec<_>, D::Error>>()?;
        DenseNet::new(layers).map_err(D::Error::custom)
    }
}
