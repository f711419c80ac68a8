use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::init::glorot_uniform;
use super::recurrent::{BiRnnParams, Encoder};

/// A fully connected layer applied position-wise: `y = x Wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Linear {
    pub(crate) fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        Linear {
            weight: glorot_uniform(output, input, rng),
            bias: Array1::zeros(output),
        }
    }

    pub(crate) fn zeros_like(&self) -> Self {
        Linear {
            weight: Array2::zeros(self.weight.raw_dim()),
            bias: Array1::zeros(self.bias.raw_dim()),
        }
    }

    pub fn input(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output(&self) -> usize {
        self.weight.nrows()
    }

    pub(crate) fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    /// Parameter gradients and the input gradient.
    pub(crate) fn backward(&self, x: ArrayView2<f64>, d_out: ArrayView2<f64>) -> (Linear, Array2<f64>) {
        let grads = Linear {
            weight: d_out.t().dot(&x).as_standard_layout().into_owned(),
            bias: d_out.sum_axis(Axis(0)),
        };
        (grads, d_out.dot(&self.weight))
    }

    fn slices(&self) -> [&[f64]; 2] {
        [
            self.weight.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }

    fn slices_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.weight.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }
}

/// Every trainable tensor of the tagger. The same type holds gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerParams {
    pub recurrent: Vec<BiRnnParams>,
    pub dense: Linear,
    pub output: Linear,
}

impl TaggerParams {
    pub(crate) fn init<R: Rng>(
        encoder: Encoder,
        layers: usize,
        input: usize,
        hidden: usize,
        dense_units: usize,
        classes: usize,
        rng: &mut R,
    ) -> Self {
        let mut recurrent = Vec::with_capacity(layers);
        let mut width = input;
        for _ in 0..layers {
            recurrent.push(BiRnnParams::init(encoder, width, hidden, rng));
            width = 2 * hidden;
        }
        let dense = Linear::init(width, dense_units, rng);
        let output = Linear::init(dense_units, classes, rng);
        TaggerParams {
            recurrent,
            dense,
            output,
        }
    }

    pub fn zeros_like(&self) -> Self {
        TaggerParams {
            recurrent: self.recurrent.iter().map(BiRnnParams::zeros_like).collect(),
            dense: self.dense.zeros_like(),
            output: self.output.zeros_like(),
        }
    }

    /// Flat views of every tensor in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for layer in &self.recurrent {
            out.extend(layer.forward.slices());
            out.extend(layer.backward.slices());
        }
        out.extend(self.dense.slices());
        out.extend(self.output.slices());
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for layer in &mut self.recurrent {
            out.extend(layer.forward.slices_mut());
            out.extend(layer.backward.slices_mut());
        }
        out.extend(self.dense.slices_mut());
        out.extend(self.output.slices_mut());
        out
    }

    pub fn num_parameters(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    /// `self += other * scale`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &TaggerParams, scale: f64) {
        for (dst, src) in self.slices_mut().into_iter().zip(other.slices()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s * scale);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for s in self.slices_mut() {
            s.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }
}
