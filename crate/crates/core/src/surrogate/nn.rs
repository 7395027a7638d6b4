//! Dense feed-forward network with tanh hidden layers, backpropagation and
//! the Adam optimizer. Samples are matrix columns.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub widths: Vec<usize>,
    /// `weights[l]` maps layer `l` to layer `l + 1` (rows = outputs).
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

/// Per-layer activations of one batch forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input; the last entry is the output.
    pub activations: Vec<DMatrix<f64>>,
}

impl Trace {
    pub fn output(&self) -> &DMatrix<f64> {
        self.activations.last().expect("trace has an input layer")
    }
}

/// Gradients with the same layout as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            biases: net.biases.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn norm(&self) -> f64 {
        self.slices().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        self.weights.iter_mut().for_each(|w| *w *= s);
        self.biases.iter_mut().for_each(|b| *b *= s);
    }

    pub fn is_finite(&self) -> bool {
        self.slices().flatten().all(|g| g.is_finite())
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().flatten().copied().collect()
    }
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        for w in &mut net.weights {
            let limit = (6.0 / (w.nrows() + w.ncols()) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            w.iter_mut().for_each(|x| *x = dist.sample(rng));
        }
        Ok(net)
    }

    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::Config(format!("invalid layer widths {widths:?}")));
        }
        Ok(Self {
            widths: widths.to_vec(),
            weights: widths.windows(2).map(|p| DMatrix::zeros(p[1], p[0])).collect(),
            biases: widths[1..].iter().map(|&n| DVector::zeros(n)).collect(),
        })
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("at least two layers")
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn slices(&self) -> impl Iterator<Item = &[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
    }

    pub fn slices_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.slices().flatten().copied().collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::WidthMismatch {
                expected: self.param_count(),
                actual: values.len(),
            });
        }
        let mut offset = 0;
        for s in self.slices_mut() {
            s.copy_from_slice(&values[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(())
    }

    fn layers(&self) -> usize {
        self.weights.len()
    }

    /// Forward pass over a batch whose columns are samples.
    pub fn trace(&self, input: DMatrix<f64>) -> Trace {
        let mut activations = Vec::with_capacity(self.layers() + 1);
        activations.push(input);
        for l in 0..self.layers() {
            let mut z = &self.weights[l] * &activations[l];
            for mut col in z.column_iter_mut() {
                col += &self.biases[l];
            }
            if l + 1 < self.layers() {
                z.apply(|v| *v = v.tanh());
            }
            activations.push(z);
        }
        Trace { activations }
    }

    pub fn forward_batch(&self, input: DMatrix<f64>) -> DMatrix<f64> {
        self.trace(input).activations.pop().expect("non-empty trace")
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_width() {
            return Err(Error::WidthMismatch {
                expected: self.input_width(),
                actual: input.len(),
            });
        }
        let x = DMatrix::from_column_slice(input.len(), 1, input);
        Ok(self.forward_batch(x).as_slice().to_vec())
    }

    /// Parameter gradients of `sum(d_output .* output)` given `d_output`,
    /// the derivative of the loss with respect to every output entry.
    pub fn backward(&self, trace: &Trace, d_output: &DMatrix<f64>) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        let mut delta = d_output.clone();
        for l in (0..self.layers()).rev() {
            let a_prev = &trace.activations[l];
            grads.weights[l] = &delta * a_prev.transpose();
            grads.biases[l] = delta.column_sum();
            if l > 0 {
                let mut back = self.weights[l].transpose() * &delta;
                // tanh'(z) = 1 - a^2 for the hidden activation a.
                back.zip_apply(a_prev, |d, a| *d *= 1.0 - a * a);
                delta = back;
            }
        }
        grads
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(learning_rate: f64, param_count: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    /// Descends along `grads` over the given parameter slices.
    pub fn step<'a, 'b>(
        &mut self,
        params: impl Iterator<Item = &'a mut [f64]>,
        grads: impl Iterator<Item = &'b [f64]>,
    ) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let mut k = 0;
        for (p, g) in params.zip(grads) {
            for (x, &gi) in p.iter_mut().zip(g) {
                self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * gi;
                self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * gi * gi;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *x -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                k += 1;
            }
        }
    }

    pub fn step_mlp(&mut self, net: &mut Mlp, grads: &Gradients) {
        self.step(net.slices_mut(), grads.slices());
    }
}

/// Half the summed squared error over a batch and its output gradient,
/// divided by the batch size.
pub fn mse_loss(output: &DMatrix<f64>, target: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
    let n = output.ncols().max(1) as f64;
    let diff = output - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    (loss, diff * (2.0 / n))
}
