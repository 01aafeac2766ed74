use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{join, Params};
use super::tensor::Tensor;

/// Affine map `y = W x + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new<R: Rng>(input: usize, output: usize, scale: f64, rng: &mut R) -> Self {
        Linear {
            weight: Tensor::uniform(&[output, input], scale, rng),
            bias: Tensor::uniform(&[output], scale, rng),
        }
    }

    pub fn input_size(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_size(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.bias.values().to_vec();
        self.weight.matvec_acc(x, &mut y);
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Linear) -> Vec<f64> {
        grad.weight.outer_acc(dy, x);
        super::tensor::axpy(1.0, dy, grad.bias.values_mut());
        let mut dx = vec![0.0; x.len()];
        self.weight.matvec_t_acc(dy, &mut dx);
        dx
    }
}

impl Params for Linear {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "weight"), &self.weight);
        f(join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// One tanh hidden layer followed by a linear output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub hidden: Linear,
    pub output: Linear,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug)]
pub struct MlpCache {
    pub input: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl Mlp {
    pub fn new<R: Rng>(input: usize, hidden: usize, output: usize, scale: f64, rng: &mut R) -> Self {
        Mlp {
            hidden: Linear::new(input, hidden, scale, rng),
            output: Linear::new(hidden, output, scale, rng),
        }
    }

    pub fn output_size(&self) -> usize {
        self.output.output_size()
    }

    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, MlpCache) {
        let mut h = self.hidden.forward(x);
        h.iter_mut().for_each(|v| *v = v.tanh());
        let y = self.output.forward(&h);
        (
            y,
            MlpCache {
                input: x.to_vec(),
                hidden: h,
            },
        )
    }

    pub fn backward(&self, cache: &MlpCache, dy: &[f64], grad: &mut Mlp) -> Vec<f64> {
        let mut dh = self.output.backward(&cache.hidden, dy, &mut grad.output);
        for (d, h) in dh.iter_mut().zip(&cache.hidden) {
            *d *= 1.0 - h * h;
        }
        self.hidden.backward(&cache.input, &dh, &mut grad.hidden)
    }
}

impl Params for Mlp {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.hidden.visit(&join(prefix, "hidden"), f);
        self.output.visit(&join(prefix, "output"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        self.hidden.visit_mut(f);
        self.output.visit_mut(f);
    }
}
