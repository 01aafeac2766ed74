use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `f64` array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor {
            shape: shape.to_vec(),
            values: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], values: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                expected,
                values.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            values,
        })
    }

    /// Samples every entry uniformly from `[-scale, scale]`.
    pub fn uniform<R: Rng>(shape: &[usize], scale: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            values: (0..n).map(|_| rng.gen_range(-scale..=scale)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    pub fn cols(&self) -> usize {
        if self.shape.len() < 2 {
            1
        } else {
            self.shape[1..].iter().product()
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.values[i * c..(i + 1) * c]
    }

    pub fn fill(&mut self, v: f64) {
        self.values.iter_mut().for_each(|x| *x = v);
    }

    /// `out += self · x` for a 2-D tensor.
    pub fn matvec_acc(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols());
        debug_assert_eq!(out.len(), self.rows());
        let c = self.cols();
        for (o, row) in out.iter_mut().zip(self.values.chunks_exact(c)) {
            *o += dot(row, x);
        }
    }

    /// `out += selfᵀ · y` for a 2-D tensor.
    pub fn matvec_t_acc(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows());
        debug_assert_eq!(out.len(), self.cols());
        let c = self.cols();
        for (&yi, row) in y.iter().zip(self.values.chunks_exact(c)) {
            if yi != 0.0 {
                axpy(yi, row, out);
            }
        }
    }

    /// `self += y · xᵀ` for a 2-D tensor.
    pub fn outer_acc(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows());
        debug_assert_eq!(x.len(), self.cols());
        let c = self.cols();
        for (&yi, row) in y.iter().zip(self.values.chunks_exact_mut(c)) {
            if yi != 0.0 {
                axpy(yi, x, row);
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += alpha · x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically stable log-sum-exp over the entries selected by `mask`.
pub fn log_sum_exp(values: &[f64], mask: impl Fn(usize) -> bool) -> f64 {
    let max = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| mask(i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| mask(i))
        .map(|(_, &v)| (v - max).exp())
        .sum();
    max + sum.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_checked() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(t.row(1), &[4., 5., 6.]);
    }

    #[test]
    fn matvec_products() {
        let w = Tensor::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let mut y = vec![0.0; 2];
        w.matvec_acc(&[1., 0., -1.], &mut y);
        assert_eq!(y, [-2., -2.]);
        let mut x = vec![0.0; 3];
        w.matvec_t_acc(&[1., 1.], &mut x);
        assert_eq!(x, [5., 7., 9.]);
        let mut g = Tensor::zeros(&[2, 3]);
        g.outer_acc(&[1., 2.], &[1., 0., 3.]);
        assert_eq!(g.values(), &[1., 0., 3., 2., 0., 6.]);
    }

    #[test]
    fn log_sum_exp_masks() {
        let v = [0.0, 0.0, 1000.0];
        assert!((log_sum_exp(&v, |i| i < 2) - 2f64.ln()).abs() < 1e-15);
    }
}
