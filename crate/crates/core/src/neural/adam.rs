use serde::{Deserialize, Serialize};

use super::params::Params;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments per parameter tensor, in visiting order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new<P: Params>(params: &P, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor> = params.tensors().iter().map(|t| Tensor::zeros(t.shape())).collect();
        AdamState {
            config,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<P: Params>(params: &mut P, grads: &P, state: &mut AdamState) -> Result<()> {
    let grads = grads.tensors();
    if grads.len() != state.first.len() {
        return Err(Error::Shape(format!(
            "{} gradient tensors for {} optimizer slots",
            grads.len(),
            state.first.len()
        )));
    }
    for (k, g) in grads.iter().enumerate() {
        if g.shape() != state.first[k].shape() {
            return Err(Error::Shape(format!(
                "gradient {:?} vs moment {:?}",
                g.shape(),
                state.first[k].shape()
            )));
        }
    }
    let mut shape_ok = true;
    let mut k = 0;
    params.visit_mut(&mut |t| {
        if k < grads.len() && t.shape() != grads[k].shape() {
            shape_ok = false;
        }
        k += 1;
    });
    if !shape_ok || k != grads.len() {
        return Err(Error::Shape("parameters do not match gradients".into()));
    }

    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let c1 = 1.0 - beta1.powi(state.step as i32);
    let c2 = 1.0 - beta2.powi(state.step as i32);
    let (first, second) = (&mut state.first, &mut state.second);
    let mut k = 0;
    params.visit_mut(&mut |t| {
        let g = grads[k].values();
        let m = first[k].values_mut();
        let v = second[k].values_mut();
        for (((w, &gi), mi), vi) in t.values_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = beta1 * *mi + (1.0 - beta1) * gi;
            *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
        k += 1;
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::from_vec(&[1], vec![v]).unwrap()
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut w = Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = w.clone();
        let mut s = AdamState::new(&w, AdamConfig::default());
        let g = w.zeros_like();
        adam_step(&mut w, &g, &mut s).unwrap();
        assert_eq!(w, before);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut w = scalar(0.0);
        let cfg = AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        };
        let mut s = AdamState::new(&w, cfg);
        adam_step(&mut w, &scalar(1.0), &mut s).unwrap();
        // m̂ = 1, v̂ = 1, Δ = -0.1 / (1 + 1e-8)
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((w.values()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn deterministic() {
        let run = || {
            let mut w = scalar(0.3);
            let mut s = AdamState::new(&w, AdamConfig::default());
            for g in [0.5, -0.1] {
                adam_step(&mut w, &scalar(g), &mut s).unwrap();
            }
            (w, s)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn shape_mismatch() {
        let mut w = scalar(0.0);
        let mut s = AdamState::new(&w, AdamConfig::default());
        assert!(adam_step(&mut w, &Tensor::zeros(&[2]), &mut s).is_err());
    }
}
