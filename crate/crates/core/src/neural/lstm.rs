//! LSTM and bidirectional LSTM with backpropagation through time.
//!
//! Gate pre-activations are stacked in the order input, forget, output,
//! cell candidate: rows `[0,h)`, `[h,2h)`, `[2h,3h)`, `[3h,4h)` of both
//! weight matrices and of the bias.
//!
//! ```text
//! i, f, o = sigmoid(·)    g = tanh(·)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{join, Params};
use super::tensor::{sigmoid, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `4h × input`
    pub input_weight: Tensor,
    /// `4h × h`
    pub recurrent_weight: Tensor,
    /// `4h`
    pub bias: Tensor,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LstmState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_size: usize) -> Self {
        LstmState {
            hidden: vec![0.0; hidden_size],
            cell: vec![0.0; hidden_size],
        }
    }
}

#[derive(Clone, Debug)]
struct Step {
    input: Vec<f64>,
    prev_hidden: Vec<f64>,
    prev_cell: Vec<f64>,
    // activated gates, stacked i, f, o, g
    gates: Vec<f64>,
    cell_tanh: Vec<f64>,
}

/// Everything the backward pass needs from one forward run.
#[derive(Clone, Debug, Default)]
pub struct LstmTrace {
    steps: Vec<Step>,
}

impl LstmParams {
    pub fn new<R: Rng>(input_size: usize, hidden_size: usize, scale: f64, rng: &mut R) -> Self {
        LstmParams {
            input_weight: Tensor::uniform(&[4 * hidden_size, input_size], scale, rng),
            recurrent_weight: Tensor::uniform(&[4 * hidden_size, hidden_size], scale, rng),
            bias: Tensor::uniform(&[4 * hidden_size], scale, rng),
        }
    }

    pub fn zeros(input_size: usize, hidden_size: usize) -> Self {
        LstmParams {
            input_weight: Tensor::zeros(&[4 * hidden_size, input_size]),
            recurrent_weight: Tensor::zeros(&[4 * hidden_size, hidden_size]),
            bias: Tensor::zeros(&[4 * hidden_size]),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.recurrent_weight.cols()
    }

    pub fn input_size(&self) -> usize {
        self.input_weight.cols()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden_size();
        if self.input_weight.rows() != 4 * h || self.recurrent_weight.rows() != 4 * h || self.bias.len() != 4 * h {
            return Err(Error::Shape(format!(
                "inconsistent LSTM shapes {:?} {:?} {:?}",
                self.input_weight.shape(),
                self.recurrent_weight.shape(),
                self.bias.shape()
            )));
        }
        Ok(())
    }

    /// Runs the recurrence left to right and returns one hidden vector per input.
    pub fn forward(&self, inputs: &[Vec<f64>], initial: &LstmState) -> Result<(Vec<Vec<f64>>, LstmTrace)> {
        self.check()?;
        let h = self.hidden_size();
        if initial.hidden.len() != h || initial.cell.len() != h {
            return Err(Error::Shape(format!("initial state must have size {}", h)));
        }
        if let Some(bad) = inputs.iter().find(|x| x.len() != self.input_size()) {
            return Err(Error::Shape(format!(
                "LSTM input of size {} where {} expected",
                bad.len(),
                self.input_size()
            )));
        }
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut trace = LstmTrace {
            steps: Vec::with_capacity(inputs.len()),
        };
        let mut hidden = initial.hidden.clone();
        let mut cell = initial.cell.clone();
        for x in inputs {
            let mut gates = self.bias.values().to_vec();
            self.input_weight.matvec_acc(x, &mut gates);
            self.recurrent_weight.matvec_acc(&hidden, &mut gates);
            for v in &mut gates[..3 * h] {
                *v = sigmoid(*v);
            }
            for v in &mut gates[3 * h..] {
                *v = v.tanh();
            }
            let mut new_cell = vec![0.0; h];
            let mut cell_tanh = vec![0.0; h];
            let mut new_hidden = vec![0.0; h];
            for k in 0..h {
                let (i, f, o, g) = (gates[k], gates[h + k], gates[2 * h + k], gates[3 * h + k]);
                new_cell[k] = f * cell[k] + i * g;
                cell_tanh[k] = new_cell[k].tanh();
                new_hidden[k] = o * cell_tanh[k];
            }
            trace.steps.push(Step {
                input: x.clone(),
                prev_hidden: std::mem::replace(&mut hidden, new_hidden),
                prev_cell: std::mem::replace(&mut cell, new_cell),
                gates,
                cell_tanh,
            });
            outputs.push(hidden.clone());
        }
        Ok((outputs, trace))
    }

    /// Backpropagates `d_outputs` (one gradient per output step), accumulating
    /// into `grad`; returns the gradient with respect to each input.
    pub fn backward(&self, trace: &LstmTrace, d_outputs: &[Vec<f64>], grad: &mut LstmParams) -> Vec<Vec<f64>> {
        let h = self.hidden_size();
        let steps = &trace.steps;
        debug_assert_eq!(steps.len(), d_outputs.len());
        let mut d_inputs = vec![Vec::new(); steps.len()];
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        for t in (0..steps.len()).rev() {
            let s = &steps[t];
            for k in 0..h {
                let (i, f, o, g) = (s.gates[k], s.gates[h + k], s.gates[2 * h + k], s.gates[3 * h + k]);
                let dh = d_outputs[t][k] + dh_next[k];
                let tc = s.cell_tanh[k];
                let d_o = dh * tc;
                let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                let d_i = dc * g;
                let d_g = dc * i;
                let d_f = dc * s.prev_cell[k];
                dc_next[k] = dc * f;
                dz[k] = d_i * i * (1.0 - i);
                dz[h + k] = d_f * f * (1.0 - f);
                dz[2 * h + k] = d_o * o * (1.0 - o);
                dz[3 * h + k] = d_g * (1.0 - g * g);
            }
            grad.input_weight.outer_acc(&dz, &s.input);
            grad.recurrent_weight.outer_acc(&dz, &s.prev_hidden);
            super::tensor::axpy(1.0, &dz, grad.bias.values_mut());
            let mut dx = vec![0.0; s.input.len()];
            self.input_weight.matvec_t_acc(&dz, &mut dx);
            d_inputs[t] = dx;
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            self.recurrent_weight.matvec_t_acc(&dz, &mut dh_next);
        }
        d_inputs
    }
}

impl Params for LstmParams {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        f(join(prefix, "input_weight"), &self.input_weight);
        f(join(prefix, "recurrent_weight"), &self.recurrent_weight);
        f(join(prefix, "bias"), &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        f(&mut self.input_weight);
        f(&mut self.recurrent_weight);
        f(&mut self.bias);
    }
}

/// Forward LSTM from a zero initial state.
pub fn lstm_forward(inputs: &[Vec<f64>], params: &LstmParams, initial: &LstmState) -> Result<Vec<Vec<f64>>> {
    Ok(params.forward(inputs, initial)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiLstm {
    pub forward: LstmParams,
    pub backward: LstmParams,
}

#[derive(Clone, Debug, Default)]
pub struct BiLstmTrace {
    forward: LstmTrace,
    backward: LstmTrace,
}

impl BiLstm {
    pub fn new<R: Rng>(input_size: usize, hidden_size: usize, scale: f64, rng: &mut R) -> Self {
        let forward = LstmParams::new(input_size, hidden_size, scale, rng);
        let backward = LstmParams::new(input_size, hidden_size, scale, rng);
        BiLstm { forward, backward }
    }

    pub fn output_size(&self) -> usize {
        self.forward.hidden_size() + self.backward.hidden_size()
    }

    /// `output[t] = [forward_t; backward_t]`, where the backward direction
    /// reads the sequence right to left.
    pub fn run(&self, inputs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, BiLstmTrace)> {
        let (fwd, ftrace) = self
            .forward
            .forward(inputs, &LstmState::zeros(self.forward.hidden_size()))?;
        let reversed: Vec<Vec<f64>> = inputs.iter().rev().cloned().collect();
        let (bwd, btrace) = self
            .backward
            .forward(&reversed, &LstmState::zeros(self.backward.hidden_size()))?;
        let n = inputs.len();
        let outputs = (0..n)
            .map(|t| {
                let mut v = fwd[t].clone();
                v.extend_from_slice(&bwd[n - 1 - t]);
                v
            })
            .collect();
        Ok((
            outputs,
            BiLstmTrace {
                forward: ftrace,
                backward: btrace,
            },
        ))
    }

    pub fn backward_pass(&self, trace: &BiLstmTrace, d_outputs: &[Vec<f64>], grad: &mut BiLstm) -> Vec<Vec<f64>> {
        let hf = self.forward.hidden_size();
        let n = d_outputs.len();
        let d_fwd: Vec<Vec<f64>> = d_outputs.iter().map(|d| d[..hf].to_vec()).collect();
        let d_bwd: Vec<Vec<f64>> = (0..n).map(|r| d_outputs[n - 1 - r][hf..].to_vec()).collect();
        let mut dx = self.forward.backward(&trace.forward, &d_fwd, &mut grad.forward);
        let dx_rev = self.backward.backward(&trace.backward, &d_bwd, &mut grad.backward);
        for (t, d) in dx.iter_mut().enumerate() {
            super::tensor::axpy(1.0, &dx_rev[n - 1 - t], d);
        }
        dx
    }
}

impl Params for BiLstm {
    fn visit<'a>(&'a self, prefix: &str, f: &mut dyn FnMut(String, &'a Tensor)) {
        self.forward.visit(&join(prefix, "forward"), f);
        self.backward.visit(&join(prefix, "backward"), f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut Tensor)) {
        self.forward.visit_mut(f);
        self.backward.visit_mut(f);
    }
}

/// Concatenated forward/backward encodings of `inputs`.
pub fn bilstm_forward(inputs: &[Vec<f64>], fwd: &LstmParams, bwd: &LstmParams) -> Result<Vec<Vec<f64>>> {
    let bi = BiLstm {
        forward: fwd.clone(),
        backward: bwd.clone(),
    };
    Ok(bi.run(inputs)?.0)
}
