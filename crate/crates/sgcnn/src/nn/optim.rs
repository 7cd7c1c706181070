use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::params::{Gradients, ParameterStore, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl OptimizerKind {
    pub fn adam_default() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 64,
            epochs: 100,
            optimizer: OptimizerKind::adam_default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

/// First/second moment buffers for Adam, per parameter.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub first_moment: BTreeMap<String, Tensor>,
    pub second_moment: BTreeMap<String, Tensor>,
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    state: OptimizerState,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            state: OptimizerState::default(),
        }
    }

    pub fn with_state(kind: OptimizerKind, learning_rate: f64, state: OptimizerState) -> Self {
        Self {
            kind,
            learning_rate,
            state,
        }
    }

    pub fn state(&self) -> &OptimizerState {
        &self.state
    }

    /// One update over every parameter in sorted-name order.
    pub fn step(&mut self, store: &mut ParameterStore, grads: &Gradients) -> Result<()> {
        match self.kind {
            OptimizerKind::Sgd => {
                for (name, tensor) in store.iter_mut() {
                    let g = grads.get(name)?;
                    for (p, gi) in tensor.data.iter_mut().zip(&g.data) {
                        *p -= self.learning_rate * gi;
                    }
                }
            }
            OptimizerKind::Adam {
                beta1,
                beta2,
                epsilon,
            } => {
                self.state.step += 1;
                let t = self.state.step as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for (name, tensor) in store.iter_mut() {
                    let g = grads.get(name)?;
                    let m = self
                        .state
                        .first_moment
                        .entry(name.to_owned())
                        .or_insert_with(|| Tensor::zeros(&tensor.shape));
                    let v = self
                        .state
                        .second_moment
                        .entry(name.to_owned())
                        .or_insert_with(|| Tensor::zeros(&tensor.shape));
                    for i in 0..tensor.data.len() {
                        let gi = g.data[i];
                        m.data[i] = beta1 * m.data[i] + (1.0 - beta1) * gi;
                        v.data[i] = beta2 * v.data[i] + (1.0 - beta2) * gi * gi;
                        let m_hat = m.data[i] / bc1;
                        let v_hat = v.data[i] / bc2;
                        tensor.data[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}
