use rand_chacha::ChaCha8Rng;

use super::layer::{Layer, Mode, Param};
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Slot<T> {
    pub name: String,
    pub frozen: bool,
    pub layer: Layer<T>,
}

/// Sequential stack of layers ending in a softmax.
#[derive(Debug, Clone)]
pub struct Network<T> {
    pub slots: Vec<Slot<T>>,
}

impl<T: Real> Network<T> {
    pub fn new(slots: Vec<Slot<T>>) -> Result<Self> {
        match slots.last() {
            Some(Slot {
                layer: Layer::Softmax(_),
                ..
            }) => Ok(Network { slots }),
            _ => Err(Error::Shape("network must end in a softmax layer".into())),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    fn softmax_index(&self) -> usize {
        self.slots.len() - 1
    }

    /// Runs layers `start..end`; any non-finite activation is an error.
    pub fn forward_range(
        &mut self,
        x: &Tensor<T>,
        start: usize,
        end: usize,
        mode: Mode,
        rng: &mut ChaCha8Rng,
    ) -> Result<Tensor<T>> {
        let mut cur = x.clone();
        for slot in &mut self.slots[start..end] {
            cur = slot.layer.forward(&cur, mode, rng)?;
            if !cur.is_finite() {
                return Err(Error::Divergence {
                    epoch: 0,
                    detail: format!("non-finite activation after layer `{}`", slot.name),
                });
            }
        }
        Ok(cur)
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut ChaCha8Rng) -> Result<Tensor<T>> {
        self.forward_range(x, 0, self.slots.len(), mode, rng)
    }

    /// Leading layers that are frozen and behave identically in train and infer mode;
    /// their outputs depend only on the input.
    pub fn frozen_prefix_len(&self) -> usize {
        self.slots
            .iter()
            .take_while(|s| s.frozen && s.layer.is_deterministic())
            .count()
    }

    /// Index of the first layer whose parameters are trained.
    pub fn first_trainable(&self) -> usize {
        self.slots
            .iter()
            .position(|s| !s.frozen && !s.layer.params().is_empty())
            .unwrap_or(self.slots.len())
    }

    /// Backpropagates `grad`, the gradient w.r.t. the softmax input, down to (and
    /// including) layer `stop`. Returns the gradient w.r.t. that layer's input when
    /// `want_input_grad`.
    pub fn backward_logits(&mut self, grad: &Tensor<T>, stop: usize, want_input_grad: bool) -> Result<Tensor<T>> {
        let mut cur = grad.clone();
        let top = self.softmax_index();
        for i in (stop..top).rev() {
            let need = i > stop || want_input_grad;
            cur = self.slots[i].layer.backward(&cur, need)?;
        }
        Ok(cur)
    }

    pub fn trainable_params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.slots
            .iter_mut()
            .filter(|s| !s.frozen)
            .flat_map(|s| s.layer.params_mut())
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.slots
            .iter()
            .flat_map(|s| s.layer.params())
            .map(|p| p.value.len())
            .sum()
    }

    pub fn trainable_param_count(&self) -> usize {
        self.slots
            .iter()
            .filter(|s| !s.frozen)
            .flat_map(|s| s.layer.params())
            .map(|p| p.value.len())
            .sum()
    }

    /// Every persistent array keyed `<slot>.<array>`, parameters first then buffers.
    pub fn named_arrays(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for s in &self.slots {
            for p in s.layer.params() {
                out.push((format!("{}.{}", s.name, p.name), &p.value));
            }
            for (n, b) in s.layer.buffers() {
                out.push((format!("{}.{}", s.name, n), b));
            }
        }
        out
    }

    pub fn named_arrays_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out = Vec::new();
        for s in &mut self.slots {
            let name = s.name.clone();
            let Slot { layer, .. } = s;
            match layer {
                Layer::BatchNorm(bn) => {
                    out.push((format!("{name}.gamma"), &mut bn.gamma.value));
                    out.push((format!("{name}.beta"), &mut bn.beta.value));
                    out.push((format!("{name}.running_mean"), &mut bn.running_mean));
                    out.push((format!("{name}.running_var"), &mut bn.running_var));
                }
                other => {
                    for p in other.params_mut() {
                        out.push((format!("{name}.{}", p.name), &mut p.value));
                    }
                }
            }
        }
        out
    }
}
