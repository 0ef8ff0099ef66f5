use super::layer::Param;
use super::tensor::Real;
use crate::error::{Error, Result};

/// Moment estimates of one parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<T: Real>(params: &mut [T], grads: &[T], state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "adam step over {} params, {} grads, {} moments",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let b1 = T::of(state.beta1);
    let b2 = T::of(state.beta2);
    let one = T::one();
    let c1 = T::of(1.0 / (1.0 - state.beta1.powi(t)));
    let c2 = T::of(1.0 / (1.0 - state.beta2.powi(t)));
    let lr = T::of(lr);
    let eps = T::of(state.eps);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m * c1;
        let v_hat = *v * c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam over an ordered list of parameters; the order must be stable across steps.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    states: Vec<AdamState<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Adam { lr, states: Vec::new() }
    }

    pub fn step(&mut self, params: Vec<&mut Param<T>>) -> Result<()> {
        if self.states.is_empty() {
            self.states = params.iter().map(|p| AdamState::new(p.value.len())).collect();
        }
        if self.states.len() != params.len() {
            return Err(Error::Shape("parameter list changed between Adam steps".into()));
        }
        for (p, st) in params.into_iter().zip(self.states.iter_mut()) {
            let Param { value, grad, .. } = p;
            adam_step(value.data_mut(), grad.data(), st, self.lr)?;
        }
        Ok(())
    }
}
