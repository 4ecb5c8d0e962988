//! Bias-corrected Adam.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Checkpoint, ParamStore};
use crate::error::{Result, SainError};
use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates aligned with the parameters of one store.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub fn new(store: &ParamStore<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<T>> = store.iter().map(|(_, _, t)| vec![T::zero(); t.len()]).collect();
        AdamState {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// Appends both moment sets under `adam.m.` and `adam.v.`.
    pub fn push_to(&self, ck: &mut Checkpoint, store: &ParamStore<T>) {
        for (id, name, t) in store.iter() {
            let shape = t.shape().to_vec();
            let i = id.index();
            ck.push(
                format!("adam.m.{name}"),
                &Tensor::new(shape.clone(), self.m[i].clone()).expect("moment shape"),
            );
            ck.push(
                format!("adam.v.{name}"),
                &Tensor::new(shape, self.v[i].clone()).expect("moment shape"),
            );
        }
    }

    pub fn restore(ck: &Checkpoint, store: &ParamStore<T>, config: AdamConfig, step: u64) -> Result<Self> {
        let mut state = AdamState::new(store, config);
        state.step = step;
        for (id, name, t) in store.iter() {
            let i = id.index();
            for (prefix, slot) in [("adam.m.", &mut state.m[i]), ("adam.v.", &mut state.v[i])] {
                let stored = ck.tensor::<T>(&format!("{prefix}{name}"))?;
                if stored.shape() != t.shape() {
                    return Err(SainError::Incompatible(format!("optimizer moment {prefix}{name} has wrong shape")));
                }
                *slot = stored.into_data();
            }
        }
        Ok(state)
    }
}

/// One Adam update with learning rate `lr` using the gradients held in
/// `store`.
pub fn adam_step<T: Real>(store: &mut ParamStore<T>, state: &mut AdamState<T>, lr: f64) -> Result<()> {
    if state.m.len() != store.len() {
        return Err(SainError::Incompatible("optimizer state does not match parameters".into()));
    }
    let ids: Vec<_> = store.ids().collect();
    let grads = ids
        .iter()
        .map(|&id| store.grad_of(id).map(<[T]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let b1 = T::from_f64_lossy(c.beta1);
    let b2 = T::from_f64_lossy(c.beta2);
    let one = T::one();
    let corr1 = T::from_f64_lossy(1.0 - c.beta1.powi(t));
    let corr2 = T::from_f64_lossy(1.0 - c.beta2.powi(t));
    let eps = T::from_f64_lossy(c.eps);
    let lr = T::from_f64_lossy(lr);
    for (k, &id) in ids.iter().enumerate() {
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        let data = store.get_mut(id).data_mut();
        for (((p, &g), mk), vk) in data.iter_mut().zip(&grads[k]).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mk = b1 * *mk + (one - b1) * g;
            *vk = b2 * *vk + (one - b2) * g * g;
            let mhat = *mk / corr1;
            let vhat = *vk / corr2;
            *p = *p - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}
