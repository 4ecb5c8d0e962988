use std::collections::HashMap;

use rand::Rng;

use crate::error::{SainError, TensorError};
use crate::tensor::{Real, Tensor};

/// Handle to a tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named, ordered collection of trainable tensors with gradient slots.
#[derive(Debug, Clone)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
    index: HashMap<String, ParamId>,
}

impl<T: Real> Default for ParamStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> ParamStore<T> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Registers a tensor. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = ParamId(self.tensors.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor);
        id
    }

    /// Registers a tensor drawn uniformly from `±bound`.
    pub fn insert_uniform<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        bound: f64,
        rng: &mut R,
    ) -> ParamId {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| T::from_f64_lossy(rng.gen_range(-bound..=bound)))
            .collect();
        self.insert(name, Tensor::new(shape, data).expect("shape/data agree"))
    }

    pub fn insert_zeros(&mut self, name: impl Into<String>, shape: Vec<usize>) -> ParamId {
        self.insert(name, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<T>> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor<T>)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .enumerate()
            .map(|(i, (n, t))| (ParamId(i), n.as_str(), t))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zero_grads(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    /// Gives every parameter a gradient slot, zero-filled where absent.
    pub fn ensure_grads(&mut self) {
        for t in &mut self.tensors {
            t.grad_mut();
        }
    }

    /// Adds `grads` into each parameter's gradient slot.
    pub fn accumulate(&mut self, grads: &Gradients<T>) {
        for (id, g) in grads.iter() {
            let slot = self.tensors[id.0].grad_mut();
            for (s, &v) in slot.iter_mut().zip(g) {
                *s = *s + v;
            }
        }
    }

    /// Global L2 norm over all populated gradient slots.
    pub fn grad_norm(&self) -> f64 {
        self.tensors
            .iter()
            .filter_map(|t| t.grad())
            .flat_map(|g| g.iter())
            .map(|v| {
                let v = v.to_f64().unwrap_or(f64::NAN);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Scales every gradient slot by `factor`.
    pub fn scale_grads(&mut self, factor: T) {
        for t in &mut self.tensors {
            if let Some(g) = t.grad.as_mut() {
                g.iter_mut().for_each(|v| *v = *v * factor);
            }
        }
    }

    pub fn grad_of(&self, id: ParamId) -> Result<&[T], SainError> {
        self.get(id)
            .grad()
            .ok_or_else(|| SainError::MissingGrad(self.name(id).to_string()))
    }

    /// Converts every tensor to another precision, dropping gradients.
    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(Tensor::cast).collect(),
            index: self.index.clone(),
        }
    }

    /// Replaces a tensor's values, checking the shape.
    pub fn set_values(&mut self, id: ParamId, values: Vec<T>) -> Result<(), TensorError> {
        let t = &mut self.tensors[id.0];
        if t.len() != values.len() {
            return Err(TensorError::Dimension {
                op: "set_values",
                detail: format!("expected {} values, got {}", t.len(), values.len()),
            });
        }
        t.data_mut().copy_from_slice(&values);
        Ok(())
    }
}

/// Per-parameter gradients collected from one backward pass.
#[derive(Debug, Clone, Default)]
pub struct Gradients<T> {
    entries: Vec<(ParamId, Vec<T>)>,
}

impl<T: Real> Gradients<T> {
    pub(crate) fn from_entries(mut entries: Vec<(ParamId, Vec<T>)>) -> Self {
        entries.sort_by_key(|(id, _)| *id);
        Gradients { entries }
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &[T])> {
        self.entries.iter().map(|(id, g)| (*id, g.as_slice()))
    }

    pub fn get(&self, id: ParamId) -> Option<&[T]> {
        self.entries
            .binary_search_by_key(&id, |(i, _)| *i)
            .ok()
            .map(|pos| self.entries[pos].1.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
