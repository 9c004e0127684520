use indexmap::IndexMap;

use super::{Tensor, TensorError};

/// Named parameter tensors in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: IndexMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a new parameter. Names must be unique.
    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<(), TensorError> {
        let name = name.into();
        if self.params.contains_key(&name) {
            return Err(TensorError::DuplicateParam(name));
        }
        self.params.insert(name, value);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Total number of scalar values across all parameters.
    pub fn numel(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// A zero tensor for every parameter, same order and shapes.
    pub fn zeros_like(&self) -> Gradients {
        Gradients {
            grads: self
                .params
                .iter()
                .map(|(k, v)| (k.clone(), Tensor::zeros(v.shape())))
                .collect(),
        }
    }
}

/// Gradient of a scalar loss with respect to every parameter of a store.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    grads: IndexMap<String, Tensor>,
}

impl Gradients {
    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.grads.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.grads.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub(crate) fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.grads.get_mut(name)
    }

    /// Elementwise `self += other`. Both must come from the same store.
    pub fn accumulate(&mut self, other: &Gradients) {
        for (g, (_, o)) in self.grads.values_mut().zip(&other.grads) {
            g.add_assign(o);
        }
    }

    pub fn scale(&mut self, c: f64) {
        for g in self.grads.values_mut() {
            for x in g.data_mut() {
                *x *= c;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.grads.values().fold(0.0, |m, g| m.max(g.max_abs()))
    }
}
