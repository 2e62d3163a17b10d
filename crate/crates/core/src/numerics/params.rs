use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Handle to a parameter inside a [`ParamSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// A learned tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Ordered collection of uniquely named parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    params: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::usage(format!("duplicate parameter name {name:?}")));
        }
        let grad = Tensor::zeros(value.shape());
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Parameter { name, value, grad });
        Ok(ParamId(id))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied().map(ParamId)
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    /// Total number of scalar coordinates.
    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Fresh zeroed gradient buffers shaped like this set.
    pub fn new_grads(&self) -> Grads {
        Grads {
            tensors: self
                .params
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect(),
        }
    }

    /// Adds `grads` into each parameter's accumulator.
    pub fn accumulate(&mut self, grads: &Grads) {
        for (p, g) in self.params.iter_mut().zip(&grads.tensors) {
            p.grad.add_assign(g);
        }
    }
}

/// Gradient buffers detached from a [`ParamSet`], one per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    tensors: Vec<Tensor>,
}

impl Grads {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn add_assign(&mut self, other: &Grads) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.tensors.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let mut ps = ParamSet::new();
        ps.add("w", Tensor::zeros(&[2])).unwrap();
        assert!(ps.add("w", Tensor::zeros(&[3])).is_err());
        assert_eq!(ps.id("w"), Some(ParamId(0)));
    }

    #[test]
    fn accumulate_adds_into_grad() {
        let mut ps = ParamSet::new();
        let id = ps.add("w", Tensor::zeros(&[2])).unwrap();
        let mut g = ps.new_grads();
        g.get_mut(id).values_mut().copy_from_slice(&[1.0, 2.0]);
        ps.accumulate(&g);
        ps.accumulate(&g);
        assert_eq!(ps.get(id).grad.values(), &[2.0, 4.0]);
        ps.zero_grad();
        assert_eq!(ps.get(id).grad.values(), &[0.0, 0.0]);
    }
}
