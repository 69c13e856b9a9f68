//! Named trainable parameters. A [`ParamSet`] preserves construction order,
//! which fixes initializer draw order, optimizer update order, and the
//! checkpoint blob layout all at once.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::Gradients;
use crate::tensor::TensorBase;

pub type Tensor = TensorBase<f64>;

#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    /// Populated by a backward sweep; same shape as `value` when present.
    pub grad: Option<Tensor>,
    /// Adagrad squared-gradient accumulator, same shape as `value`.
    pub accumulator: Tensor,
}

#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    items: Vec<Parameter>,
    index: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        let accumulator = TensorBase::zeros(value.shape());
        self.index.insert(name.clone(), self.items.len());
        self.items.push(Parameter { name, value, grad: None, accumulator });
        Ok(())
    }

    /// Insert with an explicit optimizer accumulator; checkpoint restore.
    pub fn insert_with_state(
        &mut self,
        name: impl Into<String>,
        value: Tensor,
        accumulator: Tensor,
    ) -> Result<()> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter name {name}")));
        }
        if !value.same_shape(&accumulator) {
            return Err(Error::Shape(format!(
                "parameter {name}: value and accumulator shapes differ"
            )));
        }
        self.index.insert(name.clone(), self.items.len());
        self.items.push(Parameter { name, value, grad: None, accumulator });
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Parameter> {
        self.index.get(name).map(|&i| &self.items[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        let i = *self.index.get(name)?;
        Some(&mut self.items[i])
    }

    /// Parameters in construction order.
    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.items.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.items.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Total scalar count across all parameters.
    pub fn scalar_count(&self) -> usize {
        self.items.iter().map(|p| p.value.numel()).sum()
    }

    /// Store a backward sweep's gradients on the matching parameters.
    /// Parameters absent from `grads` get their slot cleared: they did not
    /// participate in this pass.
    pub fn set_grads(&mut self, grads: &Gradients<f64>) {
        for p in &mut self.items {
            p.grad = grads.get(&p.name).cloned();
        }
    }

    pub fn clear_grads(&mut self) {
        for p in &mut self.items {
            p.grad = None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut ps = ParamSet::new();
        ps.insert("a", Tensor::zeros(&[2])).unwrap();
        assert!(ps.insert("a", Tensor::zeros(&[2])).is_err());
    }

    #[test]
    fn iteration_follows_insertion_order() {
        let mut ps = ParamSet::new();
        for name in ["z", "a", "m"] {
            ps.insert(name, Tensor::zeros(&[1])).unwrap();
        }
        let names: Vec<&str> = ps.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["z", "a", "m"]);
    }
}
