//! Named parameter storage and graph binding.
//!
//! Parameters live outside any graph as plain tensors, keyed by
//! slash-separated names in a sorted map so every iteration order (Adam
//! updates, checkpoints, gradient reductions) is deterministic. A forward
//! pass binds them into a graph as trainable leaves and remembers the
//! name-to-node mapping for gradient collection.

use crate::error::{NnError, Result};
use crate::graph::{Gradients, Graph, Var};
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamSet<T> {
    map: BTreeMap<String, Tensor<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        Self {
            map: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor<T>) {
        let name = name.into();
        debug_assert!(!self.map.contains_key(&name), "duplicate parameter {name}");
        self.map.insert(name, value);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<T>> {
        self.map
            .get(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<T>> {
        self.map
            .get_mut(name)
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<T>)> {
        self.map.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor<T>)> {
        self.map.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.map.keys()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.map.values().map(|t| t.len()).sum()
    }

    /// Insert every parameter into `g` as a trainable leaf.
    pub fn bind(&self, g: &mut Graph<T>) -> Binding {
        let mut vars = BTreeMap::new();
        for (name, value) in &self.map {
            vars.insert(name.clone(), g.param(value.clone()));
        }
        Binding { vars }
    }

    /// Convert element type (used when loading f32 checkpoints into f64
    /// gradient-test stacks).
    pub fn convert<U: Scalar>(&self) -> ParamSet<U> {
        let mut out = ParamSet::new();
        for (name, t) in &self.map {
            let data: Vec<U> = t.data().iter().map(|v| U::from_f64(v.to_f64())).collect();
            out.insert(
                name.clone(),
                Tensor::from_vec(t.rows(), t.cols(), data).unwrap(),
            );
        }
        out
    }
}

/// Name-to-leaf mapping for one graph.
#[derive(Debug, Clone)]
pub struct Binding {
    vars: BTreeMap<String, Var>,
}

impl Binding {
    pub fn var(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| NnError::UnknownParam(name.to_string()))
    }

    /// Collect named gradients after a backward pass. Parameters with no
    /// path to the loss get explicit zero gradients so reductions and the
    /// optimizer see a complete, consistently-ordered map.
    pub fn collect_grads<T: Scalar>(
        &self,
        g: &Graph<T>,
        grads: &Gradients<T>,
        params: &ParamSet<T>,
    ) -> BTreeMap<String, Tensor<T>> {
        let mut out = BTreeMap::new();
        for (name, var) in &self.vars {
            let grad = match grads.get(*var) {
                Some(t) => t.clone(),
                None => {
                    let (r, c) = params
                        .get(name)
                        .map(|t| t.shape())
                        .unwrap_or_else(|_| g.value(*var).shape());
                    Tensor::zeros(r, c)
                }
            };
            out.insert(name.clone(), grad);
        }
        out
    }
}
