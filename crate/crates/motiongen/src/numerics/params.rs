//! Named, ordered parameter storage shared by models and checkpoints.

use std::collections::HashMap;

use super::tape::{NodeId, Tape};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Ordered map of parameter name to tensor. Insertion order defines the
/// checkpoint load order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    map: HashMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        let name = name.into();
        if !self.map.contains_key(&name) {
            self.names.push(name.clone());
        }
        self.map.insert(name, t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.map.get(name)
    }

    pub fn set(&mut self, name: &str, t: Tensor) -> Result<()> {
        match self.map.get_mut(name) {
            Some(slot) => {
                if slot.shape() != t.shape() {
                    return Err(Error::shape(format!(
                        "parameter {name}: cannot replace shape {:?} with {:?}",
                        slot.shape(),
                        t.shape()
                    )));
                }
                *slot = t;
                Ok(())
            }
            None => Err(Error::contract(format!("unknown parameter {name}"))),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn total_elements(&self) -> usize {
        self.map.values().map(Tensor::numel).sum()
    }

    /// Insert every parameter into a tape as a differentiable leaf.
    pub fn leaves(&self, tape: &mut Tape) -> HashMap<String, NodeId> {
        let mut out = HashMap::new();
        for name in &self.names {
            let t = self.map[name].clone().with_grad();
            out.insert(name.clone(), tape.leaf(t));
        }
        out
    }

    /// Insert all parameters, marking only those under `grad_prefix` as
    /// differentiation targets; the rest enter as constants.
    pub fn nodes_with_grad_prefix(&self, tape: &mut Tape, grad_prefix: &str) -> ParamNodes {
        let mut ids = HashMap::new();
        for name in &self.names {
            let mut t = self.map[name].clone();
            t.requires_grad = name.starts_with(grad_prefix);
            ids.insert(name.clone(), tape.leaf(t));
        }
        ParamNodes { ids }
    }

    /// Names under a prefix, in insertion order.
    pub fn names_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.names.iter().filter(|n| n.starts_with(prefix)).cloned().collect()
    }
}

/// Node-id view of parameters inside one tape, with name lookup.
pub struct ParamNodes {
    pub ids: HashMap<String, NodeId>,
}

impl ParamNodes {
    pub fn from_store(store: &ParamStore, tape: &mut Tape) -> Self {
        ParamNodes { ids: store.leaves(tape) }
    }

    pub fn id(&self, name: &str) -> Result<NodeId> {
        self.ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::contract(format!("parameter node {name} missing")))
    }
}
