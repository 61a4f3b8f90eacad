//! Small shared network building blocks: linear layers and one-hidden-layer
//! MLPs, each with owned-weight and tape-node views.

use crate::error::{Error, Result};
use crate::numerics::{init_normal, NodeId, ParamNodes, ParamStore, Tape, Tensor};

fn fetch(store: &ParamStore, name: &str) -> Result<Tensor> {
    store
        .get(name)
        .cloned()
        .ok_or_else(|| Error::contract(format!("missing parameter {name}")))
}

/// `y = W x + b`.
#[derive(Debug, Clone)]
pub struct LinearWeights {
    pub w: Tensor,
    pub b: Tensor,
}

impl LinearWeights {
    pub fn init(seed: u64, name: &str, dim_in: usize, dim_out: usize, std: f64, bias: f64) -> Result<Self> {
        Ok(LinearWeights {
            w: init_normal(seed, &format!("{name}.w"), vec![dim_out, dim_in], std)?,
            b: Tensor::full(vec![dim_out], bias),
        })
    }

    pub fn register(&self, store: &mut ParamStore, prefix: &str) {
        store.insert(format!("{prefix}.w"), self.w.clone());
        store.insert(format!("{prefix}.b"), self.b.clone());
    }

    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(LinearWeights { w: fetch(store, &format!("{prefix}.w"))?, b: fetch(store, &format!("{prefix}.b"))? })
    }

    pub fn constants(&self, tape: &mut Tape) -> LinearNodes {
        LinearNodes { w: tape.constant(self.w.clone()), b: tape.constant(self.b.clone()) }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinearNodes {
    pub w: NodeId,
    pub b: NodeId,
}

impl LinearNodes {
    pub fn from_params(params: &ParamNodes, prefix: &str) -> Result<Self> {
        Ok(LinearNodes { w: params.id(&format!("{prefix}.w"))?, b: params.id(&format!("{prefix}.b"))? })
    }

    pub fn forward(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        tape.linear(self.w, self.b, x)
    }
}

/// Plain 3x3 convolution layer with bias.
#[derive(Debug, Clone)]
pub struct Conv2dWeights {
    pub w: Tensor,
    pub b: Tensor,
}

impl Conv2dWeights {
    pub fn init(seed: u64, name: &str, c_in: usize, c_out: usize) -> Result<Self> {
        let std = (2.0 / (9.0 * c_in as f64)).sqrt();
        Ok(Conv2dWeights {
            w: init_normal(seed, &format!("{name}.w"), vec![c_out, c_in, 3, 3], std)?,
            b: Tensor::zeros(vec![c_out]),
        })
    }

    pub fn register(&self, store: &mut ParamStore, prefix: &str) {
        store.insert(format!("{prefix}.w"), self.w.clone());
        store.insert(format!("{prefix}.b"), self.b.clone());
    }

    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(Conv2dWeights { w: fetch(store, &format!("{prefix}.w"))?, b: fetch(store, &format!("{prefix}.b"))? })
    }

    pub fn constants(&self, tape: &mut Tape) -> Conv2dNodes {
        Conv2dNodes { w: tape.constant(self.w.clone()), b: tape.constant(self.b.clone()) }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Conv2dNodes {
    pub w: NodeId,
    pub b: NodeId,
}

impl Conv2dNodes {
    pub fn from_params(params: &ParamNodes, prefix: &str) -> Result<Self> {
        Ok(Conv2dNodes { w: params.id(&format!("{prefix}.w"))?, b: params.id(&format!("{prefix}.b"))? })
    }

    pub fn forward(&self, tape: &mut Tape, x: NodeId, stride: usize) -> Result<NodeId> {
        let y = tape.conv2d(x, self.w, stride)?;
        tape.add(y, self.b)
    }
}

/// One hidden layer with leaky-relu(0.2).
#[derive(Debug, Clone)]
pub struct MlpWeights {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
}

impl MlpWeights {
    pub fn init(seed: u64, name: &str, dim_in: usize, hidden: usize, dim_out: usize) -> Result<Self> {
        Ok(MlpWeights {
            w1: init_normal(seed, &format!("{name}.w1"), vec![hidden, dim_in], (2.0 / dim_in as f64).sqrt())?,
            b1: Tensor::zeros(vec![hidden]),
            w2: init_normal(seed, &format!("{name}.w2"), vec![dim_out, hidden], 1.0 / (hidden as f64).sqrt())?,
            b2: Tensor::zeros(vec![dim_out]),
        })
    }

    pub fn register(&self, store: &mut ParamStore, prefix: &str) {
        store.insert(format!("{prefix}.w1"), self.w1.clone());
        store.insert(format!("{prefix}.b1"), self.b1.clone());
        store.insert(format!("{prefix}.w2"), self.w2.clone());
        store.insert(format!("{prefix}.b2"), self.b2.clone());
    }

    pub fn from_store(store: &ParamStore, prefix: &str) -> Result<Self> {
        Ok(MlpWeights {
            w1: fetch(store, &format!("{prefix}.w1"))?,
            b1: fetch(store, &format!("{prefix}.b1"))?,
            w2: fetch(store, &format!("{prefix}.w2"))?,
            b2: fetch(store, &format!("{prefix}.b2"))?,
        })
    }

    pub fn constants(&self, tape: &mut Tape) -> MlpNodes {
        MlpNodes {
            w1: tape.constant(self.w1.clone()),
            b1: tape.constant(self.b1.clone()),
            w2: tape.constant(self.w2.clone()),
            b2: tape.constant(self.b2.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MlpNodes {
    pub w1: NodeId,
    pub b1: NodeId,
    pub w2: NodeId,
    pub b2: NodeId,
}

impl MlpNodes {
    pub fn from_params(params: &ParamNodes, prefix: &str) -> Result<Self> {
        Ok(MlpNodes {
            w1: params.id(&format!("{prefix}.w1"))?,
            b1: params.id(&format!("{prefix}.b1"))?,
            w2: params.id(&format!("{prefix}.w2"))?,
            b2: params.id(&format!("{prefix}.b2"))?,
        })
    }

    pub fn forward(&self, tape: &mut Tape, x: NodeId) -> Result<NodeId> {
        let h = tape.linear(self.w1, self.b1, x)?;
        let h = tape.leaky_relu(h, 0.2);
        tape.linear(self.w2, self.b2, h)
    }
}
