//! Fully connected layers whose weights live in a [`ParamStore`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{glorot_uniform, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Stack of affine layers with ReLU between them and a linear output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    prefix: String,
    sizes: Vec<usize>,
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`.
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        sizes: &[usize],
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::config(format!(
                "layer sizes {sizes:?} for {prefix} must have >= 2 positive entries"
            )));
        }
        let mlp = Self {
            prefix: prefix.to_string(),
            sizes: sizes.to_vec(),
        };
        for (l, w) in sizes.windows(2).enumerate() {
            store.insert(mlp.weight(l), glorot_uniform(rng, w[0], w[1]))?;
            store.insert(mlp.bias(l), Tensor::zeros(1, w[1]))?;
        }
        Ok(mlp)
    }

    fn weight(&self, layer: usize) -> String {
        format!("{}.{}.w", self.prefix, layer)
    }

    fn bias(&self, layer: usize) -> String {
        format!("{}.{}.b", self.prefix, layer)
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("validated at init")
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_names(&self) -> Vec<String> {
        (0..self.layers())
            .flat_map(|l| [self.weight(l), self.bias(l)])
            .collect()
    }

    /// Affine map of one layer, no activation.
    pub fn affine(&self, tape: &mut Tape, store: &ParamStore, layer: usize, x: Var) -> Result<Var> {
        let w = store.var(tape, &self.weight(layer))?;
        let b = store.var(tape, &self.bias(layer))?;
        let h = tape.matmul(x, w)?;
        tape.add(h, b)
    }

    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = x;
        for l in 0..self.layers() {
            h = self.affine(tape, store, l, h)?;
            if l + 1 < self.layers() {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }

    /// Forward pass on a plain tensor, discarding the tape.
    pub fn eval(&self, store: &ParamStore, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let y = self.forward(&mut tape, store, xv)?;
        Ok(tape.value(y).clone())
    }
}

/// Parameter count of an MLP with the given layer sizes.
pub fn mlp_param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}
