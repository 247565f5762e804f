//! First-order MAML baseline: θ is an initialization adapted per task by
//! gradient steps on the support loss, and the outer update uses the query
//! gradient taken at the adapted parameters.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::task::Episode;
use crate::nn::Mlp;
use crate::optim::{adam_step, AdamState};
use crate::params::ParamStore;
use crate::tape::Tape;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FomamlConfig {
    pub m: usize,
    pub q: usize,
    pub episodes: usize,
    pub lr: f64,
    /// Inner learning rate `α`.
    pub inner_lr: f64,
    pub inner_steps: usize,
    pub hidden: Vec<usize>,
}

impl Default for FomamlConfig {
    fn default() -> Self {
        Self {
            m: 3,
            q: 2,
            episodes: 64,
            lr: 1e-4,
            inner_lr: 1e-4,
            inner_steps: 1,
            hidden: vec![512, 512],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FomamlState {
    pub cfg: FomamlConfig,
    pub theta: ParamStore,
    pub model: Mlp,
    pub adam: AdamState,
    pub step: u64,
}

fn mse_and_grads(
    model: &Mlp,
    store: &ParamStore,
    pairs: &[(f64, f64)],
) -> Result<(f64, BTreeMap<String, Tensor>)> {
    let mut tape = Tape::new();
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let x = tape.constant(Tensor::column(&xs)?);
    let y = tape.constant(Tensor::column(&ys)?);
    let pred = model.forward(&mut tape, store, x)?;
    let err = tape.sub(pred, y)?;
    let sq = tape.square(err)?;
    let loss = tape.mean(sq)?;
    Ok((tape.item(loss)?, tape.backward(loss)?.params(&tape)))
}

pub(crate) fn mse(model: &Mlp, store: &ParamStore, pairs: &[(f64, f64)]) -> Result<f64> {
    Ok(mse_and_grads(model, store, pairs)?.0)
}

impl FomamlState {
    pub fn new<R: Rng + ?Sized>(cfg: FomamlConfig, rng: &mut R) -> Result<Self> {
        if !(cfg.inner_lr >= 0.0) {
            return Err(Error::config("inner learning rate must be >= 0"));
        }
        let mut theta = ParamStore::new();
        let mut sizes = vec![1];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let model = Mlp::init(&mut theta, "model", &sizes, rng)?;
        Ok(Self {
            adam: AdamState::new(cfg.lr),
            cfg,
            theta,
            model,
            step: 0,
        })
    }

    /// Parameters after the inner gradient steps on `support`.
    pub fn adapt(&self, support: &[(f64, f64)]) -> Result<ParamStore> {
        let mut adapted = self.theta.clone();
        for _ in 0..self.cfg.inner_steps {
            let (_, grads) = mse_and_grads(&self.model, &adapted, support)?;
            for (name, g) in grads {
                let p = adapted.get_mut(&name).expect("gradient of a model parameter");
                for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
                    *w -= self.cfg.inner_lr * d;
                }
            }
        }
        Ok(adapted)
    }

    pub fn predict(&self, store: &ParamStore, xs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.model.eval(store, &Tensor::column(xs)?)?.into_data())
    }

    /// Support MSE before and after adaptation.
    pub fn inner_improvement(&self, episode: &Episode) -> Result<(f64, f64)> {
        let before = mse(&self.model, &self.theta, &episode.support)?;
        let after = mse(&self.model, &self.adapt(&episode.support)?, &episode.support)?;
        Ok((before, after))
    }

    /// One outer update; returns the mean query MSE at the adapted parameters.
    pub fn fomaml_step(&mut self, episodes: &[Episode]) -> Result<f64> {
        if episodes.is_empty() {
            return Err(Error::contract("fomaml step needs at least one episode"));
        }
        let mut total: BTreeMap<String, Tensor> = BTreeMap::new();
        let mut loss = 0.0;
        for ep in episodes {
            let adapted = self.adapt(&ep.support)?;
            let (l, grads) = mse_and_grads(&self.model, &adapted, &ep.query)?;
            loss += l;
            for (name, g) in grads {
                match total.get_mut(&name) {
                    Some(acc) => {
                        for (a, d) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += d;
                        }
                    }
                    None => {
                        total.insert(name, g);
                    }
                }
            }
        }
        let scale = 1.0 / episodes.len() as f64;
        for g in total.values_mut() {
            for v in g.data_mut() {
                *v *= scale;
            }
        }
        adam_step(&mut self.theta, &total, &mut self.adam).map_err(|e| match e {
            Error::Domain { .. } => Error::Diverged {
                what: "fomaml_step",
                step: self.step as usize + 1,
                stage: "meta".into(),
            },
            e => e,
        })?;
        self.step += 1;
        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(Error::Diverged {
                what: "fomaml_step",
                step: self.step as usize,
                stage: "meta".into(),
            });
        }
        Ok(loss)
    }
}
