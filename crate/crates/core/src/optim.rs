//! Adam with bias correction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self, name: &str) -> Option<&Tensor> {
        self.m.get(name)
    }

    pub fn second_moment(&self, name: &str) -> Option<&Tensor> {
        self.v.get(name)
    }

    fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "adam hyperparameters lr={} beta1={} beta2={} eps={}",
                self.lr, self.beta1, self.beta2, self.eps
            )))
        }
    }
}

/// One Adam update of every parameter that has a gradient in `grads`.
///
/// Parameters absent from `grads` are treated as having zero gradient. A gradient
/// whose name is not a parameter is a contract error.
pub fn adam_step(
    params: &mut ParamStore,
    grads: &BTreeMap<String, Tensor>,
    state: &mut AdamState,
) -> Result<()> {
    state.validate()?;
    for (name, g) in grads {
        let p = params.get(name)?;
        if p.shape() != g.shape() {
            return Err(Error::Dimension {
                op: "adam_step",
                lhs: p.shape(),
                rhs: g.shape(),
            });
        }
    }
    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    let names: Vec<String> = params.names().cloned().collect();
    for name in names {
        let p = params.get_mut(&name).expect("name from store");
        let [r, c] = p.shape();
        let m = state
            .m
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(r, c));
        let v = state
            .v
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(r, c));
        let g = grads.get(&name);
        let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
        for k in 0..pd.len() {
            let gk = g.map_or(0.0, |g| g.data()[k]);
            md[k] = state.beta1 * md[k] + (1.0 - state.beta1) * gk;
            vd[k] = state.beta2 * vd[k] + (1.0 - state.beta2) * gk * gk;
            let mhat = md[k] / bc1;
            let vhat = vd[k] / bc2;
            pd[k] -= state.lr * mhat / (vhat.sqrt() + state.eps);
        }
        if let Some(bad) = pd.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain {
                op: "adam_step",
                detail: format!("parameter {name} became {bad}"),
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(name: &str, v: f64) -> (ParamStore, BTreeMap<String, Tensor>) {
        let mut p = ParamStore::new();
        p.insert(name, Tensor::scalar(v).unwrap()).unwrap();
        (p, BTreeMap::new())
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let (mut p, mut g) = one("w", 1.25);
        g.insert("w".into(), Tensor::scalar(0.0).unwrap());
        let mut s = AdamState::new(0.1);
        adam_step(&mut p, &g, &mut s).unwrap();
        assert_eq!(p.get("w").unwrap().data(), &[1.25]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // m1 = 0.1, v1 = 0.001; bias-corrected both give 1, so the step is lr / (1 + eps).
        let (mut p, mut g) = one("w", 0.0);
        g.insert("w".into(), Tensor::scalar(1.0).unwrap());
        let mut s = AdamState::new(0.1);
        adam_step(&mut p, &g, &mut s).unwrap();
        let w = p.get("w").unwrap().item().unwrap();
        assert!((w + 0.1 / (1.0 + 1e-8)).abs() < 1e-15, "{w}");
    }

    #[test]
    fn second_moment_grows() {
        let (mut p, mut g) = one("w", 0.0);
        g.insert("w".into(), Tensor::scalar(0.7).unwrap());
        let mut s = AdamState::new(0.01);
        adam_step(&mut p, &g, &mut s).unwrap();
        let v1 = s.second_moment("w").unwrap().item().unwrap();
        adam_step(&mut p, &g, &mut s).unwrap();
        let v2 = s.second_moment("w").unwrap().item().unwrap();
        assert!(v2 > v1 && v1 > 0.0);
    }

    #[test]
    fn misaligned_names_rejected() {
        let (mut p, mut g) = one("w", 0.0);
        g.insert("nope".into(), Tensor::scalar(1.0).unwrap());
        let mut s = AdamState::new(0.01);
        assert!(matches!(
            adam_step(&mut p, &g, &mut s),
            Err(Error::Contract(_))
        ));
    }
}
