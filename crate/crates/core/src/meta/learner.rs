//! MI-regularized meta-learning with an adversarially trained FLO critic.
//!
//! One step on a batch of `n_e` episodes:
//!
//! 1. `e_t = Prompt(S_t, ξ_t)` with fresh `ξ_t ~ N(0, I)`, and the data
//!    embedding `v_t` of the same support (treated as a constant).
//! 2. `L_R`: mean squared error of `f_θ(x, e_t)` on the query points.
//! 3. `Î`: FLO estimate over the `n_e × n_e` scores of a bilinear critic on
//!    `(v_t, e_t')`, diagonal positive.
//! 4. `total = L_R + λ sqrt(max(Î, ε))`.
//!
//! From the same forward pass, θ (prediction model and prompt encoder) takes
//! an Adam step on `total` and φ (critic) takes an Adam step on the FLO loss,
//! which maximizes `Î`. The clamp has zero gradient while `Î ≤ ε`.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::critics::{make_critic, Critic, CriticConfig, CriticKind};
use crate::error::{Error, Result};
use crate::estimators::flo_loss;
use crate::meta::prompt::{rkhs_embed, PromptConfig, PromptEncoder};
use crate::meta::task::{sample_episode, sample_task, Episode, INPUT_RANGE};
use crate::nn::Mlp;
use crate::optim::{adam_step, AdamState};
use crate::params::ParamStore;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// What the FLO critic sees as the data side of each task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataEmbedding {
    /// Prompt encoder output with `ξ = 0`.
    Prompt,
    /// Kernel mean embedding at fixed reference points.
    Rkhs,
    /// The sorted support pairs themselves.
    RawSupport,
}

impl std::str::FromStr for DataEmbedding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prompt" => Ok(Self::Prompt),
            "rkhs" => Ok(Self::Rkhs),
            "raw" | "raw-support" => Ok(Self::RawSupport),
            other => Err(Error::config(format!("unknown data embedding {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaConfig {
    pub m: usize,
    pub q: usize,
    /// Episodes per step, `n_e`.
    pub episodes: usize,
    pub lambda: f64,
    pub lr: f64,
    pub flo_lr: f64,
    pub eps_clip: f64,
    pub prompt: PromptConfig,
    /// Hidden widths of `f_θ(x, e)`.
    pub hidden: Vec<usize>,
    pub data_embedding: DataEmbedding,
    pub flo_hidden: Vec<usize>,
    pub flo_embed_dim: usize,
    pub flo_tau: f64,
    pub rkhs_refs: usize,
    pub rkhs_bandwidth: f64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        Self {
            m: 3,
            q: 2,
            episodes: 64,
            lambda: 1e-2,
            lr: 1e-4,
            flo_lr: 1e-4,
            eps_clip: 1e-6,
            prompt: PromptConfig::default(),
            hidden: vec![512, 512],
            data_embedding: DataEmbedding::Prompt,
            flo_hidden: vec![128, 128],
            flo_embed_dim: 64,
            flo_tau: 10.0,
            rkhs_refs: 32,
            rkhs_bandwidth: 1.0,
        }
    }
}

impl MetaConfig {
    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.q == 0 {
            return Err(Error::config("m and q must be at least 1"));
        }
        if self.prompt.backend == crate::meta::prompt::PromptBackend::Mlp && self.prompt.m != self.m {
            return Err(Error::config(format!(
                "mlp prompt encoder built for m={} but episodes have m={}",
                self.prompt.m, self.m
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda {} must be >= 0", self.lambda)));
        }
        if !(self.eps_clip > 0.0) {
            return Err(Error::config("eps_clip must be positive"));
        }
        Ok(())
    }
}

/// Draws `n` fresh tasks and one episode from each.
pub fn sample_batch<R: Rng + ?Sized>(n: usize, m: usize, q: usize, rng: &mut R) -> Result<Vec<Episode>> {
    (0..n)
        .map(|_| {
            let task = sample_task(rng);
            sample_episode(task, m, q, rng)
        })
        .collect()
}

/// Standard normal noise, one row per task.
pub fn draw_noise<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Tensor {
    let data = (0..n * dim).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(n, dim, data).expect("finite normal draws")
}

/// Losses of one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetaLosses {
    pub loss_r: f64,
    pub flo_estimate: f64,
    pub total: f64,
}

/// Gradients of one forward pass, split by owner.
#[derive(Debug, Clone)]
pub struct MetaGradients {
    pub theta: BTreeMap<String, Tensor>,
    pub phi: BTreeMap<String, Tensor>,
    pub losses: MetaLosses,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaTrainState {
    pub cfg: MetaConfig,
    /// Prediction model and prompt encoder.
    pub theta: ParamStore,
    pub prompt: PromptEncoder,
    pub model: Mlp,
    /// FLO critic; its store holds φ.
    pub critic: Critic,
    pub adam_theta: AdamState,
    pub adam_phi: AdamState,
    pub step: u64,
    pub rkhs_refs: Vec<(f64, f64)>,
}

impl MetaTrainState {
    pub fn new<R: Rng + ?Sized>(cfg: MetaConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let mut theta = ParamStore::new();
        let prompt = PromptEncoder::init(&mut theta, "prompt", &cfg.prompt, rng)?;
        let mut sizes = vec![1 + cfg.prompt.embed_dim];
        sizes.extend(&cfg.hidden);
        sizes.push(1);
        let model = Mlp::init(&mut theta, "model", &sizes, rng)?;
        let rkhs_refs = (0..cfg.rkhs_refs)
            .map(|_| {
                (
                    rng.random_range(INPUT_RANGE.0..=INPUT_RANGE.1),
                    rng.random_range(-5.0..=5.0),
                )
            })
            .collect();
        let dx = match cfg.data_embedding {
            DataEmbedding::Prompt => cfg.prompt.embed_dim,
            DataEmbedding::Rkhs => cfg.rkhs_refs,
            DataEmbedding::RawSupport => 2 * cfg.m,
        };
        let critic_cfg = CriticConfig {
            hidden: cfg.flo_hidden.clone(),
            embed_dim: cfg.flo_embed_dim,
            tau: cfg.flo_tau,
            prefix: "flo".into(),
            ..CriticConfig::new(dx, cfg.prompt.embed_dim)
        };
        let critic = make_critic(CriticKind::Bilinear, &critic_cfg, rng)?;
        Ok(Self {
            adam_theta: AdamState::new(cfg.lr),
            adam_phi: AdamState::new(cfg.flo_lr),
            cfg,
            theta,
            prompt,
            model,
            critic,
            step: 0,
            rkhs_refs,
        })
    }

    /// `f_θ(x, e)` for query rows; `owner[r]` is the embedding row of query `r`.
    pub(crate) fn predict_var(
        &self,
        tape: &mut Tape,
        e: Var,
        xs: &[f64],
        owner: &[usize],
    ) -> Result<Var> {
        let x = tape.constant(Tensor::column(xs)?);
        let rows = tape.gather_rows(e, owner)?;
        let input = tape.concat(&[x, rows])?;
        self.model.forward(tape, &self.theta, input)
    }

    fn regression_loss(&self, tape: &mut Tape, episodes: &[Episode], e: Var) -> Result<Var> {
        let (mut xs, mut ys, mut owner) = (Vec::new(), Vec::new(), Vec::new());
        for (t, ep) in episodes.iter().enumerate() {
            for &(x, y) in &ep.query {
                xs.push(x);
                ys.push(y);
                owner.push(t);
            }
        }
        let pred = self.predict_var(tape, e, &xs, &owner)?;
        let y = tape.constant(Tensor::column(&ys)?);
        let err = tape.sub(pred, y)?;
        let sq = tape.square(err)?;
        tape.mean(sq)
    }

    fn data_embedding(&self, tape: &mut Tape, episodes: &[Episode]) -> Result<Var> {
        let n = episodes.len();
        match self.cfg.data_embedding {
            DataEmbedding::Prompt => {
                let supports: Vec<_> = episodes.iter().map(|e| e.support.clone()).collect();
                let v = self.prompt.encode(tape, &self.theta, &supports, None)?;
                tape.stop_gradient(v)
            }
            DataEmbedding::Rkhs => {
                let mut data = Vec::with_capacity(n * self.rkhs_refs.len());
                for ep in episodes {
                    data.extend(rkhs_embed(&ep.support, self.cfg.rkhs_bandwidth, &self.rkhs_refs)?);
                }
                Ok(tape.constant(Tensor::new(n, self.rkhs_refs.len(), data)?))
            }
            DataEmbedding::RawSupport => {
                let m = self.cfg.m;
                let mut data = Vec::with_capacity(n * 2 * m);
                for ep in episodes {
                    if ep.support.len() != m {
                        return Err(Error::contract(format!(
                            "raw support embedding expects {m} pairs, got {}",
                            ep.support.len()
                        )));
                    }
                    data.extend(ep.sorted_support());
                }
                Ok(tape.constant(Tensor::new(n, 2 * m, data)?))
            }
        }
    }

    fn check_batch(&self, episodes: &[Episode], noise: &Tensor) -> Result<()> {
        if episodes.len() < 2 {
            return Err(Error::contract(format!(
                "meta step needs at least 2 episodes for negatives, got {}",
                episodes.len()
            )));
        }
        if noise.shape() != [episodes.len(), self.cfg.prompt.noise_dim] {
            return Err(Error::Dimension {
                op: "meta_noise",
                lhs: noise.shape(),
                rhs: [episodes.len(), self.cfg.prompt.noise_dim],
            });
        }
        Ok(())
    }

    /// One forward pass and both backward passes, without updating anything.
    pub fn meta_gradients(&self, episodes: &[Episode], noise: &Tensor) -> Result<MetaGradients> {
        self.check_batch(episodes, noise)?;
        let stage = |e: Error, stage: &str| match e {
            e if e.is_numeric() || matches!(e, Error::Domain { .. }) => Error::Diverged {
                what: "meta_step",
                step: self.step as usize + 1,
                stage: stage.into(),
            },
            e => e,
        };
        let mut tape = Tape::new();
        let (loss_r, flo, total) = self
            .forward(&mut tape, episodes, noise)
            .map_err(|e| stage(e, "meta"))?;
        let theta = tape
            .backward(total)
            .map_err(|e| stage(e, "meta"))?
            .params(&tape)
            .into_iter()
            .filter(|(k, _)| self.theta.contains(k))
            .collect();
        let phi = tape
            .backward(flo.0)
            .map_err(|e| stage(e, "flo"))?
            .params(&tape)
            .into_iter()
            .filter(|(k, _)| self.critic.store.contains(k))
            .collect();
        Ok(MetaGradients {
            theta,
            phi,
            losses: MetaLosses {
                loss_r: tape.item(loss_r)?,
                flo_estimate: flo.1,
                total: tape.item(total)?,
            },
        })
    }

    /// Returns `(L_R, (FLO loss, Î), total)`.
    fn forward(
        &self,
        tape: &mut Tape,
        episodes: &[Episode],
        noise: &Tensor,
    ) -> Result<(Var, (Var, f64), Var)> {
        let supports: Vec<_> = episodes.iter().map(|e| e.support.clone()).collect();
        let e = self.prompt.encode(tape, &self.theta, &supports, Some(noise))?;
        let loss_r = self.regression_loss(tape, episodes, e)?;
        let v = self.data_embedding(tape, episodes)?;
        let (g, u) = self.critic.gram(tape, v, e)?;
        let flo = flo_loss(tape, g, u)?;
        let one = tape.scalar(1.0)?;
        let estimate = tape.sub(one, flo.loss)?;
        let clipped = tape.clamp(estimate, self.cfg.eps_clip, f64::MAX)?;
        let root = tape.sqrt(clipped)?;
        let reg = tape.scale(root, self.cfg.lambda)?;
        let total = tape.add(loss_r, reg)?;
        Ok((loss_r, (flo.loss, flo.estimate), total))
    }

    /// θ-gradient of `L_R` alone, the plain episodic regression gradient.
    pub fn regression_gradients(&self, episodes: &[Episode], noise: &Tensor) -> Result<BTreeMap<String, Tensor>> {
        self.check_batch(episodes, noise)?;
        let mut tape = Tape::new();
        let supports: Vec<_> = episodes.iter().map(|e| e.support.clone()).collect();
        let e = self.prompt.encode(&mut tape, &self.theta, &supports, Some(noise))?;
        let loss = self.regression_loss(&mut tape, episodes, e)?;
        Ok(tape.backward(loss)?.params(&tape))
    }

    /// Adam step on θ only.
    pub fn apply_meta_update(&mut self, grads: &BTreeMap<String, Tensor>) -> Result<()> {
        adam_step(&mut self.theta, grads, &mut self.adam_theta).map_err(|e| self.diverged(e, "meta"))
    }

    /// Adam step on φ only.
    pub fn apply_flo_update(&mut self, grads: &BTreeMap<String, Tensor>) -> Result<()> {
        adam_step(&mut self.critic.store, grads, &mut self.adam_phi).map_err(|e| self.diverged(e, "flo"))
    }

    fn diverged(&self, e: Error, stage: &str) -> Error {
        match e {
            Error::Domain { .. } => Error::Diverged {
                what: "meta_step",
                step: self.step as usize + 1,
                stage: stage.into(),
            },
            e => e,
        }
    }

    /// Full step with explicit noise.
    pub fn meta_step_with_noise(&mut self, episodes: &[Episode], noise: &Tensor) -> Result<MetaLosses> {
        let grads = self.meta_gradients(episodes, noise)?;
        self.apply_meta_update(&grads.theta)?;
        self.apply_flo_update(&grads.phi)?;
        self.step += 1;
        Ok(grads.losses)
    }

    /// Full step, drawing `ξ_t` from `rng`.
    pub fn meta_step<R: Rng + ?Sized>(&mut self, episodes: &[Episode], rng: &mut R) -> Result<MetaLosses> {
        let noise = draw_noise(episodes.len(), self.cfg.prompt.noise_dim, rng);
        self.meta_step_with_noise(episodes, &noise)
    }

    /// Samples a fresh batch per the config and takes one step.
    pub fn train_step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<MetaLosses> {
        let batch = sample_batch(self.cfg.episodes, self.cfg.m, self.cfg.q, rng)?;
        self.meta_step(&batch, rng)
    }
}

/// Largest elementwise gap between the θ-gradient of the full objective and
/// that of `L_R` alone. Zero when `λ = 0`.
pub fn lambda_gradient_gap(state: &MetaTrainState, episodes: &[Episode], noise: &Tensor) -> Result<f64> {
    let full = state.meta_gradients(episodes, noise)?.theta;
    let plain = state.regression_gradients(episodes, noise)?;
    let mut gap: f64 = 0.0;
    for (name, p) in state.theta.iter() {
        let zero = Tensor::zeros(p.rows(), p.cols());
        let a = full.get(name).unwrap_or(&zero);
        let b = plain.get(name).unwrap_or(&zero);
        gap = gap.max(a.max_abs_diff(b)?);
    }
    Ok(gap)
}
