//! Minibatch training of critics and Monte Carlo evaluation of estimates.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critics::{Critic, NegativeIndex, Negatives};
use crate::error::{Error, Result};
use crate::estimators::{estimator_loss, EmaState, EstimatorKind};
use crate::optim::{adam_step, AdamState};
use crate::rng::{self, Rng};
use crate::stats;
use crate::tape::Tape;
use crate::tensor::Tensor;

/// Source of paired samples `(x_i, y_i) ~ p(x, y)`.
pub trait PairSampler: Sync {
    /// Returns `(X [n, dx], Y [n, dy])`.
    fn sample(&self, n: usize, rng: &mut Rng) -> Result<(Tensor, Tensor)>;

    /// Closed-form MI in nats, when known.
    fn truth(&self) -> Option<f64> {
        None
    }
}

/// One benchmark observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub step: usize,
    pub kind: EstimatorKind,
    pub k: usize,
    pub estimate: f64,
    /// Deciles `q10..q90` of the batch estimates behind `estimate`.
    pub quantiles: [f64; 9],
    pub truth: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: EstimatorKind,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// A record is emitted every `log_every` steps and after the last one.
    pub log_every: usize,
    pub negatives: Negatives,
    pub ema_decay: f64,
}

impl TrainConfig {
    pub fn new(kind: EstimatorKind, steps: usize, batch_size: usize) -> Self {
        Self {
            kind,
            steps,
            batch_size,
            lr: 1e-4,
            log_every: 100,
            negatives: Negatives::AllPairs,
            ema_decay: 0.99,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::contract("training needs steps >= 1"));
        }
        if self.batch_size < 2 {
            return Err(Error::contract(format!(
                "batch size {} leaves no negatives",
                self.batch_size
            )));
        }
        if self.log_every == 0 {
            return Err(Error::config("log_every must be positive"));
        }
        Ok(())
    }
}

fn diverged(e: Error, step: usize, kind: EstimatorKind) -> Error {
    if e.is_numeric() || matches!(e, Error::Domain { .. }) {
        Error::Diverged {
            what: "loss",
            step,
            stage: kind.to_string(),
        }
    } else {
        e
    }
}

/// Trains `critic` in place by Adam on the loss of `cfg.kind`.
///
/// Each step draws a fresh batch of `cfg.batch_size` pairs. A non-finite value
/// anywhere in the step aborts with [`Error::Diverged`] naming the step and kind.
pub fn train_estimator(
    sampler: &dyn PairSampler,
    critic: &mut Critic,
    cfg: &TrainConfig,
    rng: &mut Rng,
) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    if cfg.kind == EstimatorKind::Tuba {
        critic.ensure_baseline(rng)?;
    }
    let mut adam = AdamState::new(cfg.lr);
    let mut ema = EmaState::new(cfg.ema_decay)?;
    let mut window = Vec::with_capacity(cfg.log_every);
    let mut records = Vec::new();
    let start = Instant::now();
    for step in 1..=cfg.steps {
        let estimate = train_step(sampler, critic, cfg, &mut adam, &mut ema, rng)
            .map_err(|e| diverged(e, step, cfg.kind))?;
        window.push(estimate);
        if step % cfg.log_every == 0 || step == cfg.steps {
            records.push(MetricRecord {
                step,
                kind: cfg.kind,
                k: cfg.batch_size,
                estimate: stats::mean(&window),
                quantiles: stats::deciles(&window)?,
                truth: sampler.truth(),
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
            });
            window.clear();
        }
    }
    Ok(records)
}

fn train_step(
    sampler: &dyn PairSampler,
    critic: &mut Critic,
    cfg: &TrainConfig,
    adam: &mut AdamState,
    ema: &mut EmaState,
    rng: &mut Rng,
) -> Result<f64> {
    let (x, y) = sampler.sample(cfg.batch_size, rng)?;
    let neg = NegativeIndex::draw(cfg.batch_size, cfg.negatives, rng)?;
    let mut tape = Tape::new();
    let xv = tape.constant(x);
    let yv = tape.constant(y);
    let contrast = critic.contrast(&mut tape, xv, yv, &neg)?;
    let batch = estimator_loss(cfg.kind, &mut tape, &contrast, ema)?;
    if !batch.estimate.is_finite() {
        return Err(Error::Numeric {
            op: tape.kind(batch.loss),
        });
    }
    let grads = tape.backward(batch.loss)?.params(&tape);
    adam_step(&mut critic.store, &grads, adam)?;
    Ok(batch.estimate)
}

/// Monte Carlo estimate from fresh samples with a fixed critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: EstimatorKind,
    pub k: usize,
    pub mean: f64,
    pub quantiles: [f64; 9],
    pub std_error: f64,
    pub batch_estimates: Vec<f64>,
}

/// Splits `n` fresh samples into `n / k` batches and evaluates each with all
/// `k - 1` in-batch negatives.
///
/// Batch `b` draws from stream `b` of `seed`, and batches run in parallel, so
/// the report depends only on the arguments. MINE uses a fresh EMA per batch,
/// which makes its estimate the batch-global DV form.
pub fn evaluate_estimate(
    critic: &Critic,
    kind: EstimatorKind,
    sampler: &dyn PairSampler,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<EvalReport> {
    if k < 2 {
        return Err(Error::contract(format!("batch size {k} leaves no negatives")));
    }
    if n < k {
        return Err(Error::contract(format!(
            "{n} evaluation samples cannot fill one batch of {k}"
        )));
    }
    if kind == EstimatorKind::Tuba && !critic.has_baseline() {
        return Err(Error::contract("TUBA evaluation needs a critic with a baseline head"));
    }
    let batches = n / k;
    let batch_estimates = (0..batches as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, b);
            let (x, y) = sampler.sample(k, &mut rng)?;
            let mut tape = Tape::new();
            let xv = tape.constant(x);
            let yv = tape.constant(y);
            let contrast = critic.contrast(&mut tape, xv, yv, &NegativeIndex::all_pairs(k)?)?;
            let mut ema = EmaState::new(0.5)?;
            Ok(estimator_loss(kind, &mut tape, &contrast, &mut ema)?.estimate)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EvalReport {
        kind,
        k,
        mean: stats::mean(&batch_estimates),
        quantiles: stats::deciles(&batch_estimates)?,
        std_error: stats::std_error(&batch_estimates),
        batch_estimates,
    })
}
