//! Prediction, ensembles and held-out evaluation of trained learners.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meta::fomaml::FomamlState;
use crate::meta::learner::{draw_noise, MetaTrainState};
use crate::meta::task::{sample_episode, sample_task, Episode};
use crate::rng::{self, Rng};
use crate::stats;
use crate::tape::Tape;
use crate::tensor::Tensor;

impl MetaTrainState {
    /// Predictions at `xs` for each row of `noise`, shape `[draws, xs.len()]`.
    fn predict_draws(&self, support: &[(f64, f64)], xs: &[f64], noise: &Tensor) -> Result<Tensor> {
        let draws = noise.rows();
        let mut tape = Tape::new();
        let supports = vec![support.to_vec(); draws];
        let e = self.prompt.encode(&mut tape, &self.theta, &supports, Some(noise))?;
        let all_x: Vec<f64> = (0..draws).flat_map(|_| xs.iter().copied()).collect();
        let owner: Vec<usize> = (0..draws).flat_map(|d| std::iter::repeat_n(d, xs.len())).collect();
        let pred = self.predict_var(&mut tape, e, &all_x, &owner)?;
        Tensor::new(draws, xs.len(), tape.value(pred).data().to_vec())
    }
}

/// Predictions for one draw of `ξ`.
pub fn adapt_predict(
    state: &MetaTrainState,
    support: &[(f64, f64)],
    xs: &[f64],
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let noise = draw_noise(1, state.cfg.prompt.noise_dim, rng);
    Ok(state.predict_draws(support, xs, &noise)?.into_data())
}

/// Pointwise mean and sample standard deviation over `n_samples` draws of `ξ`.
/// With one draw the standard deviation is zero.
pub fn predict_ensemble(
    state: &MetaTrainState,
    support: &[(f64, f64)],
    xs: &[f64],
    n_samples: usize,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_samples == 0 {
        return Err(Error::config("ensemble needs n_samples >= 1"));
    }
    let noise = draw_noise(n_samples, state.cfg.prompt.noise_dim, rng);
    let preds = state.predict_draws(support, xs, &noise)?;
    let (mut mean, mut std) = (Vec::with_capacity(xs.len()), Vec::with_capacity(xs.len()));
    for j in 0..xs.len() {
        let col: Vec<f64> = (0..n_samples).map(|s| preds.get(s, j)).collect();
        mean.push(stats::mean(&col));
        std.push(stats::sample_std(&col));
    }
    Ok((mean, std))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub task_id: usize,
    pub kappa: f64,
    pub gamma: f64,
    pub query_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaEvalReport {
    pub mean_mse: f64,
    pub tasks: Vec<TaskEval>,
}

fn evaluate<F>(n_tasks: usize, m: usize, q: usize, seed: u64, predict: F) -> Result<MetaEvalReport>
where
    F: Fn(&Episode, &[f64], &mut Rng) -> Result<Vec<f64>> + Sync,
{
    if n_tasks == 0 {
        return Err(Error::config("evaluation needs at least one task"));
    }
    let tasks = (0..n_tasks)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, t as u64);
            let task = sample_task(&mut r);
            let ep = sample_episode(task, m, q, &mut r)?;
            let xs: Vec<f64> = ep.query.iter().map(|p| p.0).collect();
            let pred = predict(&ep, &xs, &mut r)?;
            let query_mse = ep
                .query
                .iter()
                .zip(&pred)
                .map(|(&(_, y), p)| (p - y) * (p - y))
                .sum::<f64>()
                / q as f64;
            Ok(TaskEval {
                task_id: t,
                kappa: task.kappa(),
                gamma: task.gamma(),
                query_mse,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mses: Vec<f64> = tasks.iter().map(|t| t.query_mse).collect();
    Ok(MetaEvalReport {
        mean_mse: stats::mean(&mses),
        tasks,
    })
}

/// Query MSE on `n_tasks` fresh tasks, one `ξ` draw each. Task `t` uses
/// stream `t` of `seed`, so the report depends only on the arguments.
pub fn eval_meta(state: &MetaTrainState, n_tasks: usize, m: usize, q: usize, seed: u64) -> Result<MetaEvalReport> {
    evaluate(n_tasks, m, q, seed, |ep, xs, r| adapt_predict(state, &ep.support, xs, r))
}

/// Query MSE of the FOMAML baseline after inner adaptation on each support.
pub fn eval_fomaml(state: &FomamlState, n_tasks: usize, m: usize, q: usize, seed: u64) -> Result<MetaEvalReport> {
    evaluate(n_tasks, m, q, seed, |ep, xs, _| {
        let adapted = state.adapt(&ep.support)?;
        state.predict(&adapted, xs)
    })
}
