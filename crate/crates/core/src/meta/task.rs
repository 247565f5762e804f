//! Sine-wave regression tasks and few-shot episodes.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const AMPLITUDE_RANGE: (f64, f64) = (0.1, 5.0);
pub const PHASE_RANGE: (f64, f64) = (0.0, PI);
pub const INPUT_RANGE: (f64, f64) = (-5.0, 5.0);

/// `y = κ sin(x - γ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SineTask {
    kappa: f64,
    gamma: f64,
}

impl SineTask {
    pub fn new(kappa: f64, gamma: f64) -> Result<Self> {
        let in_range = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
        if !in_range(kappa, AMPLITUDE_RANGE) || !in_range(gamma, PHASE_RANGE) {
            return Err(Error::config(format!(
                "sine task kappa={kappa} gamma={gamma} outside [0.1, 5] x [0, pi]"
            )));
        }
        Ok(Self { kappa, gamma })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.kappa * (x - self.gamma).sin()
    }
}

pub fn sample_task<R: Rng + ?Sized>(rng: &mut R) -> SineTask {
    SineTask {
        kappa: rng.random_range(AMPLITUDE_RANGE.0..=AMPLITUDE_RANGE.1),
        gamma: rng.random_range(PHASE_RANGE.0..=PHASE_RANGE.1),
    }
}

/// Support and query pairs of one task. The task itself is kept for
/// diagnostics and is never shown to a learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub support: Vec<(f64, f64)>,
    pub query: Vec<(f64, f64)>,
    pub task: SineTask,
}

pub fn sample_episode<R: Rng + ?Sized>(
    task: SineTask,
    m: usize,
    q: usize,
    rng: &mut R,
) -> Result<Episode> {
    if m == 0 || q == 0 {
        return Err(Error::config(format!("episode needs m >= 1 and q >= 1 (got {m}, {q})")));
    }
    let mut draw = |n: usize| -> Vec<(f64, f64)> {
        (0..n)
            .map(|_| {
                let x = rng.random_range(INPUT_RANGE.0..=INPUT_RANGE.1);
                (x, task.eval(x))
            })
            .collect()
    };
    let support = draw(m);
    let query = draw(q);
    Ok(Episode {
        support,
        query,
        task,
    })
}

impl Episode {
    /// Support pairs ordered by x, flattened as `[x1, y1, x2, y2, ..]`.
    pub fn sorted_support(&self) -> Vec<f64> {
        let mut s = self.support.clone();
        s.sort_by(|a, b| a.0.total_cmp(&b.0));
        s.into_iter().flat_map(|(x, y)| [x, y]).collect()
    }

    pub fn support_tensor(&self) -> Tensor {
        let data = self.support.iter().flat_map(|&(x, y)| [x, y]).collect();
        Tensor::new(self.support.len(), 2, data).expect("finite support")
    }
}
