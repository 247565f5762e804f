//! Correlated Gaussian pairs with closed-form mutual information.
//!
//! Per coordinate, `x ~ N(0, 1)` and `y = ρx + sqrt(1 - ρ²)ε` with independent
//! `ε ~ N(0, 1)`, so `I(X; Y) = -(d/2) ln(1 - ρ²)`.

use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critics::{make_critic, CriticConfig, CriticKind};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::rng::{self, Rng};
use crate::tensor::Tensor;
use crate::training::{evaluate_estimate, train_estimator, PairSampler, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    d: usize,
    rho: f64,
}

impl GaussianSpec {
    pub fn new(d: usize, rho: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(Error::Domain {
                op: "gaussian",
                detail: "rho must satisfy |rho| < 1".into(),
            });
        }
        if d == 0 {
            return Err(Error::Domain {
                op: "gaussian",
                detail: "d must be at least 1".into(),
            });
        }
        Ok(Self { d, rho })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }
}

pub fn ground_truth_mi(spec: &GaussianSpec) -> f64 {
    -(spec.d as f64 / 2.0) * (1.0 - spec.rho * spec.rho).ln()
}

pub fn sample_pairs(spec: &GaussianSpec, n: usize, rng: &mut Rng) -> Result<(Tensor, Tensor)> {
    if n == 0 {
        return Err(Error::contract("sample_pairs needs n >= 1"));
    }
    let d = spec.d;
    let noise = (1.0 - spec.rho * spec.rho).sqrt();
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n * d);
    for _ in 0..n * d {
        let x: f64 = StandardNormal.sample(rng);
        let e: f64 = StandardNormal.sample(rng);
        xs.push(x);
        ys.push(spec.rho * x + noise * e);
    }
    Ok((Tensor::new(n, d, xs)?, Tensor::new(n, d, ys)?))
}

impl PairSampler for GaussianSpec {
    fn sample(&self, n: usize, rng: &mut Rng) -> Result<(Tensor, Tensor)> {
        sample_pairs(self, n, rng)
    }

    fn truth(&self) -> Option<f64> {
        Some(ground_truth_mi(self))
    }
}

/// Grid and protocol of a bias-variance sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub rhos: Vec<f64>,
    pub d: usize,
    pub kinds: Vec<EstimatorKind>,
    pub critic: CriticKind,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub trials: usize,
    pub eval_samples: usize,
    pub seed: u64,
}

/// One `(rho, kind, trial)` cell of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub rho: f64,
    pub kind: EstimatorKind,
    pub trial: usize,
    pub k: usize,
    /// NaN when the trial failed.
    pub estimate: f64,
    pub quantiles: [f64; 9],
    pub truth: f64,
    pub wall_ms: f64,
    pub failed: bool,
}

/// Trains and evaluates a fresh critic per `(rho, kind, trial)` cell.
///
/// Cells run in parallel, each on its own random stream, and come back in grid
/// order. A diverged trial yields a flagged record rather than an error.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    if cfg.rhos.is_empty() || cfg.kinds.is_empty() {
        return Err(Error::config("sweep needs at least one rho and one kind"));
    }
    if cfg.trials == 0 {
        return Err(Error::config("sweep needs trials >= 1"));
    }
    let specs = cfg
        .rhos
        .iter()
        .map(|&r| GaussianSpec::new(cfg.d, r))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize, usize)> = (0..specs.len())
        .flat_map(|r| {
            (0..cfg.kinds.len()).flat_map(move |k| (0..cfg.trials).map(move |t| (r, k, t)))
        })
        .collect();
    cells
        .into_par_iter()
        .map(|(r, ki, trial)| {
            let cell = ((r * cfg.kinds.len() + ki) * cfg.trials + trial) as u64;
            run_cell(cfg, &specs[r], cfg.kinds[ki], trial, cell)
        })
        .collect()
}

fn run_cell(
    cfg: &SweepConfig,
    spec: &GaussianSpec,
    kind: EstimatorKind,
    trial: usize,
    cell: u64,
) -> Result<SweepRecord> {
    let start = Instant::now();
    let mut rng = rng::substream(cfg.seed, cell, 0);
    let critic_cfg = CriticConfig::new(spec.d, spec.d).with_hidden(&cfg.hidden);
    let mut critic = make_critic(cfg.critic, &critic_cfg, &mut rng)?;
    let train = TrainConfig {
        kind,
        ..cfg.train.clone()
    };
    let outcome = train_estimator(spec, &mut critic, &train, &mut rng).and_then(|_| {
        let eval_seed = cfg.seed ^ cell.wrapping_mul(0x9E37_79B9_7F4A_7C15);
        evaluate_estimate(&critic, kind, spec, cfg.eval_samples, train.batch_size, eval_seed)
    });
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let base = SweepRecord {
        rho: spec.rho,
        kind,
        trial,
        k: train.batch_size,
        estimate: f64::NAN,
        quantiles: [f64::NAN; 9],
        truth: ground_truth_mi(spec),
        wall_ms,
        failed: true,
    };
    match outcome {
        Ok(report) => Ok(SweepRecord {
            estimate: report.mean,
            quantiles: report.quantiles,
            failed: false,
            ..base
        }),
        Err(Error::Diverged { .. }) => Ok(base),
        Err(e) if e.is_numeric() => Ok(base),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_values() {
        let t = |d, r| ground_truth_mi(&GaussianSpec::new(d, r).unwrap());
        assert_eq!(t(3, 0.0), 0.0);
        assert!((t(2, 0.5) - 0.287_682_072_451_780_9).abs() < 1e-12);
        assert!((t(10, 0.9) - 8.303_656_034_108_254).abs() < 1e-12);
    }

    #[test]
    fn invalid_specs() {
        assert!(GaussianSpec::new(2, 1.0).is_err());
        assert!(GaussianSpec::new(2, -1.0).is_err());
        assert!(GaussianSpec::new(2, f64::NAN).is_err());
        assert!(GaussianSpec::new(0, 0.5).is_err());
    }

    #[test]
    fn sample_correlation() {
        let spec = GaussianSpec::new(2, 0.9).unwrap();
        let n = 100_000;
        let (x, y) = sample_pairs(&spec, n, &mut rng::seeded(1)).unwrap();
        for c in 0..2 {
            let (mut sxy, mut sxx, mut syy, mut sx, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..n {
                let (a, b) = (x.get(i, c), y.get(i, c));
                sx += a;
                sy += b;
                sxy += a * b;
                sxx += a * a;
                syy += b * b;
            }
            let nf = n as f64;
            let cov = sxy / nf - sx * sy / nf / nf;
            let corr = cov / ((sxx / nf - (sx / nf).powi(2)) * (syy / nf - (sy / nf).powi(2))).sqrt();
            assert!((corr - 0.9).abs() < 0.01, "{corr}");
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let spec = GaussianSpec::new(3, 0.4).unwrap();
        let a = sample_pairs(&spec, 10, &mut rng::seeded(5)).unwrap();
        let b = sample_pairs(&spec, 10, &mut rng::seeded(5)).unwrap();
        assert_eq!(a, b);
    }
}
