//! Variational lower bounds on mutual information, as losses on a tape.
//!
//! Every estimator consumes a [`Contrast`]: positive scores `g(x_i, y_i)`,
//! a row of negative scores `g(x_i, y_j)` per positive, the PMI head
//! `u(x_i, y_i)`, and (for TUBA) an x-only baseline. The value returned in
//! [`LossBatch::estimate`] is in nats; [`LossBatch::loss`] is the scalar to
//! minimize. Exponentials of score differences go through
//! [`Tape::exp_clamped`].
//!
//! With `n` negatives per row and `c_ij = g(x_i, y_j) - g(x_i, y_i)`:
//!
//! | kind    | per-row estimate                                             |
//! |---------|--------------------------------------------------------------|
//! | FLO     | `1 - u_i - e^{-u_i} mean_j e^{c_ij}`                         |
//! | FDV     | `DV_i` in value; gradient of `-ln Σ_j e^{c_ij}`               |
//! | InfoNCE | `g_ii - ln((e^{g_ii} + Σ_j e^{g_ij}) / (n + 1))`              |
//! | NWJ     | `g_ii - mean_j e^{g_ij - 1}`                                 |
//! | TUBA    | `g_ii - a_i + 1 - mean_j e^{g_ij - a_i}`                     |
//! | DV      | `g_ii - ln mean_j e^{g_ij}`                                  |
//! | MINE    | `g_ii - ln EMA[mean_ij e^{g_ij}]`                            |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::critics::Contrast;
use crate::error::{Error, Result};
use crate::tape::{Tape, Var, EXP_CLAMP};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    Flo,
    Fdv,
    InfoNce,
    Nwj,
    Tuba,
    Dv,
    Mine,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Flo,
        EstimatorKind::Fdv,
        EstimatorKind::InfoNce,
        EstimatorKind::Nwj,
        EstimatorKind::Tuba,
        EstimatorKind::Dv,
        EstimatorKind::Mine,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Flo => "flo",
            EstimatorKind::Fdv => "fdv",
            EstimatorKind::InfoNce => "infonce",
            EstimatorKind::Nwj => "nwj",
            EstimatorKind::Tuba => "tuba",
            EstimatorKind::Dv => "dv",
            EstimatorKind::Mine => "mine",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| Error::config(format!("unknown estimator kind {s}")))
    }
}

/// Running exponential average for the MINE normalizer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmaState {
    decay: f64,
    value: Option<f64>,
}

impl EmaState {
    pub fn new(decay: f64) -> Result<Self> {
        if !(decay > 0.0 && decay < 1.0) {
            return Err(Error::config(format!("EMA decay {decay} must lie in (0, 1)")));
        }
        Ok(Self { decay, value: None })
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }

    fn update(&mut self, observed: f64) {
        self.value = Some(match self.value {
            Some(v) => self.decay * v + (1.0 - self.decay) * observed,
            None => observed,
        });
    }
}

/// Result of one estimator evaluation on a batch.
#[derive(Debug, Clone)]
pub struct LossBatch {
    /// Loss contribution of each positive pair (length K).
    pub per_pair: Vec<f64>,
    /// Scalar to minimize, on the tape.
    pub loss: Var,
    /// MI estimate in nats.
    pub estimate: f64,
}

fn finish(tape: &mut Tape, per_row_estimate: Var) -> Result<LossBatch> {
    let mean = tape.mean(per_row_estimate)?;
    let loss = tape.neg(mean)?;
    let estimate = tape.item(mean)?;
    let per_pair = tape.value(per_row_estimate).data().iter().map(|v| -v).collect();
    Ok(LossBatch {
        per_pair,
        loss,
        estimate,
    })
}

fn neg_count(tape: &Tape, s: &Contrast) -> Result<usize> {
    let [k, n] = tape.value(s.neg).shape();
    if k < 2 || n == 0 {
        return Err(Error::contract(format!(
            "estimators need K >= 2 with at least one negative (K={k}, n={n})"
        )));
    }
    Ok(n)
}

/// `F_i = u_i + mean_j exp(-u_i + c_ij)`; loss `mean(F)`; estimate `1 - loss`.
pub fn flo(tape: &mut Tape, s: &Contrast) -> Result<LossBatch> {
    let n = neg_count(tape, s)?;
    let c = tape.sub(s.neg, s.pos)?;
    let c = tape.sub(c, s.u)?;
    let e = tape.exp_clamped(c)?;
    let sum = tape.sum_rows(e)?;
    let avg = tape.scale(sum, 1.0 / n as f64)?;
    let f = tape.add(s.u, avg)?;
    let loss = tape.mean(f)?;
    let estimate = 1.0 - tape.item(loss)?;
    Ok(LossBatch {
        per_pair: tape.value(f).data().to_vec(),
        loss,
        estimate,
    })
}

pub fn infonce(tape: &mut Tape, s: &Contrast) -> Result<LossBatch> {
    let n = neg_count(tape, s)?;
    let all = tape.concat(&[s.pos, s.neg])?;
    let lse = tape.logsumexp_rows(all)?;
    let d = tape.sub(s.pos, lse)?;
    let log_k = tape.scalar(((n + 1) as f64).ln())?;
    let e = tape.add(d, log_k)?;
    finish(tape, e)
}

pub fn nwj(tape: &mut Tape, s: &Contrast) -> Result<LossBatch> {
    let n = neg_count(tape, s)?;
    let one = tape.scalar(1.0)?;
    let shifted = tape.sub(s.neg, one)?;
    let e = tape.exp_clamped(shifted)?;
    let sum = tape.sum_rows(e)?;
    let avg = tape.scale(sum, 1.0 / n as f64)?;
    let est = tape.sub(s.pos, avg)?;
    finish(tape, est)
}

/// TUBA with x-only baseline `a`: `g_ii - a_i + 1 - mean_j exp(g_ij - a_i)`.
pub fn tuba(tape: &mut Tape, s: &Contrast) -> Result<LossBatch> {
    let n = neg_count(tape, s)?;
    let a = s
        .baseline
        .ok_or_else(|| Error::contract("TUBA needs a baseline head a(x)"))?;
    if tape.value(a).shape() != tape.value(s.pos).shape() {
        return Err(Error::Dimension {
            op: "tuba",
            lhs: tape.value(a).shape(),
            rhs: tape.value(s.pos).shape(),
        });
    }
    let shifted = tape.sub(s.neg, a)?;
    let e = tape.exp_clamped(shifted)?;
    let sum = tape.sum_rows(e)?;
    let avg = tape.scale(sum, 1.0 / n as f64)?;
    let lin = tape.sub(s.pos, a)?;
    let one = tape.scalar(1.0)?;
    let lin = tape.add(lin, one)?;
    let est = tape.sub(lin, avg)?;
    finish(tape, est)
}

fn dv_rows(tape: &mut Tape, s: &Contrast) -> Result<Var> {
    let n = neg_count(tape, s)?;
    let lse = tape.logsumexp_rows(s.neg)?;
    let log_n = tape.scalar((n as f64).ln())?;
    let log_mean = tape.sub(lse, log_n)?;
    tape.sub(s.pos, log_mean)
}

pub fn dv(tape: &mut Tape, s: &Contrast) -> Result<LossBatch> {
    let e = dv_rows(tape, s)?;
    finish(tape, e)
}

/// Value equals DV exactly; the gradient comes only from the flat ratio
/// `Σ_j e^{c_ij} / stop(Σ_j e^{c_ij})`, whose value is one.
pub fn fdv(tape: &mut Tape, s: &Contrast) -> Result<LossBatch> {
    let dv_per_row = dv_rows(tape, s)?;
    let dv_mean = tape.mean(dv_per_row)?;
    let dv_value = tape.stop_gradient(dv_mean)?;
    let c = tape.sub(s.neg, s.pos)?;
    let e = tape.exp_clamped(c)?;
    let sum = tape.sum_rows(e)?;
    let frozen = tape.stop_gradient(sum)?;
    let ratio = tape.div(sum, frozen)?;
    let flat = tape.mean(ratio)?;
    let one = tape.scalar(1.0)?;
    let flat = tape.sub(flat, one)?;
    let est = tape.sub(dv_value, flat)?;
    let loss = tape.neg(est)?;
    let estimate = tape.item(est)?;
    let per_pair = tape.value(dv_per_row).data().iter().map(|v| -v).collect();
    Ok(LossBatch {
        per_pair,
        loss,
        estimate,
    })
}

/// DV with the normalizer replaced by an exponential moving average.
///
/// The gradient of `ln EMA` is taken as `∇ batch / EMA`, the bias-corrected
/// surrogate. The EMA is read before this batch is folded in; on the first call
/// it is initialized with the batch value.
pub fn mine(tape: &mut Tape, s: &Contrast, ema: &mut EmaState) -> Result<LossBatch> {
    neg_count(tape, s)?;
    let e = tape.exp_clamped(s.neg)?;
    let batch = tape.mean(e)?;
    let batch_value = tape.item(batch)?;
    let norm = ema.value.unwrap_or(batch_value);
    let scaled = tape.scale(batch, 1.0 / norm)?;
    let offset = tape.scalar(norm.ln() - batch_value / norm)?;
    let log_norm = tape.add(scaled, offset)?;
    let est = tape.sub(s.pos, log_norm)?;
    let out = finish(tape, est)?;
    ema.update(batch_value);
    Ok(out)
}

/// Dispatch on `kind`. `ema` is used only by MINE.
pub fn estimator_loss(
    kind: EstimatorKind,
    tape: &mut Tape,
    s: &Contrast,
    ema: &mut EmaState,
) -> Result<LossBatch> {
    match kind {
        EstimatorKind::Flo => flo(tape, s),
        EstimatorKind::Fdv => fdv(tape, s),
        EstimatorKind::InfoNce => infonce(tape, s),
        EstimatorKind::Nwj => nwj(tape, s),
        EstimatorKind::Tuba => tuba(tape, s),
        EstimatorKind::Dv => dv(tape, s),
        EstimatorKind::Mine => mine(tape, s, ema),
    }
}

fn gram_contrast(tape: &mut Tape, g: Var, u: Option<Var>, a: Option<Var>) -> Result<Contrast> {
    let k = tape.value(g).rows();
    let u = match u {
        Some(u) => u,
        None => tape.constant(Tensor::zeros(k, 1)),
    };
    Contrast::from_gram(tape, g, u, a)
}

/// FLO on a full `K×K` score matrix `g` with PMI head `u` (`[K, 1]`).
pub fn flo_loss(tape: &mut Tape, g: Var, u: Var) -> Result<LossBatch> {
    let s = gram_contrast(tape, g, Some(u), None)?;
    flo(tape, &s)
}

pub fn infonce_loss(tape: &mut Tape, g: Var) -> Result<LossBatch> {
    let s = gram_contrast(tape, g, None, None)?;
    infonce(tape, &s)
}

pub fn nwj_loss(tape: &mut Tape, g: Var) -> Result<LossBatch> {
    let s = gram_contrast(tape, g, None, None)?;
    nwj(tape, &s)
}

pub fn tuba_loss(tape: &mut Tape, g: Var, a: Var) -> Result<LossBatch> {
    let s = gram_contrast(tape, g, None, Some(a))?;
    tuba(tape, &s)
}

pub fn dv_loss(tape: &mut Tape, g: Var) -> Result<LossBatch> {
    let s = gram_contrast(tape, g, None, None)?;
    dv(tape, &s)
}

pub fn fdv_loss(tape: &mut Tape, g: Var) -> Result<LossBatch> {
    let s = gram_contrast(tape, g, None, None)?;
    fdv(tape, &s)
}

pub fn mine_loss(tape: &mut Tape, g: Var, ema: &mut EmaState) -> Result<LossBatch> {
    let s = gram_contrast(tape, g, None, None)?;
    mine(tape, &s, ema)
}

/// Largest value the InfoNCE estimate can take with `n` negatives per row.
pub fn infonce_cap(negatives: usize) -> f64 {
    ((negatives + 1) as f64).ln()
}

/// Exponent clamp used inside the losses.
pub const fn exponent_clamp() -> f64 {
    EXP_CLAMP
}
