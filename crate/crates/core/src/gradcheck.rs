//! Central finite-difference check of tape gradients.

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheck {
    /// `max_k |g_ad - g_fd| / (|g_fd| + 1e-8)`.
    pub max_rel_error: f64,
    pub autodiff: Tensor,
    pub finite_diff: Tensor,
}

fn eval<F>(f: &F, point: Tensor, stops: Option<Vec<Tensor>>) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    if let Some(s) = stops {
        tape.replay_stops(s);
    }
    let x = tape.variable(point);
    let y = f(&mut tape, x)?;
    tape.item(y)
}

/// Compares the tape gradient of scalar `f` at `point` against central differences.
///
/// Values passed through `stop_gradient` are frozen at their base-point values
/// while differencing, so the comparison is against the detached surrogate.
pub fn grad_check<F>(f: F, point: &Tensor, h: f64) -> Result<GradCheck>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config(format!("finite-difference step {h}")));
    }
    let mut tape = Tape::new();
    tape.record_stops();
    let x = tape.variable(point.clone());
    let y = f(&mut tape, x)?;
    let stops = tape.take_recorded_stops();
    let grads = tape.backward(y)?;
    let ad = grads.wrt_or_zero(&tape, x);

    let mut fd = vec![0.0; point.len()];
    let [r, c] = point.shape();
    for (k, slot) in fd.iter_mut().enumerate() {
        let mut plus = point.data().to_vec();
        let mut minus = point.data().to_vec();
        plus[k] += h;
        minus[k] -= h;
        let fp = eval(&f, Tensor::new(r, c, plus)?, Some(stops.clone()))?;
        let fm = eval(&f, Tensor::new(r, c, minus)?, Some(stops.clone()))?;
        *slot = (fp - fm) / (2.0 * h);
    }
    let finite_diff = Tensor::new(r, c, fd)?;
    let max_rel_error = ad
        .data()
        .iter()
        .zip(finite_diff.data())
        .map(|(a, n)| (a - n).abs() / (n.abs() + 1e-8))
        .fold(0.0, f64::max);
    Ok(GradCheck {
        max_rel_error,
        autodiff: ad,
        finite_diff,
    })
}
