//! Second routes to the discrete oracle's quantities: a direct MI sum and the
//! exact FLO and UBA expectations assembled from tape ops over the tables, so
//! their gradients come from reverse mode instead of the closed forms.

use fenlo_core::oracle::DiscreteJoint;
use fenlo_core::rng::Rng;
use fenlo_core::{Tape, Tensor};
use rand_distr::{Distribution, StandardNormal};

/// `Σ P ln(P / (px py))` with marginals recomputed from the table.
pub fn brute_mi(rows: &[Vec<f64>]) -> f64 {
    let px: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
    let py: Vec<f64> = (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j]).sum()).collect();
    let mut mi = 0.0;
    for (i, r) in rows.iter().enumerate() {
        for (j, &p) in r.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (px[i] * py[j])).ln();
            }
        }
    }
    mi
}

pub fn rows_of(joint: &DiscreteJoint) -> Vec<Vec<f64>> {
    let t = joint.table();
    (0..t.rows()).map(|i| t.row_slice(i).to_vec()).collect()
}

pub fn random_table(nx: usize, ny: usize, scale: f64, rng: &mut Rng) -> Tensor {
    let data = (0..nx * ny)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect();
    Tensor::new(nx, ny, data).unwrap()
}

/// Exact FLO value and `(∂/∂g, ∂/∂u)` via the tape.
pub fn tape_flo(joint: &DiscreteJoint, g: &Tensor, u: &Tensor) -> (f64, Tensor, Tensor) {
    let mut t = Tape::new();
    let p = t.constant(joint.table().clone());
    let py = t.constant(Tensor::column(joint.py()).unwrap());
    let gv = t.variable(g.clone());
    let uv = t.variable(u.clone());
    let e = t.exp(gv).unwrap();
    let s = t.matmul(e, py).unwrap();
    let ls = t.ln(s).unwrap();
    let d = t.sub(ls, gv).unwrap();
    let d = t.sub(d, uv).unwrap();
    let ratio = t.exp(d).unwrap();
    let inner = t.add(uv, ratio).unwrap();
    let w = t.mul(p, inner).unwrap();
    let total = t.sum(w).unwrap();
    let one = t.scalar(1.0).unwrap();
    let flo = t.sub(one, total).unwrap();
    let grads = t.backward(flo).unwrap();
    (t.item(flo).unwrap(), grads.wrt_or_zero(&t, gv), grads.wrt_or_zero(&t, uv))
}

/// Exact UBA value and `∂/∂g` via the tape.
pub fn tape_uba(joint: &DiscreteJoint, g: &Tensor) -> (f64, Tensor) {
    let mut t = Tape::new();
    let p = t.constant(joint.table().clone());
    let px = t.constant(Tensor::column(joint.px()).unwrap());
    let py = t.constant(Tensor::column(joint.py()).unwrap());
    let gv = t.variable(g.clone());
    let pg = t.mul(p, gv).unwrap();
    let first = t.sum(pg).unwrap();
    let e = t.exp(gv).unwrap();
    let z = t.matmul(e, py).unwrap();
    let lz = t.ln(z).unwrap();
    let wl = t.mul(px, lz).unwrap();
    let second = t.sum(wl).unwrap();
    let uba = t.sub(first, second).unwrap();
    let grads = t.backward(uba).unwrap();
    (t.item(uba).unwrap(), grads.wrt_or_zero(&t, gv))
}
