//! Exact mutual information and closed-form bounds on finite alphabets.
//!
//! Expectations are sums over the joint table, so every bound here is exact:
//!
//! - UBA: `Σ P(x,y) g(x,y) - Σ p(x) ln Z(x)` with `Z(x) = Σ_y' p(y') e^{g(x,y')}`.
//! - FLO: `1 - Σ P(x,y) [u(x,y) + e^{-u(x,y)} S(x,y)]` with
//!   `S(x,y) = Σ_y' p(y') e^{g(x,y') - g(x,y)}`.
//!
//! Cells with `P(x,y) = 0` carry no weight (`0 · anything = 0`). Their log
//! quantities are replaced by [`ZERO_CELL_SENTINEL`] and flagged.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::critics::TabularCritic;
use crate::error::{Error, Result};
use crate::rng::Rng as StreamRng;
use crate::tensor::Tensor;
use crate::training::PairSampler;

/// Stand-in for `ln 0` in PMI and conditional log tables.
pub const ZERO_CELL_SENTINEL: f64 = -1e6;
/// Largest supported alphabet on either axis.
pub const MAX_ALPHABET: usize = 16;
const SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteJoint {
    p: Tensor,
    px: Vec<f64>,
    py: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(p: Tensor) -> Result<Self> {
        let [nx, ny] = p.shape();
        if nx == 0 || ny == 0 || nx > MAX_ALPHABET || ny > MAX_ALPHABET {
            return Err(Error::contract(format!(
                "joint table {nx}x{ny} outside 1..={MAX_ALPHABET} per axis"
            )));
        }
        if let Some(v) = p.data().iter().find(|&&v| v < 0.0) {
            return Err(Error::contract(format!("negative probability {v}")));
        }
        let total: f64 = p.data().iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::contract(format!("table must sum to 1 (sums to {total})")));
        }
        let px: Vec<f64> = (0..nx).map(|i| p.row_slice(i).iter().sum()).collect();
        let py: Vec<f64> = (0..ny).map(|j| (0..nx).map(|i| p.get(i, j)).sum()).collect();
        if px.iter().chain(&py).any(|&m| m <= 0.0) {
            return Err(Error::contract("zero-probability marginal row or column"));
        }
        Ok(Self { p, px, py })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Tensor::from_rows(rows)?)
    }

    /// Product of the given marginals.
    pub fn independent(px: &[f64], py: &[f64]) -> Result<Self> {
        let data = px.iter().flat_map(|a| py.iter().map(move |b| a * b)).collect();
        Self::new(Tensor::new(px.len(), py.len(), data)?)
    }

    /// Random full-support joint, cells i.i.d. exponential then normalized.
    pub fn random<R: Rng + ?Sized>(nx: usize, ny: usize, rng: &mut R) -> Result<Self> {
        let raw: Vec<f64> = (0..nx * ny).map(|_| Distribution::<f64>::sample(&Exp1, rng) + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let mut data: Vec<f64> = raw.iter().map(|v| v / total).collect();
        // put the rounding residue on the largest cell so the sum is 1 to ~1 ulp
        let residue = 1.0 - data.iter().sum::<f64>();
        let big = (0..data.len())
            .max_by(|&a, &b| data[a].total_cmp(&data[b]))
            .expect("nonempty");
        data[big] += residue;
        Self::new(Tensor::new(nx, ny, data)?)
    }

    pub fn table(&self) -> &Tensor {
        &self.p
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.px.len(), self.py.len())
    }

    pub fn px(&self) -> &[f64] {
        &self.px
    }

    pub fn py(&self) -> &[f64] {
        &self.py
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.p.get(x, y)
    }

    pub fn has_zero_cells(&self) -> bool {
        self.p.data().contains(&0.0)
    }

    /// `ln P/(p(x)p(y))`, with the sentinel in zero cells.
    pub fn pmi(&self) -> Tensor {
        let (nx, ny) = self.shape();
        let data = (0..nx)
            .flat_map(|x| (0..ny).map(move |y| (x, y)))
            .map(|(x, y)| {
                let p = self.prob(x, y);
                if p > 0.0 {
                    (p / (self.px[x] * self.py[y])).ln()
                } else {
                    ZERO_CELL_SENTINEL
                }
            })
            .collect();
        Tensor::from_raw(nx, ny, data)
    }

    fn cells(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let ny = self.py.len();
        self.p
            .data()
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(move |(k, &p)| (k / ny, k % ny, p))
    }

    fn check_table(&self, t: &Tensor, what: &str) -> Result<()> {
        let (nx, ny) = self.shape();
        if t.shape() != [nx, ny] {
            return Err(Error::contract(format!(
                "{what} table {:?} does not match alphabet {nx}x{ny}",
                t.shape()
            )));
        }
        Ok(())
    }
}

/// `Σ P ln P/(p(x)p(y))` in nats.
pub fn exact_mi(joint: &DiscreteJoint) -> f64 {
    joint
        .cells()
        .map(|(x, y, p)| p * (p / (joint.px[x] * joint.py[y])).ln())
        .sum()
}

/// `g = ln p(x|y) + c(x)` and `u = -PMI`.
///
/// `drift` defaults to zero. Zero cells get the sentinel in `g` and its
/// negation in `u`, and the result is flagged.
pub fn optimal_critics(joint: &DiscreteJoint, drift: Option<&[f64]>) -> Result<TabularCritic> {
    let (nx, ny) = joint.shape();
    if let Some(c) = drift {
        if c.len() != nx {
            return Err(Error::contract(format!("drift has {} entries for {nx} x-symbols", c.len())));
        }
    }
    let mut g = Vec::with_capacity(nx * ny);
    let mut sentinel_used = false;
    for x in 0..nx {
        let c = drift.map_or(0.0, |c| c[x]);
        for y in 0..ny {
            let p = joint.prob(x, y);
            if p > 0.0 {
                g.push((p / joint.py[y]).ln() + c);
            } else {
                sentinel_used = true;
                g.push(ZERO_CELL_SENTINEL + c);
            }
        }
    }
    let u = joint.pmi().map(|v| -v)?;
    let mut critic = TabularCritic::new(Tensor::new(nx, ny, g)?, u)?;
    critic.sentinel_used = sentinel_used;
    Ok(critic)
}

/// `ln Σ_y' p(y') e^{g(x,y')}` per x, max-stabilized.
fn log_partition(joint: &DiscreteJoint, g: &Tensor) -> Vec<f64> {
    (0..joint.px.len())
        .map(|x| {
            let row = g.row_slice(x);
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            m + row
                .iter()
                .zip(&joint.py)
                .map(|(v, q)| q * (v - m).exp())
                .sum::<f64>()
                .ln()
        })
        .collect()
}

/// The u minimizing FLO's inner term for a fixed `g`: `u_g(x,y) = ln S(x,y)`.
pub fn optimal_u_for(joint: &DiscreteJoint, g: &Tensor) -> Result<Tensor> {
    joint.check_table(g, "g")?;
    let lz = log_partition(joint, g);
    let (nx, ny) = joint.shape();
    let data = (0..nx)
        .flat_map(|x| (0..ny).map(move |y| (x, y)))
        .map(|(x, y)| lz[x] - g.get(x, y))
        .collect();
    Tensor::new(nx, ny, data)
}

/// Exact UBA value and its gradient with respect to the g-table.
///
/// `∂/∂g(a,b) = P(a,b) - p(a) p(b) e^{g(a,b)} / Z(a)`.
pub fn exact_uba(joint: &DiscreteJoint, g: &Tensor) -> Result<(f64, Tensor)> {
    joint.check_table(g, "g")?;
    let lz = log_partition(joint, g);
    let value = joint.cells().map(|(x, y, p)| p * g.get(x, y)).sum::<f64>()
        - joint.px.iter().zip(&lz).map(|(q, l)| q * l).sum::<f64>();
    let (nx, ny) = joint.shape();
    let grad = (0..nx)
        .flat_map(|a| (0..ny).map(move |b| (a, b)))
        .map(|(a, b)| {
            joint.prob(a, b) - joint.px[a] * joint.py[b] * (g.get(a, b) - lz[a]).exp()
        })
        .collect();
    Ok((value, Tensor::new(nx, ny, grad)?))
}

/// `e^{-u(x,y)} S(x,y)` computed in one exponent per term.
fn scaled_contrast(joint: &DiscreteJoint, g: &Tensor, u: &Tensor, x: usize, y: usize) -> f64 {
    let (gxy, uxy) = (g.get(x, y), u.get(x, y));
    g.row_slice(x)
        .iter()
        .zip(&joint.py)
        .map(|(gp, q)| q * (gp - gxy - uxy).exp())
        .sum()
}

/// Exact FLO value.
pub fn exact_flo(joint: &DiscreteJoint, g: &Tensor, u: &Tensor) -> Result<f64> {
    joint.check_table(g, "g")?;
    joint.check_table(u, "u")?;
    let inner: f64 = joint
        .cells()
        .map(|(x, y, p)| p * (u.get(x, y) + scaled_contrast(joint, g, u, x, y)))
        .sum();
    Ok(1.0 - inner)
}

/// Exact FLO gradients `(∂/∂g, ∂/∂u)`.
///
/// A cell `g(a,b)` enters as the numerator `g(x,y')` with `y' = b` for every
/// positive `(a, y)`, and as the denominator `g(x,y)` of the positive `(a, b)`.
pub fn exact_flo_grad(joint: &DiscreteJoint, g: &Tensor, u: &Tensor) -> Result<(Tensor, Tensor)> {
    joint.check_table(g, "g")?;
    joint.check_table(u, "u")?;
    let (nx, ny) = joint.shape();
    let mut dg = vec![0.0; nx * ny];
    let mut du = vec![0.0; nx * ny];
    for (x, y, p) in joint.cells() {
        let es = scaled_contrast(joint, g, u, x, y);
        du[x * ny + y] = -p * (1.0 - es);
        dg[x * ny + y] += p * es;
        let (gxy, uxy) = (g.get(x, y), u.get(x, y));
        for b in 0..ny {
            dg[x * ny + b] -= p * joint.py[b] * (g.get(x, b) - gxy - uxy).exp();
        }
    }
    Ok((Tensor::new(nx, ny, dg)?, Tensor::new(nx, ny, du)?))
}

/// Tightness diagnostics of one joint at its optimal critics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub mi: f64,
    pub flo_at_optimum: f64,
    pub uba_at_optimum: f64,
    /// `E[-u*]`.
    pub neg_u_mean: f64,
    pub max_deviation: f64,
    pub sentinel_used: bool,
}

pub fn oracle_report(joint: &DiscreteJoint) -> Result<OracleReport> {
    let mi = exact_mi(joint);
    let opt = optimal_critics(joint, None)?;
    let flo = exact_flo(joint, &opt.g, &opt.u)?;
    let (uba, _) = exact_uba(joint, &opt.g)?;
    let neg_u_mean = joint.cells().map(|(x, y, p)| -p * opt.u.get(x, y)).sum();
    let max_deviation = [flo, uba, neg_u_mean]
        .iter()
        .map(|v| (v - mi).abs())
        .fold(0.0, f64::max);
    Ok(OracleReport {
        mi,
        flo_at_optimum: flo,
        uba_at_optimum: uba,
        neg_u_mean,
        max_deviation,
        sentinel_used: opt.sentinel_used,
    })
}

/// Named joints used by the oracle command.
pub fn builtin_joints() -> Vec<(&'static str, DiscreteJoint)> {
    let j = |rows: &[Vec<f64>]| DiscreteJoint::from_rows(rows).expect("valid builtin");
    vec![
        ("correlated-2x2", j(&[vec![0.4, 0.1], vec![0.1, 0.4]])),
        ("independent-2x3", DiscreteJoint::independent(&[0.25, 0.75], &[0.5, 0.25, 0.25]).expect("valid builtin")),
        ("copy-2x2", j(&[vec![0.5, 0.0], vec![0.0, 0.5]])),
    ]
}

impl PairSampler for DiscreteJoint {
    /// Symbols as `f64` columns, for tabular critics.
    fn sample(&self, n: usize, rng: &mut StreamRng) -> Result<(Tensor, Tensor)> {
        let ny = self.py.len();
        let cdf: Vec<f64> = self
            .p
            .data()
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let r: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
            let cell = cdf.partition_point(|&c| c <= r).min(cdf.len() - 1);
            xs.push((cell / ny) as f64);
            ys.push((cell % ny) as f64);
        }
        Ok((Tensor::column(&xs)?, Tensor::column(&ys)?))
    }

    fn truth(&self) -> Option<f64> {
        Some(exact_mi(self))
    }
}
