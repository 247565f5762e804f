//! Random composite tape graphs for gradient checking.
//!
//! Shared by the autodiff tests and the acceptance suite.

use std::collections::BTreeSet;

use fenlo_core::gradcheck::grad_check;
use fenlo_core::rng::{self, Rng};
use fenlo_core::{Result, Tape, Tensor, Var};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// Every tape op an estimator, critic or learner can record.
pub const ALL_OPS: [&str; 31] = [
    "matmul", "add", "sub", "mul", "div", "relu", "tanh", "exp", "ln", "sqrt", "square", "scale",
    "neg", "clamp", "clamp_exponent", "exp_clamped", "mean", "sum", "sum_rows", "sum_cols",
    "logsumexp_rows", "softmax_rows", "concat", "concat_rows", "transpose", "reshape", "gather",
    "gather_rows", "diag", "off_diag", "stop_gradient",
];

/// One randomly chosen stage of a composite graph, with any constants it needs
/// fixed at generation time so the graph can be rebuilt identically. Stages
/// avoid stationary points near the origin and keep activations O(1): a
/// gradient many orders below the function value is below what central
/// differences can resolve under a relative-error metric.
#[derive(Debug, Clone)]
pub enum Step {
    Tanh,
    Relu,
    Exp,
    Ln,
    Sqrt,
    Scale(f64),
    Neg,
    Clamp,
    ClampExponent,
    ExpClamped,
    MatMul(Tensor),
    MulTanh,
    Div,
    CenterRows,
    AddColSums,
    LogSoftmax,
    Softmax,
    Transpose,
    Reshape,
    Concat,
    ConcatRows,
    Gather(Vec<usize>),
    GatherRows(Vec<usize>),
    GramDiag,
    Stop,
    Diamond,
}

impl Step {
    /// Tape ops exercised by this stage.
    pub fn ops(&self) -> &'static [&'static str] {
        match self {
            Step::Tanh => &["tanh"],
            Step::Relu => &["relu", "scale", "add"],
            Step::Exp => &["tanh", "exp"],
            Step::Ln => &["tanh", "exp", "add", "ln"],
            Step::Sqrt => &["tanh", "exp", "sqrt"],
            Step::Scale(_) => &["scale"],
            Step::Neg => &["neg"],
            Step::Clamp => &["clamp"],
            Step::ClampExponent => &["scale", "clamp_exponent"],
            Step::ExpClamped => &["tanh", "exp_clamped"],
            Step::MatMul(_) => &["matmul"],
            Step::MulTanh => &["tanh", "scale", "exp", "mul"],
            Step::Div => &["square", "add", "div"],
            Step::CenterRows => &["sum_rows", "scale", "sub"],
            Step::AddColSums => &["sum_cols", "scale", "add"],
            Step::LogSoftmax => &["logsumexp_rows", "sub"],
            Step::Softmax => &["softmax_rows"],
            Step::Transpose => &["transpose"],
            Step::Reshape => &["reshape"],
            Step::Concat => &["tanh", "concat"],
            Step::ConcatRows => &["square", "concat_rows"],
            Step::Gather(_) => &["gather"],
            Step::GatherRows(_) => &["gather_rows"],
            Step::GramDiag => &["transpose", "matmul", "diag", "off_diag", "concat"],
            Step::Stop => &["tanh", "exp", "stop_gradient", "mul"],
            Step::Diamond => &["add", "scale"],
        }
    }

    fn apply(&self, t: &mut Tape, h: Var) -> Result<Var> {
        let [r, c] = t.value(h).shape();
        match self {
            Step::Tanh => t.tanh(h),
            Step::Relu => {
                let a = t.relu(h)?;
                let b = t.scale(h, 0.1)?;
                t.add(a, b)
            }
            Step::Exp => {
                let a = t.tanh(h)?;
                t.exp(a)
            }
            Step::Ln => {
                let a = t.tanh(h)?;
                let e = t.exp(a)?;
                let one = t.scalar(1.0)?;
                let s = t.add(e, one)?;
                t.ln(s)
            }
            Step::Sqrt => {
                let a = t.tanh(h)?;
                let e = t.exp(a)?;
                t.sqrt(e)
            }
            Step::Scale(f) => t.scale(h, *f),
            Step::Neg => t.neg(h),
            Step::Clamp => t.clamp(h, -0.7, 0.7),
            Step::ClampExponent => {
                let a = t.scale(h, 40.0)?;
                let b = t.clamp_exponent(a)?;
                t.scale(b, 0.025)
            }
            Step::ExpClamped => {
                let a = t.tanh(h)?;
                t.exp_clamped(a)
            }
            Step::MatMul(w) => {
                let w = t.constant(w.clone());
                t.matmul(h, w)
            }
            Step::MulTanh => {
                let a = t.tanh(h)?;
                let a = t.scale(a, 0.5)?;
                let e = t.exp(a)?;
                t.mul(h, e)
            }
            Step::Div => {
                let sq = t.square(h)?;
                let two = t.scalar(2.0)?;
                let d = t.add(sq, two)?;
                t.div(h, d)
            }
            Step::CenterRows => {
                let s = t.sum_rows(h)?;
                let m = t.scale(s, 1.0 / c as f64)?;
                t.sub(h, m)
            }
            Step::AddColSums => {
                let s = t.sum_cols(h)?;
                let s = t.scale(s, 0.3)?;
                t.add(h, s)
            }
            Step::LogSoftmax => {
                let l = t.logsumexp_rows(h)?;
                t.sub(h, l)
            }
            Step::Softmax => t.softmax_rows(h),
            Step::Transpose => t.transpose(h),
            Step::Reshape => t.reshape(h, c, r),
            Step::Concat => {
                let a = t.tanh(h)?;
                t.concat(&[h, a])
            }
            Step::ConcatRows => {
                let a = t.square(h)?;
                t.concat_rows(&[a, h])
            }
            Step::Gather(idx) => t.gather(h, idx.clone(), r, c),
            Step::GatherRows(idx) => t.gather_rows(h, idx),
            Step::GramDiag => {
                let ht = t.transpose(h)?;
                let g = t.matmul(h, ht)?;
                let d = t.diag(g)?;
                let o = t.off_diag(g)?;
                t.concat(&[d, o])
            }
            Step::Stop => {
                let a = t.tanh(h)?;
                let e = t.exp(a)?;
                let s = t.stop_gradient(e)?;
                t.mul(h, s)
            }
            Step::Diamond => {
                let d = t.add(h, h)?;
                t.scale(d, 0.5)
            }
        }
    }
}

pub fn gaussian(r: usize, c: usize, scale: f64, rng: &mut Rng) -> Tensor {
    let data = (0..r * c)
        .map(|_| { let z: f64 = StandardNormal.sample(rng); scale * z })
        .collect::<Vec<f64>>();
    Tensor::new(r, c, data).unwrap()
}

fn random_step(shape: [usize; 2], rng: &mut Rng) -> Step {
    let [r, c] = shape;
    loop {
        let step = match rng.random_range(0..26) {
            0 => Step::Tanh,
            1 => Step::Relu,
            2 => Step::Exp,
            3 => Step::Ln,
            4 => Step::Sqrt,
            5 => Step::Scale(rng.random_range(-1.5..1.5)),
            6 => Step::Neg,
            7 => Step::Clamp,
            8 => Step::ClampExponent,
            9 => Step::ExpClamped,
            10 => {
                let out = rng.random_range(2..5);
                Step::MatMul(gaussian(c, out, 1.0 / (c as f64).sqrt(), rng))
            }
            11 => Step::MulTanh,
            12 => Step::Div,
            13 => Step::CenterRows,
            14 => Step::AddColSums,
            15 => Step::LogSoftmax,
            16 => Step::Softmax,
            17 => Step::Transpose,
            18 => Step::Reshape,
            19 if c <= 4 => Step::Concat,
            20 if r <= 4 => Step::ConcatRows,
            21 => Step::Gather((0..r * c).map(|_| rng.random_range(0..r * c)).collect()),
            22 => Step::GatherRows((0..r).map(|_| rng.random_range(0..r)).collect()),
            23 if r >= 2 && r <= 5 => Step::GramDiag,
            24 => Step::Stop,
            25 => Step::Diamond,
            _ => continue,
        };
        return step;
    }
}

pub struct Graph {
    pub steps: Vec<Step>,
    pub readout: Tensor,
}

impl Graph {
    pub fn eval(&self, t: &mut Tape, x: Var) -> Result<Var> {
        let mut h = x;
        for s in &self.steps {
            h = s.apply(t, h)?;
        }
        // a weighted sum keeps every coordinate's gradient generic, and the
        // quadratic mean covers `mean` and `sum` reductions
        let w = t.constant(self.readout.clone());
        let wh = t.mul(h, w)?;
        let lin = t.sum(wh)?;
        let sq = t.square(h)?;
        let quad = t.mean(sq)?;
        t.add(lin, quad)
    }
}

pub fn random_graph(point: &Tensor, rng: &mut Rng) -> Graph {
    let mut steps = Vec::new();
    let mut tape = Tape::new();
    let mut h = tape.variable(point.clone());
    for _ in 0..8 {
        let s = random_step(tape.value(h).shape(), rng);
        h = s.apply(&mut tape, h).unwrap();
        steps.push(s);
    }
    let [r, c] = tape.value(h).shape();
    Graph {
        steps,
        readout: gaussian(r, c, 1.0, rng),
    }
}

/// Outcome of checking `n` random graphs.
pub struct Sweep {
    pub worst: f64,
    pub failures: Vec<String>,
    pub uncovered: Vec<&'static str>,
}

/// Grad-checks `n` graphs on random `3×4` points with step `h`.
pub fn check_graphs(n: u64, seed: u64, h: f64, tol: f64) -> Sweep {
    let mut covered: BTreeSet<&str> = ["mean", "sum", "mul", "square", "add"].into();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for case in 0..n {
        let mut r = rng::stream(seed, case);
        let point = gaussian(3, 4, 0.8, &mut r);
        let graph = random_graph(&point, &mut r);
        for s in &graph.steps {
            covered.extend(s.ops());
        }
        match grad_check(|t, x| graph.eval(t, x), &point, h) {
            Ok(c) => {
                worst = worst.max(c.max_rel_error);
                if !(c.max_rel_error < tol) {
                    failures.push(format!("case {case}: error {} for {:?}", c.max_rel_error, graph.steps));
                }
            }
            Err(e) => failures.push(format!("case {case}: {e}")),
        }
    }
    let uncovered = ALL_OPS.iter().copied().filter(|op| !covered.contains(op)).collect();
    Sweep {
        worst,
        failures,
        uncovered,
    }
}
