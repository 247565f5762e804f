//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Tape`] records every operation applied to its [`Var`] handles in
//! topological order. [`Tape::backward`] walks the records once, newest to
//! oldest, accumulating adjoints. Values are checked for finiteness as they
//! are produced so a blow-up is reported at the op that caused it.
//!
//! Binary elementwise ops broadcast any dimension of size 1, which covers
//! bias rows `[1, c]`, per-row columns `[r, 1]`, and scalars `[1, 1]`.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::{gemm, Tensor};

/// Exponent bound applied by [`Tape::clamp_exponent`].
pub const EXP_CLAMP: f64 = 30.0;

/// Kind tag of a recorded operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum OpKind {
    Constant,
    Variable,
    Param,
    MatMul,
    Add,
    Sub,
    Mul,
    Div,
    Relu,
    Tanh,
    Exp,
    Ln,
    Sqrt,
    Square,
    Scale,
    Clamp,
    Mean,
    Sum,
    SumRows,
    SumCols,
    LogSumExpRows,
    Concat,
    ConcatRows,
    Transpose,
    Reshape,
    Gather,
    StopGradient,
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Variable,
    Param,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Relu(usize),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Sqrt(usize),
    Square(usize),
    Scale(usize, f64),
    Clamp(usize, f64, f64),
    Mean(usize),
    Sum(usize),
    SumRows(usize),
    SumCols(usize),
    LogSumExpRows(usize),
    Concat(Vec<usize>),
    ConcatRows(Vec<usize>),
    Transpose(usize),
    Reshape(usize),
    /// Output element `k` is input element `index[k]` (flat row-major).
    Gather(usize, Vec<usize>),
    StopGradient,
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Constant => OpKind::Constant,
            Op::Variable => OpKind::Variable,
            Op::Param => OpKind::Param,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Mul(..) => OpKind::Mul,
            Op::Div(..) => OpKind::Div,
            Op::Relu(_) => OpKind::Relu,
            Op::Tanh(_) => OpKind::Tanh,
            Op::Exp(_) => OpKind::Exp,
            Op::Ln(_) => OpKind::Ln,
            Op::Sqrt(_) => OpKind::Sqrt,
            Op::Square(_) => OpKind::Square,
            Op::Scale(..) => OpKind::Scale,
            Op::Clamp(..) => OpKind::Clamp,
            Op::Mean(_) => OpKind::Mean,
            Op::Sum(_) => OpKind::Sum,
            Op::SumRows(_) => OpKind::SumRows,
            Op::SumCols(_) => OpKind::SumCols,
            Op::LogSumExpRows(_) => OpKind::LogSumExpRows,
            Op::Concat(_) => OpKind::Concat,
            Op::ConcatRows(_) => OpKind::ConcatRows,
            Op::Transpose(_) => OpKind::Transpose,
            Op::Reshape(_) => OpKind::Reshape,
            Op::Gather(..) => OpKind::Gather,
            Op::StopGradient => OpKind::StopGradient,
        }
    }

    fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Constant | Op::Variable | Op::Param | Op::StopGradient => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                vec![*a, *b]
            }
            Op::Relu(a)
            | Op::Tanh(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Sqrt(a)
            | Op::Square(a)
            | Op::Scale(a, _)
            | Op::Clamp(a, ..)
            | Op::Mean(a)
            | Op::Sum(a)
            | Op::SumRows(a)
            | Op::SumCols(a)
            | Op::LogSumExpRows(a)
            | Op::Transpose(a)
            | Op::Reshape(a)
            | Op::Gather(a, _) => vec![*a],
            Op::Concat(v) | Op::ConcatRows(v) => v.clone(),
        }
    }
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    tracked: bool,
}

#[derive(Debug, Default)]
enum StopMode {
    #[default]
    Normal,
    Record(Vec<Tensor>),
    Replay(Vec<Tensor>, usize),
}

/// Operation record for one forward pass. Single-threaded; build one per step.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<String, usize>,
    stops: StopMode,
}

/// Adjoints produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(String, usize)>,
}

impl Gradients {
    /// Gradient with respect to `var`; `None` when the loss does not depend on it.
    pub fn wrt(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `var`, zeros when unreachable.
    pub fn wrt_or_zero(&self, tape: &Tape, var: Var) -> Tensor {
        self.wrt(var).cloned().unwrap_or_else(|| {
            let [r, c] = tape.value(var).shape();
            Tensor::zeros(r, c)
        })
    }

    /// Gradients of every parameter registered on the tape, zero-filled when unreachable.
    pub fn params(&self, tape: &Tape) -> std::collections::BTreeMap<String, Tensor> {
        self.params
            .iter()
            .map(|(name, id)| (name.clone(), self.wrt_or_zero(tape, Var(*id))))
            .collect()
    }
}

fn broadcast_shape(op: &'static str, a: [usize; 2], b: [usize; 2]) -> Result<[usize; 2]> {
    let mut out = [0; 2];
    for d in 0..2 {
        out[d] = if a[d] == b[d] {
            a[d]
        } else if a[d] == 1 {
            b[d]
        } else if b[d] == 1 {
            a[d]
        } else {
            return Err(Error::Dimension { op, lhs: a, rhs: b });
        };
    }
    Ok(out)
}

#[inline]
fn bidx(shape: [usize; 2], i: usize, j: usize) -> usize {
    let r = if shape[0] == 1 { 0 } else { i };
    let c = if shape[1] == 1 { 0 } else { j };
    r * shape[1] + c
}

fn check_finite(kind: OpKind, data: &[f64]) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric { op: kind })
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].op.kind()
    }

    /// Scalar value of a `[1, 1]` var.
    pub fn item(&self, v: Var) -> Result<f64> {
        self.value(v).item()
    }

    /// Whether gradients can flow back through `v`.
    pub fn is_tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn push(&mut self, op: Op, value: Tensor) -> Result<Var> {
        check_finite(op.kind(), value.data())?;
        let tracked = match &op {
            Op::Variable | Op::Param => true,
            Op::Constant | Op::StopGradient => false,
            other => other.inputs().iter().any(|&i| self.nodes[i].tracked),
        };
        self.nodes.push(Node { op, value, tracked });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Untracked input.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Constant,
            value: t,
            tracked: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn scalar(&mut self, v: f64) -> Result<Var> {
        Ok(self.constant(Tensor::scalar(v)?))
    }

    /// Tracked input that is not a named parameter.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            op: Op::Variable,
            value: t,
            tracked: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Named trainable parameter. Requesting the same name twice returns the same var.
    pub fn param(&mut self, name: &str, t: &Tensor) -> Var {
        if let Some(&id) = self.params.get(name) {
            return Var(id);
        }
        let v = self.variable(t.clone());
        self.nodes[v.0].op = Op::Param;
        self.params.insert(name.to_string(), v.0);
        v
    }

    pub fn param_var(&self, name: &str) -> Option<Var> {
        self.params.get(name).map(|&i| Var(i))
    }

    fn binary(
        &mut self,
        kind: OpKind,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        let out = broadcast_shape(name, sa, sb)?;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(out[0] * out[1]);
        if sa == sb {
            data.extend(da.iter().zip(db).map(|(&x, &y)| f(x, y)));
        } else {
            for i in 0..out[0] {
                for j in 0..out[1] {
                    data.push(f(da[bidx(sa, i, j)], db[bidx(sb, i, j)]));
                }
            }
        }
        let op = match kind {
            OpKind::Add => Op::Add(a.0, b.0),
            OpKind::Sub => Op::Sub(a.0, b.0),
            OpKind::Mul => Op::Mul(a.0, b.0),
            _ => Op::Div(a.0, b.0),
        };
        self.push(op, Tensor::from_raw(out[0], out[1], data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(OpKind::Add, "add", a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(OpKind::Sub, "sub", a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(OpKind::Mul, "mul", a, b, |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(b).data().iter().any(|&v| v == 0.0) {
            return Err(Error::Domain {
                op: "div",
                detail: "division by zero".into(),
            });
        }
        self.binary(OpKind::Div, "div", a, b, |x, y| x / y)
    }

    fn unary(&mut self, op: Op, a: Var, f: impl Fn(f64) -> f64) -> Result<Var> {
        let t = self.value(a);
        let data = t.data().iter().map(|&v| f(v)).collect();
        let value = Tensor::from_raw(t.rows(), t.cols(), data);
        self.push(op, value)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(Op::Relu(a.0), a, |v| v.max(0.0))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(Op::Tanh(a.0), a, f64::tanh)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(Op::Exp(a.0), a, f64::exp)
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        if let Some(bad) = self.value(a).data().iter().find(|&&v| v <= 0.0) {
            return Err(Error::Domain {
                op: "ln",
                detail: format!("argument {bad} is not strictly positive"),
            });
        }
        self.unary(Op::Ln(a.0), a, f64::ln)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        if let Some(bad) = self.value(a).data().iter().find(|&&v| v < 0.0) {
            return Err(Error::Domain {
                op: "sqrt",
                detail: format!("argument {bad} is negative"),
            });
        }
        self.unary(Op::Sqrt(a.0), a, f64::sqrt)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(Op::Square(a.0), a, |v| v * v)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        self.unary(Op::Scale(a.0, factor), a, |v| v * factor)
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        self.scale(a, -1.0)
    }

    /// Elementwise clamp to `[lo, hi]`; the gradient is zero where the bound is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::contract(format!("clamp bounds [{lo}, {hi}]")));
        }
        self.unary(Op::Clamp(a.0, lo, hi), a, |v| v.clamp(lo, hi))
    }

    /// Clamp to `[-EXP_CLAMP, EXP_CLAMP]`, used on every exponent inside estimator losses.
    pub fn clamp_exponent(&mut self, a: Var) -> Result<Var> {
        self.clamp(a, -EXP_CLAMP, EXP_CLAMP)
    }

    /// `exp(clamp_exponent(a))`.
    pub fn exp_clamped(&mut self, a: Var) -> Result<Var> {
        let c = self.clamp_exponent(a)?;
        self.exp(c)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::contract("mean of an empty tensor"));
        }
        let m = t.sum() / t.len() as f64;
        self.push(Op::Mean(a.0), Tensor::from_raw(1, 1, vec![m]))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).sum();
        self.push(Op::Sum(a.0), Tensor::from_raw(1, 1, vec![s]))
    }

    /// Sum across columns: `[r, c] -> [r, 1]`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let data = (0..t.rows()).map(|i| t.row_slice(i).iter().sum()).collect();
        let rows = t.rows();
        self.push(Op::SumRows(a.0), Tensor::from_raw(rows, 1, data))
    }

    /// Sum down rows: `[r, c] -> [1, c]`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let mut data = vec![0.0; t.cols()];
        for i in 0..t.rows() {
            for (acc, v) in data.iter_mut().zip(t.row_slice(i)) {
                *acc += v;
            }
        }
        let cols = t.cols();
        self.push(Op::SumCols(a.0), Tensor::from_raw(1, cols, data))
    }

    /// Row-wise `ln Σ_j exp(a_ij)` with max subtraction: `[r, c] -> [r, 1]`.
    pub fn logsumexp_rows(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.cols() == 0 {
            return Err(Error::contract("logsumexp over zero columns"));
        }
        let data = (0..t.rows())
            .map(|i| {
                let row = t.row_slice(i);
                let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
            })
            .collect();
        let rows = t.rows();
        self.push(Op::LogSumExpRows(a.0), Tensor::from_raw(rows, 1, data))
    }

    /// Row-wise softmax, built from `logsumexp_rows`.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let lse = self.logsumexp_rows(a)?;
        let shifted = self.sub(a, lse)?;
        self.exp(shifted)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa[1] != sb[0] {
            return Err(Error::Dimension {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let mut out = vec![0.0; sa[0] * sb[1]];
        gemm(ta.data(), sa, false, tb.data(), sb, false, &mut out, false);
        self.push(Op::MatMul(a.0, b.0), Tensor::from_raw(sa[0], sb[1], out))
    }

    /// Concatenate along columns.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat of zero tensors"))?;
        let rows = self.value(*first).rows();
        for p in parts {
            let s = self.value(*p).shape();
            if s[0] != rows {
                return Err(Error::Dimension {
                    op: "concat",
                    lhs: self.value(*first).shape(),
                    rhs: s,
                });
            }
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row_slice(i));
            }
        }
        let ids = parts.iter().map(|p| p.0).collect();
        self.push(Op::Concat(ids), Tensor::from_raw(rows, cols, data))
    }

    /// Concatenate along rows.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat_rows of zero tensors"))?;
        let cols = self.value(*first).cols();
        for p in parts {
            let s = self.value(*p).shape();
            if s[1] != cols {
                return Err(Error::Dimension {
                    op: "concat_rows",
                    lhs: self.value(*first).shape(),
                    rhs: s,
                });
            }
        }
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(self.value(*p).data());
        }
        let rows = parts.iter().map(|p| self.value(*p).rows()).sum();
        let ids = parts.iter().map(|p| p.0).collect();
        self.push(Op::ConcatRows(ids), Tensor::from_raw(rows, cols, data))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a).transpose();
        self.push(Op::Transpose(a.0), t)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Result<Var> {
        let t = self.value(a);
        if rows * cols != t.len() {
            return Err(Error::Dimension {
                op: "reshape",
                lhs: t.shape(),
                rhs: [rows, cols],
            });
        }
        let t = Tensor::from_raw(rows, cols, t.data().to_vec());
        self.push(Op::Reshape(a.0), t)
    }

    /// Output element `k` (row-major in `[rows, cols]`) is flat input element `index[k]`.
    pub fn gather(&mut self, a: Var, index: Vec<usize>, rows: usize, cols: usize) -> Result<Var> {
        let t = self.value(a);
        if index.len() != rows * cols {
            return Err(Error::Dimension {
                op: "gather",
                lhs: [index.len(), 1],
                rhs: [rows, cols],
            });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= t.len()) {
            return Err(Error::contract(format!(
                "gather index {bad} out of range for {:?}",
                t.shape()
            )));
        }
        let data = index.iter().map(|&i| t.data()[i]).collect();
        self.push(Op::Gather(a.0, index), Tensor::from_raw(rows, cols, data))
    }

    /// Rows of `a` in the order given by `idx` (repeats allowed).
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let [r, c] = self.value(a).shape();
        if let Some(&bad) = idx.iter().find(|&&i| i >= r) {
            return Err(Error::contract(format!("row {bad} out of range ({r} rows)")));
        }
        let index = idx
            .iter()
            .flat_map(|&i| (0..c).map(move |j| i * c + j))
            .collect();
        self.gather(a, index, idx.len(), c)
    }

    /// Diagonal of a square matrix as a column `[n, 1]`.
    pub fn diag(&mut self, a: Var) -> Result<Var> {
        let [r, c] = self.value(a).shape();
        if r != c {
            return Err(Error::Dimension {
                op: "diag",
                lhs: [r, c],
                rhs: [c, r],
            });
        }
        self.gather(a, (0..r).map(|i| i * c + i).collect(), r, 1)
    }

    /// Off-diagonal entries of a square matrix, row by row: `[n, n] -> [n, n-1]`.
    pub fn off_diag(&mut self, a: Var) -> Result<Var> {
        let [r, c] = self.value(a).shape();
        if r != c || r < 2 {
            return Err(Error::Dimension {
                op: "off_diag",
                lhs: [r, c],
                rhs: [c, r],
            });
        }
        let index = (0..r)
            .flat_map(|i| (0..c).filter(move |&j| j != i).map(move |j| i * c + j))
            .collect();
        self.gather(a, index, r, c - 1)
    }

    /// Copy of `a` with the gradient edge severed.
    pub fn stop_gradient(&mut self, a: Var) -> Result<Var> {
        let value = match &mut self.stops {
            StopMode::Normal => self.value(a).clone(),
            StopMode::Record(saved) => {
                let v = self.nodes[a.0].value.clone();
                saved.push(v.clone());
                v
            }
            StopMode::Replay(saved, next) => {
                let v = saved.get(*next).cloned().ok_or_else(|| {
                    Error::contract("stop_gradient replay ran past the recorded values")
                })?;
                *next += 1;
                if v.shape() != self.nodes[a.0].value.shape() {
                    return Err(Error::contract("stop_gradient replay shape changed"));
                }
                v
            }
        };
        self.push(Op::StopGradient, value)
    }

    /// Record the value of every `stop_gradient` call from now on.
    pub(crate) fn record_stops(&mut self) {
        self.stops = StopMode::Record(Vec::new());
    }

    pub(crate) fn take_recorded_stops(&mut self) -> Vec<Tensor> {
        match std::mem::take(&mut self.stops) {
            StopMode::Record(v) => v,
            _ => Vec::new(),
        }
    }

    /// Make every `stop_gradient` return the recorded values, in call order.
    pub(crate) fn replay_stops(&mut self, values: Vec<Tensor>) {
        self.stops = StopMode::Replay(values, 0);
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.shape() != [1, 1] {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        if self.nodes[loss.0].tracked {
            grads[loss.0] = Some(vec![1.0]);
        }
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            check_finite(node.op.kind(), &g)?;
            self.propagate(id, &g, &mut grads)?;
            grads[id] = Some(g);
        }
        let mut out: Vec<Option<Tensor>> = Vec::with_capacity(grads.len());
        for (id, g) in grads.into_iter().enumerate() {
            out.push(g.map(|g| {
                let [r, c] = self.nodes[id].value.shape();
                Tensor::from_raw(r, c, g)
            }));
        }
        let mut params: Vec<(String, usize)> =
            self.params.iter().map(|(k, v)| (k.clone(), *v)).collect();
        params.sort();
        Ok(Gradients {
            grads: out,
            params,
        })
    }

    fn slot<'a>(&self, grads: &'a mut [Option<Vec<f64>>], id: usize) -> Option<&'a mut [f64]> {
        if !self.nodes[id].tracked {
            return None;
        }
        let len = self.nodes[id].value.len();
        Some(grads[id].get_or_insert_with(|| vec![0.0; len]).as_mut_slice())
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) -> Result<()> {
        let node = &self.nodes[id];
        let out = &node.value;
        let oshape = out.shape();
        match &node.op {
            Op::Constant | Op::Variable | Op::Param | Op::StopGradient => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (&self.nodes[*a].value, &self.nodes[*b].value);
                if let Some(ga) = self.slot(grads, *a) {
                    gemm(g, oshape, false, tb.data(), tb.shape(), true, ga, true);
                }
                if let Some(gb) = self.slot(grads, *b) {
                    gemm(ta.data(), ta.shape(), true, g, oshape, false, gb, true);
                }
            }
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) => {
                let (sa, sb) = (self.nodes[*a].value.shape(), self.nodes[*b].value.shape());
                let (va, vb) = (self.nodes[*a].value.data(), self.nodes[*b].value.data());
                let kind = node.op.kind();
                let same = sa == oshape && sb == oshape;
                if let Some(ga) = self.slot(grads, *a) {
                    for i in 0..oshape[0] {
                        for j in 0..oshape[1] {
                            let k = i * oshape[1] + j;
                            let (ia, ib) = if same {
                                (k, k)
                            } else {
                                (bidx(sa, i, j), bidx(sb, i, j))
                            };
                            ga[ia] += match kind {
                                OpKind::Add | OpKind::Sub => g[k],
                                OpKind::Mul => g[k] * vb[ib],
                                _ => g[k] / vb[ib],
                            };
                        }
                    }
                }
                if let Some(gb) = self.slot(grads, *b) {
                    for i in 0..oshape[0] {
                        for j in 0..oshape[1] {
                            let k = i * oshape[1] + j;
                            let (ia, ib) = if same {
                                (k, k)
                            } else {
                                (bidx(sa, i, j), bidx(sb, i, j))
                            };
                            gb[ib] += match kind {
                                OpKind::Add => g[k],
                                OpKind::Sub => -g[k],
                                OpKind::Mul => g[k] * va[ia],
                                _ => -g[k] * va[ia] / (vb[ib] * vb[ib]),
                            };
                        }
                    }
                }
            }
            Op::Relu(a) => {
                let x = self.nodes[*a].value.data();
                if let Some(ga) = self.slot(grads, *a) {
                    for k in 0..g.len() {
                        if x[k] > 0.0 {
                            ga[k] += g[k];
                        }
                    }
                }
            }
            Op::Tanh(a) => {
                if let Some(ga) = self.slot(grads, *a) {
                    for (k, y) in out.data().iter().enumerate() {
                        ga[k] += g[k] * (1.0 - y * y);
                    }
                }
            }
            Op::Exp(a) => {
                if let Some(ga) = self.slot(grads, *a) {
                    for (k, y) in out.data().iter().enumerate() {
                        ga[k] += g[k] * y;
                    }
                }
            }
            Op::Ln(a) => {
                let x = self.nodes[*a].value.data();
                if let Some(ga) = self.slot(grads, *a) {
                    for k in 0..g.len() {
                        ga[k] += g[k] / x[k];
                    }
                }
            }
            Op::Sqrt(a) => {
                if let Some(ga) = self.slot(grads, *a) {
                    for (k, y) in out.data().iter().enumerate() {
                        ga[k] += g[k] / (2.0 * y);
                    }
                }
            }
            Op::Square(a) => {
                let x = self.nodes[*a].value.data();
                if let Some(ga) = self.slot(grads, *a) {
                    for k in 0..g.len() {
                        ga[k] += 2.0 * g[k] * x[k];
                    }
                }
            }
            Op::Scale(a, f) => {
                if let Some(ga) = self.slot(grads, *a) {
                    for k in 0..g.len() {
                        ga[k] += g[k] * f;
                    }
                }
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.nodes[*a].value.data();
                if let Some(ga) = self.slot(grads, *a) {
                    for k in 0..g.len() {
                        if x[k] > *lo && x[k] < *hi {
                            ga[k] += g[k];
                        }
                    }
                }
            }
            Op::Mean(a) | Op::Sum(a) => {
                let n = self.nodes[*a].value.len();
                let scale = if matches!(node.op, Op::Mean(_)) {
                    g[0] / n as f64
                } else {
                    g[0]
                };
                if let Some(ga) = self.slot(grads, *a) {
                    ga.iter_mut().for_each(|v| *v += scale);
                }
            }
            Op::SumRows(a) => {
                let c = self.nodes[*a].value.cols();
                if let Some(ga) = self.slot(grads, *a) {
                    for (k, v) in ga.iter_mut().enumerate() {
                        *v += g[k / c];
                    }
                }
            }
            Op::SumCols(a) => {
                let c = self.nodes[*a].value.cols();
                if let Some(ga) = self.slot(grads, *a) {
                    for (k, v) in ga.iter_mut().enumerate() {
                        *v += g[k % c];
                    }
                }
            }
            Op::LogSumExpRows(a) => {
                let x = &self.nodes[*a].value;
                let c = x.cols();
                if let Some(ga) = self.slot(grads, *a) {
                    for i in 0..x.rows() {
                        let lse = out.data()[i];
                        for j in 0..c {
                            let k = i * c + j;
                            ga[k] += g[i] * (x.data()[k] - lse).exp();
                        }
                    }
                }
            }
            Op::Concat(parts) => {
                let rows = oshape[0];
                let mut offset = 0;
                for &p in parts {
                    let pc = self.nodes[p].value.cols();
                    if let Some(gp) = self.slot(grads, p) {
                        for i in 0..rows {
                            for j in 0..pc {
                                gp[i * pc + j] += g[i * oshape[1] + offset + j];
                            }
                        }
                    }
                    offset += pc;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.nodes[p].value.len();
                    if let Some(gp) = self.slot(grads, p) {
                        for k in 0..n {
                            gp[k] += g[offset + k];
                        }
                    }
                    offset += n;
                }
            }
            Op::Transpose(a) => {
                let [r, c] = oshape;
                if let Some(ga) = self.slot(grads, *a) {
                    // input is [c, r]
                    for i in 0..r {
                        for j in 0..c {
                            ga[j * r + i] += g[i * c + j];
                        }
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = self.slot(grads, *a) {
                    for k in 0..g.len() {
                        ga[k] += g[k];
                    }
                }
            }
            Op::Gather(a, index) => {
                if let Some(ga) = self.slot(grads, *a) {
                    for (k, &src) in index.iter().enumerate() {
                        ga[src] += g[k];
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> Tensor {
        Tensor::column(v).unwrap()
    }

    #[test]
    fn relu_forward() {
        let mut t = Tape::new();
        let x = t.constant(col(&[-1.0, 0.0, 2.0]));
        let y = t.relu(x).unwrap();
        assert_eq!(t.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn clamped_exponent_is_e30() {
        let mut t = Tape::new();
        let x = t.scalar(100.0).unwrap();
        let y = t.exp_clamped(x).unwrap();
        assert_eq!(t.item(y).unwrap(), 30f64.exp());
        let z = t.scalar(-100.0).unwrap();
        let w = t.exp_clamped(z).unwrap();
        assert_eq!(t.item(w).unwrap(), (-30f64).exp());
    }

    #[test]
    fn stop_gradient_severs_edge() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::scalar(3.0).unwrap());
        let s = t.stop_gradient(x).unwrap();
        let y = t.mul(s, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[3.0]);
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut t = Tape::new();
        let x = t.variable(col(&[1.0, 2.0]));
        let sq = t.square(x).unwrap();
        let l = t.sum(sq).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn log_mean_exp_gradient_is_uniform_softmax() {
        let mut t = Tape::new();
        let x = t.variable(col(&[0.0, 0.0]));
        let e = t.exp(x).unwrap();
        let m = t.mean(e).unwrap();
        let l = t.ln(m).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[0.5, 0.5]);
    }

    #[test]
    fn detached_loss_has_zero_gradient() {
        let mut t = Tape::new();
        let x = t.variable(col(&[1.0, -2.0]));
        let s = t.stop_gradient(x).unwrap();
        let sq = t.square(s).unwrap();
        let l = t.sum(sq).unwrap();
        let g = t.backward(l).unwrap();
        assert!(g.wrt(x).is_none());
        assert_eq!(g.wrt_or_zero(&t, x).data(), &[0.0, 0.0]);
    }

    #[test]
    fn diamond_accumulates_both_paths() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::scalar(1.5).unwrap());
        let y = t.add(x, x).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[2.0]);
    }

    #[test]
    fn domain_errors() {
        let mut t = Tape::new();
        let x = t.constant(col(&[1.0, 0.0]));
        assert!(matches!(t.ln(x), Err(Error::Domain { op: "ln", .. })));
        let y = t.constant(col(&[-1.0]));
        assert!(matches!(t.sqrt(y), Err(Error::Domain { op: "sqrt", .. })));
    }

    #[test]
    fn overflow_reports_op_kind() {
        let mut t = Tape::new();
        let x = t.scalar(1000.0).unwrap();
        assert_eq!(t.exp(x), Err(Error::Numeric { op: OpKind::Exp }));
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(2, 3));
        let b = t.constant(Tensor::zeros(2, 3));
        assert!(matches!(t.matmul(a, b), Err(Error::Dimension { .. })));
        let c = t.constant(Tensor::zeros(3, 2));
        assert!(matches!(t.add(a, c), Err(Error::Dimension { .. })));
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut t = Tape::new();
        let x = t.variable(col(&[1.0, 2.0]));
        assert!(matches!(t.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn broadcast_bias_gradient_sums_rows() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let b = t.variable(Tensor::row(&[0.5, -0.5]).unwrap());
        let y = t.add(x, b).unwrap();
        let l = t.sum(y).unwrap();
        let g = t.backward(l).unwrap();
        assert_eq!(g.wrt(b).unwrap().data(), &[2.0, 2.0]);
    }

    #[test]
    fn off_diag_layout() {
        let mut t = Tape::new();
        let m = t.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let d = t.diag(m).unwrap();
        let o = t.off_diag(m).unwrap();
        assert_eq!(t.value(d).data(), &[1.0, 4.0]);
        assert_eq!(t.value(o).data(), &[2.0, 3.0]);
        assert_eq!(t.value(o).shape(), [2, 1]);
    }

    #[test]
    fn params_are_deduplicated_by_name() {
        let mut t = Tape::new();
        let w = Tensor::scalar(2.0).unwrap();
        let a = t.param("w", &w);
        let b = t.param("w", &w);
        assert_eq!(a, b);
        let y = t.mul(a, b).unwrap();
        let g = t.backward(y).unwrap();
        assert_eq!(g.params(&t)["w"].data(), &[4.0]);
    }
}
