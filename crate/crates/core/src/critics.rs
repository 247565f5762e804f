//! Critics: the pair score `g(x, y)` and the PMI head `u(x, y)`.
//!
//! * [`JointCritic`] runs one MLP trunk over the concatenated pair and reads
//!   both scores from two linear heads.
//! * [`BilinearCritic`] embeds `x` and `y` separately onto the unit sphere and
//!   scores every pair of a batch with one matrix product, `g = τ⟨h(x), h̃(y)⟩`.
//! * [`TabularCritic`] looks both scores up in tables over finite alphabets;
//!   inputs are symbol indices stored as `f64`.
//!
//! A batch of `K` positive pairs `(x_i, y_i)` is scored against in-batch
//! negatives `(x_i, y_j)`, `j != i`. [`Critic::contrast`] returns the positive
//! scores, the chosen negatives per row, the PMI head on positives, and the
//! optional x-only baseline used by TUBA.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{mlp_param_count, Mlp};
use crate::params::{glorot_uniform, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CriticKind {
    Joint,
    Bilinear,
    Tabular,
}

impl std::str::FromStr for CriticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "joint" => Ok(Self::Joint),
            "bilinear" => Ok(Self::Bilinear),
            "tabular" => Ok(Self::Tabular),
            other => Err(Error::config(format!("unknown critic kind {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticConfig {
    pub dx: usize,
    pub dy: usize,
    /// Trunk widths for the joint critic, encoder widths for the bilinear one.
    pub hidden: Vec<usize>,
    /// Initial temperature of the bilinear critic.
    pub tau: f64,
    /// Unit-sphere embedding dimension of the bilinear critic.
    pub embed_dim: usize,
    /// Hidden widths of the bilinear critic's u-head.
    pub u_hidden: Vec<usize>,
    /// `(|X|, |Y|)` for the tabular critic.
    pub alphabet: Option<(usize, usize)>,
    /// Parameter name prefix.
    pub prefix: String,
}

impl CriticConfig {
    pub fn new(dx: usize, dy: usize) -> Self {
        Self {
            dx,
            dy,
            hidden: vec![512, 512],
            tau: 10.0,
            embed_dim: 512,
            u_hidden: vec![128, 128],
            alphabet: None,
            prefix: "critic".into(),
        }
    }

    pub fn tabular(nx: usize, ny: usize) -> Self {
        Self {
            alphabet: Some((nx, ny)),
            ..Self::new(1, 1)
        }
    }

    pub fn with_hidden(mut self, hidden: &[usize]) -> Self {
        self.hidden = hidden.to_vec();
        self
    }
}

/// One shared trunk over `concat(x, y)` and two scalar heads.
///
/// The first trunk layer's weight is stored split by input block (`wx`, `wy`),
/// which is the same affine map as one matrix over the concatenation but lets
/// the batch pre-activations be formed once per row and summed per pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointCritic {
    prefix: String,
    dx: usize,
    dy: usize,
    hidden: Vec<usize>,
    rest: Option<Mlp>,
    u_head: Mlp,
    g_head: Mlp,
}

impl JointCritic {
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        cfg: &CriticConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if cfg.hidden.is_empty() {
            return Err(Error::contract("joint critic needs at least one hidden layer"));
        }
        if cfg.dx == 0 || cfg.dy == 0 || cfg.hidden.contains(&0) {
            return Err(Error::config("critic dimensions must be positive"));
        }
        let p = &cfg.prefix;
        let h0 = cfg.hidden[0];
        let w = glorot_uniform(rng, cfg.dx + cfg.dy, h0);
        let (wx, wy) = w.data().split_at(cfg.dx * h0);
        store.insert(format!("{p}.trunk.in.wx"), Tensor::new(cfg.dx, h0, wx.to_vec())?)?;
        store.insert(format!("{p}.trunk.in.wy"), Tensor::new(cfg.dy, h0, wy.to_vec())?)?;
        store.insert(format!("{p}.trunk.in.b"), Tensor::zeros(1, h0))?;
        let rest = if cfg.hidden.len() > 1 {
            Some(Mlp::init(store, &format!("{p}.trunk.rest"), &cfg.hidden, rng)?)
        } else {
            None
        };
        let last = *cfg.hidden.last().expect("nonempty");
        let u_head = Mlp::init(store, &format!("{p}.head.u"), &[last, 1], rng)?;
        let g_head = Mlp::init(store, &format!("{p}.head.g"), &[last, 1], rng)?;
        Ok(Self {
            prefix: p.clone(),
            dx: cfg.dx,
            dy: cfg.dy,
            hidden: cfg.hidden.clone(),
            rest,
            u_head,
            g_head,
        })
    }

    /// Trunk features for pairs `(x[pi[k]], y[pj[k]])`.
    fn trunk(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        y: Var,
        pi: &[usize],
        pj: &[usize],
    ) -> Result<Var> {
        let p = &self.prefix;
        let wx = store.var(tape, &format!("{p}.trunk.in.wx"))?;
        let wy = store.var(tape, &format!("{p}.trunk.in.wy"))?;
        let b = store.var(tape, &format!("{p}.trunk.in.b"))?;
        let ax = tape.matmul(x, wx)?;
        let by = tape.matmul(y, wy)?;
        let by = tape.add(by, b)?;
        let a = tape.gather_rows(ax, pi)?;
        let c = tape.gather_rows(by, pj)?;
        let mut h = tape.add(a, c)?;
        h = tape.relu(h)?;
        if let Some(rest) = &self.rest {
            for l in 0..rest.layers() {
                h = rest.affine(tape, store, l, h)?;
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }

    /// `(g, u)` as columns over the listed pairs.
    pub fn pair_scores(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        y: Var,
        pi: &[usize],
        pj: &[usize],
    ) -> Result<(Var, Var)> {
        self.check_dims(tape, x, y)?;
        let h = self.trunk(tape, store, x, y, pi, pj)?;
        let g = self.g_head.forward(tape, store, h)?;
        let u = self.u_head.forward(tape, store, h)?;
        Ok((g, u))
    }

    fn check_dims(&self, tape: &Tape, x: Var, y: Var) -> Result<()> {
        let (sx, sy) = (tape.value(x).shape(), tape.value(y).shape());
        if sx[1] != self.dx || sy[1] != self.dy || sx[0] != sy[0] {
            return Err(Error::Dimension {
                op: "joint_critic",
                lhs: sx,
                rhs: sy,
            });
        }
        Ok(())
    }

    /// Trunk plus two linear heads.
    pub fn expected_param_count(&self) -> usize {
        let last = *self.hidden.last().expect("nonempty");
        (self.dx + self.dy) * self.hidden[0]
            + self.hidden[0]
            + mlp_param_count(&self.hidden)
            + 2 * (last + 1)
    }
}

/// Separable critic `g(x, y) = τ ⟨h(x), h̃(y)⟩` with unit-norm embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BilinearCritic {
    prefix: String,
    enc_x: Mlp,
    enc_y: Mlp,
    u_head: Mlp,
}

impl BilinearCritic {
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        cfg: &CriticConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if !(cfg.tau > 0.0 && cfg.tau.is_finite()) {
            return Err(Error::config(format!("temperature {} must be positive", cfg.tau)));
        }
        let p = &cfg.prefix;
        let sizes = |d: usize| {
            let mut s = vec![d];
            s.extend(&cfg.hidden);
            s.push(cfg.embed_dim);
            s
        };
        let enc_x = Mlp::init(store, &format!("{p}.enc_x"), &sizes(cfg.dx), rng)?;
        let enc_y = Mlp::init(store, &format!("{p}.enc_y"), &sizes(cfg.dy), rng)?;
        let mut u_sizes = vec![2 * cfg.embed_dim];
        u_sizes.extend(&cfg.u_hidden);
        u_sizes.push(1);
        let u_head = Mlp::init(store, &format!("{p}.head.u"), &u_sizes, rng)?;
        store.insert(format!("{p}.log_tau"), Tensor::scalar(cfg.tau.ln())?)?;
        Ok(Self {
            prefix: p.clone(),
            enc_x,
            enc_y,
            u_head,
        })
    }

    fn normalized(tape: &mut Tape, e: Var) -> Result<Var> {
        let sq = tape.square(e)?;
        let n2 = tape.sum_rows(sq)?;
        let n = tape.sqrt(n2)?;
        tape.div(e, n)
    }

    /// Unit-norm embeddings `(h(x), h̃(y))`, one row per input row.
    pub fn embed(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        y: Var,
    ) -> Result<(Var, Var)> {
        let ex = self.enc_x.forward(tape, store, x)?;
        let ey = self.enc_y.forward(tape, store, y)?;
        Ok((Self::normalized(tape, ex)?, Self::normalized(tape, ey)?))
    }

    pub fn temperature(&self, store: &ParamStore) -> Result<f64> {
        Ok(store.get(&format!("{}.log_tau", self.prefix))?.item()?.exp())
    }

    /// Gram matrix `G = τ H H̃ᵀ` and the u-head on matched rows.
    pub fn gram(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x: Var,
        y: Var,
    ) -> Result<(Var, Var)> {
        let (hx, hy) = self.embed(tape, store, x, y)?;
        let hyt = tape.transpose(hy)?;
        let cos = tape.matmul(hx, hyt)?;
        let log_tau = store.var(tape, &format!("{}.log_tau", self.prefix))?;
        let tau = tape.exp(log_tau)?;
        let g = tape.mul(cos, tau)?;
        let pair = tape.concat(&[hx, hy])?;
        let u = self.u_head.forward(tape, store, pair)?;
        Ok((g, u))
    }
}

/// Score tables over finite alphabets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularCritic {
    pub g: Tensor,
    pub u: Tensor,
    /// Set when a table entry carries the zero-probability sentinel.
    pub sentinel_used: bool,
}

impl TabularCritic {
    pub fn new(g: Tensor, u: Tensor) -> Result<Self> {
        if g.shape() != u.shape() {
            return Err(Error::Dimension {
                op: "tabular_critic",
                lhs: g.shape(),
                rhs: u.shape(),
            });
        }
        Ok(Self {
            g,
            u,
            sentinel_used: false,
        })
    }

    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self {
            g: Tensor::zeros(nx, ny),
            u: Tensor::zeros(nx, ny),
            sentinel_used: false,
        }
    }

    pub fn alphabet(&self) -> (usize, usize) {
        (self.g.rows(), self.g.cols())
    }
}

/// Symbol indices from a `[K, 1]` column of whole numbers.
fn symbols(t: &Tensor, bound: usize, what: &str) -> Result<Vec<usize>> {
    if t.cols() != 1 {
        return Err(Error::Dimension {
            op: "tabular_critic",
            lhs: t.shape(),
            rhs: [t.rows(), 1],
        });
    }
    t.data()
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && (v as usize) < bound {
                Ok(v as usize)
            } else {
                Err(Error::contract(format!("{what} symbol {v} outside 0..{bound}")))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Arch {
    Joint(JointCritic),
    Bilinear(BilinearCritic),
    Tabular { prefix: String, nx: usize, ny: usize },
}

/// Which in-batch mismatches serve as negatives for each positive row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Negatives {
    /// Every `j != i`; `K - 1` negatives per row.
    AllPairs,
    /// `n` distinct random cyclic shifts `s`, negatives `y_{(i+s) mod K}`.
    Shifts(usize),
}

/// Column index of each negative, row-major `[K, n]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeIndex {
    pub k: usize,
    pub n: usize,
    pub cols: Vec<usize>,
}

impl NegativeIndex {
    pub fn all_pairs(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::contract(format!("batch of {k} has no negatives")));
        }
        let cols = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i))
            .collect();
        Ok(Self { k, n: k - 1, cols })
    }

    pub fn shifts(k: usize, shifts: &[usize]) -> Result<Self> {
        if k < 2 || shifts.is_empty() {
            return Err(Error::contract(format!("batch of {k} has no negatives")));
        }
        if let Some(s) = shifts.iter().find(|&&s| s == 0 || s >= k) {
            return Err(Error::contract(format!("shift {s} outside 1..{k}")));
        }
        let cols = (0..k)
            .flat_map(|i| shifts.iter().map(move |s| (i + s) % k))
            .collect();
        Ok(Self {
            k,
            n: shifts.len(),
            cols,
        })
    }

    pub fn draw<R: Rng + ?Sized>(k: usize, negatives: Negatives, rng: &mut R) -> Result<Self> {
        match negatives {
            Negatives::Shifts(n) if n + 1 < k => {
                let shifts: Vec<usize> = sample(rng, k - 1, n).into_iter().map(|s| s + 1).collect();
                Self::shifts(k, &shifts)
            }
            _ => Self::all_pairs(k),
        }
    }

    pub fn is_all_pairs(&self) -> bool {
        self.n + 1 == self.k
    }
}

/// Scores of a contrastive batch, all on the tape.
#[derive(Debug, Clone, Copy)]
pub struct Contrast {
    /// `g(x_i, y_i)`, `[K, 1]`.
    pub pos: Var,
    /// `g(x_i, y_j)` for the chosen negatives, `[K, n]`.
    pub neg: Var,
    /// `u(x_i, y_i)`, `[K, 1]`.
    pub u: Var,
    /// x-only baseline `a(x_i)`, `[K, 1]`, when the critic has one.
    pub baseline: Option<Var>,
}

impl Contrast {
    /// Split a full `K×K` Gram matrix into positives and off-diagonal negatives.
    pub fn from_gram(tape: &mut Tape, g: Var, u: Var, baseline: Option<Var>) -> Result<Self> {
        let [k, c] = tape.value(g).shape();
        if k != c {
            return Err(Error::Dimension {
                op: "gram",
                lhs: [k, c],
                rhs: [c, k],
            });
        }
        if k < 2 {
            return Err(Error::contract(format!("batch of {k} has no negatives")));
        }
        if tape.value(u).shape() != [k, 1] {
            return Err(Error::Dimension {
                op: "gram_u",
                lhs: tape.value(u).shape(),
                rhs: [k, 1],
            });
        }
        let pos = tape.diag(g)?;
        let neg = tape.off_diag(g)?;
        Ok(Self {
            pos,
            neg,
            u,
            baseline,
        })
    }

    pub fn batch_size(&self, tape: &Tape) -> usize {
        tape.value(self.pos).rows()
    }
}

/// A critic of any architecture together with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub store: ParamStore,
    arch: Arch,
    baseline: Option<Mlp>,
}

/// Builds a freshly initialized critic.
pub fn make_critic<R: Rng + ?Sized>(
    kind: CriticKind,
    cfg: &CriticConfig,
    rng: &mut R,
) -> Result<Critic> {
    let mut store = ParamStore::new();
    let arch = match kind {
        CriticKind::Joint => Arch::Joint(JointCritic::init(&mut store, cfg, rng)?),
        CriticKind::Bilinear => Arch::Bilinear(BilinearCritic::init(&mut store, cfg, rng)?),
        CriticKind::Tabular => {
            let (nx, ny) = cfg
                .alphabet
                .ok_or_else(|| Error::config("tabular critic needs alphabet sizes"))?;
            return Critic::tabular_with_prefix(&cfg.prefix, &TabularCritic::zeros(nx, ny));
        }
    };
    Ok(Critic {
        store,
        arch,
        baseline: None,
    })
}

impl Critic {
    pub fn tabular(table: &TabularCritic) -> Result<Self> {
        Self::tabular_with_prefix("critic", table)
    }

    fn tabular_with_prefix(prefix: &str, table: &TabularCritic) -> Result<Self> {
        let (nx, ny) = table.alphabet();
        if nx == 0 || ny == 0 {
            return Err(Error::config("tabular critic needs nonempty alphabets"));
        }
        let mut store = ParamStore::new();
        store.insert(format!("{prefix}.g_table"), table.g.clone())?;
        store.insert(format!("{prefix}.u_table"), table.u.clone())?;
        Ok(Self {
            store,
            arch: Arch::Tabular {
                prefix: prefix.to_string(),
                nx,
                ny,
            },
            baseline: None,
        })
    }

    pub fn kind(&self) -> CriticKind {
        match self.arch {
            Arch::Joint(_) => CriticKind::Joint,
            Arch::Bilinear(_) => CriticKind::Bilinear,
            Arch::Tabular { .. } => CriticKind::Tabular,
        }
    }

    pub fn joint(&self) -> Option<&JointCritic> {
        match &self.arch {
            Arch::Joint(j) => Some(j),
            _ => None,
        }
    }

    pub fn bilinear(&self) -> Option<&BilinearCritic> {
        match &self.arch {
            Arch::Bilinear(b) => Some(b),
            _ => None,
        }
    }

    /// Current tables of a tabular critic.
    pub fn as_tabular(&self) -> Option<TabularCritic> {
        match &self.arch {
            Arch::Tabular { prefix, .. } => Some(TabularCritic {
                g: self.store.get(&format!("{prefix}.g_table")).ok()?.clone(),
                u: self.store.get(&format!("{prefix}.u_table")).ok()?.clone(),
                sentinel_used: false,
            }),
            _ => None,
        }
    }

    pub fn has_baseline(&self) -> bool {
        self.baseline.is_some()
    }

    /// Adds an x-only baseline head `a(x)` (used by TUBA) if not present.
    pub fn ensure_baseline<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if self.baseline.is_some() {
            return Ok(());
        }
        let (sizes, prefix) = match &self.arch {
            Arch::Joint(j) => (vec![j.dx, 64, 1], format!("{}.baseline", j.prefix)),
            Arch::Bilinear(b) => (
                vec![b.enc_x.input_dim(), 64, 1],
                format!("{}.baseline", b.prefix),
            ),
            Arch::Tabular { prefix, nx, .. } => {
                // one-hot input makes the first layer a lookup table
                (vec![*nx, 1], format!("{prefix}.baseline"))
            }
        };
        self.baseline = Some(Mlp::init(&mut self.store, &prefix, &sizes, rng)?);
        Ok(())
    }

    fn baseline_input(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        match &self.arch {
            Arch::Tabular { nx, .. } => {
                let xs = symbols(tape.value(x), *nx, "x")?;
                let mut onehot = vec![0.0; xs.len() * nx];
                for (i, s) in xs.iter().enumerate() {
                    onehot[i * nx + s] = 1.0;
                }
                Ok(tape.constant(Tensor::new(xs.len(), *nx, onehot)?))
            }
            _ => Ok(x),
        }
    }

    fn baseline_scores(&self, tape: &mut Tape, x: Var) -> Result<Option<Var>> {
        match &self.baseline {
            Some(mlp) => {
                let input = self.baseline_input(tape, x)?;
                Ok(Some(mlp.forward(tape, &self.store, input)?))
            }
            None => Ok(None),
        }
    }

    /// Full `K×K` score matrix `G[i][j] = g(x_i, y_j)` and `U[i] = u(x_i, y_i)`.
    pub fn gram(&self, tape: &mut Tape, x: Var, y: Var) -> Result<(Var, Var)> {
        let k = tape.value(x).rows();
        if k < 2 {
            return Err(Error::contract(format!(
                "score matrix needs K >= 2 (got {k}); no negatives exist"
            )));
        }
        if tape.value(y).rows() != k {
            return Err(Error::Dimension {
                op: "score_matrix",
                lhs: tape.value(x).shape(),
                rhs: tape.value(y).shape(),
            });
        }
        match &self.arch {
            Arch::Joint(j) => {
                let pi: Vec<usize> = (0..k).flat_map(|i| std::iter::repeat_n(i, k)).collect();
                let pj: Vec<usize> = (0..k).flat_map(|_| 0..k).collect();
                let (g, u) = j.pair_scores(tape, &self.store, x, y, &pi, &pj)?;
                let g = tape.reshape(g, k, k)?;
                let u = tape.reshape(u, k, k)?;
                let u = tape.diag(u)?;
                Ok((g, u))
            }
            Arch::Bilinear(b) => b.gram(tape, &self.store, x, y),
            Arch::Tabular { prefix, nx, ny } => {
                let xs = symbols(tape.value(x), *nx, "x")?;
                let ys = symbols(tape.value(y), *ny, "y")?;
                let gt = self.store.var(tape, &format!("{prefix}.g_table"))?;
                let ut = self.store.var(tape, &format!("{prefix}.u_table"))?;
                let gi = xs
                    .iter()
                    .flat_map(|&a| ys.iter().map(move |&b| a * ny + b))
                    .collect();
                let ui = xs.iter().zip(&ys).map(|(&a, &b)| a * ny + b).collect();
                let g = tape.gather(gt, gi, k, k)?;
                let u = tape.gather(ut, ui, k, 1)?;
                Ok((g, u))
            }
        }
    }

    /// Positive, negative, PMI-head and baseline scores for one batch.
    pub fn contrast(&self, tape: &mut Tape, x: Var, y: Var, neg: &NegativeIndex) -> Result<Contrast> {
        let k = tape.value(x).rows();
        if neg.k != k {
            return Err(Error::contract(format!(
                "negative index built for K={} but batch has {k} rows",
                neg.k
            )));
        }
        let baseline = self.baseline_scores(tape, x)?;
        match &self.arch {
            Arch::Joint(j) if !neg.is_all_pairs() => {
                let n = neg.n;
                let mut pi: Vec<usize> = (0..k).collect();
                let mut pj: Vec<usize> = (0..k).collect();
                pi.extend((0..k).flat_map(|i| std::iter::repeat_n(i, n)));
                pj.extend(&neg.cols);
                let (g, u) = j.pair_scores(tape, &self.store, x, y, &pi, &pj)?;
                let pos = tape.gather(g, (0..k).collect(), k, 1)?;
                let negs = tape.gather(g, (k..k + k * n).collect(), k, n)?;
                let u = tape.gather(u, (0..k).collect(), k, 1)?;
                Ok(Contrast {
                    pos,
                    neg: negs,
                    u,
                    baseline,
                })
            }
            _ => {
                let (g, u) = self.gram(tape, x, y)?;
                if neg.is_all_pairs() {
                    return Contrast::from_gram(tape, g, u, baseline);
                }
                let pos = tape.diag(g)?;
                let idx = neg
                    .cols
                    .iter()
                    .enumerate()
                    .map(|(e, &c)| (e / neg.n) * k + c)
                    .collect();
                let negs = tape.gather(g, idx, k, neg.n)?;
                Ok(Contrast {
                    pos,
                    neg: negs,
                    u,
                    baseline,
                })
            }
        }
    }
}

/// Evaluates the score matrix on plain tensors: `(G [K×K], U [K×1])`.
pub fn score_matrix(critic: &Critic, x: &Tensor, y: &Tensor) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let yv = tape.constant(y.clone());
    let (g, u) = critic.gram(&mut tape, xv, yv)?;
    Ok((tape.value(g).clone(), tape.value(u).clone()))
}
