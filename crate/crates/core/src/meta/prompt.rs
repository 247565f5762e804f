//! Stochastic prompt encoders: `(support set, ξ) -> task embedding`.
//!
//! Two backends share one interface:
//!
//! - `mlp`: supports sorted by x, flattened, concatenated with ξ, fed through
//!   an MLP. Requires exactly `m` support pairs.
//! - `attention`: each pair and ξ become tokens next to a learned `cls` token;
//!   one single-head self-attention block with a residual feed-forward layer,
//!   no positional encoding, and the `cls` row read out to `d_e`. Any support
//!   size works and the output does not depend on support order.
//!
//! The data embedding is the same network with `ξ = 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Mlp;
use crate::params::{glorot_uniform, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptBackend {
    Mlp,
    Attention,
}

impl std::str::FromStr for PromptBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(Self::Mlp),
            "attention" => Ok(Self::Attention),
            other => Err(Error::config(format!("unknown prompt backend {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub backend: PromptBackend,
    /// Support size the mlp backend is built for.
    pub m: usize,
    pub noise_dim: usize,
    pub embed_dim: usize,
    /// Hidden widths of the mlp backend.
    pub hidden: Vec<usize>,
    /// Token width of the attention backend.
    pub model_dim: usize,
    /// Feed-forward width of the attention backend.
    pub ffn_dim: usize,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            backend: PromptBackend::Mlp,
            m: 3,
            noise_dim: 8,
            embed_dim: 40,
            hidden: vec![512, 512],
            model_dim: 64,
            ffn_dim: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptEncoder {
    prefix: String,
    cfg: PromptConfig,
    mlp: Option<Mlp>,
}

impl PromptEncoder {
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        cfg: &PromptConfig,
        rng: &mut R,
    ) -> Result<Self> {
        if cfg.embed_dim == 0 || cfg.m == 0 {
            return Err(Error::config("prompt encoder needs m >= 1 and embed_dim >= 1"));
        }
        let mlp = match cfg.backend {
            PromptBackend::Mlp => {
                let mut sizes = vec![2 * cfg.m + cfg.noise_dim];
                sizes.extend(&cfg.hidden);
                sizes.push(cfg.embed_dim);
                Some(Mlp::init(store, &format!("{prefix}.mlp"), &sizes, rng)?)
            }
            PromptBackend::Attention => {
                let (d, f) = (cfg.model_dim, cfg.ffn_dim);
                if d == 0 || f == 0 {
                    return Err(Error::config("attention widths must be positive"));
                }
                let mut add = |name: &str, t: Tensor| store.insert(format!("{prefix}.{name}"), t);
                add("tok.w", glorot_uniform(rng, 2, d))?;
                add("tok.b", Tensor::zeros(1, d))?;
                add("cls", glorot_uniform(rng, 1, d))?;
                if cfg.noise_dim > 0 {
                    add("xi.w", glorot_uniform(rng, cfg.noise_dim, d))?;
                    add("xi.b", Tensor::zeros(1, d))?;
                }
                for n in ["wq", "wk", "wv"] {
                    add(&format!("attn.{n}"), glorot_uniform(rng, d, d))?;
                }
                add("ffn.w1", glorot_uniform(rng, d, f))?;
                add("ffn.b1", Tensor::zeros(1, f))?;
                add("ffn.w2", glorot_uniform(rng, f, d))?;
                add("ffn.b2", Tensor::zeros(1, d))?;
                add("out.w", glorot_uniform(rng, d, cfg.embed_dim))?;
                add("out.b", Tensor::zeros(1, cfg.embed_dim))?;
                None
            }
        };
        Ok(Self {
            prefix: prefix.to_string(),
            cfg: cfg.clone(),
            mlp,
        })
    }

    pub fn config(&self) -> &PromptConfig {
        &self.cfg
    }

    pub fn noise_dim(&self) -> usize {
        self.cfg.noise_dim
    }

    pub fn embed_dim(&self) -> usize {
        self.cfg.embed_dim
    }

    /// Embeddings `[n, d_e]` of `n` support sets, one noise row each.
    ///
    /// `noise = None` gives the data embedding (`ξ = 0`).
    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        supports: &[Vec<(f64, f64)>],
        noise: Option<&Tensor>,
    ) -> Result<Var> {
        let n = supports.len();
        if n == 0 {
            return Err(Error::contract("prompt encoder needs at least one support set"));
        }
        let zero;
        let noise = match noise {
            Some(t) => t,
            None => {
                zero = Tensor::zeros(n, self.cfg.noise_dim);
                &zero
            }
        };
        if noise.shape() != [n, self.cfg.noise_dim] {
            return Err(Error::Dimension {
                op: "prompt_noise",
                lhs: noise.shape(),
                rhs: [n, self.cfg.noise_dim],
            });
        }
        match &self.mlp {
            Some(mlp) => self.encode_mlp(mlp, tape, store, supports, noise),
            None => {
                let rows = supports
                    .iter()
                    .enumerate()
                    .map(|(i, s)| self.encode_attention(tape, store, s, noise.row_slice(i)))
                    .collect::<Result<Vec<_>>>()?;
                tape.concat_rows(&rows)
            }
        }
    }

    fn encode_mlp(
        &self,
        mlp: &Mlp,
        tape: &mut Tape,
        store: &ParamStore,
        supports: &[Vec<(f64, f64)>],
        noise: &Tensor,
    ) -> Result<Var> {
        let m = self.cfg.m;
        let mut flat = Vec::with_capacity(supports.len() * (2 * m + self.cfg.noise_dim));
        for (i, s) in supports.iter().enumerate() {
            if s.len() != m {
                return Err(Error::contract(format!(
                    "mlp prompt encoder expects {m} support pairs, got {}",
                    s.len()
                )));
            }
            let mut sorted = s.clone();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            flat.extend(sorted.iter().flat_map(|&(x, y)| [x, y]));
            flat.extend_from_slice(noise.row_slice(i));
        }
        let input = tape.constant(Tensor::new(supports.len(), 2 * m + self.cfg.noise_dim, flat)?);
        mlp.forward(tape, store, input)
    }

    fn p(&self, tape: &mut Tape, store: &ParamStore, name: &str) -> Result<Var> {
        store.var(tape, &format!("{}.{name}", self.prefix))
    }

    fn encode_attention(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        support: &[(f64, f64)],
        xi: &[f64],
    ) -> Result<Var> {
        if support.is_empty() {
            return Err(Error::contract("attention prompt encoder needs a nonempty support"));
        }
        let pairs = Tensor::new(
            support.len(),
            2,
            support.iter().flat_map(|&(x, y)| [x, y]).collect(),
        )?;
        let pairs = tape.constant(pairs);
        let tok_w = self.p(tape, store, "tok.w")?;
        let tok_b = self.p(tape, store, "tok.b")?;
        let toks = tape.matmul(pairs, tok_w)?;
        let toks = tape.add(toks, tok_b)?;
        let cls = self.p(tape, store, "cls")?;
        let mut parts = vec![cls];
        if !xi.is_empty() {
            let xi = tape.constant(Tensor::row(xi)?);
            let w = self.p(tape, store, "xi.w")?;
            let b = self.p(tape, store, "xi.b")?;
            let t = tape.matmul(xi, w)?;
            parts.push(tape.add(t, b)?);
        }
        parts.push(toks);
        let t = tape.concat_rows(&parts)?;

        let wq = self.p(tape, store, "attn.wq")?;
        let wk = self.p(tape, store, "attn.wk")?;
        let wv = self.p(tape, store, "attn.wv")?;
        let q = tape.matmul(t, wq)?;
        let k = tape.matmul(t, wk)?;
        let v = tape.matmul(t, wv)?;
        let kt = tape.transpose(k)?;
        let scores = tape.matmul(q, kt)?;
        let scores = tape.scale(scores, 1.0 / (self.cfg.model_dim as f64).sqrt())?;
        let attn = tape.softmax_rows(scores)?;
        let mixed = tape.matmul(attn, v)?;
        let h = tape.add(t, mixed)?;

        let w1 = self.p(tape, store, "ffn.w1")?;
        let b1 = self.p(tape, store, "ffn.b1")?;
        let w2 = self.p(tape, store, "ffn.w2")?;
        let b2 = self.p(tape, store, "ffn.b2")?;
        let f = tape.matmul(h, w1)?;
        let f = tape.add(f, b1)?;
        let f = tape.relu(f)?;
        let f = tape.matmul(f, w2)?;
        let f = tape.add(f, b2)?;
        let h = tape.add(h, f)?;

        let cls_out = tape.gather_rows(h, &[0])?;
        let wo = self.p(tape, store, "out.w")?;
        let bo = self.p(tape, store, "out.b")?;
        let e = tape.matmul(cls_out, wo)?;
        tape.add(e, bo)
    }
}

/// `e_t = Prompt(S_t, ξ)` for one support set.
pub fn prompt_encode(
    encoder: &PromptEncoder,
    store: &ParamStore,
    support: &[(f64, f64)],
    xi: &[f64],
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let noise = Tensor::new(1, xi.len(), xi.to_vec())?;
    let e = encoder.encode(&mut tape, store, &[support.to_vec()], Some(&noise))?;
    Ok(tape.value(e).data().to_vec())
}

/// Noise-free data embedding `v_t` of one support set.
pub fn prompt_encode_data(
    encoder: &PromptEncoder,
    store: &ParamStore,
    support: &[(f64, f64)],
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let e = encoder.encode(&mut tape, store, &[support.to_vec()], None)?;
    Ok(tape.value(e).data().to_vec())
}

/// Kernel mean embedding of a support set evaluated at fixed reference points:
/// component `j` is `mean_k exp(-|z_j - s_k|² / (2σ²))`.
pub fn rkhs_embed(support: &[(f64, f64)], bandwidth: f64, refs: &[(f64, f64)]) -> Result<Vec<f64>> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::config(format!("kernel bandwidth {bandwidth} must be positive")));
    }
    if refs.is_empty() || support.is_empty() {
        return Err(Error::config("rkhs embedding needs reference points and a support"));
    }
    let denom = 2.0 * bandwidth * bandwidth;
    Ok(refs
        .iter()
        .map(|&(rx, ry)| {
            support
                .iter()
                .map(|&(x, y)| (-((rx - x).powi(2) + (ry - y).powi(2)) / denom).exp())
                .sum::<f64>()
                / support.len() as f64
        })
        .collect())
}
