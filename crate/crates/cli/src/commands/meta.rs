use std::time::Instant;

use fenlo_core::meta::{
    draw_noise, eval_fomaml, eval_meta, lambda_gradient_gap, load_checkpoint, predict_ensemble,
    sample_batch, sample_episode, sample_task, save_checkpoint, FomamlConfig, FomamlState, Learner,
    MetaConfig, MetaTrainState, PromptConfig,
};
use fenlo_core::{rng, stats};

use crate::config::{key, output, Key, Settings};
use crate::error::{CliError, Result};
use crate::table::{self, num};

pub const LAMBDA0_TOLERANCE: f64 = 1e-12;

pub static TRAIN_KEYS: [Key; 24] = [
    key("baseline", "metaflo", "Algorithm: metaflo or fomaml"),
    key("steps", "20000", "Meta steps; 0 saves the freshly initialized learner"),
    key("episodes", "64", "Tasks per meta step"),
    key("m", "3", "Support points per task"),
    key("q", "2", "Query points per task"),
    key("lambda", "1e-2", "Weight of the MI regularizer"),
    key("lr", "1e-4", "Meta Adam learning rate"),
    key("flo_lr", "1e-4", "Adam learning rate of the task-level FLO critic"),
    key("eps_clip", "1e-6", "Floor of the MI estimate under the square root"),
    key("inner_lr", "1e-4", "fomaml inner learning rate"),
    key("inner_steps", "1", "fomaml inner steps"),
    key("hidden", "512,512", "Hidden widths of the regression network"),
    key("prompt_backend", "mlp", "Prompt encoder: mlp or attention"),
    key("prompt_hidden", "512,512", "Hidden widths of the mlp prompt encoder"),
    key("noise_dim", "8", "Dimension of the prompt noise"),
    key("embed_dim", "40", "Task embedding dimension"),
    key("data_embedding", "prompt", "Data side of the FLO critic: prompt, rkhs, raw"),
    key("flo_hidden", "128,128", "Hidden widths of the FLO critic encoders"),
    key("flo_embed_dim", "64", "Embedding dimension of the FLO critic"),
    key("seed", "0", "Random seed"),
    key("log_every", "100", "Steps per CSV row"),
    key("timing", "on", "Record wall_ms; off writes 0 for byte-stable output"),
    output("checkpoint", "Checkpoint written after training (required)"),
    output("out", "CSV path; stdout when empty"),
];

pub static EVAL_KEYS: [Key; 9] = [
    key("checkpoint", "", "Checkpoint to evaluate (required)"),
    key("tasks", "100", "Held-out tasks"),
    key("m", "3", "Support points per task"),
    key("q", "2", "Query points per task"),
    key("seed", "0", "Random seed"),
    key("ensemble", "32", "Noise draws behind the adaptation curve"),
    key("dense_points", "200", "Grid points of the adaptation curve"),
    output("adaptation", "Optional CSV of support points and dense predictions for task 0"),
    output("out", "CSV path; stdout when empty"),
];

fn positive(s: &Settings, name: &'static str) -> Result<f64> {
    let v: f64 = s.get(name)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(CliError::key(name, "must be positive"));
    }
    Ok(v)
}

fn meta_config(s: &Settings) -> Result<MetaConfig> {
    let m: usize = s.get("m")?;
    let lambda: f64 = s.get("lambda")?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(CliError::key("lambda", "must be nonnegative"));
    }
    Ok(MetaConfig {
        m,
        q: s.get("q")?,
        episodes: s.get("episodes")?,
        lambda,
        lr: positive(s, "lr")?,
        flo_lr: positive(s, "flo_lr")?,
        eps_clip: positive(s, "eps_clip")?,
        prompt: PromptConfig {
            backend: s.get("prompt_backend")?,
            m,
            noise_dim: s.get("noise_dim")?,
            embed_dim: s.get("embed_dim")?,
            hidden: s.list("prompt_hidden")?,
            ..PromptConfig::default()
        },
        hidden: s.list("hidden")?,
        data_embedding: s.get("data_embedding")?,
        flo_hidden: s.list("flo_hidden")?,
        flo_embed_dim: s.get("flo_embed_dim")?,
        ..MetaConfig::default()
    })
}

fn fomaml_config(s: &Settings) -> Result<FomamlConfig> {
    Ok(FomamlConfig {
        m: s.get("m")?,
        q: s.get("q")?,
        episodes: s.get("episodes")?,
        lr: positive(s, "lr")?,
        inner_lr: positive(s, "inner_lr")?,
        inner_steps: s.get("inner_steps")?,
        hidden: s.list("hidden")?,
    })
}

struct Window {
    rows: Vec<Vec<String>>,
    buf: Vec<[f64; 3]>,
    start: Instant,
    timing: bool,
}

impl Window {
    fn push(&mut self, step: usize, losses: [f64; 3], stage: &str) -> Result<()> {
        if losses.iter().any(|l| !l.is_finite()) {
            return Err(fenlo_core::Error::Diverged {
                what: "meta loss",
                step,
                stage: stage.to_string(),
            }
            .into());
        }
        self.buf.push(losses);
        Ok(())
    }

    fn flush(&mut self, step: usize) {
        let col = |i: usize| stats::mean(&self.buf.iter().map(|l| l[i]).collect::<Vec<_>>());
        let ms = if self.timing { self.start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
        self.rows
            .push(vec![step.to_string(), num(col(0)), num(col(1)), num(col(2)), num(ms)]);
        self.buf.clear();
    }
}

/// Trains, saves the checkpoint, and returns the loss CSV. Each row averages
/// the losses of the steps since the previous row. The fomaml baseline has no
/// MI term, so its `loss_flo_estimate` column is 0 and `loss_total = loss_r`.
///
/// With `assert_lambda0` the run requires `lambda = 0` and first checks that
/// the θ-gradient equals the plain regression gradient on a fresh batch.
pub fn train(s: &Settings, assert_lambda0: bool) -> Result<(Vec<u8>, Option<f64>)> {
    let ckpt = s
        .path("checkpoint")
        .ok_or_else(|| CliError::key("checkpoint", "required"))?
        .to_path_buf();
    let steps: usize = s.get("steps")?;
    let log_every: usize = s.get("log_every")?;
    if log_every == 0 {
        return Err(CliError::key("log_every", "must be at least 1"));
    }
    let seed: u64 = s.get("seed")?;
    let mut rng = rng::stream(seed, 0);
    let mut w = Window {
        rows: Vec::new(),
        buf: Vec::with_capacity(log_every),
        start: Instant::now(),
        timing: s.switch("timing")?,
    };
    let baseline = s.text("baseline").to_ascii_lowercase();
    let mut gap = None;
    let learner = match baseline.as_str() {
        "metaflo" => {
            let cfg = meta_config(s)?;
            if assert_lambda0 && cfg.lambda != 0.0 {
                return Err(CliError::key("lambda", "--assert-lambda0 needs lambda = 0"));
            }
            let mut st = MetaTrainState::new(cfg, &mut rng)?;
            if assert_lambda0 {
                let mut probe = rng::stream(seed, 1);
                let batch = sample_batch(st.cfg.episodes, st.cfg.m, st.cfg.q, &mut probe)?;
                let noise = draw_noise(batch.len(), st.cfg.prompt.noise_dim, &mut probe);
                let g = lambda_gradient_gap(&st, &batch, &noise)?;
                if !(g <= LAMBDA0_TOLERANCE) {
                    return Err(CliError::Deviation {
                        what: "lambda=0 gradient".into(),
                        deviation: g,
                        tolerance: LAMBDA0_TOLERANCE,
                    });
                }
                gap = Some(g);
            }
            for step in 1..=steps {
                let l = st.train_step(&mut rng)?;
                w.push(step, [l.total, l.loss_r, l.flo_estimate], "metaflo")?;
                if step % log_every == 0 || step == steps {
                    w.flush(step);
                }
            }
            Learner::MetaFlo(st)
        }
        "fomaml" => {
            if assert_lambda0 {
                return Err(CliError::key("baseline", "--assert-lambda0 applies to metaflo"));
            }
            let cfg = fomaml_config(s)?;
            let (episodes, m, q) = (cfg.episodes, cfg.m, cfg.q);
            let mut st = FomamlState::new(cfg, &mut rng)?;
            for step in 1..=steps {
                let batch = sample_batch(episodes, m, q, &mut rng)?;
                let l = st.fomaml_step(&batch)?;
                w.push(step, [l, l, 0.0], "fomaml")?;
                if step % log_every == 0 || step == steps {
                    w.flush(step);
                }
            }
            Learner::Fomaml(st)
        }
        other => return Err(CliError::key("baseline", format!("unknown baseline {other:?}"))),
    };
    save_checkpoint(&ckpt, &learner)?;
    Ok((table::render(&s.echo(), table::META_TRAIN_HEADER, &w.rows)?, gap))
}

pub struct EvalOutput {
    pub csv: Vec<u8>,
    pub adaptation: Option<Vec<u8>>,
    pub mean_mse: f64,
}

/// Query MSE per held-out task. The adaptation CSV covers task 0: its support
/// points, then `dense_points` evenly spaced inputs over the task input range.
pub fn eval(s: &Settings) -> Result<EvalOutput> {
    let path = s
        .path("checkpoint")
        .ok_or_else(|| CliError::key("checkpoint", "required"))?;
    let tasks: usize = s.get("tasks")?;
    if tasks == 0 {
        return Err(CliError::key("tasks", "must be at least 1"));
    }
    let (m, q, seed): (usize, usize, u64) = (s.get("m")?, s.get("q")?, s.get("seed")?);
    if m == 0 || q == 0 {
        return Err(CliError::key(if m == 0 { "m" } else { "q" }, "must be at least 1"));
    }
    let learner = load_checkpoint(path)?;
    let report = match &learner {
        Learner::MetaFlo(st) => eval_meta(st, tasks, m, q, seed)?,
        Learner::Fomaml(st) => eval_fomaml(st, tasks, m, q, seed)?,
    };
    let rows: Vec<Vec<String>> = report
        .tasks
        .iter()
        .map(|t| vec![t.task_id.to_string(), num(t.kappa), num(t.gamma), num(t.query_mse)])
        .collect();
    let csv = table::render(&s.echo(), table::META_EVAL_HEADER, &rows)?;
    let adaptation = match s.path("adaptation") {
        None => None,
        Some(_) => Some(adaptation(s, &learner, m, q, seed)?),
    };
    Ok(EvalOutput {
        csv,
        adaptation,
        mean_mse: report.mean_mse,
    })
}

fn adaptation(s: &Settings, learner: &Learner, m: usize, q: usize, seed: u64) -> Result<Vec<u8>> {
    let n: usize = s.get("dense_points")?;
    if n < 2 {
        return Err(CliError::key("dense_points", "must be at least 2"));
    }
    let draws: usize = s.get("ensemble")?;
    if draws == 0 {
        return Err(CliError::key("ensemble", "must be at least 1"));
    }
    // same draws as evaluation task 0
    let mut r = rng::stream(seed, 0);
    let ep = sample_episode(sample_task(&mut r), m, q, &mut r)?;
    let (lo, hi) = fenlo_core::meta::task::INPUT_RANGE;
    let grid = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64);
    let xs: Vec<f64> = ep.support.iter().map(|p| p.0).chain(grid).collect();
    let (mean, std) = match learner {
        Learner::MetaFlo(st) => predict_ensemble(st, &ep.support, &xs, draws, &mut r)?,
        Learner::Fomaml(st) => (st.predict(&st.adapt(&ep.support)?, &xs)?, vec![0.0; xs.len()]),
    };
    let rows: Vec<Vec<String>> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let kind = if i < m { "support" } else { "dense" };
            vec![kind.into(), num(x), num(ep.task.eval(x)), num(mean[i]), num(std[i])]
        })
        .collect();
    table::render("", table::ADAPTATION_HEADER, &rows)
}
