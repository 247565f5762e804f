use std::time::Instant;

use fenlo_core::critics::{make_critic, CriticConfig, CriticKind, Negatives};
use fenlo_core::estimators::EstimatorKind;
use fenlo_core::gaussian::{run_sweep, GaussianSpec, SweepConfig};
use fenlo_core::rng;
use fenlo_core::training::{evaluate_estimate, train_estimator, TrainConfig};

use crate::config::{key, output, Key, Settings};
use crate::error::{CliError, Result};
use crate::table::{self, num};

pub static GAUSSIAN_KEYS: [Key; 14] = [
    key("kind", "flo", "Estimator: flo, fdv, infonce, nwj, tuba, dv, mine"),
    key("critic", "joint", "Critic architecture: joint or bilinear"),
    key("d", "2", "Dimension of x and of y"),
    key("rho", "0.5", "Per-coordinate correlation"),
    key("steps", "5000", "Adam steps"),
    key("k", "128", "Batch size K"),
    key("lr", "1e-4", "Adam learning rate"),
    key("hidden", "512,512", "Critic hidden widths"),
    key("negatives", "auto", "Training negatives: auto, all, or a shift count"),
    key("log_every", "100", "Steps per trace row"),
    key("eval_samples", "10000", "Held-out samples for the final row; 0 keeps the last training window"),
    key("seed", "0", "Random seed"),
    key("timing", "on", "Record wall_ms; off writes 0 for byte-stable output"),
    output("out", "CSV path; stdout when empty"),
];

pub static SWEEP_KEYS: [Key; 14] = [
    key("kinds", "flo,infonce,nwj,tuba,dv,mine", "Estimators to compare"),
    key("rhos", "0,0.3,0.5,0.7,0.9", "Correlations"),
    key("d", "10", "Dimension of x and of y"),
    key("critic", "bilinear", "Critic architecture: joint or bilinear"),
    key("hidden", "512,512", "Critic hidden widths"),
    key("steps", "5000", "Adam steps per trial"),
    key("k", "128", "Batch size K"),
    key("lr", "1e-4", "Adam learning rate"),
    key("negatives", "auto", "Training negatives: auto, all, or a shift count"),
    key("trials", "3", "Independent trials per (rho, kind)"),
    key("eval_samples", "10000", "Held-out samples per trial"),
    key("seed", "0", "Random seed"),
    key("timing", "on", "Record wall_ms; off writes 0 for byte-stable output"),
    output("out", "CSV path; stdout when empty"),
];

fn critic_kind(s: &Settings) -> Result<CriticKind> {
    match s.get::<CriticKind>("critic")? {
        CriticKind::Tabular => Err(CliError::key("critic", "tabular critics need a discrete source")),
        k => Ok(k),
    }
}

/// `auto` trains the joint critic on one shifted negative per positive, since
/// its pair rows grow as K², and the bilinear critic on all pairs.
fn negatives(s: &Settings, critic: CriticKind) -> Result<Negatives> {
    match s.text("negatives") {
        "auto" if critic == CriticKind::Joint => Ok(Negatives::Shifts(1)),
        "auto" | "all" => Ok(Negatives::AllPairs),
        _ => match s.get::<usize>("negatives")? {
            0 => Err(CliError::key("negatives", "shift count must be at least 1")),
            n => Ok(Negatives::Shifts(n)),
        },
    }
}

fn spec(d: usize, rho: f64, rho_key: &'static str) -> Result<GaussianSpec> {
    if d == 0 {
        return Err(CliError::key("d", "d must be at least 1"));
    }
    GaussianSpec::new(d, rho).map_err(|e| match e {
        fenlo_core::Error::Domain { detail, .. } => CliError::key(rho_key, detail),
        e => e.into(),
    })
}

fn train_config(s: &Settings, kind: EstimatorKind, critic: CriticKind) -> Result<TrainConfig> {
    let mut train = TrainConfig::new(kind, s.get("steps")?, s.get("k")?);
    train.lr = s.get("lr")?;
    if !(train.lr > 0.0 && train.lr.is_finite()) {
        return Err(CliError::key("lr", "must be positive"));
    }
    train.negatives = negatives(s, critic)?;
    Ok(train)
}

fn eval_samples(s: &Settings, k: usize, optional: bool) -> Result<usize> {
    let n: usize = s.get("eval_samples")?;
    if (n > 0 || !optional) && n < k {
        return Err(CliError::key("eval_samples", format!("{n} samples cannot fill one batch of {k}")));
    }
    Ok(n)
}

fn timed(timing: bool, ms: f64) -> String {
    num(if timing { ms } else { 0.0 })
}

/// Training trace of one estimator on one Gaussian pair. With `eval_samples`
/// above zero the final row is the held-out evaluation of the trained critic
/// with all K-1 in-batch negatives, in place of the last training window.
pub fn gaussian(s: &Settings) -> Result<Vec<u8>> {
    let kind: EstimatorKind = s.get("kind")?;
    let critic = critic_kind(s)?;
    let d: usize = s.get("d")?;
    let spec = spec(d, s.get("rho")?, "rho")?;
    let mut train = train_config(s, kind, critic)?;
    train.log_every = s.get("log_every")?;
    let hidden: Vec<usize> = s.list("hidden")?;
    let n_eval = eval_samples(s, train.batch_size, true)?;
    let seed: u64 = s.get("seed")?;
    let timing = s.switch("timing")?;

    let start = Instant::now();
    let mut rng = rng::stream(seed, 0);
    let cfg = CriticConfig::new(d, d).with_hidden(&hidden);
    let mut net = make_critic(critic, &cfg, &mut rng)?;
    let mut records = train_estimator(&spec, &mut net, &train, &mut rng)?;
    if n_eval > 0 {
        let report = evaluate_estimate(&net, kind, &spec, n_eval, train.batch_size, seed ^ 0x00E7_A15E)?;
        let last = records.last_mut().expect("training emits a final record");
        last.estimate = report.mean;
        last.quantiles = report.quantiles;
        last.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    }
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![r.step.to_string(), r.kind.to_string(), r.k.to_string(), num(r.estimate)];
            row.extend(r.quantiles.iter().map(|&q| num(q)));
            row.push(num(r.truth.unwrap_or(f64::NAN)));
            row.push(timed(timing, r.wall_ms));
            row
        })
        .collect();
    table::render(&s.echo(), table::TRACE_HEADER, &rows)
}

/// One row per `(rho, kind, trial)` in grid order. Diverged trials keep their
/// row with `nan` estimates and `failed = 1`.
pub fn sweep(s: &Settings) -> Result<Vec<u8>> {
    let kinds: Vec<EstimatorKind> = s.list("kinds")?;
    let rhos: Vec<f64> = s.list("rhos")?;
    let d: usize = s.get("d")?;
    for &rho in &rhos {
        spec(d, rho, "rhos")?;
    }
    let critic = critic_kind(s)?;
    let train = train_config(s, kinds[0], critic)?;
    let trials: usize = s.get("trials")?;
    if trials == 0 {
        return Err(CliError::key("trials", "must be at least 1"));
    }
    let cfg = SweepConfig {
        rhos,
        d,
        kinds,
        critic,
        hidden: s.list("hidden")?,
        eval_samples: eval_samples(s, train.batch_size, false)?,
        train,
        trials,
        seed: s.get("seed")?,
    };
    let timing = s.switch("timing")?;
    let rows: Vec<Vec<String>> = run_sweep(&cfg)?
        .iter()
        .map(|r| {
            let mut row = vec![
                num(r.rho),
                r.kind.to_string(),
                r.trial.to_string(),
                r.k.to_string(),
                num(r.estimate),
            ];
            row.extend(r.quantiles.iter().map(|&q| num(q)));
            row.push(num(r.truth));
            row.push(timed(timing, r.wall_ms));
            row.push(u8::from(r.failed).to_string());
            row
        })
        .collect();
    table::render(&s.echo(), table::SWEEP_HEADER, &rows)
}
