//! Standalone SVG rendering of trace, sweep and adaptation CSVs.
//!
//! Elements carry a `class` (`series`, `band`, `truth`, `curve`, `marker`) so
//! that their counts can be checked against the input rows.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{CliError, Result};
use crate::table::Table;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 450.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Trace,
    QuantileBand,
    Adaptation,
}

impl FromStr for PlotKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "trace" => Ok(Self::Trace),
            "quantile-band" => Ok(Self::QuantileBand),
            "adaptation" => Ok(Self::Adaptation),
            other => Err(format!("unknown plot kind {other:?}; expected trace, quantile-band or adaptation")),
        }
    }
}

pub fn render(kind: PlotKind, t: &Table) -> Result<String> {
    match kind {
        PlotKind::Trace if t.has("loss_r") && !t.has("estimate_nats") => loss_trace(t),
        PlotKind::Trace => mi_trace(t),
        PlotKind::QuantileBand => quantile_band(t),
        PlotKind::Adaptation => adaptation(t),
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    svg: String,
    legend: usize,
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    }
}

impl Frame {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: (f64, f64), y: (f64, f64)) -> Self {
        let pad = 0.05 * (y.1 - y.0);
        let mut f = Self {
            x,
            y: (y.0 - pad, y.1 + pad),
            svg: String::new(),
            legend: 0,
        };
        let (pw, ph) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
        let _ = writeln!(
            f.svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(f.svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
        let _ = writeln!(
            f.svg,
            r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
            LEFT + pw / 2.0,
            escape(title)
        );
        let _ = writeln!(
            f.svg,
            r#"<rect class="axes" x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );
        for i in 0..=4 {
            let t = i as f64 / 4.0;
            let xv = f.x.0 + t * (f.x.1 - f.x.0);
            let yv = f.y.0 + t * (f.y.1 - f.y.0);
            let (px, py) = (f.sx(xv), f.sy(yv));
            let _ = writeln!(
                f.svg,
                r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{b2}" stroke="black"/><text x="{px:.2}" y="{ty}" text-anchor="middle">{}</text>"#,
                tick_label(xv),
                b = TOP + ph,
                b2 = TOP + ph + 5.0,
                ty = TOP + ph + 18.0
            );
            let _ = writeln!(
                f.svg,
                r#"<line x1="{l}" y1="{py:.2}" x2="{LEFT}" y2="{py:.2}" stroke="black"/><text x="{tx}" y="{ty:.2}" text-anchor="end">{}</text>"#,
                tick_label(yv),
                l = LEFT - 5.0,
                tx = LEFT - 8.0,
                ty = py + 4.0
            );
        }
        let _ = writeln!(
            f.svg,
            r#"<text class="xlabel" x="{}" y="{}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 12.0,
            escape(xlabel)
        );
        let _ = writeln!(
            f.svg,
            r#"<text class="ylabel" x="18" y="{cy}" text-anchor="middle" transform="rotate(-90 18 {cy})">{}</text>"#,
            escape(ylabel),
            cy = TOP + ph / 2.0
        );
        f
    }

    fn sx(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn sy(&self, v: f64) -> f64 {
        TOP + (self.y.1 - v) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }

    fn points(&self, pts: &[(f64, f64)]) -> String {
        pts.iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", self.sx(x), self.sy(y)))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn line(&mut self, class: &str, label: &str, color: &str, pts: &[(f64, f64)], dashed: bool) {
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.svg,
            r#"<polyline class="{class}" data-label="{}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            escape(label),
            self.points(pts)
        );
    }

    /// Translucent fill between `lower` and `upper` over the same x values.
    fn band(&mut self, label: &str, color: &str, xs: &[f64], lower: &[f64], upper: &[f64]) {
        let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(upper.iter().copied()).collect();
        pts.extend(xs.iter().copied().zip(lower.iter().copied()).rev());
        let _ = writeln!(
            self.svg,
            r#"<polygon class="band" data-label="{}" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            escape(label),
            self.points(&pts)
        );
    }

    fn marker(&mut self, color: &str, x: f64, y: f64) {
        let _ = writeln!(
            self.svg,
            r#"<circle class="marker" cx="{:.2}" cy="{:.2}" r="4" fill="{color}" stroke="black"/>"#,
            self.sx(x),
            self.sy(y)
        );
    }

    fn legend(&mut self, label: &str, color: &str, dashed: bool) {
        let y = TOP + 10.0 + 18.0 * self.legend as f64;
        let x = WIDTH - RIGHT + 12.0;
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            self.svg,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            x + 22.0,
            x + 28.0,
            y + 4.0,
            escape(label)
        );
        self.legend += 1;
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

/// Distinct values in first-appearance order.
fn groups<'a>(keys: &[&'a str]) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for k in keys {
        if !out.contains(k) {
            out.push(k);
        }
    }
    out
}

fn mi_trace(t: &Table) -> Result<String> {
    t.require(&["step", "kind", "estimate_nats", "q10", "q90", "truth_nats"])?;
    let (step, kind) = (t.numbers("step")?, t.strings("kind")?);
    let (est, q10, q90, truth) = (
        t.numbers("estimate_nats")?,
        t.numbers("q10")?,
        t.numbers("q90")?,
        t.numbers("truth_nats")?,
    );
    let x = span(step.iter().copied());
    let y = span(est.iter().chain(&q10).chain(&q90).chain(&truth).copied());
    let mut f = Frame::new("estimator trace", "step", "MI (nats)", x, y);
    for (gi, g) in groups(&kind).into_iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        let rows: Vec<usize> = (0..kind.len()).filter(|&i| kind[i] == g && est[i].is_finite()).collect();
        let xs: Vec<f64> = rows.iter().map(|&i| step[i]).collect();
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<f64>>();
        f.band(g, color, &xs, &pick(&q10), &pick(&q90));
        let pts: Vec<(f64, f64)> = xs.iter().copied().zip(pick(&est)).collect();
        f.line("series", g, color, &pts, false);
        f.legend(g, color, false);
    }
    let mut levels: Vec<f64> = Vec::new();
    for &v in truth.iter().filter(|v| v.is_finite()) {
        if !levels.contains(&v) {
            levels.push(v);
        }
    }
    for v in &levels {
        f.line("truth", "truth", "black", &[(x.0, *v), (x.1, *v)], true);
    }
    if !levels.is_empty() {
        f.legend("truth", "black", true);
    }
    Ok(f.finish())
}

fn loss_trace(t: &Table) -> Result<String> {
    t.require(&["step", "loss_r"])?;
    let (step, loss) = (t.numbers("step")?, t.numbers("loss_r")?);
    let mut f = Frame::new("training loss", "step", "MSE", span(step.iter().copied()), span(loss.iter().copied()));
    let pts: Vec<(f64, f64)> = step.iter().copied().zip(loss.iter().copied()).filter(|p| p.1.is_finite()).collect();
    f.line("series", "loss_r", PALETTE[0], &pts, false);
    f.legend("loss_r", PALETTE[0], false);
    Ok(f.finish())
}

/// Mean over finished trials of `(estimate, q10, q90)` per `(kind, rho)`.
fn quantile_band(t: &Table) -> Result<String> {
    t.require(&["rho", "kind", "estimate_nats", "q10", "q90", "truth_nats", "failed"])?;
    let (rho, kind, failed) = (t.numbers("rho")?, t.strings("kind")?, t.numbers("failed")?);
    let (est, q10, q90, truth) = (
        t.numbers("estimate_nats")?,
        t.numbers("q10")?,
        t.numbers("q90")?,
        t.numbers("truth_nats")?,
    );
    let mut rhos: Vec<f64> = Vec::new();
    for &r in &rho {
        if !rhos.contains(&r) {
            rhos.push(r);
        }
    }
    rhos.sort_by(f64::total_cmp);
    let ok = |i: usize| failed[i] == 0.0 && est[i].is_finite();
    let x = span(rhos.iter().copied());
    let y = span((0..rho.len()).filter(|&i| ok(i)).flat_map(|i| [est[i], q10[i], q90[i]]).chain(truth.iter().copied()));
    let mut f = Frame::new("bias and variance", "rho", "MI (nats)", x, y);
    for (gi, g) in groups(&kind).into_iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        let (mut xs, mut lo, mut mid, mut hi) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for &r in &rhos {
            let cell: Vec<usize> = (0..rho.len()).filter(|&i| kind[i] == g && rho[i] == r && ok(i)).collect();
            if cell.is_empty() {
                continue;
            }
            let avg = |v: &[f64]| cell.iter().map(|&i| v[i]).sum::<f64>() / cell.len() as f64;
            xs.push(r);
            lo.push(avg(&q10));
            mid.push(avg(&est));
            hi.push(avg(&q90));
        }
        if xs.is_empty() {
            continue;
        }
        f.band(g, color, &xs, &lo, &hi);
        let pts: Vec<(f64, f64)> = xs.iter().copied().zip(mid).collect();
        f.line("series", g, color, &pts, false);
        f.legend(g, color, false);
    }
    let curve: Vec<(f64, f64)> = rhos
        .iter()
        .filter_map(|&r| (0..rho.len()).find(|&i| rho[i] == r && truth[i].is_finite()).map(|i| (r, truth[i])))
        .collect();
    if !curve.is_empty() {
        f.line("truth", "truth", "black", &curve, true);
        f.legend("truth", "black", true);
    }
    Ok(f.finish())
}

fn adaptation(t: &Table) -> Result<String> {
    t.require(&["kind", "x", "y_true", "y_pred", "y_std"])?;
    let kind = t.strings("kind")?;
    let (x, y_true, y_pred, y_std) = (t.numbers("x")?, t.numbers("y_true")?, t.numbers("y_pred")?, t.numbers("y_std")?);
    if let Some(k) = kind.iter().find(|k| **k != "dense" && **k != "support") {
        return Err(CliError::Input(format!("unknown row kind {k:?}; expected dense or support")));
    }
    let dense: Vec<usize> = (0..kind.len()).filter(|&i| kind[i] == "dense").collect();
    let support: Vec<usize> = (0..kind.len()).filter(|&i| kind[i] == "support").collect();
    if dense.is_empty() {
        return Err(CliError::Input("no rows of kind dense".into()));
    }
    let xr = span(x.iter().copied());
    let yr = span(
        dense
            .iter()
            .flat_map(|&i| [y_true[i], y_pred[i] - y_std[i], y_pred[i] + y_std[i]])
            .chain(support.iter().map(|&i| y_true[i])),
    );
    let mut f = Frame::new("few-shot adaptation", "x", "y", xr, yr);
    let xs: Vec<f64> = dense.iter().map(|&i| x[i]).collect();
    let pick = |v: &[f64]| dense.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    if dense.iter().any(|&i| y_std[i] > 0.0) {
        let lo: Vec<f64> = dense.iter().map(|&i| y_pred[i] - y_std[i]).collect();
        let hi: Vec<f64> = dense.iter().map(|&i| y_pred[i] + y_std[i]).collect();
        f.band("predicted", PALETTE[1], &xs, &lo, &hi);
    }
    let true_pts: Vec<(f64, f64)> = xs.iter().copied().zip(pick(&y_true)).collect();
    let pred_pts: Vec<(f64, f64)> = xs.iter().copied().zip(pick(&y_pred)).collect();
    f.line("curve", "true", PALETTE[0], &true_pts, false);
    f.line("curve", "predicted", PALETTE[1], &pred_pts, false);
    f.legend("true", PALETTE[0], false);
    f.legend("predicted", PALETTE[1], false);
    for &i in &support {
        f.marker("black", x[i], y_true[i]);
    }
    Ok(f.finish())
}
