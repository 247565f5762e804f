use std::fmt::Write as _;
use std::fs;

use fenlo_core::oracle::{builtin_joints, oracle_report, DiscreteJoint};

use crate::config::{key, Key, Settings};
use crate::error::{CliError, Result};

pub const TOLERANCE: f64 = 1e-9;

pub static KEYS: [Key; 1] = [key(
    "table",
    "",
    "Extra joint table: one row of probabilities per line, whitespace or comma separated",
)];

/// Parses a probability table. `#` starts a comment.
pub fn parse_table(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let cells: Vec<&str> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|c| !c.is_empty())
            .collect();
        if cells.is_empty() {
            continue;
        }
        let row = cells
            .iter()
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| CliError::Input(format!("table line {}: not a number: {c:?}", n + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let Some(first) = rows.first() else {
        return Err(CliError::Input("table is empty".into()));
    };
    if rows.iter().any(|r| r.len() != first.len()) {
        return Err(CliError::Input("table rows must have equal length".into()));
    }
    if rows.iter().flatten().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(CliError::Input("table entries must be finite and nonnegative".into()));
    }
    let total: f64 = rows.iter().flatten().sum();
    if (total - 1.0).abs() > TOLERANCE {
        return Err(CliError::Input(format!("table must sum to 1 (sums to {total})")));
    }
    Ok(rows)
}

/// Report for the built-in joints and the optional user table. Fails with a
/// deviation error after the full report when any joint misses `TOLERANCE`.
pub fn run(s: &Settings) -> Result<(String, Option<CliError>)> {
    let mut joints: Vec<(String, DiscreteJoint)> = builtin_joints()
        .into_iter()
        .map(|(name, j)| (name.to_string(), j))
        .collect();
    if let Some(path) = s.path("table") {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let rows = parse_table(&text)?;
        let joint = DiscreteJoint::from_rows(&rows).map_err(|e| CliError::Input(format!("table: {e}")))?;
        joints.push((path.display().to_string(), joint));
    }
    let mut out = String::new();
    let mut worst: Option<(String, f64)> = None;
    for (name, joint) in &joints {
        let rep = oracle_report(joint)?;
        let (nx, ny) = joint.shape();
        let _ = writeln!(out, "joint {name} [{nx}x{ny}]");
        for (label, v) in [
            ("exact_mi", rep.mi),
            ("flo_at_optimum", rep.flo_at_optimum),
            ("uba_at_optimum", rep.uba_at_optimum),
            ("mean_neg_u", rep.neg_u_mean),
        ] {
            // keep values that round to zero from printing as -0
            let v = if v.abs() < 5e-13 { 0.0 } else { v };
            let _ = writeln!(out, "  {label:<20}{v:.12}");
        }
        let _ = writeln!(out, "  {:<20}{:.3e}", "max_deviation", rep.max_deviation);
        let _ = writeln!(out, "  {:<20}{}", "zero_cell_sentinel", if rep.sentinel_used { "yes" } else { "no" });
        if !(rep.max_deviation < TOLERANCE) && worst.as_ref().is_none_or(|w| rep.max_deviation > w.1) {
            worst = Some((name.clone(), rep.max_deviation));
        }
    }
    match worst {
        None => {
            let _ = writeln!(out, "all deviations below {TOLERANCE:e}");
            Ok((out, None))
        }
        Some((name, deviation)) => Ok((
            out,
            Some(CliError::Deviation {
                what: format!("oracle {name}"),
                deviation,
                tolerance: TOLERANCE,
            }),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_accept_commas_spaces_and_comments() {
        let rows = parse_table("# joint\n0.4, 0.1\n0.1\t0.4  # tail\n\n").unwrap();
        assert_eq!(rows, vec![vec![0.4, 0.1], vec![0.1, 0.4]]);
    }

    #[test]
    fn malformed_tables_are_input_errors() {
        for (text, msg) in [
            ("0.5 0.5\n0.5\n", "equal length"),
            ("0.5 x\n", "not a number"),
            ("", "empty"),
            ("0.5 0.6\n", "table must sum to 1"),
            ("1.5 -0.5\n", "nonnegative"),
        ] {
            let err = parse_table(text).unwrap_err();
            assert!(err.to_string().contains(msg), "{err}");
            assert_eq!(err.exit_code(), 1);
        }
    }

    #[test]
    fn builtins_pass() {
        let (text, fail) = run(&Settings::defaults(&KEYS)).unwrap();
        assert!(fail.is_none(), "{text}");
        assert!(text.contains("exact_mi            0.19274"));
        assert!(!text.contains("-0.000"));
        assert!(text.contains("all deviations below"));
    }
}
