#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

pub fn fenlo<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fenlo"))
        .args(args)
        .output()
        .expect("spawn fenlo")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Runs and asserts exit 0, returning stdout.
pub fn ok<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Vec<u8> {
    let out = fenlo(args);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    out.stdout
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Header and data rows, skipping `#` lines.
pub fn rows(text: &str) -> (String, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().expect("header").to_string();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

pub fn column(text: &str, name: &str) -> Vec<String> {
    let (header, rows) = rows(text);
    let i = header.split(',').position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.into_iter().map(|r| r[i].clone()).collect()
}

pub fn numbers(text: &str, name: &str) -> Vec<f64> {
    column(text, name).iter().map(|c| c.parse().unwrap()).collect()
}

/// The text with every cell of `name` replaced by `*`.
pub fn mask(text: &str, name: &str) -> String {
    let (header, _) = rows(text);
    let i = header.split(',').position(|h| h == name).expect("column");
    text.lines()
        .map(|l| {
            if l.starts_with('#') || l == header {
                l.to_string()
            } else {
                let mut cells: Vec<&str> = l.split(',').collect();
                cells[i] = "*";
                cells.join(",")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}
