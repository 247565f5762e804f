//! Run configuration: a per-command table of keys, resolved from defaults, an
//! optional `key = value` file, and command-line flags, in that order.

use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use clap::{parser::ValueSource, Arg, ArgMatches, Command};

use crate::error::{CliError, Result};

#[derive(Debug, PartialEq)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
    /// Output locations are left out of the echo so that runs differing only
    /// in where they write produce identical files.
    pub echo: bool,
}

pub const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default,
        help,
        echo: true,
    }
}

pub const fn output(name: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default: "",
        help,
        echo: false,
    }
}

pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

/// Adds `--config` and one `--<key>` flag per entry of `keys`. A repeated
/// flag takes its last value.
pub fn with_keys(cmd: Command, keys: &'static [Key]) -> Command {
    let cmd = cmd.args_override_self(true).arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("File of `key = value` lines; flags override it"),
    );
    keys.iter().fold(cmd, |cmd, k| {
        let help = if k.default.is_empty() {
            k.help.to_string()
        } else {
            format!("{} [default: {}]", k.help, k.default)
        };
        cmd.arg(
            Arg::new(k.name)
                .long(flag_name(k.name))
                .value_name("VALUE")
                .allow_hyphen_values(true)
                .help(help),
        )
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    keys: &'static [Key],
    values: Vec<String>,
}

impl Settings {
    pub fn defaults(keys: &'static [Key]) -> Self {
        Self {
            keys,
            values: keys.iter().map(|k| k.default.to_string()).collect(),
        }
    }

    pub fn resolve(keys: &'static [Key], matches: &ArgMatches) -> Result<Self> {
        let mut s = Self::defaults(keys);
        if let Some(path) = matches.get_one::<String>("config") {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            s.apply_file(&text, Path::new(path))?;
        }
        for (i, k) in keys.iter().enumerate() {
            if matches.value_source(k.name) == Some(ValueSource::CommandLine) {
                s.values[i] = matches.get_one::<String>(k.name).cloned().unwrap_or_default();
            }
        }
        Ok(s)
    }

    pub fn apply_file(&mut self, text: &str, path: &Path) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = || format!("{}:{}", path.display(), n + 1);
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("{}: expected `key = value`", at())))?;
            let k = k.trim();
            let i = self
                .index(k)
                .ok_or_else(|| CliError::Input(format!("{}: unknown key {k}", at())))?;
            self.values[i] = v.trim().to_string();
        }
        Ok(())
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.keys.iter().position(|k| k.name == name)
    }

    fn slot(&self, name: &'static str) -> (usize, &'static Key) {
        let i = self.index(name).unwrap_or_else(|| panic!("key {name} is not declared"));
        (i, &self.keys[i])
    }

    pub fn text(&self, name: &'static str) -> &str {
        &self.values[self.slot(name).0]
    }

    #[cfg(test)]
    pub fn set(&mut self, name: &'static str, value: impl Display) {
        let i = self.slot(name).0;
        self.values[i] = value.to_string();
    }

    pub fn get<T>(&self, name: &'static str) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        let (_, k) = self.slot(name);
        let v = self.text(name);
        v.parse()
            .map_err(|e| CliError::key(k.name, format!("invalid value {v:?}: {e}")))
    }

    /// Comma-separated list; empty entries are rejected.
    pub fn list<T>(&self, name: &'static str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let v = self.text(name);
        if v.trim().is_empty() {
            return Err(CliError::key(name, "empty list"));
        }
        v.split(',')
            .map(|item| {
                let item = item.trim();
                item.parse()
                    .map_err(|e| CliError::key(name, format!("invalid entry {item:?}: {e}")))
            })
            .collect()
    }

    pub fn switch(&self, name: &'static str) -> Result<bool> {
        match self.text(name).to_ascii_lowercase().as_str() {
            "on" | "true" | "yes" | "1" => Ok(true),
            "off" | "false" | "no" | "0" => Ok(false),
            other => Err(CliError::key(name, format!("expected on or off, got {other:?}"))),
        }
    }

    /// `None` for an empty value.
    pub fn path(&self, name: &'static str) -> Option<&Path> {
        let v = self.text(name);
        (!v.is_empty()).then(|| Path::new(v))
    }

    /// `# key = value` lines for every echoed key, in declaration order.
    pub fn echo(&self) -> String {
        self.keys
            .iter()
            .zip(&self.values)
            .filter(|(k, _)| k.echo)
            .map(|(k, v)| format!("# {} = {}\n", k.name, v))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    static KEYS: [Key; 4] = [
        key("rho", "0.5", "correlation"),
        key("hidden", "512,512", "widths"),
        key("timing", "on", "wall clock"),
        output("out", "csv path"),
    ];

    fn matches(args: &[&str]) -> ArgMatches {
        with_keys(Command::new("t"), &KEYS)
            .try_get_matches_from(std::iter::once("t").chain(args.iter().copied()))
            .unwrap()
    }

    #[test]
    fn flags_override_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        fs::write(&path, "# sweep\nrho = 0.9  # strong\n\nhidden=64, 32\n").unwrap();
        let p = path.to_str().unwrap();
        let s = Settings::resolve(&KEYS, &matches(&["--config", p])).unwrap();
        assert_eq!(s.get::<f64>("rho").unwrap(), 0.9);
        assert_eq!(s.list::<usize>("hidden").unwrap(), vec![64, 32]);
        let s = Settings::resolve(&KEYS, &matches(&["--config", p, "--rho", "0.3", "--rho", "-0.1"])).unwrap();
        assert_eq!(s.get::<f64>("rho").unwrap(), -0.1);
        assert!(s.switch("timing").unwrap());
    }

    #[test]
    fn unknown_and_malformed_lines_are_errors() {
        let mut s = Settings::defaults(&KEYS);
        let err = s.apply_file("sigma = 2\n", Path::new("a.cfg")).unwrap_err();
        assert_eq!(err.to_string(), "a.cfg:1: unknown key sigma");
        let err = s.apply_file("\nrho 0.2\n", Path::new("a.cfg")).unwrap_err();
        assert!(err.to_string().starts_with("a.cfg:2:"));
    }

    #[test]
    fn bad_values_name_the_key() {
        let mut s = Settings::defaults(&KEYS);
        s.set("rho", "half");
        assert!(s.get::<f64>("rho").unwrap_err().to_string().starts_with("rho: "));
        s.set("hidden", "64,,2");
        assert!(s.list::<usize>("hidden").unwrap_err().to_string().starts_with("hidden: "));
        s.set("timing", "maybe");
        assert!(s.switch("timing").is_err());
    }

    #[test]
    fn echo_skips_output_keys() {
        let mut s = Settings::defaults(&KEYS);
        s.set("out", "/tmp/x.csv");
        assert_eq!(s.echo(), "# rho = 0.5\n# hidden = 512,512\n# timing = on\n");
        assert_eq!(s.path("out"), Some(Path::new("/tmp/x.csv")));
    }
}
