//! CSV emission and loading. Files open with the echoed configuration as `#`
//! comment lines, followed by the header row and data rows.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{CliError, Result};

pub const TRACE_HEADER: &str = "step,kind,K,estimate_nats,q10,q20,q30,q40,q50,q60,q70,q80,q90,truth_nats,wall_ms";
pub const SWEEP_HEADER: &str = "rho,kind,trial,K,estimate_nats,q10,q20,q30,q40,q50,q60,q70,q80,q90,truth_nats,wall_ms,failed";
pub const META_TRAIN_HEADER: &str = "step,loss_total,loss_r,loss_flo_estimate,wall_ms";
pub const META_EVAL_HEADER: &str = "task_id,kappa,gamma,query_mse";
pub const ADAPTATION_HEADER: &str = "kind,x,y_true,y_pred,y_std";

/// Shortest round-trip decimal, and the literal `nan` for NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        x.to_string()
    }
}

pub fn render(echo: &str, header: &str, rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut out = echo.as_bytes().to_vec();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.split(','))?;
    for row in rows {
        w.write_record(row)?;
    }
    out.extend(w.into_inner().map_err(|e| CliError::Input(e.to_string()))?);
    Ok(out)
}

/// Writes to `path`, or to stdout when there is none.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => fs::write(p, bytes).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(r);
        let header = rd.headers()?.iter().map(str::to_string).collect();
        let rows = rd
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    pub fn has(&self, name: &str) -> bool {
        self.header.iter().any(|h| h == name)
    }

    pub fn require(&self, names: &[&str]) -> Result<()> {
        if let Some(missing) = names.iter().find(|n| !self.has(n)) {
            return Err(CliError::Input(format!("missing column {missing}")));
        }
        if self.rows.is_empty() {
            return Err(CliError::Input("no rows".into()));
        }
        Ok(())
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Input(format!("missing column {name}")))
    }

    pub fn strings(&self, name: &str) -> Result<Vec<&str>> {
        let i = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        self.strings(name)?
            .into_iter()
            .enumerate()
            .map(|(row, cell)| {
                cell.trim().parse().map_err(|_| {
                    CliError::Input(format!("column {name}, row {}: not a number: {cell:?}", row + 1))
                })
            })
            .collect()
    }
}
