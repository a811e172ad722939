//! `id,pred,gt` score files.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use crate::exit::{CliError, ExitCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Column {
    Pred,
    Gt,
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Column::Pred => "pred",
            Column::Gt => "gt",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFile {
    pub ids: Vec<String>,
    pub pred: Vec<f64>,
    pub gt: Vec<f64>,
}

impl ScoreFile {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn column(&self, c: Column) -> &[f64] {
        match c {
            Column::Pred => &self.pred,
            Column::Gt => &self.gt,
        }
    }

    /// First column among `pred`, `gt` whose values are all equal.
    pub fn constant_column(&self) -> Option<Column> {
        [Column::Pred, Column::Gt].into_iter().find(|&c| {
            let v = self.column(c);
            v.iter().all(|x| *x == v[0])
        })
    }
}

fn input_error(path: &Path, line: u64, msg: impl fmt::Display) -> CliError {
    CliError::new(ExitCode::Input, format!("{}:{line}: {msg}", path.display()))
}

fn parse_value(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn read(path: &Path) -> Result<ScoreFile, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::new(ExitCode::Input, format!("{}: {e}", path.display())))?;

    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(input_error(path, 1, "empty file, expected header id,pred,gt")),
        Some(r) => r.map_err(|e| input_error(path, 1, e))?,
    };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    if names != ["id", "pred", "gt"] {
        return Err(input_error(path, 1, format!("header must be id,pred,gt, got {}", names.join(","))));
    }

    let mut out = ScoreFile {
        ids: Vec::new(),
        pred: Vec::new(),
        gt: Vec::new(),
    };
    let mut seen = HashSet::new();
    for record in records {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            input_error(path, line, e)
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 3 {
            return Err(input_error(path, line, format!("expected 3 fields, got {}", record.len())));
        }
        let id = record[0].trim().to_string();
        if id.is_empty() {
            return Err(input_error(path, line, "empty id"));
        }
        let pred = parse_value(&record[1])
            .ok_or_else(|| input_error(path, line, format!("pred {:?} is not a finite number", &record[1])))?;
        let gt = parse_value(&record[2])
            .ok_or_else(|| input_error(path, line, format!("gt {:?} is not a finite number", &record[2])))?;
        if !seen.insert(id.clone()) {
            return Err(input_error(path, line, format!("duplicate id {id:?}")));
        }
        out.ids.push(id);
        out.pred.push(pred);
        out.gt.push(gt);
    }
    if out.len() < 2 {
        return Err(CliError::new(
            ExitCode::Input,
            format!("{}: need at least 2 rows, got {}", path.display(), out.len()),
        ));
    }
    Ok(out)
}
