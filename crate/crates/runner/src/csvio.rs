//! Trajectory CSV emission and parsing.
//!
//! Schema: header `t,acc,dacc,pi_1,...,pi_K`, one row per sample, every
//! value rendered with 17 significant decimal digits so parsing
//! reproduces the original floats bit for bit. Files are written to a
//! temporary sibling and atomically renamed into place, so readers never
//! observe a partial file.

use std::io::Write;
use std::path::Path;

use rlvrsim_core::TrajectorySample;

use crate::error::{Result, RunnerError};

fn render(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders the CSV document for `k` patterns.
fn csv_text(samples: &[TrajectorySample], k: usize) -> String {
    let mut out = String::from("t,acc,dacc");
    for i in 1..=k {
        out.push_str(&format!(",pi_{i}"));
    }
    out.push('\n');
    for s in samples {
        out.push_str(&render(s.t));
        out.push(',');
        out.push_str(&render(s.acc));
        out.push(',');
        out.push_str(&render(s.dacc));
        for &p in &s.probs {
            out.push(',');
            out.push_str(&render(p));
        }
        out.push('\n');
    }
    out
}

/// Writes `content` to `path` via a temporary file and atomic rename.
pub(crate) fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new(),
    }
    .map_err(|e| RunnerError::io(path, e))?;
    tmp.write_all(content.as_bytes())
        .map_err(|e| RunnerError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| RunnerError::io(path, e.error))?;
    Ok(())
}

/// Emits the samples of a trajectory with `k` patterns as CSV.
pub fn emit_csv(samples: &[TrajectorySample], k: usize, path: &Path) -> Result<()> {
    write_atomic(path, &csv_text(samples, k))
}

/// Parses a trajectory CSV back into samples, returning `(samples, k)`.
pub fn parse_csv(path: &Path) -> Result<(Vec<TrajectorySample>, usize)> {
    let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| RunnerError::Parse("empty trajectory file".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 4 || columns[..3] != ["t", "acc", "dacc"] {
        return Err(RunnerError::Parse(format!(
            "unexpected trajectory header {header:?}"
        )));
    }
    let k = columns.len() - 3;
    for (i, name) in columns[3..].iter().enumerate() {
        let expected = format!("pi_{}", i + 1);
        if *name != expected {
            return Err(RunnerError::Parse(format!(
                "unexpected trajectory column {name:?}, expected {expected:?}"
            )));
        }
    }

    let mut samples = Vec::new();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(RunnerError::Parse(format!(
                "row {} has {} fields, expected {}",
                row + 1,
                fields.len(),
                columns.len()
            )));
        }
        let mut values = Vec::with_capacity(fields.len());
        for f in &fields {
            values.push(f.trim().parse::<f64>().map_err(|e| {
                RunnerError::Parse(format!("row {}: bad number {f:?}: {e}", row + 1))
            })?);
        }
        samples.push(TrajectorySample {
            t: values[0],
            acc: values[1],
            dacc: values[2],
            probs: values[3..].to_vec(),
        });
    }
    Ok((samples, k))
}
