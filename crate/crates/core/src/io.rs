//! Reading count files.
//!
//! Unpaired files hold one nonnegative integer per line. Paired files hold
//! `y,z` per line, `y` a nonnegative integer and `z` a real target. Blank
//! lines and lines starting with `#` are skipped in both.

use std::path::Path;

use crate::counts::CountSample;
use crate::error::{Error, Result};

fn parse_count(field: &str, line: usize) -> Result<u64> {
    field.trim().parse::<u64>().map_err(|_| Error::Parse {
        line,
        message: format!(
            "expected a nonnegative integer count, got '{}'",
            field.trim()
        ),
    })
}

fn parse_target(field: &str, line: usize) -> Result<f64> {
    match field.trim().parse::<f64>() {
        Ok(z) if z.is_finite() => Ok(z),
        _ => Err(Error::Parse {
            line,
            message: format!("expected a finite real target, got '{}'", field.trim()),
        }),
    }
}

/// Parses file contents; see the module docs for the format.
pub fn parse_counts(text: &str, paired: bool) -> Result<(CountSample, Option<Vec<f64>>)> {
    let mut ys = Vec::new();
    let mut zs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        if paired {
            let fields: Vec<&str> = content.split(',').collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected 2 comma-separated columns, got {}", fields.len()),
                });
            }
            ys.push(parse_count(fields[0], line)?);
            zs.push(parse_target(fields[1], line)?);
        } else {
            ys.push(parse_count(content, line)?);
        }
    }
    let sample = CountSample::new(ys)?;
    Ok((sample, paired.then_some(zs)))
}

pub fn ingest_counts(
    path: impl AsRef<Path>,
    paired: bool,
) -> Result<(CountSample, Option<Vec<f64>>)> {
    let text = std::fs::read_to_string(path)?;
    parse_counts(&text, paired)
}
