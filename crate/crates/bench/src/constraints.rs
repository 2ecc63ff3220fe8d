//! Text format for actionability constraints.
//!
//! One rule per line, `key = value`, `#` starts a comment. Columns are named
//! by header name or zero-based index. Keys may repeat.
//!
//! ```text
//! freeze   = age, sex            # never changed
//! increase = income              # may only grow
//! decrease = debt:0.5            # may shrink, or grow by at most 0.5
//! positive = education, income   # deltas share a sign
//! negative = rent, savings       # deltas have opposite signs
//! ```
//!
//! Slack and all bounds are in the feature space the model was fitted in
//! (standardised units when standardisation is enabled).

use std::path::Path;

use exdbscan_core::{ConstraintSpec, CorrelationSign, Monotonic};

use crate::error::{BenchError, Result};

pub fn read_constraints(path: &Path, columns: &[String]) -> Result<ConstraintSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    parse_constraints(&text, columns).map_err(|m| BenchError::malformed(path, m))
}

pub fn parse_constraints(text: &str, columns: &[String]) -> std::result::Result<ConstraintSpec, String> {
    let mut spec = ConstraintSpec::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |m: String| format!("line {}: {m}", lineno + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
        let items: Vec<&str> = value.split(',').map(str::trim).collect();
        if items.iter().any(|s| s.is_empty()) {
            return Err(at("empty column reference".into()));
        }
        match key.trim() {
            "freeze" => {
                for item in items {
                    spec = spec.freeze(resolve(item, columns).map_err(at)?);
                }
            }
            k @ ("increase" | "decrease") => {
                for item in items {
                    let (name, slack) = match item.rsplit_once(':') {
                        Some((n, s)) => {
                            let slack = s
                                .trim()
                                .parse::<f64>()
                                .map_err(|_| at(format!("bad slack `{s}`")))?;
                            (n.trim(), slack)
                        }
                        None => (item, 0.0),
                    };
                    let col = resolve(name, columns).map_err(at)?;
                    let rule = if k == "increase" {
                        Monotonic::IncreaseOnly { slack }
                    } else {
                        Monotonic::DecreaseOnly { slack }
                    };
                    spec = spec.monotonic(col, rule);
                }
            }
            k @ ("positive" | "negative") => {
                let cols = items
                    .iter()
                    .map(|s| resolve(s, columns))
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(at)?;
                let sign = if k == "positive" {
                    CorrelationSign::Positive
                } else {
                    CorrelationSign::Negative
                };
                spec = spec.correlated(cols, sign);
            }
            other => return Err(at(format!("unknown rule `{other}`"))),
        }
    }
    spec.validate(columns.len()).map_err(|e| e.to_string())?;
    Ok(spec)
}

fn resolve(item: &str, columns: &[String]) -> std::result::Result<usize, String> {
    if let Some(i) = columns.iter().position(|c| c == item) {
        return Ok(i);
    }
    match item.parse::<usize>() {
        Ok(i) if i < columns.len() => Ok(i),
        _ => Err(format!("unknown column `{item}`")),
    }
}
