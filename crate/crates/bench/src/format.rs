//! Number formatting shared by every output file.
//!
//! Floats are written with Rust's `Display`, which emits the shortest digit
//! string that parses back to the same `f64` and never switches to
//! exponent notation. Golden files therefore stay stable across platforms.

pub fn real(v: f64) -> String {
    format!("{v}")
}

pub fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

/// Parses a comma-separated list of reals such as `1.5,-2,3e-1`.
pub fn parse_reals(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{s}` is not a finite number"))
        })
        .collect()
}
