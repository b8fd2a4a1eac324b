//! Pin files: one `name range` pair per line, where the range is any
//! interval literal the core parser accepts ("0.75", "[0.6,0.7]",
//! "0.2113248[4,7]"). '#' starts a comment, blank lines are skipped.

use rkderive::interval::Interval;

#[derive(Debug)]
pub struct PinError {
    pub line: usize,
    pub msg: String,
}

impl std::fmt::Display for PinError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "pin file line {}: {}", self.line, self.msg)
    }
}

pub fn parse_pins(text: &str) -> Result<Vec<(String, Interval)>, PinError> {
    let mut pins = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((name, range)) = content.split_once(char::is_whitespace) else {
            return Err(PinError {
                line,
                msg: format!("expected `name range`, got \"{content}\""),
            });
        };
        let range = range.trim();
        let value: Interval = range.parse().map_err(|e| PinError {
            line,
            msg: format!("bad range \"{range}\": {e}"),
        })?;
        if value.is_empty() {
            return Err(PinError {
                line,
                msg: format!("empty range \"{range}\""),
            });
        }
        pins.push((name.to_string(), value));
    }
    Ok(pins)
}
