//! Line-oriented tableau interchange text.
//!
//! ```text
//! # any line may carry . . . comments
//! rk-tableau v1
//! stages 2
//! order 4
//! flags implicit            (omitted when there are no flags)
//! [c_1]  | [a_11] ... [a_1s]
//! ...                        (s rows)
//! ---
//! [b_1] ... [b_s]
//! ```
//!
//! Every number is either a bare decimal scalar (a degenerate interval)
//! or an interval token accepted by `Interval::from_str`, including the
//! compressed bracket-digit form `0.12345[6,7]`. Serialization always
//! emits full `[lo,hi]` tokens, whose endpoints print as the shortest
//! decimal that round-trips, so serialize -> parse -> serialize is the
//! identity on text and parse -> serialize -> parse is the identity on
//! bounds.

use std::fmt::Write as _;

use crate::interval::Interval;
use crate::tableau::ButcherTableau;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableauParseError {
    /// 1-based line in the original text, comments included.
    pub line: usize,
    /// 1-based column of the offending token (1 for whole-line errors).
    pub col: usize,
    pub msg: String,
}

impl std::fmt::Display for TableauParseError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for TableauParseError {}

pub fn serialize(t: &ButcherTableau) -> String {
    let s = t.stages();
    let mut out = String::new();
    out.push_str("rk-tableau v1\n");
    let _ = writeln!(out, "stages {s}");
    let _ = writeln!(out, "order {}", t.declared_order);
    if !t.flags.is_empty() {
        let _ = writeln!(out, "flags {}", t.flags.join(" "));
    }
    for i in 0..s {
        let _ = write!(out, "{} |", t.c[i]);
        for j in 0..s {
            let _ = write!(out, " {}", t.a[i][j]);
        }
        out.push('\n');
    }
    out.push_str("---\n");
    for (j, bj) in t.b.iter().enumerate() {
        if j > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{bj}");
    }
    out.push('\n');
    out
}

/// Non-comment content of one line, with its 1-based line number.
struct Line<'a> {
    no: usize,
    text: &'a str,
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> TableauParseError {
    TableauParseError {
        line,
        col,
        msg: msg.into(),
    }
}

/// Whitespace-separated tokens with 1-based starting columns. `base`
/// shifts columns for text sliced out of a longer line.
fn tokens(text: &str, base: usize) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in text.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((base + s, &text[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((base + s, &text[s..]));
    }
    out
}

fn parse_entry(line: usize, col: usize, tok: &str) -> Result<Interval, TableauParseError> {
    tok.parse::<Interval>()
        .map_err(|e| err(line, col, format!("bad interval '{tok}': {e}")))
}

pub fn parse(text: &str) -> Result<ButcherTableau, TableauParseError> {
    let mut lines = text.lines().enumerate().filter_map(|(i, raw)| {
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let trimmed = content.trim();
        (!trimmed.is_empty()).then(|| {
            // Columns refer to the original line; leading whitespace is
            // preserved by slicing rather than trimming the front.
            let end = content.trim_end().len();
            Line {
                no: i + 1,
                text: &content[..end],
            }
        })
    });
    let total = text.lines().count();
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| err(total + 1, 1, format!("unexpected end of input, expected {what}")))
    };

    let head = next("header 'rk-tableau v1'")?;
    if tokens(head.text, 1)
        .iter()
        .map(|(_, t)| *t)
        .collect::<Vec<_>>()
        != ["rk-tableau", "v1"]
    {
        return Err(err(head.no, 1, "expected header 'rk-tableau v1'"));
    }

    let mut stages: Option<usize> = None;
    let mut order: Option<u32> = None;
    let mut flags: Vec<String> = Vec::new();
    let mut row_line: Option<Line> = None;
    loop {
        let line = next("tableau rows")?;
        let toks = tokens(line.text, 1);
        match toks.first().map(|(_, t)| *t) {
            Some("stages") => {
                let (col, val) = *toks
                    .get(1)
                    .ok_or_else(|| err(line.no, 1, "'stages' needs a count"))?;
                let n: usize = val
                    .parse()
                    .map_err(|_| err(line.no, col, format!("bad stage count '{val}'")))?;
                if n == 0 || toks.len() > 2 {
                    return Err(err(line.no, col, "'stages' takes one positive count"));
                }
                stages = Some(n);
            }
            Some("order") => {
                let (col, val) = *toks
                    .get(1)
                    .ok_or_else(|| err(line.no, 1, "'order' needs a value"))?;
                let p: u32 = val
                    .parse()
                    .map_err(|_| err(line.no, col, format!("bad order '{val}'")))?;
                if toks.len() > 2 {
                    return Err(err(line.no, col, "'order' takes one value"));
                }
                order = Some(p);
            }
            Some("flags") => {
                flags = toks[1..].iter().map(|(_, t)| t.to_string()).collect();
            }
            _ => {
                row_line = Some(line);
                break;
            }
        }
    }
    let row_line = row_line.expect("loop exits with a row line");
    let s = stages.ok_or_else(|| err(row_line.no, 1, "missing 'stages' header line"))?;
    let p = order.ok_or_else(|| err(row_line.no, 1, "missing 'order' header line"))?;

    let mut a: Vec<Vec<Interval>> = Vec::with_capacity(s);
    let mut c: Vec<Interval> = Vec::with_capacity(s);
    let mut pending = Some(row_line);
    for i in 0..s {
        let line = match pending.take() {
            Some(l) => l,
            None => next("a tableau row")?,
        };
        let bar = line
            .text
            .find('|')
            .ok_or_else(|| err(line.no, 1, format!("row {} needs 'c | a ...'", i + 1)))?;
        let left = tokens(&line.text[..bar], 1);
        let right = tokens(&line.text[bar + 1..], bar + 2);
        if left.len() != 1 {
            return Err(err(line.no, 1, "expected exactly one c entry before '|'"));
        }
        if right.len() != s {
            return Err(err(
                line.no,
                bar + 2,
                format!("expected {s} A entries after '|', found {}", right.len()),
            ));
        }
        c.push(parse_entry(line.no, left[0].0, left[0].1)?);
        let mut row = Vec::with_capacity(s);
        for (col, tok) in right {
            row.push(parse_entry(line.no, col, tok)?);
        }
        a.push(row);
    }

    let sep = next("separator '---'")?;
    if sep.text.trim() != "---" {
        return Err(err(sep.no, 1, "expected separator '---' after the rows"));
    }

    let bline = next("the b line")?;
    let toks = tokens(bline.text, 1);
    if toks.len() != s {
        return Err(err(
            bline.no,
            1,
            format!("expected {s} b entries, found {}", toks.len()),
        ));
    }
    let mut b = Vec::with_capacity(s);
    for (col, tok) in toks {
        b.push(parse_entry(bline.no, col, tok)?);
    }

    if let Some(extra) = lines.next() {
        return Err(err(extra.no, 1, "unexpected content after the b line"));
    }

    let mut t = ButcherTableau::new("tableau", p, a, b, c)
        .map_err(|e| err(total, 1, format!("{e}")))?;
    t.flags = flags;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::catalog;

    #[test]
    fn serialize_then_parse_is_identity_on_catalog() {
        for t in catalog::all() {
            let text = serialize(&t);
            let u = parse(&text).unwrap_or_else(|e| panic!("{}: {e}\n{text}", t.name));
            assert_eq!(u.a, t.a, "{}", t.name);
            assert_eq!(u.b, t.b, "{}", t.name);
            assert_eq!(u.c, t.c, "{}", t.name);
            assert_eq!(u.declared_order, t.declared_order);
            assert_eq!(u.flags, t.flags);
            // Text-level fixed point too.
            assert_eq!(serialize(&u), text, "{}", t.name);
        }
    }

    #[test]
    fn parses_scalars_compressed_brackets_and_comments() {
        let text = "\
# two-stage Gauss-Legendre, mixed token styles
rk-tableau v1
stages 2   # trailing comment
order 4

0.21132486540[5,6] | 0.25 -0.038675134594[9,8]
0.78867513459[5,6] | 0.53867513459[5,6] [0.25,0.25]
---
0.5 0.5
";
        let t = parse(text).unwrap();
        // Compressed digits expand outward: the printed decimal range is
        // contained, at most one ulp of slack per side.
        let lo: f64 = "0.211324865405".parse().unwrap();
        let hi: f64 = "0.211324865406".parse().unwrap();
        assert!(t.c[0].lo() <= lo && lo < hi && hi <= t.c[0].hi());
        assert!(t.c[0].width() <= (hi - lo) + 2.0 * f64::EPSILON);
        assert!(t.a[0][0].is_point() && t.a[0][0].lo() == 0.25);
        assert!(t.a[0][1].contains(0.25 - 3.0_f64.sqrt() / 6.0));
        assert!(t.a[0][1].width() < 2e-13);
        assert_eq!(t.b[0], Interval::point(0.5));
        assert!(t.flags.is_empty());
    }

    #[test]
    fn flags_survive_round_trip() {
        let mut t = catalog::rk4();
        t.flags = vec!["explicit".into(), "demo".into()];
        let u = parse(&serialize(&t)).unwrap();
        assert_eq!(u.flags, t.flags);
    }

    #[test]
    fn error_positions_point_at_the_problem() {
        let e = parse("rk-tableau v2\n").unwrap_err();
        assert_eq!((e.line, e.col), (1, 1));

        // lo > hi inside a row: line 4, column of the bad token.
        let text = "rk-tableau v1\nstages 1\norder 1\n0.0 | [2,1]\n---\n1.0\n";
        let e = parse(text).unwrap_err();
        assert_eq!((e.line, e.col), (4, 7));
        assert!(e.msg.contains("[2,1]"), "{}", e.msg);

        // Missing separator.
        let text = "rk-tableau v1\nstages 1\norder 1\n0.0 | 0.0\n1.0\n";
        let e = parse(text).unwrap_err();
        assert_eq!(e.line, 5);
        assert!(e.msg.contains("---"), "{}", e.msg);

        // Missing stages header.
        let text = "rk-tableau v1\norder 1\n0.0 | 0.0\n---\n1.0\n";
        let e = parse(text).unwrap_err();
        assert!(e.msg.contains("stages"), "{}", e.msg);

        // Wrong b arity.
        let text = "rk-tableau v1\nstages 1\norder 1\n0.0 | 0.0\n---\n1.0 2.0\n";
        let e = parse(text).unwrap_err();
        assert_eq!(e.line, 6);

        // Truncated input.
        let text = "rk-tableau v1\nstages 2\norder 2\n0.0 | 0.0 0.0\n";
        let e = parse(text).unwrap_err();
        assert!(e.msg.contains("end of input"), "{}", e.msg);
    }

    #[test]
    fn unexpected_trailing_content_is_rejected() {
        let text = "rk-tableau v1\nstages 1\norder 1\n0.0 | 0.0\n---\n1.0\nextra\n";
        let e = parse(text).unwrap_err();
        assert_eq!(e.line, 7);
    }
}
